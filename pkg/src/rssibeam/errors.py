"""Exception types raised by the library.

Numeric degeneracies (an unbounded bound, an undetermined phase) get their
own classes so the CLI can map them to a distinct exit code.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidCodebookSize(ValueError):
    """A codebook with fewer than three phases was requested."""


class CodebookMismatch(ValueError):
    """Observed training phases do not match the expected codebook."""


class ContractError(RuntimeError):
    """An operation was called on a value in the wrong state."""


class NumericDegeneracy(ArithmeticError):
    """Base class for degenerate designs and data."""


class UnboundedCRLB(NumericDegeneracy):
    """The Fisher information is singular, so the bound does not exist."""


class IndeterminatePhase(NumericDegeneracy):
    """The observations carry no phase information (flat RSSI)."""


class UndefinedGain(NumericDegeneracy):
    """Baseline power is zero, so a gain ratio cannot be formed."""
