"""Command-line front end.

Subcommands: ``codebook``, ``bounds``, ``estimate``, ``simulate``, ``sweep``.
Output is CSV (first line ``# schema=1``) or JSON.  Floats are written in
shortest round-trip form.  Exit codes: 0 ok, 2 usage or validation error,
3 numeric degeneracy (unbounded bound, indeterminate phase).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

from rssibeam.codebook import Codebook, crlb_phi, mcrlb_phi, uniform_codebook
from rssibeam.errors import NumericDegeneracy
from rssibeam.estimator import RssiVector, ml_phase
from rssibeam.model import ChannelPair, HarvestModel, NoiseModel, ParamVector, wrap_2pi
from rssibeam.montecarlo import SweepSpec, sweep_mae, sweep_mcrlb
from rssibeam.protocol import (
    DEFAULT_FEEDBACK_COST,
    DEFAULT_SLOT_DURATION,
    RayleighChannel,
    RicianChannel,
    SessionConfig,
    run_session,
    session_summary,
    theta_sweep,
)

SCHEMA_VERSION = 1
SEED_ENV = "RSSIBEAM_SEED"
EXIT_USAGE = 2
EXIT_NUMERIC = 3
# Probe rows in an estimate input must sit within this of a candidate's probe phase.
PROBE_MATCH_TOL = math.radians(1.0)


class ConfigError(ValueError):
    pass


# --- parsing helpers -------------------------------------------------------

def parse_angle(text: str) -> float:
    """Radians, or degrees when suffixed with ``deg``."""
    s = str(text).strip()
    try:
        if s.lower().endswith("deg"):
            return math.radians(float(s[:-3]))
        return float(s)
    except ValueError:
        raise ConfigError(f"not an angle: {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    """``3,4,8`` or ``3..10`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def read_key_values(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        values[key] = value
    return values


class _Fields:
    """Typed access to a key/value mapping that reports the offending field."""

    def __init__(self, raw: dict[str, str], allowed: set[str], where: str):
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ConfigError(f"{where}: unknown field(s): {', '.join(unknown)}")
        self.raw = raw
        self.where = where

    def get(self, key, conv, default=None):
        if key not in self.raw:
            return default
        try:
            return conv(self.raw[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where}: field {key!r}: invalid value {self.raw[key]!r} ({exc})") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def resolve_seed(flag: int | None, from_file: int | None) -> int:
    if flag is not None:
        return flag
    if from_file is not None:
        return from_file
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


# --- output ------------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def render(header: list[str], rows: list[list], fmt_name: str, meta: dict | None = None) -> str:
    meta = meta or {}
    if fmt_name == "json":
        doc = {"schema": SCHEMA_VERSION, **meta, "rows": [dict(zip(header, r)) for r in rows]}
        return dump_json(doc)
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    for key, value in meta.items():
        buf.write(f"# {key}={fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --- subcommands ---------------------------------------------------------------

def cmd_codebook(args) -> int:
    cb = uniform_codebook(args.n)
    bound = mcrlb_phi(cb, 1.0, NoiseModel(1.0))
    rows = [[i + 1, t, 360.0 * i / cb.n] for i, t in enumerate(cb.thetas)]
    _write(render(["index", "theta_rad", "theta_deg"], rows, args.format, {"n": cb.n, "mcrlb_rad2": bound}), args.out)
    return 0


def read_codebook_file(path: str) -> Codebook:
    thetas = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            thetas.append(parse_angle(line))
        except ConfigError:
            raise ConfigError(f"{path}:{lineno}: not an angle: {line!r}") from None
    return Codebook(tuple(thetas))


def cmd_bounds(args) -> int:
    cb = uniform_codebook(args.uniform) if args.uniform is not None else read_codebook_file(args.codebook)
    noise = NoiseModel(args.sigma)
    header = ["kind", "n", "phi_rad", "bound_rad2"]
    if args.phi:
        # alpha only enters the FIM, never the phi bound; any alpha >= beta works
        rows = []
        for text in args.phi:
            phi = parse_angle(text)
            p = ParamVector(args.beta, args.beta, phi)
            rows.append(["crlb", cb.n, phi, crlb_phi(cb, p, noise)])
    else:
        rows = [["mcrlb", cb.n, None, mcrlb_phi(cb, args.beta, noise)]]
    _write(render(header, rows, args.format, {"beta": args.beta, "sigma": args.sigma}), args.out)
    return 0


def read_rssi_csv(path: str) -> list[tuple[int, float, float]]:
    """Rows of ``index,theta,rssi``; a header row and ``#`` lines are skipped."""
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if fields[0].lower() == "index":
            continue
        if len(fields) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 3 columns index,theta,rssi, got {len(fields)}")
        try:
            rows.append((int(fields[0]), parse_angle(fields[1]), float(fields[2])))
        except (ValueError, ConfigError):
            raise ConfigError(f"{path}:{lineno}: malformed row {line!r}") from None
    return rows


def _angle_gap(a: float, b: float) -> float:
    d = abs(wrap_2pi(a - b))
    return min(d, 2 * math.pi - d)


def cmd_estimate(args) -> int:
    rows = read_rssi_csv(args.input)
    n = args.n
    if len(rows) not in (n, n + 2):
        raise ConfigError(
            f"expected {n} training rows (or {n + 2} with two probe rows) for --n {n}, got {len(rows)}"
        )
    training, probes = rows[:n], rows[n:]
    cb = uniform_codebook(n)
    r = RssiVector.from_arrays([t for _, t, _ in training], [v for _, _, v in training])
    est = ml_phase(r, cb)
    first, second = est.candidates
    resolved = None
    if probes:
        readings = {}
        for idx, theta, value in probes:
            gaps = [_angle_gap(theta, -first), _angle_gap(theta, -second)]
            which = int(gaps[1] < gaps[0])
            if gaps[which] > PROBE_MATCH_TOL:
                raise ConfigError(
                    f"probe row index {idx}: theta {theta!r} matches neither probe phase "
                    f"{wrap_2pi(-first)!r} nor {wrap_2pi(-second)!r}"
                )
            readings[which] = value
        if len(readings) != 2:
            raise ConfigError("the two probe rows must target different candidates")
        resolved = first if readings[0] >= readings[1] else second
    header = ["phi_hat_rad", "phi_hat_deg", "alt_rad", "alt_deg", "resolved_rad", "resolved_deg"]
    row = [first, math.degrees(first), second, math.degrees(second), resolved,
           None if resolved is None else math.degrees(resolved)]
    _write(render(header, [row], args.format, {"n": n}), args.out)
    return 0


SIM_FIELDS = {
    "n_training", "wpb_slots", "slot_duration", "sigma", "clamp", "xi", "channel",
    "mag1", "phase1", "mag2", "phase2", "scale", "k_factor", "feedback_cost", "seed",
    "path_loss_exponent",
}


def load_session_config(path: str, seed_flag: int | None) -> tuple[SessionConfig, float]:
    f = _Fields(read_key_values(path), SIM_FIELDS, str(path))
    kind = f.get("channel", str.lower, "deterministic")
    if kind == "deterministic":
        channel = ChannelPair(
            f.get("mag1", float, 1.0), f.get("phase1", parse_angle, 0.0),
            f.get("mag2", float, 1.0), f.get("phase2", parse_angle, 0.0),
        )
    elif kind == "rayleigh":
        channel = RayleighChannel(f.get("scale", float, 1.0))
    elif kind == "rician":
        if "k_factor" not in f.raw:
            raise ConfigError(f"{path}: field 'k_factor' is required for channel = rician")
        channel = RicianChannel(f.get("k_factor", float), f.get("scale", float, 1.0))
    else:
        raise ConfigError(f"{path}: field 'channel': expected deterministic, rayleigh or rician, got {kind!r}")
    seed = resolve_seed(seed_flag, f.get("seed", int))
    try:
        cfg = SessionConfig(
            n_training=f.get("n_training", int, 3),
            wpb_slots=f.get("wpb_slots", int),
            slot_duration=f.get("slot_duration", float, DEFAULT_SLOT_DURATION),
            noise=NoiseModel(f.get("sigma", float, 0.0), clamp=f.get("clamp", _bool, False)),
            harvest=HarvestModel(f.get("xi", float, 1.0)),
            channel=channel,
            feedback_cost_per_slot=f.get("feedback_cost", float, DEFAULT_FEEDBACK_COST),
            rng_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg, f.get("path_loss_exponent", float, 2.0)


def cmd_simulate(args) -> int:
    cfg, ple = load_session_config(args.config, args.seed)
    if args.sweep_theta is not None:
        step = parse_angle(args.sweep_theta)
        rows = [[t, math.degrees(t), true, obs] for t, true, obs in theta_sweep(cfg, step)]
        header = ["theta_rad", "theta_deg", "true_rssi", "observed_rssi"]
        _write(render(header, rows, args.format, {"seed": cfg.rng_seed}), args.out)
        return 0

    log = run_session(cfg)
    summary = session_summary(log, ple)
    header = ["slot", "stage", "theta_rad", "theta_deg", "true_rssi", "observed_rssi", "feedback", "energy_balance"]
    rows = [
        [r.slot, r.stage.value, r.theta, math.degrees(r.theta), r.true_rssi, r.observed_rssi, r.feedback,
         r.energy_balance]
        for r in log.records
    ]
    if args.format == "json":
        doc = {"schema": SCHEMA_VERSION, "rows": [dict(zip(header, r)) for r in rows], "summary": summary}
        _write(dump_json(doc), args.out)
    else:
        _write(render(header, rows, "csv", {"seed": cfg.rng_seed}), args.out)
        if args.summary:
            Path(args.summary).write_text(dump_json(summary))
        else:
            sys.stderr.write(dump_json(summary))
    if not log.ok:
        sys.stderr.write(f"error: session aborted: {log.failure}\n")
        return EXIT_NUMERIC
    return 0


SWEEP_FIELDS = {"kind", "n_values", "snr_values", "trials", "seed", "alpha", "beta", "sigma", "random_codebooks"}
SWEEP_HEADER = ["design", "n", "snr", "mae_rad", "mcrlb_rad2", "var_ratio", "trials", "stderr"]


def _float_list(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def preset_path(name: str):
    ref = resources.files("rssibeam") / "presets" / f"{name}.cfg"
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return ref


def cmd_sweep(args) -> int:
    if args.preset:
        with resources.as_file(preset_path(args.preset)) as p:
            raw, where = read_key_values(p), f"preset {args.preset}"
    elif args.spec:
        raw, where = read_key_values(args.spec), args.spec
    else:
        raise ConfigError("sweep needs a spec file or --preset")
    f = _Fields(raw, SWEEP_FIELDS, where)
    kind = f.get("kind", str.lower, "mae")
    seed = resolve_seed(args.seed, f.get("seed", int))
    n_values = f.get("n_values", parse_int_list)
    if not n_values:
        raise ConfigError(f"{where}: field 'n_values' is required")
    trials = args.trials if args.trials is not None else f.get("trials", int)

    if kind == "mcrlb":
        count = trials if trials is not None else f.get("random_codebooks", int, 1000)
        if count < 1:
            raise ConfigError(f"{where}: random codebook count must be >= 1")
        result = sweep_mcrlb(n_values, count, seed, f.get("beta", float, 1.0), f.get("sigma", float, 1.0))
    elif kind in ("mae", "variance"):
        if trials is None:
            raise ConfigError(f"{where}: field 'trials' is required")
        if trials < 1:
            raise ConfigError(f"{where}: field 'trials' must be >= 1, got {trials}")
        try:
            spec = SweepSpec(
                n_values=tuple(n_values),
                snr_values=tuple(f.get("snr_values", _float_list, [])),
                trials_per_point=trials,
                rng_seed=seed,
                alpha=f.get("alpha", float, 1.0),
                beta=f.get("beta", float, 1.0),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        result = sweep_mae(spec)
    else:
        raise ConfigError(f"{where}: field 'kind': expected mae, variance or mcrlb, got {kind!r}")

    rows = [[r.design, r.n, r.snr, r.mae, r.mcrlb, r.var_ratio, r.trials, r.stderr] for r in result]
    _write(render(SWEEP_HEADER, rows, args.format, {"kind": kind, "seed": seed}), args.out)
    return 0


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", "-o", help="output file (default stdout)")
    common.add_argument("--seed", type=int, help=f"random seed (overrides the file and ${SEED_ENV})")

    parser = argparse.ArgumentParser(prog="rssibeam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", parents=[common], help="uniform training codebook and its MCRLB")
    p.add_argument("--n", type=int, required=True, help="number of training phases, N >= 3")
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("bounds", parents=[common], help="CRLB / MCRLB of the phase difference")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--uniform", type=int, metavar="N")
    src.add_argument("--codebook", metavar="FILE", help="one phase per line (radians, or NNdeg)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--phi", action="append", help="evaluate the CRLB at this phase (repeatable)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("estimate", parents=[common], help="ML phase estimate from an index,theta,rssi CSV")
    p.add_argument("input", help="CSV path or - for stdin")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common], help="run one training + WPB session")
    p.add_argument("config", help="key=value session config")
    p.add_argument("--summary", help="write the JSON summary here (csv mode; default stderr)")
    p.add_argument("--sweep-theta", metavar="STEP", help="instead sweep theta over a full turn, e.g. 1deg")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo / bound sweeps")
    p.add_argument("spec", nargs="?", help="key=value sweep spec")
    p.add_argument("--preset", help="bundled spec, e.g. fig1 or fig2")
    p.add_argument("--trials", type=int, help="override trials (random codebooks for mcrlb sweeps)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericDegeneracy as exc:
        msg = str(exc)
        if "unbounded" not in msg.lower() and args.command == "bounds":
            msg = f"unbounded CRLB: {msg}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
