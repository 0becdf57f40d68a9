import sys

from rssibeam.cli import main

sys.exit(main())
