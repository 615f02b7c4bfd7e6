"""Run the experiment CLI via ``python3 -m pmp``."""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
