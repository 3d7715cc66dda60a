"""Entry point for running the lab CLI as ``python -m rlvr_lab``."""
import sys

from cli.lab import main

if __name__ == "__main__":
    sys.exit(main())
