"""Command-line interface for rlvr-lab."""
