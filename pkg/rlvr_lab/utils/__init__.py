"""Utilities module."""

from rlvr_lab.utils.seeding import derive_seed

__all__ = ["derive_seed"]
