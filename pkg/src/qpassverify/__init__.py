"""Verified quantum-circuit compiler passes with a symbolic checker."""

__version__ = "0.1.0"
