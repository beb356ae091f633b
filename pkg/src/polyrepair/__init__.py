"""Provable, architecture-preserving repair of fully-connected networks via LP."""

__version__ = "0.1.0"
