"""Coded distributed gradient descent for least-squares regression."""
from .schemes import NodeConfig, Scheme, SchemeKind, SchemeSpec, make_scheme, recovery_threshold

__all__ = ["NodeConfig", "Scheme", "SchemeKind", "SchemeSpec", "make_scheme", "recovery_threshold"]
__version__ = "0.1.0"
