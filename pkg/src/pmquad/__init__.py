"""Partial match queries in random two-dimensional quadtrees."""

__version__ = "0.1.0"

from .mathcore import BETA, beta_closed_form, gamma_fn, k0_constant, profile_h  # noqa: E402,F401
