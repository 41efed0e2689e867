"""Exact algebra for parametrised polynomial maps over Q(i)."""

from .maps import *  # noqa: F401,F403
from .maps import __all__ as _maps_all
from .numbers import GaussianRational, parse_rational
from .poly import Monomial, Poly

__all__ = ["GaussianRational", "parse_rational", "Monomial", "Poly", *_maps_all]
