"""Nonuniform dichotomy certificates, injectivity tests and exact inversion of cubic nilpotent maps."""

__version__ = "0.1.0"
