"""Motivic Adams spectral sequence engine over C, R and finite fields."""

__version__ = "0.1.0"
