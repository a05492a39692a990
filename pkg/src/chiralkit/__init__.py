"""Exact computations with affine vertex algebras over marked points, their centers,
coordinate actions and opers."""

__version__ = "0.1.0"
