"""Numerical laboratory for Wick-ordered NLS with random data.

Subpackages and modules: ``lattice`` (Fourier boxes and norms),
``randomdata`` (reproducible Gaussian data), ``wick`` (renormalised powers),
``evolver`` (interaction-picture RK4), ``picard`` (first iterate and scaling),
``tensorlab`` (labelled tensors, norms, contractions, plants), ``counting``
(lattice point counts) and ``experiments``/``cli`` (drivers).
"""
from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:
    __version__ = "0+unknown"
