"""
Lamb dipole of the quasi-geostrophic shallow-water equations: closed form,
variational recovery and pseudo-spectral stability experiments.
"""

__version__ = "0.1.0"
