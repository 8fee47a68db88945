"""
lordnet-lab - Physics-constrained Lord networks, finite-difference references and experiment presets
for Poisson and Navier-Stokes problems.
"""

__version__ = "0.1.0"
__author__ = "lordnet-lab Team"
