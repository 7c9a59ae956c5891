"""Pseudo-spectral laboratory for the rescaled anisotropic Navier-Stokes system."""
