"""fracns: pseudo-spectral simulator and verification lab for the
generalized incompressible Navier-Stokes equations on the torus."""

__version__ = "0.1.0"
