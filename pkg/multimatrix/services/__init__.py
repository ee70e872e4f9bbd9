"""Numerical services built on the core modules: densities, sampling, fitting, checks and I/O."""
