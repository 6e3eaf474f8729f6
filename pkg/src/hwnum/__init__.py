"""Backend-tagged numerical kernels, multigrid Poisson and shallow-water solvers."""

__version__ = "0.1.0"
