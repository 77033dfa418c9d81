"""Half-line Schrodinger operators: reproducing kernels, Floquet bands, universality and clock spacing."""

__version__ = "0.1.0"
