"""Coupled thermal flow of electrorheological fluids on planar domains.

Submodules: ``constitutive`` (viscosity laws), ``mesh``, ``mollify``,
``discretization`` (Taylor-Hood assembly), ``solver`` and ``cli``.
Kept import-light so the CLI can set thread variables before numpy loads.
"""

__version__ = "0.1.0"
