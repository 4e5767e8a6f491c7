"""qpkdv: spectral simulation and verification toolkit for the KdV equation
with quasi-periodic initial data.

Submodules:
    lattice            frequency vectors, truncation boxes, weighted norms
    qpfield            sparse spectral fields and their operations
    dynamics           exponential integrators, Duhamel map, Picard iteration
    restriction_norms  space-time restriction norms and bilinear probes
    diophantine        continued fractions and the norm-inflation construction
    cli                batch front-end (console script `qpkdv`)
"""

__version__ = "0.1.0"
