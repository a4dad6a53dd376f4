"""Desk-scale uncertainty quantification toolkit for buoyancy-driven cavity flow.

Subpackages and modules:

- ``grid``       structured unit-cube grids and delimited field I/O
- ``solver``     incompressible Boussinesq solver (fractional step, PCG)
- ``sampling``   Latin hypercube, inverse normal CDF, Gauss-Hermite rules
- ``pce``        Hermite polynomial chaos surrogate and Sobol indices
- ``dnn``        feedforward network, backprop, Adam (amsgrad)
- ``uq``         case pipelines, ensemble manifests, Monte Carlo statistics
- ``cli``        command line front end, reports CSV artifacts and figures
"""

__version__ = "0.1.0"
