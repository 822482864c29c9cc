"""Frequency-secured stochastic unit commitment for low-inertia grids.

Subpackages:

- ``system``: input data model (units, converter fleet, limits)
- ``freq_dynamics``: aggregate frequency response model and metrics
- ``scenarios``: joint wind / outage scenario trees
- ``nadir_linearization``: linear surrogates of the nadir constraint
- ``uc_core``: the two-stage stochastic MILP
- ``study``: rolling-horizon study harness and reporting
- ``cli``: command-line entry point
"""

__version__ = "0.1.0"
