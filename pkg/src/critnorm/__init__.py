"""Numerical laboratory for localized smoothing and critical-norm
concentration experiments on a periodic box.

Subpackage map:

- fields, spectral, fieldio: grids, multiplier operators, serialization
- norms: Lebesgue/Morrey/Lorentz norm engines and inequality checks
- besov: Littlewood-Paley projections, Besov norms, frequency splitting
- mild: Duhamel integrals, Picard iteration, drift-operator inversion
- pns: perturbed Navier-Stokes time stepper and energy bookkeeping
- pressure: localized pressure representation and oscillation estimates
- ckn: dyadic ledger of local quantities and test-function battery
- concentration: data splitting, rescaling, concentration diagnostics
- cli: experiment driver
"""

__version__ = "0.1.0"

from .fields import (
    Grid,
    ScalarField,
    SpaceTimeField,
    TensorField,
    VectorField,
)

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "TensorField",
    "SpaceTimeField",
    "__version__",
]
