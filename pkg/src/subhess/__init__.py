"""Certified constructions of Lipschitz subharmonic functions whose pure
second derivatives have negative parts outside every L^q, q > 1.

The package has three legs:

* exact laminate algebra (`scalars`, `sym2`, `laminate`, `constructions`):
  finite second-moment measures built by rank-one splitting, with every
  number carried as a rational interval so each claim is certified;
* a piecewise-polynomial synthesizer and verifier (`synthesizer`,
  `verifier`): potentials on a square whose Hessians realize a laminate up
  to epsilon, measured by closed-form per-cell-class aggregation;
* side checks (`wavecone`, `obstacle`): a cone membership test for
  diagonal-form wave cones, and a projected-SOR obstacle solver used to
  cross-examine the constructed potentials.
"""

from subhess.scalars import Iv, pow2, rpow, sqrt_iv, Undecided
from subhess.sym2 import SymMat2

__version__ = "0.1.0"

__all__ = [
    "Iv",
    "pow2",
    "rpow",
    "sqrt_iv",
    "Undecided",
    "SymMat2",
    "__version__",
]
