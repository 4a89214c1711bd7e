"""grasskit: executable Grassmannian geometry and discretized plane-family
counting experiments.

Modules:

* ``linalg``     - small dense SVD (one-sided Jacobi), orthonormalization,
                   Gram volumes, subspace intersection;
* ``grassmann``  - principal angles, the invariant distance, geodesics,
                   nearest-point projection onto a sub-Grassmannian;
* ``affine``     - affine planes, the local chart, incidence, the product
                   embedding, the two comparable metrics;
* ``discretize`` - separated nets, slab neighborhoods, grid counting,
                   box-dimension fits, the spacing condition and partition;
* ``kakeya``     - sharp-example families, broad-narrow classification,
                   transversality certificates, the subspace-dimension
                   counting functional, the counting-inequality verifier,
                   anisotropic chart rescaling;
* ``cli``        - config-driven deterministic experiment runner.
"""

__version__ = "0.1.0"

from .grassmann import Subspace, distance, geodesic, principal_angles  # noqa: F401
from .affine import AffinePlane, Chart, ChartMPlane, ChartPoint, incidence  # noqa: F401
from .kakeya import FamilyParams, PlaneFamily, admissible_p_max  # noqa: F401
