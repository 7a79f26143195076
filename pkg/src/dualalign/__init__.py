"""Distribution alignment through the dual of a logistic discriminator.

The adversarial min-max problem (align a target cloud so a logistic
discriminator cannot separate it from the source) is replaced by a joint
minimization over per-point dual weights and the matcher parameters. Primal
logistic, linear WGAN-GP and MMD objectives are provided as baselines.
"""

from ._backend import BACKEND
from .errors import (
    ConfigError,
    DimensionError,
    InsufficientData,
    InvalidParams,
    InvalidSpec,
    UnsupportedKernel,
)
from .kernels import GramBlocks, KernelSpec, build_gram, kernel_eval, kernel_grad_point
from .matchers import Affine, FreePoints, apply, backprop_params
from .pointset import (
    GaussianBlob,
    GeneratorSpec,
    LabeledUnion,
    PointSet,
    Ring,
    Tag,
    TwoClassLabeled,
    empirical_moments,
    generate,
    make_labeled_union,
)

__version__ = "0.1.0"
