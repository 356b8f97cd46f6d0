"""Numerical engine for the Atiyah-Sutcliffe determinant and its operadic extension.

Submodules
----------
geometry     point configurations, directions, samplers
labels       stereographic spinors and the binary-form label algebra
determinant  Atiyah lines, phi and the normalized determinant D
kernels      batch evaluation of log|D| (compiled, with a numpy fallback)
precision    extended-precision re-evaluation
operad       cluster trees, composition, weighted Atiyah maps, structure maps
harness      verification campaigns, minimization, persistence
cli          command-line interface
"""

__version__ = "0.1.0"

from .determinant import (
    DeterminantReport,
    SpinorTable,
    atiyah_lines,
    determinant_report,
    normalized_determinant,
    normalized_determinant_real,
    phi,
    real_spinor_table,
    spinor_table,
)
from .geometry import (
    Configuration,
    Sampler,
    apply_isometry,
    direction,
    embed_planar,
    gauge_normalize,
    sample_configuration,
    standard_collinear,
)
from .labels import (
    Label,
    deformed_direction,
    form_product,
    label_multiply,
    label_projective_distance,
    stereo_complex,
    stereo_real,
)
from .operad import (
    ClusterTree,
    LabeledState,
    compose,
    epsilon_realize,
    independence_margin,
    leaf_direction,
    nu_compose,
    nu_compose_real,
    weighted_atiyah,
)
