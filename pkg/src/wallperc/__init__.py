"""Bond percolation from wall structures on finite graphs."""
from .compression import (
    AlphaEstimate,
    DualKernelReport,
    FitResult,
    dual_kernel,
    embedding_constants,
    estimate_alpha,
    fit_stretched_exponential,
)
from .cuts import CutFamily, wall_crossing, wall_kernel
from .errors import WallpercError
from .graph import Graph, build_graph, connected_graphs, distance_matrix, gen_graph
from .kernel import (
    PointCloud,
    aggregate_pd_to_cnd,
    anchored_gram,
    cut_cone_membership,
    hilbert_embedding,
    is_cond_negative_definite,
    is_positive_definite,
    schoenberg_transform,
)
from .percolation import (
    ActivationTimes,
    Configuration,
    PercolationDistribution,
    TwoPointEstimate,
    configuration_at,
    cut_decomposition,
    distribution_from_walls,
    exhaustive_bernoulli,
    fkg_check_exact,
    sample_activation_times,
    two_point_exact,
    two_point_mc,
    verify_sandwich,
)
from .walls import crofton_constant, radial_walls, walls_from_hilbert_embedding, walls_from_l1_embedding

__version__ = "0.1.0"
