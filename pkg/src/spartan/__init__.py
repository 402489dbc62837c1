"""Space-filling subsampling after optimal transport, with kernel density
estimation tools for judging subsample quality."""

from .core import DataError, NumericError, RngStream, SpartanError, derive_seed, empirical_covariance
from .design import DesignPointSet, sobol, star_discrepancy_estimate, star_discrepancy_exact
from .kde import BandwidthRule, bandwidth, fit_kde, hellinger_score, kde_eval, kde_model, pointwise_mse
from .kdtree import KdTree, kdtree_build, kdtree_nn
from .select import (
    DesignConfig,
    SelectionResult,
    kmedoids,
    select,
    spartan,
    spartan_sequential_init,
    spartan_sequential_next,
    uniform_select,
)
from .synthetic import DistributionSpec, density, make_distribution, sample
from .transport import TransportConfig, TransportResult, assignment_exact, ot_pair_1d, transport

__version__ = "0.1.0"

__all__ = [
    "BandwidthRule", "DataError", "DesignConfig", "DesignPointSet", "DistributionSpec", "KdTree",
    "NumericError", "RngStream", "SelectionResult", "SpartanError", "TransportConfig", "TransportResult",
    "assignment_exact", "bandwidth", "density", "derive_seed", "empirical_covariance", "fit_kde",
    "hellinger_score", "kde_eval", "kde_model", "kdtree_build", "kdtree_nn", "kmedoids", "make_distribution",
    "ot_pair_1d", "pointwise_mse", "sample", "select", "sobol", "spartan", "spartan_sequential_init",
    "spartan_sequential_next", "star_discrepancy_estimate", "star_discrepancy_exact", "transport",
    "uniform_select",
]
