"""Higher-order partial least squares for tensor responses, dense (HOPLS)
and sparse (SHOPS), with simulation, tuning and benchmarking tools."""

from .decomp import HooiOptions, HooiResult, hooi_rank1, pinv, svd_leading, sym_eigen_desc
from .hopls import Centering, HoplsModel, hopls_fit, ols_fit, predict
from .io import (
    CoefficientModel, ConfigError, FormatError, RunConfig, load_config, load_model,
    read_matrix_csv, read_tensor, serialize_model, write_matrix_csv, write_tensor,
)
from .metrics import MetricsReport, benchmark, estimation_error, prediction_error, tpr_fpr
from .simulate import GroundTruth, SimScenario, build_design, generate
from .sparse import (
    ShopsModel, ThresholdSpec, active_set_find, estimate_tau, hard_threshold, shops_fit,
    shops_predict, soft_threshold,
)
from .tensor import extract, fold, frobenius_norm, mode_multiply, outer3, scatter_back, unfold
from .tuning import CvResult, cross_validate, elbow_K

__version__ = "0.1.0"
