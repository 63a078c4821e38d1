"""Description-length model selection and atypicality detection for Gaussian graphical models."""

__version__ = "0.1.0"

from .anomaly import atypicality, roc_auc, train_typical
from .completion import complete_covariance
from .evaluation import f1_score, run_benchmark, select_bic, select_cv, select_ebic
from .glasso import GlassoConfig, glasso_fit, glasso_path, lambda_grid, lambda_max
from .graph import Graph
from .graph_codec import CoderKind, codelength, train_coder
from .mdl_select import predictive_data_bits, select_model
from .synthetic import StructureKind, make_structure, sample_mvn

__all__ = [
    "__version__",
    "Graph",
    "GlassoConfig",
    "glasso_fit",
    "glasso_path",
    "lambda_grid",
    "lambda_max",
    "CoderKind",
    "codelength",
    "train_coder",
    "complete_covariance",
    "predictive_data_bits",
    "select_model",
    "StructureKind",
    "make_structure",
    "sample_mvn",
    "train_typical",
    "atypicality",
    "roc_auc",
    "f1_score",
    "select_bic",
    "select_ebic",
    "select_cv",
    "run_benchmark",
]
