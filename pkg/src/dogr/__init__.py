"""Soft disaggregation of heterogeneous tabular data with a mixture of
Gaussian-feature, linear-regression components fitted by EM."""

from dogr.evaluation import CvConfig, EvalReport, mae, nested_cv, rmse
from dogr.exceptions import DogrError
from dogr.inference import (
    coefficient_report,
    membership,
    posterior_weights,
    predict,
    predict_rows,
    radar_export,
)
from dogr.model import (
    Component,
    Dataset,
    FitConfig,
    Model,
    component_regression_value,
    e_step,
    fit,
    joint_log_density,
    log_likelihood,
    m_step,
)
from dogr.numerics import WlsSolution, log_sum_exp, mvn_log_density, wls_fit
from dogr.preprocess import SyntheticSpec, generate_synthetic, load_csv, vif_prune, write_csv
from dogr.selection import bic, sweep
from dogr.serialize import load_model, save_model

__version__ = "0.1.0"
