"""Mutual-information estimation for MIMO links under unknown colored interference."""

from .channel_model import (
    ChannelSet,
    ObservationBlock,
    ScenarioConfig,
    generate_channels,
    sample_observations,
)
from .deterministic_equivalents import (
    alpha_variance,
    se_bias_value,
    solve_kappa,
    theta_variance,
    y_star_closed_form,
)
from .errors import (
    DegenerateVariance,
    NoConvergence,
    NonPositiveVariance,
    NotPositiveDefinite,
    NumericalError,
)
from .estimators import EstimateReport, g_estimate, ground_truth_mi, se_estimate, solve_y_hat
from .matrix_core import RngStream

__version__ = "0.1.0"
