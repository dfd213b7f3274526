"""Geographic regression discontinuity and difference-in-discontinuities."""

__version__ = "0.1.0"

from .estimators import (DiffDiscEstimate, EstimatorConfig, PooledCoefficients, RdEstimate,
                         confidence_interval, estimate_diff_disc_fd, estimate_diff_disc_pooled,
                         estimate_sharp_rd, robust_standard_error)
from .exceptions import *  # noqa: F401,F403
from .local_regression import (CrossValidation, FixedBandwidth, KernelKind, LocalFit,
                               RuleOfThumb, fit_local_polynomial, kernel_weight,
                               select_bandwidth)
from .panel import (ColumnMapping, CrossSection, Observation, PanelDataset, ValidationReport,
                    first_difference, load_panel, period_slice, validate_panel, write_panel)
from .simulate import DgpSpec, McSummary, generate_panel, oracle_true_effect, run_monte_carlo
