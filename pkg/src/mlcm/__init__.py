"""Treatment-effect estimation for panel data without a control group.

The package forecasts each unit's untreated counterfactual from its own
pre-treatment history (and covariates) with the best of several competing
supervised learners, then reads treatment effects off the gap between
observed and predicted outcomes, with block-bootstrap inference and
tree-based effect heterogeneity.
"""

from .bootstrap import (
    BootstrapResult,
    CateBootstrap,
    bootstrap_ate,
    bootstrap_cate,
)
from .cate_tree import CateTree, describe_tree, grow_cate_tree
from .diagnostics import (
    ErrorDistribution,
    PlaceboResult,
    error_distribution,
    placebo_test,
    sensitivity_trim,
)
from .effects import (
    EffectSet,
    GroupSpec,
    att_asa,
    cate,
    forecast_counterfactuals,
    group_time_effects,
    individual_effects,
    temporal_averages,
)
from .exceptions import (
    BootstrapError,
    ConfigError,
    DesignError,
    MlcmError,
    NotFittedError,
    PanelFormatError,
)
from .model_selection import (
    CvReport,
    ForecastChain,
    build_forecast_chain,
    compact_grids,
    default_grids,
    panel_cv,
    pilot_select_features,
    refit_winner,
)
from .panel import (
    LagSpec,
    PanelDataset,
    PanelSchema,
    build_design,
    load_panel_csv,
    split_pre_post,
    take_units,
    to_panel_csv,
)
from .pipeline import MLCM, PipelineConfig, PipelineResult, run_pipeline
from .simulation import (
    MonteCarloReport,
    SimConfig,
    SimPanel,
    gen_covariates,
    gen_panel,
    run_monte_carlo,
    scenario_grid,
)

__version__ = "0.1.0"

__all__ = [
    "MLCM",
    "PanelDataset",
    "LagSpec",
    "build_design",
    "PanelSchema",
    "load_panel_csv",
    "to_panel_csv",
    "split_pre_post",
    "take_units",
    "panel_cv",
    "pilot_select_features",
    "refit_winner",
    "build_forecast_chain",
    "default_grids",
    "compact_grids",
    "CvReport",
    "ForecastChain",
    "forecast_counterfactuals",
    "individual_effects",
    "cate",
    "temporal_averages",
    "att_asa",
    "group_time_effects",
    "EffectSet",
    "GroupSpec",
    "grow_cate_tree",
    "describe_tree",
    "CateTree",
    "bootstrap_ate",
    "bootstrap_cate",
    "BootstrapResult",
    "CateBootstrap",
    "placebo_test",
    "error_distribution",
    "sensitivity_trim",
    "PlaceboResult",
    "ErrorDistribution",
    "PipelineConfig",
    "PipelineResult",
    "run_pipeline",
    "SimConfig",
    "SimPanel",
    "gen_covariates",
    "gen_panel",
    "run_monte_carlo",
    "scenario_grid",
    "MonteCarloReport",
    "MlcmError",
    "PanelFormatError",
    "DesignError",
    "NotFittedError",
    "BootstrapError",
    "ConfigError",
    "__version__",
]
