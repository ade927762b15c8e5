"""Multiple imputation for fully categorical data.

Three imputation engines (chained multinomial logistic, chained
classification trees, and a truncated Dirichlet-process mixture of
multinomials), combining rules for the resulting estimates, amputation
mechanisms, and a repeated-sampling simulation harness with a CLI.
"""

from .amputation import Anchor, MissingnessSpec, ampute, expected_missing_rate
from .cart import CartEngine, Tree, build_tree, find_split, gini_impurity, impute_from_tree
from .chained import (
    ChainedConfig,
    ConditionalEngine,
    initial_impute,
    multiple_impute,
    run_chain,
)
from .data import (
    CategoricalDataset,
    Codebook,
    CodebookError,
    Estimand,
    Variable,
    enumerate_estimands,
    estimate,
    estimate_all,
    load_csv,
    write_csv,
)
from .dpm import (
    DpmConfig,
    DpmResult,
    DpmState,
    dpm_multiple_impute,
    gibbs_step,
    joint_cell_probability,
    occupied_classes,
)
from .glm import (
    EngineUnsupported,
    FitNotConverged,
    GlmEngine,
    LogisticFit,
    draw_and_impute,
    fit_multinomial,
)
from .pooling import PooledEstimate, covers, pool, pool_arrays

__version__ = "0.1.0"
