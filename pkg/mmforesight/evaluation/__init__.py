from .ssim import SsimConfig, ssim, ssim_map, batch_ssim
from .report import EVAL_HEADER, TrialResult, EvalReport, FoldMean, evaluate, resolve_model
from .crossval import crossval, split
from .ablation import (
    CONTRIBUTION_ROWS,
    AUX_ROWS,
    ABLATION_HEADER,
    BEHAVIOR_HEADER,
    AUX_HEADER,
    AblationRow,
    AblationTable,
    expand_subsets,
    run_fold,
    ablate,
)
from .plots import plot_curves, plot_bars, plot_frames
from .gradcheck import CheckResult, check, norm_relative_error, numeric_grad, relative_error, run_gradcheck
