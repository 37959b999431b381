r"""
mmforesight, multisensory next-frame prediction for robot interaction trials
"""

from .tensor import Tensor, no_grad, default_dtype
from .sensors import (
    Behavior,
    Modality,
    FrameConfig,
    SampleQuadruple,
    TrialDataset,
    load_dataset,
)
from .model import (
    ModalityMask,
    ModelConfig,
    MultimodalPredictor,
    PersistenceBaseline,
    rollout,
    save_checkpoint,
    load_checkpoint,
)
from .training import LossWeights, TrainConfig, Trainer, train
from .synthworld import generate_trials, generate_dataset
from .evaluation import ssim, evaluate, crossval, ablate, run_gradcheck
from .exceptions import *
from .utils import *

__name__ = "mmforesight"
__author__ = "mmforesight developers"
__version__ = "0.1.0"
