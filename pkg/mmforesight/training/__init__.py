from .loss import LossWeights, loss_terms, weighted_sum, total_loss
from .optimizer import AdamState, Adam, adam_step, global_norm, clip_by_global_norm
from .config import TrainConfig
from .events import EpochEvent, BatchEvent, RegisteredListener, HandlerList
from .prefetch import BatchPrefetcher
from .trainer import LOSS_HEADER, Trainer, TrainResult, train
