from .structures import ModalityMask, ModelConfig, FeatureMap, CdnaKernelSet
from .encoders import (
    EncoderState,
    VisionEncoder,
    HapticEncoder,
    SpectrogramEncoder,
    embed_behavior,
    tile_haptic,
    fold_bands,
    unfold_bands,
)
from .heads import Fusion, CdnaHead, MaskHead, AuxDecoder, apply_cdna, compose, decode_aux
from .predictor import (
    MultimodalPredictor,
    PredictorState,
    StepOutput,
    RolloutResult,
    rollout,
    forced_steps,
)
from .baselines import PersistenceBaseline, TrainingMeanBaseline
from .checkpoint import (
    Checkpoint,
    checkpoint_bytes,
    save_checkpoint,
    parse_checkpoint,
    load_checkpoint,
)
