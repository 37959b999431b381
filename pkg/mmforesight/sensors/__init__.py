from .structures import Behavior, Modality, FrameConfig, RawTrial, SampleQuadruple
from .spectrogram import (
    stft,
    reduce_bins,
    spectrogram,
    causal_pad,
    stream_spectrogram,
    vibro_spectrogram,
)
from .sync import frame_windows, sync_to_frames
from .normalize import (
    ModalityStats,
    NormalizationStats,
    compute_stats,
    normalize,
    denormalize,
)
from .dataset import TrialDataset
from .container import (
    encode_trial,
    decode_trial,
    write_container,
    read_manifest,
    read_container,
    load_dataset,
)
