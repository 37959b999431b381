import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..exceptions import ConfigError, ContractError, DivergenceError
from ..model import MultimodalPredictor, rollout, save_checkpoint
from ..sensors import (
    Modality,
    NormalizationStats,
    SampleQuadruple,
    TrialDataset,
    compute_stats,
    normalize,
)
from ..utils import derive_seed, write_csv
from .config import TrainConfig
from .events import BatchEvent, EpochEvent, HandlerList, RegisteredListener
from .loss import loss_terms, weighted_sum
from .optimizer import Adam
from .prefetch import BatchPrefetcher

LOSS_HEADER = ("epoch", "batch", "L_T", "L_i", "L_h", "L_a", "L_v")

EPOCH_END = "epoch_end"
BATCH_END = "batch_end"


class TrainResult:
    def __init__(
        self,
        model: MultimodalPredictor,
        stats: NormalizationStats,
        log: List[tuple],
        checkpoint: Optional[Path] = None,
    ) -> None:
        self.model = model
        self.stats = stats
        self.log = log
        self.checkpoint = checkpoint

    def epoch_losses(self) -> List[float]:
        """
        Mean total loss per epoch
        """
        losses: Dict[int, List[float]] = {}
        for row in self.log:
            losses.setdefault(row[0], []).append(row[2])
        return [float(np.mean(losses[epoch])) for epoch in sorted(losses)]

    def __str__(self) -> str:
        return "TrainResult[model={}, rows={}, checkpoint={}]".format(
            self.model, len(self.log), self.checkpoint
        )


class Trainer:
    def __init__(self, dataset: TrialDataset, config: Optional[TrainConfig] = None) -> None:
        self.dataset = dataset
        self.config = config or TrainConfig.default()
        self.handlers = HandlerList()
        self.logger = logging.getLogger("mmforesight.py")

    def on_epoch_end(self, handler: Callable[[EpochEvent], None]) -> RegisteredListener:
        listener = RegisteredListener(EPOCH_END, handler)
        self.handlers.register(listener)
        return listener

    def on_batch_end(self, handler: Callable[[BatchEvent], None]) -> RegisteredListener:
        listener = RegisteredListener(BATCH_END, handler)
        self.handlers.register(listener)
        return listener

    def _check(self) -> None:
        if len(self.dataset) == 0:
            raise ContractError("Cannot train on an empty dataset")
        frame = self.dataset.config
        for sample in self.dataset:
            for modality in Modality.ALL:
                shape = sample.frames(modality).shape[1:]
                if shape != frame.frame_shape(modality):
                    raise ConfigError(
                        f"Trial {sample.trial_id} has {modality} frames {shape}, "
                        f"configuration expects {frame.frame_shape(modality)}"
                    )
            if sample.T <= self.config.K:
                raise ConfigError(
                    f"Trial {sample.trial_id} has {sample.T} frames, K={self.config.K}"
                )

    def batches(self, epoch: int) -> List[List[SampleQuadruple]]:
        """
        Shuffled mini-batches of equal-length trials. The final partial batch
        of each length group is kept.
        """
        rng = np.random.default_rng(derive_seed(self.config.seed, epoch))
        size = self.config.batch_size
        batches = []
        for length, group in sorted(self.dataset.group_by_length().items()):
            order = rng.permutation(len(group))
            shuffled = [group[i] for i in order]
            batches += [shuffled[i : i + size] for i in range(0, len(shuffled), size)]
        return [batches[i] for i in rng.permutation(len(batches))]

    def train(
        self,
        checkpoint_path: Optional[Union[str, Path]] = None,
        log_path: Optional[Union[str, Path]] = None,
    ) -> TrainResult:
        """
        Runs every epoch and returns the final model. The checkpoint is
        rewritten after each finished epoch, so a diverged run leaves the
        last good one on disk.
        """
        self._check()
        cfg = self.config
        stats = self.dataset.stats or compute_stats(self.dataset)
        needs_normalizing = self.dataset.stats is None

        model = MultimodalPredictor(cfg.model, cfg.mask, self.dataset.config, seed=cfg.seed)
        weights = cfg.weights.for_mask(cfg.mask)
        optimizer = Adam(model.parameters(), lr=cfg.lr, clip_norm=cfg.clip_norm)
        extra = dict(cfg.echo())

        self.logger.info(f"Training {model} on {self.dataset} with {cfg}")
        log: List[tuple] = []

        def prepare(batch: Sequence[SampleQuadruple]) -> List[SampleQuadruple]:
            return normalize(batch, stats) if needs_normalizing else list(batch)

        try:
            for epoch in range(cfg.epochs):
                forcing = cfg.forcing_ratio(epoch)
                epoch_rows = []
                prefetcher = BatchPrefetcher(self.batches(epoch), prepare, cfg.workers, cfg.prefetch)
                for index, batch in enumerate(prefetcher):
                    optimizer.zero_grad()
                    result = rollout(model, batch, cfg.K, teacher_forcing=forcing)
                    terms = loss_terms(result, batch)
                    loss = weighted_sum(terms, weights)
                    value = loss.item()
                    if not math.isfinite(value):
                        self.logger.error(f"Loss became {value} at epoch {epoch} batch {index}")
                        raise DivergenceError(
                            f"Loss is {value} at epoch {epoch}, batch {index}"
                        )

                    loss.backward()
                    norm = optimizer.step()

                    term_values = {m: t.item() for m, t in terms.items()}
                    row = (epoch, index, value) + tuple(
                        term_values.get(m, 0.0) for m in Modality.ALL
                    )
                    epoch_rows.append(row)
                    self.handlers.fire(
                        BATCH_END, BatchEvent(epoch, index, value, term_values, norm)
                    )

                log += epoch_rows
                broken = [
                    name for name, param in model.named_parameters() if not np.all(np.isfinite(param.data))
                ]
                if broken:
                    self.logger.error(f"Non-finite parameters after epoch {epoch}: {broken}")
                    raise DivergenceError(
                        f"{len(broken)} parameters are not finite after epoch {epoch}, first {broken[0]}"
                    )
                if checkpoint_path is not None:
                    save_checkpoint(checkpoint_path, model, stats, extra)
                mean = float(np.mean([row[2] for row in epoch_rows]))
                terms_mean = {
                    m: float(np.mean([row[3 + i] for row in epoch_rows]))
                    for i, m in enumerate(Modality.ALL)
                }
                self.logger.info(f"Epoch {epoch + 1}/{cfg.epochs} loss {mean:.6g}")
                self.handlers.fire(
                    EPOCH_END, EpochEvent(epoch, mean, terms_mean, len(epoch_rows))
                )
        finally:
            if log_path is not None:
                write_csv(log_path, LOSS_HEADER, log)

        return TrainResult(model, stats, log, Path(checkpoint_path) if checkpoint_path else None)


def train(
    dataset: TrialDataset,
    config: Optional[TrainConfig] = None,
    checkpoint_path: Optional[Union[str, Path]] = None,
    log_path: Optional[Union[str, Path]] = None,
) -> TrainResult:
    return Trainer(dataset, config).train(checkpoint_path, log_path)
