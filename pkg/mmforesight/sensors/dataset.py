from collections import OrderedDict
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from .normalize import NormalizationStats, normalize
from .structures import FrameConfig, SampleQuadruple


class TrialDataset:
    def __init__(
        self,
        samples: Sequence[SampleQuadruple],
        config: Optional[FrameConfig] = None,
        stats: Optional[NormalizationStats] = None,
    ) -> None:
        self._samples: List[SampleQuadruple] = list(samples)
        self._config = config or FrameConfig.default()
        self._stats = stats

    @property
    def samples(self) -> List[SampleQuadruple]:
        return list(self._samples)

    @property
    def config(self) -> FrameConfig:
        return self._config

    @property
    def stats(self) -> Optional[NormalizationStats]:
        return self._stats

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index: int) -> SampleQuadruple:
        return self._samples[index]

    def __iter__(self) -> Iterator[SampleQuadruple]:
        return iter(self._samples)

    def object_ids(self) -> List[int]:
        return sorted({sample.object_id for sample in self._samples})

    def behaviors(self) -> List[str]:
        return sorted({sample.behavior for sample in self._samples})

    def _derive(self, samples: Iterable[SampleQuadruple]) -> "TrialDataset":
        return TrialDataset(list(samples), self._config, self._stats)

    def subset_by_objects(self, object_ids: Iterable[int]) -> "TrialDataset":
        wanted = set(object_ids)
        return self._derive(s for s in self._samples if s.object_id in wanted)

    def subset_by_behavior(self, behavior: str) -> "TrialDataset":
        return self._derive(s for s in self._samples if s.behavior == behavior)

    def subset_by_trials(self, trial_ids: Iterable[int]) -> "TrialDataset":
        wanted = set(trial_ids)
        return self._derive(s for s in self._samples if s.trial_id in wanted)

    def normalized(self, stats: NormalizationStats) -> "TrialDataset":
        return TrialDataset(normalize(self._samples, stats), self._config, stats)

    def group_by_length(self) -> Dict[int, List[SampleQuadruple]]:
        groups: Dict[int, List[SampleQuadruple]] = OrderedDict()
        for sample in self._samples:
            groups.setdefault(sample.T, []).append(sample)
        return groups

    def __str__(self) -> str:
        return "TrialDataset[trials={}, objects={}, behaviors={}]".format(
            len(self._samples), len(self.object_ids()), self.behaviors()
        )
