from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

CHANNELS = (
    "FP1-F3", "F3-C3", "C3-P3", "P3-O1",
    "FP2-F4", "F4-C4", "C4-P4", "P4-O2",
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1",
    "FP2-F8", "F8-T8", "T8-P8", "P8-O2",
    "FZ-CZ", "CZ-PZ",
)

PREICTAL = "preictal"
INTERICTAL = "interictal"


@dataclass
class Recording:
    """One continuous multichannel recording.

    ``samples`` is ``(channels, n)`` in microvolts. ``start_time`` places the
    recording on its patient's timeline (seconds); ``seizures`` are
    ``(start, end)`` pairs relative to the recording's own start.
    """

    patient_id: str
    labels: list[str]
    sampling_rate: float
    samples: np.ndarray
    seizures: list[tuple[float, float]] = field(default_factory=list)
    start_time: float = 0.0
    source: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] != len(self.labels):
            raise ValueError(f"samples shape {self.samples.shape} does not match {len(self.labels)} labels")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    @property
    def absolute_seizures(self) -> list[tuple[float, float]]:
        return [(self.start_time + a, self.start_time + b) for a, b in self.seizures]


@dataclass
class LabeledWindow:
    patient_id: str
    window_start: float  # seconds on the patient timeline
    samples: np.ndarray  # (18, window length) microvolts
    label: str
    source: str = ""
    onset: float | None = None  # onset of the seizure a preictal window precedes

    @property
    def window_id(self) -> str:
        return f"{self.patient_id}:{self.window_start:.3f}"


def select_channels(rec: Recording, channels=CHANNELS) -> Recording:
    """Keep ``channels`` in the given order, matching labels case-insensitively.

    Duplicate labels resolve to their first occurrence.
    """
    index: dict[str, int] = {}
    for k, lab in enumerate(rec.labels):
        index.setdefault(lab.strip().upper(), k)
    missing = [c for c in channels if c.upper() not in index]
    if missing:
        raise ValueError(f"{rec.source or rec.patient_id}: missing channels {missing}")
    rows = [index[c.upper()] for c in channels]
    return replace(rec, labels=list(channels), samples=rec.samples[rows])
