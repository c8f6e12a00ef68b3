"""Seeded synthetic EEG for tests and desk-scale runs.

Each channel mixes a shared AR(1) process with its own independent AR(1)
process, ``x_c = A * (sqrt(rho) * s + sqrt(1 - rho) * e_c)``, so any two
channels have correlation ``rho`` while every channel keeps variance ``A**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .._util import substream
from .recording import CHANNELS, INTERICTAL, PREICTAL, LabeledWindow, Recording
from .windows import WINDOW_SECONDS, classify_span

_BURN_IN = 64


@dataclass(frozen=True)
class SynthProfile:
    n_channels: int = 18
    sampling_rate: float = 256.0
    duration: float = 3.0
    rho: float = 0.0
    amplitude: float = 50.0  # microvolts, per-channel standard deviation
    ar_coef: float = 0.5
    preictal: tuple[tuple[float, float], ...] = ()  # spans (s) using rho_preictal
    rho_preictal: float = 0.8
    patient_id: str = "synth"

    def __post_init__(self):
        for r in (self.rho, self.rho_preictal):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"correlation {r} outside [0, 1]")
        if not -1.0 < self.ar_coef < 1.0:
            raise ValueError("ar_coef must lie in (-1, 1)")


def _ar1(rng: np.random.Generator, shape: tuple[int, ...], phi: float) -> np.ndarray:
    white = rng.standard_normal(shape[:-1] + (shape[-1] + _BURN_IN,))
    out = signal.lfilter([np.sqrt(1.0 - phi * phi)], [1.0, -phi], white, axis=-1)
    return out[..., _BURN_IN:]


def mix(rng: np.random.Generator, n_channels: int, n: int, rho, amplitude: float, ar_coef: float) -> np.ndarray:
    """``(n_channels, n)`` correlated noise; ``rho`` may be a scalar or per-sample array."""
    shared = _ar1(rng, (n,), ar_coef)
    own = _ar1(rng, (n_channels, n), ar_coef)
    rho = np.asarray(rho, dtype=float)
    return amplitude * (np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own)


def synthesize(profile: SynthProfile, seed: int) -> Recording:
    rng = substream(seed, "synthesize")
    n = int(round(profile.duration * profile.sampling_rate))
    rho = np.full(n, profile.rho)
    t = np.arange(n) / profile.sampling_rate
    for a, b in profile.preictal:
        rho[(t >= a) & (t < b)] = profile.rho_preictal
    x = mix(rng, profile.n_channels, n, rho, profile.amplitude, profile.ar_coef)
    labels = list(CHANNELS[:profile.n_channels]) if profile.n_channels <= len(CHANNELS) else \
        [f"CH{k + 1}" for k in range(profile.n_channels)]
    return Recording(profile.patient_id, labels, profile.sampling_rate, x, source=f"synth-{seed}")


@dataclass(frozen=True)
class SynthDataset:
    """Window-level synthetic patient.

    Seizure ``k`` starts at ``k * 12 h + 6 h``; an interictal block starts at
    each ``k * 12 h``, far outside the 4 h exclusion zone. Only the labeled
    windows are generated, not the hours in between.
    """

    n_seizures: int = 3
    horizon: float = 600.0
    interictal_seconds: float = 3600.0  # total, split evenly across blocks
    seizure_duration: float = 60.0
    rho_interictal: tuple[float, float] = (0.0, 0.3)
    rho_preictal: tuple[float, float] = (0.55, 0.85)
    amplitude: float = 50.0
    ar_coef: float = 0.5
    sampling_rate: float = 256.0
    patient_id: str = "synth01"


def synthetic_patient(cfg: SynthDataset, seed: int) -> tuple[list[LabeledWindow], list[tuple[float, float]]]:
    rng = substream(seed, f"dataset:{cfg.patient_id}")
    n = int(round(WINDOW_SECONDS * cfg.sampling_rate))
    day = 12 * 3600.0
    seizures = [(k * day + day / 2, k * day + day / 2 + cfg.seizure_duration) for k in range(cfg.n_seizures)]
    per_block = int(cfg.interictal_seconds / cfg.n_seizures // WINDOW_SECONDS)
    starts = []
    for k, (onset, _) in enumerate(seizures):
        starts += [k * day + i * WINDOW_SECONDS for i in range(per_block)]
        first = onset - cfg.horizon
        starts += [first + i * WINDOW_SECONDS for i in range(int(cfg.horizon // WINDOW_SECONDS))]
    windows = []
    for ws in sorted(starts):
        label, onset = classify_span(ws, ws + WINDOW_SECONDS, seizures, cfg.horizon)
        lo, hi = cfg.rho_preictal if label == PREICTAL else cfg.rho_interictal
        assert label in (PREICTAL, INTERICTAL)
        x = mix(rng, len(CHANNELS), n, rng.uniform(lo, hi), cfg.amplitude, cfg.ar_coef)
        windows.append(LabeledWindow(cfg.patient_id, ws, x, label, f"synth-{seed}", onset))
    return windows, seizures
