"""Slotted pulse trains and the dual-threshold EEG encoder.

Every raw sample maps to exactly one time slot. A sample strictly above the
positive threshold puts a pulse in the positive train; strictly below the
negative threshold, in the negative train. No resampling happens here.

Binary layout of a serialized :class:`PulseTrain` (little-endian)::

    offset  size  field
    0       4     magic b"PTRN"
    4       1     format version (1)
    5       1     polarity (0 = positive, 1 = negative)
    6       2     reserved, zero
    8       8     slot count (uint64)
    16      8     slot width in seconds (float64)
    24      8     pulse amplitude in volts (float64)
    32      ...   slots, packed 8 per byte, first slot in the most significant bit
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POSITIVE = "positive"
NEGATIVE = "negative"
_POLARITY_CODE = {POSITIVE: 0, NEGATIVE: 1}
_HEADER = struct.Struct("<4sBBHQdd")
_MAGIC = b"PTRN"


@dataclass(frozen=True)
class EncodingConfig:
    v_pth: float
    v_nth: float
    pulse_amplitude: float = 0.8
    slot_width: float = 40e-9

    def __post_init__(self):
        if not self.v_pth > self.v_nth:
            raise ValueError(f"v_pth ({self.v_pth}) must exceed v_nth ({self.v_nth})")
        if self.pulse_amplitude <= 0:
            raise ValueError("pulse_amplitude must be > 0")
        if self.slot_width <= 0:
            raise ValueError("slot_width must be > 0")


@dataclass(frozen=True, eq=False)
class PulseTrain:
    slots: np.ndarray = field(repr=False)
    amplitude: float = 0.8
    slot_width: float = 40e-9
    polarity: str = POSITIVE

    def __post_init__(self):
        if self.polarity not in _POLARITY_CODE:
            raise ValueError(f"unknown polarity {self.polarity!r}")
        bits = np.asarray(self.slots, dtype=bool)
        if bits.ndim != 1:
            raise ValueError("slots must be one-dimensional")
        object.__setattr__(self, "slots", bits)

    def __len__(self):
        return len(self.slots)

    def __eq__(self, other):
        if not isinstance(other, PulseTrain):
            return NotImplemented
        return (self.amplitude == other.amplitude and self.slot_width == other.slot_width
                and self.polarity == other.polarity and np.array_equal(self.slots, other.slots))

    @property
    def duration(self) -> float:
        return len(self.slots) * self.slot_width

    @property
    def n_pulses(self) -> int:
        return int(self.slots.sum())

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(_MAGIC, 1, _POLARITY_CODE[self.polarity], 0, len(self.slots),
                            self.slot_width, self.amplitude)
        return head + np.packbits(self.slots).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PulseTrain":
        if len(blob) < _HEADER.size:
            raise ValueError("unexpected end of data in pulse-train header")
        magic, version, pol, _, n, width, amp = _HEADER.unpack_from(blob)
        if magic != _MAGIC or version != 1:
            raise ValueError("not a version-1 pulse-train blob")
        payload = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
        if len(payload) != (n + 7) // 8:
            raise ValueError("pulse-train payload length does not match slot count")
        polarity = POSITIVE if pol == 0 else NEGATIVE
        return cls(np.unpackbits(payload, count=n).astype(bool), amp, width, polarity)

    def to_text(self) -> str:
        bits = "".join("1" if b else "0" for b in self.slots)
        return f"{self.polarity} amplitude={self.amplitude!r} slot_width={self.slot_width!r} n={len(self)}\n{bits}\n"

    @classmethod
    def from_text(cls, text: str) -> "PulseTrain":
        head, _, bits = text.strip().partition("\n")
        fields = head.split()
        meta = dict(kv.split("=", 1) for kv in fields[1:])
        slots = np.array([c == "1" for c in bits.strip()], dtype=bool)
        if len(slots) != int(meta["n"]):
            raise ValueError("slot count mismatch in text pulse train")
        return cls(slots, float(meta["amplitude"]), float(meta["slot_width"]), fields[0])


def _per_channel(cfg, n_channels: int) -> list[EncodingConfig]:
    if isinstance(cfg, EncodingConfig):
        return [cfg] * n_channels
    cfgs = list(cfg)
    if len(cfgs) != n_channels:
        raise ValueError(f"got {len(cfgs)} encoding configs for {n_channels} channels")
    return cfgs


def threshold_masks(samples, cfg) -> tuple[np.ndarray, np.ndarray]:
    """Boolean ``(channels, samples)`` positive and negative masks."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    cfgs = _per_channel(cfg, x.shape[0])
    pth = np.array([c.v_pth for c in cfgs])[:, None]
    nth = np.array([c.v_nth for c in cfgs])[:, None]
    return x > pth, x < nth


def encode_window(samples, cfg) -> tuple[list[PulseTrain], list[PulseTrain]]:
    """Encode a ``(channels, samples)`` window into per-channel pulse trains.

    ``cfg`` is one :class:`EncodingConfig` shared by all channels or one per
    channel. Returns ``(positive_trains, negative_trains)``.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("cannot encode an empty window")
    cfgs = _per_channel(cfg, x.shape[0])
    pos, neg = threshold_masks(x, cfgs)
    positives = [PulseTrain(p, c.pulse_amplitude, c.slot_width, POSITIVE) for p, c in zip(pos, cfgs)]
    negatives = [PulseTrain(n, c.pulse_amplitude, c.slot_width, NEGATIVE) for n, c in zip(neg, cfgs)]
    return positives, negatives


def calibrate_thresholds(training_windows: Sequence, k_sigma: float = 1.0,
                         pulse_amplitude: float = 0.8, slot_width: float = 40e-9) -> list[EncodingConfig]:
    """Per-channel ``mean +/- k_sigma * std`` over all training samples.

    Windows may be raw ``(channels, samples)`` arrays or objects carrying a
    ``samples`` attribute.
    """
    arrays = [np.asarray(getattr(w, "samples", w), dtype=float) for w in training_windows]
    if not arrays:
        raise ValueError("no calibration data")
    x = np.concatenate([np.atleast_2d(a) for a in arrays], axis=1)
    mu = x.mean(axis=1)
    sigma = x.std(axis=1)
    flat = np.flatnonzero(sigma == 0)
    if flat.size:
        raise ValueError(f"zero variance channel(s): {flat.tolist()}")
    return [EncodingConfig(m + k_sigma * s, m - k_sigma * s, pulse_amplitude, slot_width)
            for m, s in zip(mu, sigma)]


def extraction_slots(window_seconds: float, sampling_rate: float) -> int:
    """Slots for one extraction: positive pass then negative pass."""
    return 2 * int(round(window_seconds * sampling_rate))


def extraction_latency(window_seconds: float = 3.0, sampling_rate: float = 256.0,
                       slot_width: float = 40e-9) -> float:
    return extraction_slots(window_seconds, sampling_rate) * slot_width
