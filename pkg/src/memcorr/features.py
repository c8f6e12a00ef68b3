"""Per-window correlation extraction and its software oracles.

A window is encoded into pulse trains, driven through a freshly reset 18x18
array (positive pass, then negative pass) and read back as a conductance map.
:func:`coincidence_counts` and :func:`closed_form_states` give the same answer
by counting slots, which is how the simulator is checked.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import crossbar, device
from ._util import config_hash, substream
from .device import DeviceParams
from .waveform import EncodingConfig, PulseTrain, encode_window, threshold_masks, _per_channel


@dataclass
class CorrelationMap:
    """Conductance map of one window (siemens, read at ``read_voltage``).

    ``states`` keeps the programmed device states so the compute path can
    reuse the very same array.
    """

    values: np.ndarray
    states: np.ndarray
    window_id: str = ""
    config_hash: str = ""
    label: str | None = None
    read_voltage: float = device.READ_VOLTAGE
    meta: dict = field(default_factory=dict)

    @property
    def off_diagonal(self) -> np.ndarray:
        return self.values[~np.eye(self.values.shape[0], dtype=bool)]

    def to_text(self) -> str:
        head = f"# window={self.window_id} config={self.config_hash} read_v={self.read_voltage!r}\n"
        return head + crossbar.map_to_text(self.values)

    def to_records(self) -> str:
        return crossbar.map_to_records(self.values)


def _window_id(window) -> str:
    wid = getattr(window, "window_id", None)
    return wid() if callable(wid) else (wid or "")


def extraction_hash(cfg, params: DeviceParams, noise_sigma: float = 0.0, read_sigma: float = 0.0) -> str:
    return config_hash({"encoding": cfg if isinstance(cfg, EncodingConfig) else list(cfg),
                        "device": params, "noise": noise_sigma, "read_noise": read_sigma})


def extract_features(window, cfg, params: DeviceParams | None = None, noise_sigma: float = 0.0,
                     read_sigma: float = 0.0, seed: int = 0) -> CorrelationMap:
    """Encode, extract and read one window on a fresh ``w = 0`` array.

    ``window`` is a ``(channels, samples)`` array or anything with a
    ``samples`` attribute. Noise, when enabled, draws from a stream keyed by
    the window id so results do not depend on processing order.
    """
    return extract_batch([window], cfg, params, noise_sigma, read_sigma, seed)[0]


def _simulate(samples: np.ndarray, cfg, params: DeviceParams, noise_sigma: float, read_sigma: float,
              rngs) -> tuple[np.ndarray, np.ndarray]:
    # samples: (B, C, N); one array per window, driven together
    b, c, _ = samples.shape
    cfgs = _per_channel(cfg, c)
    amps = {x.pulse_amplitude for x in cfgs}
    widths = {x.slot_width for x in cfgs}
    if len(amps) != 1 or len(widths) != 1:
        raise ValueError("channels must share pulse amplitude and slot width")
    amp, width = amps.pop(), widths.pop()
    pos, neg = zip(*(threshold_masks(x, cfgs) for x in samples))
    w = np.zeros((b, c, c))
    if noise_sigma > 0:
        # per-window streams keep results independent of batch composition
        for k in range(b):
            w[k] = crossbar.drive(w[k], pos[k], amp, width, params, None, noise_sigma, rngs[k])
            w[k] = crossbar.drive(w[k], neg[k], amp, width, params, None, noise_sigma, rngs[k])
    else:
        w = crossbar.drive(w, np.stack(pos), amp, width, params)
        w = crossbar.drive(w, np.stack(neg), amp, width, params)
    g = np.stack([device.conductance(w[k], params, device.READ_VOLTAGE, read_sigma, rngs[k]) for k in range(b)])
    return w, g


def extract_batch(windows: Sequence, cfg, params: DeviceParams | None = None, noise_sigma: float = 0.0,
                  read_sigma: float = 0.0, seed: int = 0, chunk: int = 128, workers: int = 1) -> list[CorrelationMap]:
    """:func:`extract_features` for many windows; output order follows input order."""
    params = params or DeviceParams()
    if not windows:
        return []
    h = extraction_hash(cfg, params, noise_sigma, read_sigma)
    samples = [np.atleast_2d(np.asarray(getattr(w, "samples", w), dtype=float)) for w in windows]
    ids = [_window_id(w) or f"w{k}" for k, w in enumerate(windows)]
    shapes = {s.shape for s in samples}
    if len(shapes) != 1:
        raise ValueError(f"windows differ in shape: {sorted(shapes)}")
    if samples[0].size == 0:
        raise ValueError("cannot encode an empty window")

    def run(lo: int):
        hi = min(lo + chunk, len(samples))
        rngs = [substream(seed, f"extract:{ids[k]}") for k in range(lo, hi)]
        return _simulate(np.stack(samples[lo:hi]), cfg, params, noise_sigma, read_sigma, rngs)

    starts = range(0, len(samples), chunk)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(lo) for lo in starts]
    out = []
    for lo, (w, g) in zip(starts, parts):
        for k in range(w.shape[0]):
            win = windows[lo + k]
            out.append(CorrelationMap(g[k], w[k], ids[lo + k], h, getattr(win, "label", None)))
    return out


# --- oracles ----------------------------------------------------------------

def _bits(train) -> np.ndarray:
    return np.asarray(getattr(train, "slots", train), dtype=bool)


def coincidence_counts(positive_i, positive_j, negative_i, negative_j) -> tuple[int, int]:
    """Slots where both ends pulse, and slots where exactly one does, over both passes."""
    pairs = [(_bits(positive_i), _bits(positive_j)), (_bits(negative_i), _bits(negative_j))]
    n_coinc = n_single = 0
    for a, b in pairs:
        if len(a) != len(b):
            raise ValueError(f"train length mismatch: {len(a)} vs {len(b)}")
        for x, y in zip(a.tolist(), b.tolist()):
            if x and y:
                n_coinc += 1
            elif x or y:
                n_single += 1
    return n_coinc, n_single


def coincidence_matrix(positives: Sequence, negatives: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs ``(n_coinc, n_single)`` via inner products of the bit matrices."""
    n_coinc = 0
    n_single = 0
    for trains in (positives, negatives):
        m = np.stack([_bits(t) for t in trains]).astype(np.int64)
        both = m @ m.T
        counts = m.sum(axis=1)
        n_coinc = n_coinc + both
        n_single = n_single + counts[:, None] + counts[None, :] - 2 * both
    return n_coinc, n_single


def closed_form_states(positives: Sequence[PulseTrain], negatives: Sequence[PulseTrain],
                       params: DeviceParams | None = None) -> np.ndarray:
    """Ideal final states from coincidence counts.

    Every slot leaves a device at 0, A or 2A volts, each adding a fixed
    nonnegative increment, so the clamped sum equals the clamp of the total.
    """
    params = params or DeviceParams()
    amp, width = positives[0].amplitude, positives[0].slot_width
    n_coinc, n_single = coincidence_matrix(positives, negatives)
    total = n_coinc * device.delta_w(params, 2 * amp, width) + n_single * device.delta_w(params, amp, width)
    return np.minimum(total, 1.0)


def closed_form_map(samples, cfg, params: DeviceParams | None = None) -> np.ndarray:
    params = params or DeviceParams()
    pos, neg = encode_window(samples, cfg)
    return device.conductance(closed_form_states(pos, neg, params), params)


def pcc(x1, x2) -> float:
    """Pearson correlation coefficient of two equal-length sequences."""
    a = np.asarray(x1, dtype=float).ravel()
    b = np.asarray(x2, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("PCC needs at least two samples")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.dot(da, da)), np.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise ValueError("undefined PCC: zero variance input")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))


def pcc_matrix(samples) -> np.ndarray:
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n = x.shape[0]
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = pcc(x[i], x[j])
    return out
