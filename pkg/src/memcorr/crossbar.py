"""1T1R crossbar with two operating modes.

Extraction: every word line is on, row ``i`` bit line carries channel ``i``'s
pulses at ``+A`` and column ``j`` source line carries channel ``j``'s pulses at
``-A``, so device ``(i, j)`` sees ``0``, ``A`` or ``2A`` in each slot and
integrates its own pair's coincidences. The positive trains run first, then
the negative trains.

Compute: operands are applied as binary bit-planes (``0`` or ``V_read``) on the
rows, one column is routed through the multiplexer to the ADC per read, and a
shift-and-add reconstructs the multi-bit product. No DAC is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import device
from .device import DeviceParams, DeviceState

COMPUTE_VOLTAGE = 1.0
INTERICTAL, PREICTAL = 0, 1


@dataclass
class CrossbarArray:
    w: np.ndarray
    params: DeviceParams = field(default_factory=DeviceParams)
    wl_enable: np.ndarray | None = None

    def __post_init__(self):
        self.w = np.array(self.w, dtype=float)
        if self.w.ndim != 2:
            raise ValueError("crossbar state must be a rows x cols matrix")
        if np.any((self.w < 0) | (self.w > 1)):
            raise ValueError("device states must lie in [0, 1]")
        if self.wl_enable is None:
            self.wl_enable = np.ones(self.rows, dtype=bool)
        self.wl_enable = np.asarray(self.wl_enable, dtype=bool)
        if self.wl_enable.shape != (self.rows,):
            raise ValueError("wl_enable needs one entry per row")

    @classmethod
    def fresh(cls, rows: int = 18, cols: int = 18, params: DeviceParams | None = None) -> "CrossbarArray":
        """Array with every device pre-set to its lowest conductance."""
        return cls(np.zeros((rows, cols)), params or DeviceParams())

    @property
    def rows(self) -> int:
        return self.w.shape[0]

    @property
    def cols(self) -> int:
        return self.w.shape[1]

    def device(self, i: int, j: int) -> DeviceState:
        return DeviceState(float(self.w[i, j]))

    def copy(self) -> "CrossbarArray":
        return CrossbarArray(self.w.copy(), self.params, self.wl_enable.copy())


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 8
    full_scale: float = 1e-3  # amperes mapped to the top code
    sampling: float = 1e9  # samples/s, bookkeeping only

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("ADC needs at least 1 bit")
        if not self.full_scale > 0:
            raise ValueError("ADC full_scale must be > 0")

    @property
    def max_code(self) -> int:
        return 2 ** self.bits - 1

    @property
    def lsb(self) -> float:
        return self.full_scale / self.max_code

    def convert(self, current) -> tuple[np.ndarray, np.ndarray]:
        """Uniform quantization; returns ``(codes, clipped_mask)``."""
        raw = np.floor(np.asarray(current, dtype=float) / self.lsb + 0.5)
        clipped = raw > self.max_code
        return np.clip(raw, 0, self.max_code).astype(np.int64), clipped


def worst_case_full_scale(rows: int, params: DeviceParams, v_read: float = COMPUTE_VOLTAGE) -> float:
    """Column current with every row driven and every device at w = 1."""
    return rows * device.current(1.0, params, v_read)


@dataclass(frozen=True)
class BitSerialWeights:
    """Unsigned fixed-point operands: ``value = matrix / (2**bit_width - 1) * scale``."""

    matrix: np.ndarray
    bit_width: int = 8
    scale: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.int64)
        if np.any(m < 0) or np.any(m > 2 ** self.bit_width - 1):
            raise ValueError(f"codes must lie in [0, {2 ** self.bit_width - 1}]")
        object.__setattr__(self, "matrix", m)

    @property
    def values(self) -> np.ndarray:
        return self.matrix / (2 ** self.bit_width - 1) * self.scale

    def planes(self) -> np.ndarray:
        """``(bit_width, *shape)`` array of 0/1 bit-planes, LSB first."""
        return np.stack([(self.matrix >> b) & 1 for b in range(self.bit_width)])


def quantize(values, bit_width: int = 8, scale: float = 1.0) -> BitSerialWeights:
    """Round-half-up quantization of values in ``[0, scale]``; larger values saturate."""
    if scale <= 0:
        raise ValueError("quantization scale must be > 0")
    top = 2 ** bit_width - 1
    codes = np.floor(np.clip(np.asarray(values, dtype=float) / scale, 0.0, 1.0) * top + 0.5)
    return BitSerialWeights(codes.astype(np.int64), bit_width, scale)


@dataclass
class ComputeResult:
    values: np.ndarray
    clipped: int = 0
    codes: np.ndarray | None = None  # per bit-plane ADC codes, (bits, cols)
    plane_currents: np.ndarray | None = None  # analog column currents, (bits, cols)

    def dump(self) -> str:
        """Per-bit-plane debug table."""
        lines = ["bit\tcol\tcurrent_A\tcode"]
        if self.codes is not None:
            for b in range(self.codes.shape[0]):
                for c in range(self.codes.shape[1]):
                    lines.append(f"{b}\t{c}\t{float(self.plane_currents[b, c])!r}\t{self.codes[b, c]}")
        return "\n".join(lines) + "\n"


# --- extraction -------------------------------------------------------------

def _stack(trains, n: int, what: str) -> tuple[np.ndarray, float, float]:
    if len(trains) != n:
        raise ValueError(f"expected {n} {what} trains, got {len(trains)}")
    lengths = {len(t) for t in trains}
    if len(lengths) != 1:
        raise ValueError(f"{what} trains have unequal lengths {sorted(lengths)}")
    amps = {t.amplitude for t in trains}
    widths = {t.slot_width for t in trains}
    if len(amps) != 1 or len(widths) != 1:
        raise ValueError(f"{what} trains disagree on amplitude or slot width")
    return np.stack([t.slots for t in trains]), amps.pop(), widths.pop()


def drive(w: np.ndarray, bits: np.ndarray, amplitude: float, slot_width: float, params: DeviceParams,
          wl_enable=None, noise_sigma: float = 0.0, rng=None) -> np.ndarray:
    """Run one extraction pass, slot by slot.

    ``w`` is ``(..., n, n)``, ``bits`` is ``(..., n, slots)``; leading axes are
    independent arrays simulated together. Returns the new states.
    """
    w = np.array(w, dtype=float)
    bits = np.asarray(bits, dtype=bool)
    # zero-voltage slots leave every state untouched
    active = np.flatnonzero(bits.reshape(-1, bits.shape[-1]).any(axis=0))
    if wl_enable is None:
        row_gate = 1.0
    else:
        row_gate = np.asarray(wl_enable, dtype=float)[:, None]
    for k in active:
        b = bits[..., k].astype(float)
        # BL at +A, SL at -A: device sees BL - SL
        v = amplitude * (b[..., :, None] + b[..., None, :]) * row_gate
        w = device.advance(w, params, v, slot_width, noise_sigma, rng)
    return w


def extract(array: CrossbarArray, positive_trains: Sequence, negative_trains: Sequence,
            noise_sigma: float = 0.0, rng=None) -> CrossbarArray:
    """Positive pass then negative pass; returns a new array, input untouched."""
    if array.rows != array.cols:
        raise ValueError(f"extraction needs a square array, got {array.rows}x{array.cols}")
    pos, amp_p, width_p = _stack(positive_trains, array.rows, "positive")
    neg, amp_n, width_n = _stack(negative_trains, array.rows, "negative")
    out = array.copy()
    out.w = drive(out.w, pos, amp_p, width_p, array.params, array.wl_enable, noise_sigma, rng)
    out.w = drive(out.w, neg, amp_n, width_n, array.params, array.wl_enable, noise_sigma, rng)
    return out


def extraction_trace(positive_i, positive_j, negative_i, negative_j, params: DeviceParams,
                     w0: float = 0.0) -> np.ndarray:
    """Slot-by-slot ``(slot, device voltage, w)`` for one device during both passes."""
    rows = []
    w = w0
    slot = 0
    for ti, tj in ((positive_i, positive_j), (negative_i, negative_j)):
        v = ti.amplitude * ti.slots.astype(float) + tj.amplitude * tj.slots.astype(float)
        for vk in v:
            w = device.advance(w, params, vk, ti.slot_width)
            rows.append((slot, vk, w))
            slot += 1
    return np.array(rows)


def read_map(array: CrossbarArray, read_voltage: float = device.READ_VOLTAGE, read_sigma: float = 0.0,
             rng=None, disturb_time: float = 0.0) -> np.ndarray:
    """Conductance of every device in siemens.

    Reads are non-destructive unless ``disturb_time`` > 0, in which case every
    device is held at ``read_voltage`` for that long after being sampled.
    """
    g = device.conductance(array.w, array.params, read_voltage, read_sigma, rng)
    if disturb_time > 0:
        array.w = device.advance(array.w, array.params, read_voltage, disturb_time)
    return g


# --- compute ----------------------------------------------------------------

def _bit_serial(cell_current: np.ndarray, operand_planes: np.ndarray, adc: AdcConfig, bit_width: int,
                scale: float, keep_trace: bool) -> ComputeResult:
    # operand_planes: (bits, rows, cols) or broadcastable; cell_current: (rows, cols)
    plane_currents = np.einsum("brc,rc->bc", operand_planes, cell_current)
    codes, clipped = adc.convert(plane_currents)
    weights = (2 ** np.arange(bit_width))[:, None]
    acc = (codes * weights).sum(axis=0)  # shift-and-add
    values = acc * adc.lsb * scale / (2 ** bit_width - 1)
    return ComputeResult(values, int(clipped.sum()),
                         codes if keep_trace else None,
                         plane_currents if keep_trace else None)


def first_layer_compute(array: CrossbarArray, weights: BitSerialWeights, adc: AdcConfig,
                        v_read: float = COMPUTE_VOLTAGE, trace: bool = False) -> ComputeResult:
    """Column ``j`` output ``h_j = sum_i W_ij * I(w_ij, v_read)``.

    Weight column ``j`` drives the bit lines one bit-plane at a time while the
    multiplexer routes source line ``j`` to the ADC.
    """
    if weights.matrix.shape != array.w.shape:
        raise ValueError(f"weight shape {weights.matrix.shape} does not match array {array.w.shape}")
    cell = device.current(array.w, array.params, v_read) * array.wl_enable[:, None]
    return _bit_serial(cell, weights.planes(), adc, weights.bit_width, weights.scale, trace)


def second_layer_compute(array2: CrossbarArray, hidden: BitSerialWeights, adc: AdcConfig,
                         v_read: float = COMPUTE_VOLTAGE, trace: bool = False) -> ComputeResult:
    """Standard in-memory vector-matrix product: ``logit_c = sum_k x_k * I(w_kc, v_read)``."""
    if hidden.matrix.shape != (array2.rows,):
        raise ValueError(f"expected {array2.rows} inputs, got shape {hidden.matrix.shape}")
    cell = device.current(array2.w, array2.params, v_read) * array2.wl_enable[:, None]
    planes = np.broadcast_to(hidden.planes()[:, :, None], (hidden.bit_width,) + array2.w.shape)
    return _bit_serial(cell, planes, adc, hidden.bit_width, hidden.scale, trace)


def relu(x):
    return np.maximum(x, 0.0)


def decide(logits) -> int:
    """Index of the larger logit; ties go to the interictal class."""
    logits = np.asarray(logits)
    return PREICTAL if logits[PREICTAL] > logits[INTERICTAL] else INTERICTAL


def map_to_text(g: np.ndarray) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in np.asarray(g)) + "\n"


def map_to_records(g: np.ndarray) -> str:
    g = np.asarray(g)
    lines = ["i,j,siemens"]
    lines += [f"{i},{j},{float(g[i, j])!r}" for i in range(g.shape[0]) for j in range(g.shape[1])]
    return "\n".join(lines) + "\n"


def map_from_text(text: str) -> np.ndarray:
    return np.array([[float(v) for v in line.split()] for line in text.strip().splitlines()])
