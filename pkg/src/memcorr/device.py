"""Behavioral WOx memristor: state dynamics, current readout, characterization.

Current through the device for internal state ``w`` and terminal voltage ``V``::

    I = (1 - w) * alpha * (1 - exp(-beta * V)) + w * gamma * sinh(delta * V)

and the state moves as ``dw/dt = lam * sinh(eta * V)``, clamped to [0, 1].
The rate does not depend on ``w``, so a constant-voltage interval integrates
exactly in closed form; no ODE solver is involved anywhere in this module.

Functions accept either a :class:`DeviceState` or a bare float / ndarray of
states so the crossbar code can advance whole arrays at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

READ_VOLTAGE = 0.5


@dataclass(frozen=True)
class DeviceParams:
    alpha: float = 9e-7  # A
    beta: float = 4.0  # 1/V
    gamma: float = 2.8e-7  # A
    delta: float = 6.0  # 1/V
    lam: float = 0.045  # 1/s
    eta: float = 6.0  # 1/V

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "lam", "eta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"device parameter {name} must be positive, got {value!r}")


@dataclass(frozen=True)
class DeviceState:
    w: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"device state w must lie in [0, 1], got {self.w!r}")


@dataclass(frozen=True)
class VoltageInterval:
    voltage: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"interval duration must be > 0, got {self.duration!r}")


def _w(state):
    return state.w if isinstance(state, DeviceState) else state


def current(state, params: DeviceParams, voltage):
    """Device current in amperes (vectorized over ``state`` and ``voltage``)."""
    w = np.asarray(_w(state), dtype=float)
    v = np.asarray(voltage, dtype=float)
    i = (1.0 - w) * params.alpha * (1.0 - np.exp(-params.beta * v)) + w * params.gamma * np.sinh(params.delta * v)
    return float(i) if i.ndim == 0 else i


def delta_w(params: DeviceParams, voltage, duration):
    """Unclamped state change for a constant voltage held for ``duration`` seconds."""
    dw = params.lam * np.sinh(params.eta * np.asarray(voltage, dtype=float)) * duration
    return float(dw) if np.ndim(dw) == 0 else dw


def advance(w, params: DeviceParams, voltage, duration, noise_sigma: float = 0.0, rng=None):
    """Advance raw state(s) ``w`` through one constant-voltage interval.

    ``noise_sigma`` > 0 applies multiplicative Gaussian variability to each
    increment; it needs ``rng``.
    """
    dw = delta_w(params, voltage, duration)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        w = np.asarray(w, dtype=float)
        dw = dw * (1.0 + noise_sigma * rng.standard_normal(np.broadcast_shapes(w.shape, np.shape(dw))))
    out = np.clip(np.asarray(w, dtype=float) + dw, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def step(state: DeviceState, params: DeviceParams, interval: VoltageInterval,
         noise_sigma: float = 0.0, rng=None) -> DeviceState:
    return DeviceState(advance(state.w, params, interval.voltage, interval.duration, noise_sigma, rng))


def apply_waveform(state: DeviceState, params: DeviceParams, intervals: Sequence[VoltageInterval],
                   noise_sigma: float = 0.0, rng=None) -> DeviceState:
    if len(intervals) == 0:
        raise ValueError("waveform must contain at least one interval")
    for interval in intervals:
        state = step(state, params, interval, noise_sigma, rng)
    return state


def conductance(state, params: DeviceParams, read_voltage: float = READ_VOLTAGE,
                read_sigma: float = 0.0, rng=None):
    """Read conductance ``I(w, V_read) / V_read`` in siemens. Does not move ``w``."""
    i = np.asarray(current(state, params, read_voltage), dtype=float)
    if read_sigma > 0:
        if rng is None:
            raise ValueError("read_sigma > 0 requires an rng")
        i = i * (1.0 + read_sigma * rng.standard_normal(i.shape))
    g = i / read_voltage
    return float(g) if g.ndim == 0 else g


def state_from_conductance(g, params: DeviceParams, read_voltage: float = READ_VOLTAGE):
    """Invert :func:`conductance` (it is affine in ``w``)."""
    i0 = current(0.0, params, read_voltage)
    i1 = current(1.0, params, read_voltage)
    w = (np.asarray(g, dtype=float) * read_voltage - i0) / (i1 - i0)
    w = np.clip(w, 0.0, 1.0)
    return float(w) if w.ndim == 0 else w


# --- characterization protocols -------------------------------------------

def iv_sweep(params: DeviceParams, v_min: float, v_max: float, steps: int, dwell: float,
             w0: float = 0.0) -> list[tuple[float, float, float]]:
    """Quasi-static staircase sweep from ``v_min`` to ``v_max``.

    At each level the state first dwells for ``dwell`` seconds, then the
    current is recorded. Returns ``(volts, amperes, w)`` records.
    """
    if not v_min < v_max:
        raise ValueError("iv_sweep needs v_min < v_max")
    if steps < 2:
        raise ValueError("iv_sweep needs at least 2 steps")
    if dwell < 0:
        raise ValueError("dwell must be >= 0")
    w = float(w0)
    out = []
    for v in np.linspace(v_min, v_max, steps):
        if dwell > 0:
            w = advance(w, params, v, dwell)
        out.append((float(v), current(w, params, v), w))
    return out


def pulse_programming(params: DeviceParams, amplitude: float, width: float, n_pulses: int,
                      w0: float = 0.0, read_voltage: float = READ_VOLTAGE) -> np.ndarray:
    """Repeated identical pulses; returns an ``(n_pulses + 1, 3)`` array of
    ``(pulse index, w, read current)`` starting with the initial state."""
    rows = [(0, w0, current(w0, params, read_voltage))]
    w = w0
    for k in range(1, n_pulses + 1):
        w = advance(w, params, amplitude, width)
        rows.append((k, w, current(w, params, read_voltage)))
    return np.array(rows, dtype=float)


def overlap_intervals(pulse_width: float, amplitude: float, dt_offset: float) -> list[VoltageInterval]:
    """Piecewise-constant device voltage for a +A pre pulse on [0, W) and a
    -A post pulse on [dt, dt + W). The device sees V_pre - V_post."""
    edges = sorted({0.0, pulse_width, dt_offset, dt_offset + pulse_width})
    out = []
    for t0, t1 in zip(edges[:-1], edges[1:]):
        if t1 - t0 <= 0:
            continue
        mid = 0.5 * (t0 + t1)
        v_pre = amplitude if 0.0 <= mid < pulse_width else 0.0
        v_post = -amplitude if dt_offset <= mid < dt_offset + pulse_width else 0.0
        out.append(VoltageInterval(v_pre - v_post, t1 - t0))
    return out


def overlap_response(params: DeviceParams, pulse_width: float = 500e-9, amplitude: float = 0.8,
                     dt_offset: float = 0.0, w0: float = 0.0,
                     read_voltage: float = READ_VOLTAGE) -> float:
    """Conductance change (S) produced by one offset pre/post pulse pair."""
    if pulse_width <= 0:
        raise ValueError("pulse_width must be > 0")
    start = DeviceState(w0)
    end = apply_waveform(start, params, overlap_intervals(pulse_width, amplitude, dt_offset))
    return conductance(end, params, read_voltage) - conductance(start, params, read_voltage)


def overlap_curve(params: DeviceParams, offsets: Iterable[float], pulse_width: float = 500e-9,
                  amplitude: float = 0.8, w0: float = 0.0) -> np.ndarray:
    return np.array([(dt, overlap_response(params, pulse_width, amplitude, dt, w0)) for dt in offsets])
