from __future__ import annotations

import math
from dataclasses import replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import signal

from .annotations import FileSummary, file_offsets
from .recording import INTERICTAL, PREICTAL, LabeledWindow, Recording

WINDOW_SECONDS = 3.0
HORIZON = 30 * 60.0
MERGE_GAP = 30 * 60.0
INTERICTAL_GAP = 4 * 3600.0


def merge_seizures(intervals: Iterable[tuple[float, float]], gap: float = MERGE_GAP) -> list[tuple[float, float]]:
    """Fold every seizure that starts within ``gap`` seconds of the previous
    seizure's end into that seizure."""
    merged: list[list[float]] = []
    for start, end in sorted(intervals):
        if merged and start - merged[-1][1] <= gap:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(a, b) for a, b in merged]


def classify_span(start: float, end: float, seizures: Sequence[tuple[float, float]],
                  horizon: float = HORIZON, interictal_gap: float = INTERICTAL_GAP):
    """Label for the span ``[start, end)`` given merged absolute seizures.

    Returns ``(label, onset)``; ``label`` is None for spans that are neither
    preictal nor interictal.
    """
    for a, b in seizures:
        if start < b and end > a:
            return None, None  # ictal
    for a, _ in seizures:
        if a - horizon <= start and end <= a:
            return PREICTAL, a
    if all(end <= a - interictal_gap or start >= b + interictal_gap for a, b in seizures):
        return INTERICTAL, None
    return None, None


def label_windows(recordings: Sequence[Recording], horizon: float = HORIZON,
                  window: float = WINDOW_SECONDS, interictal_gap: float = INTERICTAL_GAP,
                  merge_gap: float = MERGE_GAP, interictal_stride: int = 1) -> list[LabeledWindow]:
    """Cut one patient's recordings into non-overlapping labeled windows.

    Windows sit on a patient-wide grid (multiples of ``window`` seconds) and
    must fall entirely inside one recording. Windows that are neither
    preictal nor interictal are dropped. ``interictal_stride`` keeps every
    n-th interictal window.
    """
    seizures = merge_seizures([s for r in recordings for s in r.absolute_seizures], merge_gap)
    out = []
    n_inter = 0
    for rec in sorted(recordings, key=lambda r: r.start_time):
        n = int(round(window * rec.sampling_rate))
        first = math.ceil(rec.start_time / window - 1e-9)
        last = math.floor((rec.start_time + rec.duration) / window + 1e-9) - 1
        for k in range(first, last + 1):
            ws = k * window
            label, onset = classify_span(ws, ws + window, seizures, horizon, interictal_gap)
            if label is None:
                continue
            if label == INTERICTAL:
                n_inter += 1
                if (n_inter - 1) % interictal_stride:
                    continue
            i0 = int(round((ws - rec.start_time) * rec.sampling_rate))
            if i0 + n > rec.n_samples:
                continue
            out.append(LabeledWindow(rec.patient_id, ws, rec.samples[:, i0:i0 + n], label, rec.source, onset))
    return out


def filter_lowpass(rec: Recording, cutoff: float = 50.0, order: int = 4) -> Recording:
    """Zero-phase Butterworth low-pass (forward-backward)."""
    if not rec.sampling_rate > 2 * cutoff:
        raise ValueError(f"sampling rate {rec.sampling_rate} Hz must exceed twice the cutoff {cutoff} Hz")
    if rec.n_samples < 2:
        return replace(rec, samples=rec.samples.copy())
    sos = signal.butter(order, cutoff, btype="low", fs=rec.sampling_rate, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), rec.n_samples - 1)
    return replace(rec, samples=signal.sosfiltfilt(sos, rec.samples, axis=1, padlen=padlen))


def _subtract(span: tuple[float, float], holes: Sequence[tuple[float, float]]) -> float:
    pieces = [span]
    for a, b in holes:
        nxt = []
        for s, e in pieces:
            if b <= s or a >= e:
                nxt.append((s, e))
                continue
            if a > s:
                nxt.append((s, a))
            if b < e:
                nxt.append((b, e))
        pieces = nxt
    return sum(e - s for s, e in pieces)


def interictal_seconds(spans: Sequence[tuple[float, float]], seizures: Sequence[tuple[float, float]],
                       interictal_gap: float = INTERICTAL_GAP) -> float:
    """Recorded time at least ``interictal_gap`` away from every seizure."""
    holes = [(a - interictal_gap, b + interictal_gap) for a, b in seizures]
    return sum(_subtract(s, holes) for s in spans)


def patient_timeline(files: Mapping[str, FileSummary]) -> tuple[list[tuple[float, float]], list[tuple[float, float]]]:
    """Recorded spans and raw absolute seizures for one patient's summary."""
    offsets = file_offsets(files)
    spans, seizures = [], []
    for name, f in files.items():
        t0 = offsets[name]
        if f.duration is None:
            raise ValueError(f"{name}: no File End Time")
        spans.append((t0, t0 + f.duration))
        seizures += [(t0 + a, t0 + b) for a, b in f.seizures]
    return spans, seizures


def select_patients(dataset: Mapping[str, Mapping[str, FileSummary]], min_seizures: int = 2,
                    min_interictal: float = 3 * 3600.0, merge_gap: float = MERGE_GAP,
                    interictal_gap: float = INTERICTAL_GAP) -> list[str]:
    """Patients with enough merged seizures and enough interictal recording."""
    keep = []
    for pid in sorted(dataset):
        spans, seizures = patient_timeline(dataset[pid])
        merged = merge_seizures(seizures, merge_gap)
        if len(merged) < min_seizures:
            continue
        if interictal_seconds(spans, merged, interictal_gap) < min_interictal:
            continue
        keep.append(pid)
    return keep


def window_index(windows: Iterable[LabeledWindow]) -> str:
    lines = ["patient,source,window_start,label,onset"]
    for w in windows:
        onset = "" if w.onset is None else repr(float(w.onset))
        lines.append(f"{w.patient_id},{w.source},{w.window_start!r},{w.label},{onset}")
    return "\n".join(lines) + "\n"


def window_matrix(windows: Sequence[LabeledWindow]) -> np.ndarray:
    return np.stack([w.samples for w in windows])
