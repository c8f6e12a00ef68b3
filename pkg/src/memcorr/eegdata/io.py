"""Dataset layout: ``root/<patient>/<patient>-summary.txt`` plus the files it
names. A listed ``name.edf`` may be replaced by ``name.csv`` (first column
seconds, then one column per channel label)."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .annotations import FileSummary, file_offsets, parse_annotations
from .edf import parse_edf
from .recording import CHANNELS, Recording, select_channels
from .windows import filter_lowpass


def load_csv(path_or_text, patient_id: str = "", source: str = "") -> Recording:
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
        source = source or Path(path_or_text).name
    else:
        text = path_or_text
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 3:
        raise ValueError(f"{source or 'csv'}: need a header and at least two samples")
    header, body = rows[0], np.array(rows[1:], dtype=float)
    t = body[:, 0]
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError(f"{source or 'csv'}: time column must increase strictly")
    fs = 1.0 / float(np.median(dt))
    return Recording(patient_id, [h.strip() for h in header[1:]], round(fs, 9), body[:, 1:].T,
                     start_time=float(t[0]), source=source)


def _summary_path(patient_dir: Path) -> Path:
    hits = sorted(patient_dir.glob("*summary*.txt"))
    if not hits:
        raise FileNotFoundError(f"no summary file in {patient_dir}")
    return hits[0]


def scan_dataset(root) -> dict[str, dict[str, FileSummary]]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    out = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            out[d.name] = parse_annotations(_summary_path(d).read_text(errors="replace"))
        except FileNotFoundError:
            continue
    return out


def load_patient(patient_dir, channels=CHANNELS, cutoff: float | None = 50.0) -> list[Recording]:
    """Load, channel-select and low-pass every file the summary lists."""
    patient_dir = Path(patient_dir)
    files = parse_annotations(_summary_path(patient_dir).read_text(errors="replace"))
    offsets = file_offsets(files)
    recs = []
    for name, info in files.items():
        path = patient_dir / name
        if path.exists():
            rec = parse_edf(path.read_bytes(), patient_dir.name, name)
        elif path.with_suffix(".csv").exists():
            rec = load_csv(path.with_suffix(".csv"), patient_dir.name, name)
            rec.start_time = 0.0
        else:
            raise FileNotFoundError(f"{path} listed in summary but missing")
        rec = select_channels(rec, channels)
        if cutoff is not None:
            rec = filter_lowpass(rec, cutoff)
        rec.start_time = offsets[name]
        rec.seizures = list(info.seizures)
        recs.append(rec)
    return recs
