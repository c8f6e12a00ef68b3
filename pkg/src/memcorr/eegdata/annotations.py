"""CHB-MIT ``chbXX-summary.txt`` parser.

A summary lists, per EDF file, its wall-clock start/end and the seizure
start/end offsets in seconds. Wall-clock times may run past 24:00 or wrap at
midnight; :func:`file_offsets` unwraps them into a monotone patient timeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_PATTERNS = {
    "name": re.compile(r"^File Name:\s*(\S+)\s*$"),
    "start": re.compile(r"^File Start Time:\s*(\d+):(\d+):(\d+)\s*$"),
    "end": re.compile(r"^File End Time:\s*(\d+):(\d+):(\d+)\s*$"),
    "count": re.compile(r"^Number of Seizures in File:\s*(\d+)\s*$"),
    "sz_start": re.compile(r"^Seizure(?:\s+\d+)?\s+Start Time:\s*(\d+(?:\.\d+)?)\s*(?:seconds?)?\s*$"),
    "sz_end": re.compile(r"^Seizure(?:\s+\d+)?\s+End Time:\s*(\d+(?:\.\d+)?)\s*(?:seconds?)?\s*$"),
}
_IGNORED = re.compile(
    r"^(Data Sampling Rate:.*|Channels? in EDF Files?:?.*|Channels changed:?.*|Channel\s+\d+:.*|\*+.*|-+)$"
)


class AnnotationError(ValueError):
    pass


@dataclass
class FileSummary:
    name: str
    start_clock: float | None = None  # seconds since midnight, as printed
    end_clock: float | None = None
    seizures: list[tuple[float, float]] = field(default_factory=list)
    declared: int | None = None

    @property
    def duration(self) -> float | None:
        if self.start_clock is None or self.end_clock is None:
            return None
        d = self.end_clock - self.start_clock
        return d + 86400 if d < 0 else d


def _clock(m) -> float:
    h, mi, s = (int(x) for x in m.groups())
    return float(h * 3600 + mi * 60 + s)


def parse_annotations(text: str) -> dict[str, FileSummary]:
    """Seizure intervals per file, in file order."""
    files: dict[str, FileSummary] = {}
    cur: FileSummary | None = None
    pending: float | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or _IGNORED.match(line):
            continue
        for key, pat in _PATTERNS.items():
            m = pat.match(line)
            if m:
                break
        else:
            raise AnnotationError(f"line {lineno}: cannot parse {line!r}")
        if key == "name":
            if pending is not None:
                raise AnnotationError(f"line {lineno}: seizure start without end in {cur.name}")
            cur = files.setdefault(m.group(1), FileSummary(m.group(1)))
            continue
        if cur is None:
            raise AnnotationError(f"line {lineno}: {line!r} appears before any File Name")
        if key == "start":
            cur.start_clock = _clock(m)
        elif key == "end":
            cur.end_clock = _clock(m)
        elif key == "count":
            cur.declared = int(m.group(1))
        elif key == "sz_start":
            if pending is not None:
                raise AnnotationError(f"line {lineno}: two seizure starts in a row")
            pending = float(m.group(1))
        else:
            if pending is None:
                raise AnnotationError(f"line {lineno}: seizure end without start")
            end = float(m.group(1))
            if end < pending:
                raise AnnotationError(f"line {lineno}: invalid interval ({pending}, {end})")
            cur.seizures.append((pending, end))
            pending = None
    if pending is not None:
        raise AnnotationError("summary ends inside a seizure record")
    for f in files.values():
        if f.declared is not None and f.declared != len(f.seizures):
            raise AnnotationError(f"{f.name}: declares {f.declared} seizures, lists {len(f.seizures)}")
    return files


def file_offsets(files: dict[str, FileSummary]) -> dict[str, float]:
    """Start of each file on a continuous timeline (seconds, first file at 0).

    Clock readings that go backwards are taken to have crossed midnight.
    """
    offsets = {}
    day = 0.0
    prev = None
    first = None
    for name, f in files.items():
        if f.start_clock is None:
            raise AnnotationError(f"{name}: no File Start Time, cannot place on timeline")
        t = f.start_clock % 86400 + day
        if prev is not None and t < prev:
            day += 86400
            t += 86400
        if first is None:
            first = t
        offsets[name] = t - first
        prev = t
    return offsets
