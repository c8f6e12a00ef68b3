"""Area, power, latency and energy roll-up for the two accelerator phases.

Every component is assumed to run for the whole phase unless its catalog row
gives its own total latency. Component energy is ``power * total latency``
(mW * us = nJ). Phase power is the time-averaged value, phase energy over
phase latency; the instantaneous sum of component powers is reported too.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from .waveform import extraction_latency

EXTRACTING = "extracting"
COMPUTING = "computing"
PHASES = (EXTRACTING, COMPUTING)
CORE_KINDS = frozenset({"crossbar", "driver", "sample_hold", "shift_adder", "mux", "mux_decoder"})
BASE_CHANNELS = 18
COMPUTING_LATENCY_US = 0.836

_COLUMNS = ["phase", "component", "kind", "spec", "count", "area_mm2", "power_mw", "latency_us",
            "total_latency_us", "printed_energy_nj", "technology"]


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str
    count: float
    area: float  # mm^2, total for ``count`` units
    power: float  # mW, total for ``count`` units
    latency: float  # us, per operation
    total_latency: float | None = None  # us; None means the whole phase
    technology: str = ""
    spec: str = ""
    printed_energy: float | None = None  # nJ as printed in the catalog

    def __post_init__(self):
        for attr in ("count", "area", "power", "latency"):
            if getattr(self, attr) < 0:
                raise ValueError(f"{self.name}: {attr} must be >= 0")
        if self.total_latency is not None and self.total_latency < 0:
            raise ValueError(f"{self.name}: total latency must be >= 0")

    @property
    def core(self) -> bool:
        return self.kind in CORE_KINDS


@dataclass
class PhasePlan:
    phase: str
    components: list[ComponentSpec]
    total_latency: float  # us
    printed: dict = field(default_factory=dict)  # the catalog's Total row
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.total_latency < 0:
            raise ValueError(f"{self.phase}: total latency must be >= 0")


@dataclass
class ComponentCost:
    name: str
    kind: str
    area: float
    power: float
    latency: float
    energy: float
    printed_energy: float | None


@dataclass
class CostReport:
    phase: str
    components: list[ComponentCost]
    total_latency: float
    area: float
    energy: float
    power: float  # time-averaged, energy / total latency
    peak_power: float  # sum of component powers
    printed: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"[{self.phase}]",
                 f"{'component':<16}{'area_mm2':>12}{'power_mW':>12}{'T_lat_us':>12}{'energy_nJ':>12}{'printed_nJ':>12}"]
        for c in self.components:
            printed = "-" if c.printed_energy is None else f"{c.printed_energy:.3e}"
            lines.append(f"{c.name:<16}{c.area:>12.3e}{c.power:>12.3e}{c.latency:>12.3e}{c.energy:>12.3e}"
                         f"{printed:>12}")
        lines.append(f"{'total':<16}{self.area:>12.3e}{self.power:>12.3e}{self.total_latency:>12.3e}"
                     f"{self.energy:>12.3e}{self.printed.get('energy', float('nan')):>12.3e}")
        lines.append(f"peak power (sum of components): {self.peak_power:.4f} mW")
        return "\n".join(lines) + "\n"

    def to_records(self) -> str:
        rows = ["phase,component,area_mm2,power_mw,total_latency_us,energy_nj,printed_energy_nj"]
        for c in self.components:
            printed = "" if c.printed_energy is None else repr(c.printed_energy)
            rows.append(f"{self.phase},{c.name},{c.area!r},{c.power!r},{c.latency!r},{c.energy!r},{printed}")
        rows.append(f"{self.phase},TOTAL,{self.area!r},{self.power!r},{self.total_latency!r},{self.energy!r},"
                    f"{self.printed.get('energy', '')!r}")
        return "\n".join(rows) + "\n"


# --- catalog --------------------------------------------------------------------

def _num(value: str, row: int, column: str, optional: bool = False):
    value = value.strip()
    if not value:
        if optional:
            return None
        raise ValueError(f"catalog row {row}: missing {column}")
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"catalog row {row}: {column} {value!r} is not a number") from None


def default_catalog_text() -> str:
    return resources.files("memcorr").joinpath("data/components.csv").read_text()


def load_catalog(source=None) -> dict[str, PhasePlan]:
    """Parse a catalog (path, text, or None for the bundled one) into phase plans.

    Errors name the 1-based line of the offending row.
    """
    if source is None:
        text = default_catalog_text()
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"catalog {path} does not exist")
        text = path.read_text()
    else:
        text = source
    components: dict[str, list[ComponentSpec]] = {p: [] for p in PHASES}
    printed: dict[str, dict] = {p: {} for p in PHASES}
    latency: dict[str, float | None] = {p: None for p in PHASES}
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [f.strip() for f in fields]
            missing = [c for c in _COLUMNS if c not in header]
            if missing:
                raise ValueError(f"catalog row {lineno}: header lacks {missing}")
            continue
        if len(fields) != len(header):
            raise ValueError(f"catalog row {lineno}: expected {len(header)} fields, got {len(fields)}")
        rec = dict(zip(header, fields))
        phase = rec["phase"].strip()
        if phase not in PHASES:
            raise ValueError(f"catalog row {lineno}: unknown phase {phase!r}")
        if rec["kind"].strip() == "total":
            printed[phase] = {k: _num(rec[c], lineno, c, True) for k, c in
                              (("area", "area_mm2"), ("power", "power_mw"), ("energy", "printed_energy_nj"))}
            latency[phase] = _num(rec["total_latency_us"], lineno, "total_latency_us", True)
            continue
        try:
            components[phase].append(ComponentSpec(
                rec["component"].strip(), rec["kind"].strip(), _num(rec["count"], lineno, "count"),
                _num(rec["area_mm2"], lineno, "area_mm2"), _num(rec["power_mw"], lineno, "power_mw"),
                _num(rec["latency_us"], lineno, "latency_us"),
                _num(rec["total_latency_us"], lineno, "total_latency_us", True),
                rec["technology"].strip(), rec["spec"].strip(),
                _num(rec["printed_energy_nj"], lineno, "printed_energy_nj", True)))
        except ValueError as exc:
            if str(exc).startswith("catalog row"):
                raise
            raise ValueError(f"catalog row {lineno}: {exc}") from None
    if header is None:
        raise ValueError("catalog is empty")
    plans = {}
    for phase in PHASES:
        if latency[phase] is None:
            latency[phase] = extraction_latency() * 1e6 if phase == EXTRACTING else COMPUTING_LATENCY_US
        plans[phase] = PhasePlan(phase, components[phase], latency[phase], printed[phase])
    return plans


def plan_to_csv(plans: Sequence[PhasePlan]) -> str:
    """Serialize plans back to catalog form; ``load_catalog`` reads it."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COLUMNS)

    def opt(v):
        return "" if v is None else repr(float(v))

    for plan in plans:
        for c in plan.components:
            writer.writerow([plan.phase, c.name, c.kind, c.spec, repr(float(c.count)), repr(c.area), repr(c.power),
                             repr(c.latency), opt(c.total_latency), opt(c.printed_energy), c.technology])
        p = plan.printed
        writer.writerow([plan.phase, "Total", "total", "", "", opt(p.get("area")), opt(p.get("power")), "",
                         repr(float(plan.total_latency)), opt(p.get("energy")), ""])
    return buf.getvalue()


# --- roll-up --------------------------------------------------------------------

def rollup(plan: PhasePlan) -> CostReport:
    if not plan.components:
        raise ValueError(f"{plan.phase}: plan has no components")
    rows = []
    for c in plan.components:
        t = plan.total_latency if c.total_latency is None else c.total_latency
        rows.append(ComponentCost(c.name, c.kind, c.area, c.power, t, c.power * t, c.printed_energy))
    energy = sum(r.energy for r in rows)
    return CostReport(plan.phase, rows, plan.total_latency, sum(r.area for r in rows), energy,
                      energy / plan.total_latency if plan.total_latency > 0 else 0.0,
                      sum(r.power for r in rows), dict(plan.printed))


@dataclass
class PipelineCost:
    extracting: CostReport
    computing: CostReport
    notes: list[str] = field(default_factory=list)

    @property
    def energy_nj(self) -> float:
        return self.extracting.energy + self.computing.energy

    @property
    def latency_us(self) -> float:
        return self.extracting.total_latency + self.computing.total_latency

    @property
    def area_mm2(self) -> float:
        """Chip area: hardware shared by both phases is counted once, at its larger footprint."""
        largest: dict[str, float] = {}
        for rep in (self.extracting, self.computing):
            for c in rep.components:
                largest[c.name] = max(largest.get(c.name, 0.0), c.area)
        return sum(largest.values())

    @property
    def core_energy_nj(self) -> float:
        return sum(c.energy for rep in (self.extracting, self.computing) for c in rep.components
                   if c.kind in CORE_KINDS)

    @property
    def core_share(self) -> float:
        return self.core_energy_nj / self.energy_nj if self.energy_nj else 0.0

    def summary(self) -> dict:
        return {
            "extracting_area_mm2": self.extracting.area, "extracting_power_mw": self.extracting.power,
            "extracting_energy_nj": self.extracting.energy, "extracting_latency_us": self.extracting.total_latency,
            "computing_area_mm2": self.computing.area, "computing_power_mw": self.computing.power,
            "computing_energy_nj": self.computing.energy, "computing_latency_us": self.computing.total_latency,
            "total_energy_nj": self.energy_nj, "total_latency_us": self.latency_us, "chip_area_mm2": self.area_mm2,
            "core_energy_nj": self.core_energy_nj, "core_share": self.core_share,
        }

    def to_text(self) -> str:
        out = self.extracting.to_text() + "\n" + self.computing.to_text() + "\n"
        out += "\n".join(f"{k}: {v:.6g}" for k, v in self.summary().items()) + "\n"
        if self.notes:
            out += "\n" + "\n".join(f"note: {n}" for n in self.notes) + "\n"
        return out

    def to_records(self) -> str:
        body = self.extracting.to_records() + self.computing.to_records().split("\n", 1)[1]
        return body + "".join(f"summary,{k},,,,{v!r},\n" for k, v in self.summary().items())


# --- scaling ---------------------------------------------------------------------

def scale(plan: PhasePlan, rows: int | None = None, cols: int | None = None, channels: int = BASE_CHANNELS,
          window_s: float | None = None, sampling_rate: float = 256.0, slot_width: float = 40e-9) -> PhasePlan:
    """Resize a plan for another channel count, array size or window length.

    Rules, all linear in the obvious unit and listed in ``notes``:
    drivers and sample-and-hold units scale with ``channels / 18``; the
    crossbar scales with its cell count (``rows * cols`` for extraction,
    ``rows * cols + 2 * rows`` for computing, which adds the 18x2 layer);
    other peripherals are unchanged. ``window_s`` resets the extraction
    latency to ``2 * window_s * sampling_rate * slot_width``.
    """
    rows = channels if rows is None else rows
    cols = channels if cols is None else cols
    f = channels / BASE_CHANNELS
    if plan.phase == EXTRACTING:
        cells, base_cells = rows * cols, BASE_CHANNELS * BASE_CHANNELS
    else:
        cells, base_cells = rows * cols + 2 * rows, BASE_CHANNELS * BASE_CHANNELS + 2 * BASE_CHANNELS
    g = cells / base_cells
    out = []
    for c in plan.components:
        if f == 1 and g == 1:
            out.append(c)
        elif c.kind in ("driver", "sample_hold"):
            out.append(replace(c, count=c.count * f, area=c.area * f, power=c.power * f, printed_energy=None))
        elif c.kind == "crossbar":
            spec = f"{rows}x{cols}" if plan.phase == EXTRACTING else f"{rows}x{cols} + {rows}x2"
            out.append(replace(c, area=c.area * g, power=c.power * g, spec=spec, printed_energy=None))
        else:
            out.append(c)
    notes = list(plan.notes)
    if f != 1:
        notes.append(f"drivers and sample-and-hold scaled by {channels}/{BASE_CHANNELS}")
    if g != 1:
        notes.append(f"crossbar scaled by cell count {cells}/{base_cells}")
    latency = plan.total_latency
    if plan.phase == EXTRACTING and window_s is not None:
        latency = extraction_latency(window_s, sampling_rate, slot_width) * 1e6
        if not math.isclose(latency, plan.total_latency, rel_tol=1e-12):
            notes.append(f"extraction latency set to {latency:.6g} us for a {window_s:g} s window")
        else:
            latency = plan.total_latency
    printed = plan.printed if (f == 1 and g == 1 and latency == plan.total_latency) else {}
    return PhasePlan(plan.phase, out, latency, dict(printed), notes)


def pipeline_cost(window_s: float = 3.0, sampling_rate: float = 256.0, slot_width: float = 40e-9,
                  catalog=None, channels: int = BASE_CHANNELS) -> PipelineCost:
    """Both phases for one window, from the catalog and the window configuration."""
    plans = load_catalog(catalog)
    ext = scale(plans[EXTRACTING], channels=channels, window_s=window_s, sampling_rate=sampling_rate,
                slot_width=slot_width)
    comp = scale(plans[COMPUTING], channels=channels)
    return PipelineCost(rollup(ext), rollup(comp), ext.notes + comp.notes)
