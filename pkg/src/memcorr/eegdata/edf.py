"""EDF reader (and a minimal writer for fixtures and synthetic exports).

Only continuous 16-bit EDF / EDF+C is supported. Samples are converted to
microvolts with each signal's physical/digital calibration.
"""

from __future__ import annotations

import math

import numpy as np

from .recording import Recording

_UNIT_TO_UV = {"uv": 1.0, "µv": 1.0, "mv": 1e3, "v": 1e6, "nv": 1e-3}
_ANNOTATION_LABEL = "EDF Annotations"


class EdfError(ValueError):
    pass


def _field(buf: bytes, pos: int, width: int) -> tuple[str, int]:
    if pos + width > len(buf):
        raise EdfError("unexpected end of data in header")
    return buf[pos:pos + width].decode("latin-1").strip(), pos + width


def _num(text: str, what: str, cast=float):
    try:
        return cast(text)
    except ValueError:
        raise EdfError(f"malformed header field {what}: {text!r}") from None


def parse_edf(data: bytes, patient_id: str = "", source: str = "") -> Recording:
    if len(data) < 256:
        raise EdfError("unexpected end of data: file shorter than the EDF header")
    pos = 0
    version, pos = _field(data, pos, 8)
    if version != "0":
        raise EdfError(f"unsupported EDF version field {version!r}")
    _, pos = _field(data, pos, 80)  # patient
    _, pos = _field(data, pos, 80)  # recording
    _, pos = _field(data, pos, 8)  # start date
    _, pos = _field(data, pos, 8)  # start time
    header_bytes, pos = _field(data, pos, 8)
    reserved, pos = _field(data, pos, 44)
    n_records, pos = _field(data, pos, 8)
    record_duration, pos = _field(data, pos, 8)
    ns, pos = _field(data, pos, 4)

    header_bytes = _num(header_bytes, "header bytes", int)
    n_records = _num(n_records, "number of data records", int)
    record_duration = _num(record_duration, "record duration")
    ns = _num(ns, "number of signals", int)
    if reserved.startswith("EDF+D"):
        raise EdfError("discontinuous EDF+D files are not supported")
    if ns <= 0:
        raise EdfError("EDF file declares no signals")
    if header_bytes != 256 * (ns + 1):
        raise EdfError(f"header size {header_bytes} inconsistent with {ns} signals")
    if len(data) < header_bytes:
        raise EdfError("unexpected end of data in signal headers")

    def column(width, cast=None, what=""):
        nonlocal pos
        out = []
        for _ in range(ns):
            text, pos = _field(data, pos, width)
            out.append(_num(text, what, cast) if cast else text)
        return out

    labels = column(16)
    column(80)  # transducer
    units = column(8)
    pmin = np.array(column(8, float, "physical minimum"))
    pmax = np.array(column(8, float, "physical maximum"))
    dmin = np.array(column(8, int, "digital minimum"), dtype=float)
    dmax = np.array(column(8, int, "digital maximum"), dtype=float)
    column(80)  # prefilter
    per_record = np.array(column(8, int, "samples per record"))
    if np.any(per_record <= 0):
        raise EdfError("samples per record must be positive")
    if np.any(dmax == dmin):
        raise EdfError("digital minimum equals digital maximum")

    record_size = int(per_record.sum()) * 2
    payload = len(data) - header_bytes
    if n_records == -1:
        if payload % record_size:
            raise EdfError("unexpected end of data: partial data record")
        n_records = payload // record_size
    if n_records < 0:
        raise EdfError(f"invalid number of data records {n_records}")
    if payload < n_records * record_size:
        raise EdfError("unexpected end of data")

    keep = [k for k, lab in enumerate(labels) if lab != _ANNOTATION_LABEL]
    rates = {int(per_record[k]) for k in keep}
    if len(rates) > 1:
        raise EdfError(f"mixed sampling rates {sorted(rates)} are not supported")
    if record_duration <= 0:
        raise EdfError("record duration must be positive")
    n_per = rates.pop() if rates else 0

    raw = np.frombuffer(data, dtype="<i2", count=n_records * record_size // 2, offset=header_bytes)
    raw = raw.reshape(n_records, -1) if n_records else raw.reshape(0, record_size // 2)
    offsets = np.concatenate([[0], np.cumsum(per_record)])
    samples = np.empty((len(keep), n_records * n_per))
    for row, k in enumerate(keep):
        digital = raw[:, offsets[k]:offsets[k + 1]].reshape(-1).astype(float)
        gain = (pmax[k] - pmin[k]) / (dmax[k] - dmin[k])
        unit = _UNIT_TO_UV.get(units[k].lower(), 1.0)
        samples[row] = ((digital - dmin[k]) * gain + pmin[k]) * unit
    return Recording(patient_id, [labels[k] for k in keep], n_per / record_duration, samples, source=source)


def write_edf(rec: Recording, record_duration: float = 1.0, physical_range: float | None = None) -> bytes:
    """Serialize a recording as 16-bit EDF in microvolts.

    ``physical_range`` sets a symmetric +/- calibration range; by default the
    largest absolute sample (at least 1 uV) is used.
    """
    per_record = int(round(rec.sampling_rate * record_duration))
    if per_record <= 0 or abs(per_record - rec.sampling_rate * record_duration) > 1e-9:
        raise ValueError("record duration must hold a whole number of samples")
    ns = len(rec.labels)
    n_records = rec.n_samples // per_record
    lim = int(math.ceil(physical_range or max(1.0, float(np.max(np.abs(rec.samples), initial=0.0)))))

    def pad(value, width):
        text = str(value)
        if len(text) > width:
            text = f"{float(value):.{max(1, width - 6)}g}"[:width]
        return text.ljust(width).encode("latin-1")

    head = b"".join([
        pad("0", 8), pad(rec.patient_id, 80), pad(rec.source, 80),
        pad("01.01.01", 8), pad("00.00.00", 8), pad(256 * (ns + 1), 8),
        pad("", 44), pad(n_records, 8), pad(record_duration, 8), pad(ns, 4),
    ])
    head += b"".join(pad(lab, 16) for lab in rec.labels)
    head += b"".join(pad("", 80) for _ in range(ns))
    head += b"".join(pad("uV", 8) for _ in range(ns))
    head += b"".join(pad(-lim, 8) for _ in range(ns))
    head += b"".join(pad(lim, 8) for _ in range(ns))
    head += b"".join(pad(-32768, 8) for _ in range(ns))
    head += b"".join(pad(32767, 8) for _ in range(ns))
    head += b"".join(pad("", 80) for _ in range(ns))
    head += b"".join(pad(per_record, 8) for _ in range(ns))
    head += b"".join(pad("", 32) for _ in range(ns))

    x = rec.samples[:, :n_records * per_record]
    digital = np.round((x + lim) * 65535.0 / (2 * lim) - 32768.0)
    digital = np.clip(digital, -32768, 32767).astype("<i2")
    body = digital.reshape(ns, n_records, per_record).transpose(1, 0, 2).tobytes()
    return head + body
