"""Command-line entry point.

Every option can come from a flag, from a ``key = value`` config file passed
with ``--config``, or from the built-in default, in that order of precedence.
Config keys use underscores (``k_sigma``, ``horizon_min``). Keys without a
flag: device parameters (``alpha`` ... ``eta``), training hyperparameters
(``iterations``, ``batch_per_class``, ``lr``, ``temperature``), ``window_s``
and the synthetic dataset shape (``synth_patients``, ``synth_seizures``,
``synth_interictal_s``).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import costmodel, device, features, predictor
from ._util import config_hash
from .device import DeviceParams
from .eegdata import AnnotationError, EdfError, SynthDataset, synthetic_patient
from .eegdata import label_windows, load_patient, scan_dataset, select_patients
from .predictor import TrainConfig
from .waveform import calibrate_thresholds, encode_window

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULTS = {
    "data": "synthetic",
    "out": "memcorr-out",
    "seed": 0,
    "patients": "",
    "horizon_min": 30.0,
    "slot_ns": 40.0,
    "k_sigma": 1.0,
    "bits": 8,
    "catalog": "",
    "channels": 18,
    "workers": 1,
    "window_s": 3.0,
    "synth_patients": 2,
    "synth_seizures": 3,
    "synth_interictal_s": 900.0,
    "pulse_width_ns": 500.0,
    "pulses": 200,
    **{f.name: f.default for f in fields(DeviceParams)},
    **{f.name: f.default for f in fields(TrainConfig) if f.name != "bit_width"},
}
# keys that only name locations; they do not change results
_LOCATION_KEYS = ("out", "config")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--data", help="dataset root, or 'synthetic' (default)")
    common.add_argument("--out", help=f"output directory (default {DEFAULTS['out']})")
    common.add_argument("--seed", type=int, help="run seed (default 0)")
    common.add_argument("--patients", help="comma-separated patient ids (default: all selected)")
    common.add_argument("--horizon-min", type=float, help="preictal horizon in minutes (default 30)")
    common.add_argument("--slot-ns", type=float, help="pulse slot width in ns (default 40)")
    common.add_argument("--k-sigma", type=float, help="threshold multiplier (default 1)")
    common.add_argument("--bits", type=int, help="weight and ADC bit width (default 8)")
    common.add_argument("--catalog", help="component catalog CSV (default: bundled)")
    common.add_argument("--channels", type=int, help="channel count for cost scaling (default 18)")
    common.add_argument("--workers", type=int, help="extraction threads (default 1)")
    parser = _Parser(prog="memcorr", description="RRAM correlation-extraction and seizure-prediction simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("characterize", "device I-V, pulse and overlap tables"),
                       ("encode", "threshold-encode windows into pulse trains"),
                       ("extract", "in-memory correlation maps per window"),
                       ("train", "leave-one-seizure-out training, weights per fold"),
                       ("evaluate", "leave-one-seizure-out metrics table"),
                       ("cost", "area, power, latency and energy report")):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file {path} does not exist")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
        out[key] = value.strip()
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flag > config file > default, casting to the default's type."""
    from_file = read_config(args.config) if args.config else {}
    cfg = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        value = flag if flag is not None else from_file.get(key, default)
        try:
            cfg[key] = type(default)(value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {value!r}") from None
    cfg["command"] = args.command
    for key in ("bits", "channels", "workers", "iterations", "batch_per_class", "pulses", "synth_patients",
                "synth_seizures"):
        if cfg[key] < (0 if key == "iterations" else 1):
            raise UsageError(f"{key} must be positive")
    for key in ("slot_ns", "k_sigma", "horizon_min", "window_s", "pulse_width_ns", "lr", "temperature"):
        if not cfg[key] > 0:
            raise UsageError(f"{key} must be > 0")
    return cfg


def run_hash(cfg: dict) -> str:
    return config_hash({k: v for k, v in cfg.items() if k not in _LOCATION_KEYS})


def device_params(cfg: dict) -> DeviceParams:
    try:
        return DeviceParams(**{f.name: cfg[f.name] for f in fields(DeviceParams)})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(cfg["iterations"], cfg["batch_per_class"], cfg["lr"], cfg["temperature"], cfg["bits"])


class Writer:
    """Writes files under the output directory, each with a config-hash header."""

    def __init__(self, cfg: dict):
        self.root = Path(cfg["out"])
        self.header = f"# memcorr {cfg['command']} config={run_hash(cfg)} seed={cfg['seed']}\n"
        self.written: list[Path] = []

    def __call__(self, name: str, body: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.header + body)
        self.written.append(path)
        return path


def _f(x) -> str:
    return repr(float(x))


def _safe(window_id: str) -> str:
    return window_id.replace(":", "_").replace("/", "_")


# --- data ------------------------------------------------------------------------

def load_windows(cfg: dict) -> dict[str, list]:
    """Labeled windows per patient, in canonical (patient, start time) order."""
    wanted = [p.strip() for p in cfg["patients"].split(",") if p.strip()]
    horizon = cfg["horizon_min"] * 60.0
    out = {}
    if cfg["data"] == "synthetic":
        for k in range(cfg["synth_patients"]):
            pid = f"synth{k + 1:02d}"
            if wanted and pid not in wanted:
                continue
            ds = SynthDataset(n_seizures=cfg["synth_seizures"], horizon=horizon,
                              interictal_seconds=cfg["synth_interictal_s"], patient_id=pid)
            out[pid], _ = synthetic_patient(ds, cfg["seed"] + k)
    else:
        root = Path(cfg["data"])
        if not root.is_dir():
            raise FileNotFoundError(f"data directory {root} does not exist")
        selected = select_patients(scan_dataset(root))
        for pid in wanted or selected:
            if pid not in selected:
                print(f"notice: skipping {pid}: not among the selected patients", file=sys.stderr)
                continue
            out[pid] = label_windows(load_patient(root / pid), horizon)
    for pid in list(out):
        if not out[pid]:
            print(f"notice: skipping {pid}: no labeled windows", file=sys.stderr)
            del out[pid]
        else:
            out[pid] = sorted(out[pid], key=lambda w: w.window_start)
    if not out:
        raise ValueError("no patients with labeled windows")
    return dict(sorted(out.items()))


# --- subcommands -------------------------------------------------------------------

def cmd_characterize(cfg: dict, write: Writer) -> str:
    params = device_params(cfg)
    width = cfg["pulse_width_ns"] * 1e-9
    iv = device.iv_sweep(params, -1.6, 1.6, 161, 1e-6)
    write("iv_sweep.csv", "volts,amperes,w\n" + "".join(f"{_f(v)},{_f(i)},{_f(w)}\n" for v, i, w in iv))
    ltp = device.pulse_programming(params, 1.6, width, cfg["pulses"])
    ltd = device.pulse_programming(params, -1.6, width, cfg["pulses"], w0=float(ltp[-1, 1]))
    for name, table in (("pulse_ltp.csv", ltp), ("pulse_ltd.csv", ltd)):
        write(name, "pulse,w,read_amperes\n" + "".join(f"{int(k)},{_f(w)},{_f(i)}\n" for k, w, i in table))
    offsets = np.round(np.arange(-10, 11) * 50e-9, 15)
    curve = device.overlap_curve(params, offsets, width)
    write("overlap.csv", "dt_s,delta_g_s\n" + "".join(f"{_f(dt)},{_f(g)}\n" for dt, g in curve))
    g0 = device.overlap_response(params, width, dt_offset=0.0)
    g_far = device.overlap_response(params, width, dt_offset=width)
    dw_hi, dw_lo = device.delta_w(params, 1.6, width), device.delta_w(params, 0.8, width)
    summary = (f"delta_w_1.6V: {_f(dw_hi)}\ndelta_w_0.8V: {_f(dw_lo)}\ndelta_w_ratio: {_f(dw_hi / dw_lo)}\n"
               f"delta_g_overlap: {_f(g0)}\ndelta_g_offset_one_width: {_f(g_far)}\noverlap_ratio: {_f(g0 / g_far)}\n")
    write("summary.txt", summary)
    return summary


def _thresholds(windows, cfg):
    return calibrate_thresholds(windows, cfg["k_sigma"], slot_width=cfg["slot_ns"] * 1e-9)


def _threshold_table(enc) -> str:
    return "channel,v_pth,v_nth\n" + "".join(f"{k},{_f(c.v_pth)},{_f(c.v_nth)}\n" for k, c in enumerate(enc))


def cmd_encode(cfg: dict, write: Writer) -> str:
    lines = []
    for pid, windows in load_windows(cfg).items():
        enc = _thresholds(windows, cfg)
        write(f"{pid}/thresholds.csv", _threshold_table(enc))
        index = ["window,label,positive_pulses,negative_pulses"]
        for w in windows:
            pos, neg = encode_window(w.samples, enc)
            write(f"{pid}/trains/{_safe(w.window_id)}.txt", "".join(t.to_text() for t in pos + neg))
            index.append(f"{w.window_id},{w.label},{sum(t.n_pulses for t in pos)},{sum(t.n_pulses for t in neg)}")
        write(f"{pid}/index.csv", "\n".join(index) + "\n")
        lines.append(f"{pid}: {len(windows)} windows encoded")
    return "\n".join(lines) + "\n"


def cmd_extract(cfg: dict, write: Writer) -> str:
    params = device_params(cfg)
    lines = []
    for pid, windows in load_windows(cfg).items():
        enc = _thresholds(windows, cfg)
        write(f"{pid}/thresholds.csv", _threshold_table(enc))
        maps = features.extract_batch(windows, enc, params, workers=cfg["workers"])
        index = ["window,label,mean_offdiag_s,mean_diag_s"]
        for m in maps:
            write(f"{pid}/maps/{_safe(m.window_id)}.txt", m.to_text())
            index.append(f"{m.window_id},{m.label},{_f(m.off_diagonal.mean())},{_f(np.diag(m.values).mean())}")
        write(f"{pid}/index.csv", "\n".join(index) + "\n")
        lines.append(f"{pid}: {len(maps)} maps")
    return "\n".join(lines) + "\n"


def _loso(cfg: dict) -> list[tuple[str, predictor.PredictionMetrics, list, list]]:
    params = device_params(cfg)
    results = []
    for pid, windows in load_windows(cfg).items():
        try:
            metrics, folds = predictor.leave_one_seizure_out(
                windows, params, cfg["k_sigma"], train_config(cfg), cfg["seed"],
                slot_width=cfg["slot_ns"] * 1e-9, patient_id=pid, workers=cfg["workers"])
        except ValueError as exc:
            if "insufficient" not in str(exc) and "degenerate" not in str(exc):
                raise
            print(f"notice: skipping {pid}: {exc}", file=sys.stderr)
            continue
        results.append((pid, metrics, folds, windows))
    if not results:
        raise ValueError("no patient has enough seizures for leave-one-seizure-out")
    return results


def cmd_train(cfg: dict, write: Writer) -> str:
    rows = ["patient,fold,onset_s,test_windows,adc1_full_scale_A,adc2_full_scale_A,hidden_scale_A"]
    for pid, _, folds, _ in _loso(cfg):
        for k, f in enumerate(folds):
            write(f"{pid}/fold{k}.weights", f.weights.to_text())
            rows.append(f"{pid},{k},{_f(f.onset)},{len(f.test_ids)},{_f(f.stats['adc1_full_scale_A'])},"
                        f"{_f(f.stats['adc2_full_scale_A'])},{_f(f.stats['hidden_scale_A'])}")
    body = "\n".join(rows) + "\n"
    write("folds.csv", body)
    return body


def cmd_evaluate(cfg: dict, write: Writer) -> str:
    results = _loso(cfg)
    for pid, _, folds, windows in results:
        pred = {k: v for f in folds for k, v in f.predictions.items()}
        write(f"{pid}/predictions.csv", "window,label,prediction\n"
              + "".join(f"{w.window_id},{w.label},{pred[w.window_id]}\n" for w in windows))
    table = predictor.metrics_table([m for _, m, _, _ in results])
    write("metrics.csv", table)
    return table


def cmd_cost(cfg: dict, write: Writer) -> str:
    catalog = cfg["catalog"] or None
    if catalog is not None and not Path(catalog).is_file():
        raise FileNotFoundError(f"catalog {catalog} does not exist")
    report = costmodel.pipeline_cost(cfg["window_s"], 256.0, cfg["slot_ns"] * 1e-9, catalog, cfg["channels"])
    text = report.to_text()
    write("cost.txt", text)
    write("cost.csv", report.to_records())
    return text


COMMANDS = {"characterize": cmd_characterize, "encode": cmd_encode, "extract": cmd_extract,
            "train": cmd_train, "evaluate": cmd_evaluate, "cost": cmd_cost}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        text = COMMANDS[cfg["command"]](cfg, Writer(cfg))
    except UsageError as exc:
        print(f"memcorr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, EdfError, AnnotationError, ValueError) as exc:
        print(f"memcorr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"memcorr: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
