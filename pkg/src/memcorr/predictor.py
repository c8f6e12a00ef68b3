"""Two-layer constrained network: training, crossbar deployment, inference and
seizure-prediction metrics.

Forward model, shared by training and deployment::

    x_ij   = I(w_ij, 1 V) / I(1, 1 V)            device current of the feature map
    h_j    = sum_i W1_ij * x_ij                   first layer, one column per hidden unit
    z_c    = sum_j relu(h_j) * e(W2_jc)          second layer, e(w) = I(w, 1 V) / I(1, 1 V)

Both weight matrices stay in [0, 1]. The loss sees ``g * z / (z_0 + z_1)``
with a fixed temperature ``g``: dividing by the positive logit sum leaves the
argmax untouched but makes the objective scale free, so training has to widen
the margin relative to the large common-mode current instead of inflating a
gain. That relative margin is what survives 8-bit conversion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import crossbar, device
from ._util import config_hash, substream
from .crossbar import INTERICTAL as CLS_INTERICTAL
from .crossbar import PREICTAL as CLS_PREICTAL
from .crossbar import AdcConfig, BitSerialWeights, CrossbarArray
from .device import DeviceParams
from .eegdata.recording import INTERICTAL, PREICTAL

N_CHANNELS = 18
N_CLASSES = 2
CLASS_NAMES = {CLS_INTERICTAL: INTERICTAL, CLS_PREICTAL: PREICTAL}
REFRACTORY = 30 * 60.0


@dataclass
class NetworkWeights:
    layer1: np.ndarray  # (18, 18); column j feeds hidden unit j
    layer2: np.ndarray  # (18, 2)
    bit_width: int = 8
    scale: float = 1.0
    temperature: float = 50.0  # loss temperature used in training
    seed: int = 0
    config_hash: str = ""

    def __post_init__(self):
        self.layer1 = np.asarray(self.layer1, dtype=float)
        self.layer2 = np.asarray(self.layer2, dtype=float)
        if self.layer1.shape != (N_CHANNELS, N_CHANNELS):
            raise ValueError(f"layer1 must be 18x18, got {self.layer1.shape}")
        if self.layer2.shape != (N_CHANNELS, N_CLASSES):
            raise ValueError(f"layer2 must be 18x2, got {self.layer2.shape}")
        for name, m in (("layer1", self.layer1), ("layer2", self.layer2)):
            if not np.all(np.isfinite(m)) or m.min() < 0.0 or m.max() > 1.0:
                raise ValueError(f"{name} weights must lie in [0, 1]")

    def to_text(self) -> str:
        lines = ["# memcorr network weights v1",
                 f"# bit_width={self.bit_width} scale={self.scale!r} temperature={self.temperature!r} "
                 f"seed={self.seed} config={self.config_hash}",
                 "[layer1]"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.layer1]
        lines.append("[layer2]")
        lines += [" ".join(repr(float(v)) for v in row) for row in self.layer2]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkWeights":
        meta, blocks, cur = {}, {}, None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line.startswith("["):
                cur = line.strip("[]")
                blocks[cur] = []
            elif cur is None:
                raise ValueError("matrix row before any [layer] header")
            else:
                blocks[cur].append([float(v) for v in line.split()])
        if "layer1" not in blocks or "layer2" not in blocks:
            raise ValueError("weights text needs [layer1] and [layer2] blocks")
        return cls(np.array(blocks["layer1"]), np.array(blocks["layer2"]), int(meta.get("bit_width", 8)),
                   float(meta.get("scale", 1.0)), float(meta.get("temperature", 50.0)), int(meta.get("seed", 0)),
                   meta.get("config", ""))


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 3000
    batch_per_class: int = 64
    lr: float = 0.02
    temperature: float = 50.0
    bit_width: int = 8


# --- float model --------------------------------------------------------------

def _unit_current(params: DeviceParams) -> float:
    return float(device.current(1.0, params, crossbar.COMPUTE_VOLTAGE))


def normalized_inputs(maps, params: DeviceParams) -> np.ndarray:
    """``(B, 18, 18)`` device currents at the compute voltage over ``I(1, 1 V)``."""
    states = np.stack([np.asarray(getattr(m, "states", m), dtype=float) for m in maps])
    return device.current(states, params, crossbar.COMPUTE_VOLTAGE) / _unit_current(params)


def effective_layer2(layer2: np.ndarray, params: DeviceParams) -> np.ndarray:
    return device.current(layer2, params, crossbar.COMPUTE_VOLTAGE) / _unit_current(params)


def float_logits(weights: NetworkWeights, x: np.ndarray, params: DeviceParams) -> np.ndarray:
    h = np.maximum((weights.layer1 * x).sum(axis=-2), 0.0)
    return h @ effective_layer2(weights.layer2, params)


def float_predict(weights: NetworkWeights, x: np.ndarray, params: DeviceParams) -> np.ndarray:
    z = float_logits(weights, x, params)
    return (z[..., CLS_PREICTAL] > z[..., CLS_INTERICTAL]).astype(int)


# --- training -----------------------------------------------------------------

def _class_index(label) -> int:
    if label in (PREICTAL, CLS_PREICTAL, True):
        return CLS_PREICTAL
    if label in (INTERICTAL, CLS_INTERICTAL, False):
        return CLS_INTERICTAL
    raise ValueError(f"unknown label {label!r}")


def _canonical(maps, labels):
    # sort by window id, then content, so training does not depend on input order
    keys = [(str(getattr(m, "window_id", "")), np.asarray(getattr(m, "states", m)).tobytes()) for m in maps]
    order = sorted(range(len(maps)), key=lambda k: keys[k])
    return [maps[k] for k in order], [labels[k] for k in order]


def initial_weights(seed: int, cfg: TrainConfig = TrainConfig()) -> NetworkWeights:
    rng = substream(seed, "predictor.init")
    return NetworkWeights(rng.uniform(0.0, 1.0, (N_CHANNELS, N_CHANNELS)), rng.uniform(0.4, 0.6, (N_CHANNELS, 2)),
                          cfg.bit_width, 1.0, cfg.temperature, seed)


def loss_and_grads(w1: np.ndarray, w2: np.ndarray, x: np.ndarray, y: np.ndarray, c0: float,
                   temperature: float) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy of ``temperature * z / sum(z)`` and its gradients."""
    h = (w1 * x).sum(axis=1)
    e = c0 + (1.0 - c0) * w2
    r = np.maximum(h, 0.0)
    z = r @ e
    total = np.maximum(z.sum(axis=1, keepdims=True), 1e-300)
    zt = temperature * z / total
    zt = zt - zt.max(axis=1, keepdims=True)
    logp = zt - np.log(np.exp(zt).sum(axis=1, keepdims=True))
    rows = np.arange(len(y))
    loss = float(-logp[rows, y].mean())
    p = np.exp(logp)
    p[rows, y] -= 1.0
    p /= len(y)
    dz = temperature / total * (p - (p * z).sum(axis=1, keepdims=True) / total)
    return loss, [np.einsum("bj,bij->ij", (dz @ e.T) * (h > 0), x), (1.0 - c0) * (r.T @ dz)]


def train(maps: Sequence, labels: Sequence | None = None, cfg: TrainConfig = TrainConfig(), seed: int = 0,
          params: DeviceParams | None = None) -> NetworkWeights:
    """Projected Adam on softmax cross-entropy with class-balanced mini-batches.

    ``labels`` defaults to each map's ``label`` attribute. Both layers are
    clipped to [0, 1] after every step; the step size follows a cosine decay.
    """
    params = params or DeviceParams()
    if labels is None:
        labels = [getattr(m, "label", None) for m in maps]
    if len(labels) != len(maps):
        raise ValueError("maps and labels differ in length")
    maps, labels = _canonical(list(maps), list(labels))
    y = np.array([_class_index(lab) for lab in labels], dtype=int)
    by_class = [np.flatnonzero(y == c) for c in range(N_CLASSES)]
    if any(len(ix) == 0 for ix in by_class):
        raise ValueError("degenerate training set: both classes are required")
    init = initial_weights(seed, cfg)
    init.config_hash = config_hash({"train": cfg, "device": params, "n": len(maps)})
    if cfg.iterations <= 0:
        return init

    x = normalized_inputs(maps, params)
    c0 = float(effective_layer2(np.zeros(1), params)[0])
    g = cfg.temperature
    theta = [init.layer1.copy(), init.layer2.copy()]
    m1 = [np.zeros_like(t) for t in theta]
    m2 = [np.zeros_like(t) for t in theta]
    b1, b2, eps = 0.9, 0.999, 1e-8
    rng = substream(seed, "predictor.batches")
    n = cfg.iterations
    for it in range(1, n + 1):
        idx = np.concatenate([rng.choice(ix, cfg.batch_per_class) for ix in by_class])
        xb, yb = x[idx], y[idx]
        _, grads = loss_and_grads(theta[0], theta[1], xb, yb, c0, g)
        lr = cfg.lr * 0.5 * (1.0 + math.cos(math.pi * it / n))
        for k, gk in enumerate(grads):
            m1[k] = b1 * m1[k] + (1 - b1) * gk
            m2[k] = b2 * m2[k] + (1 - b2) * gk * gk
            theta[k] = np.clip(theta[k] - lr * (m1[k] / (1 - b1 ** it)) / (np.sqrt(m2[k] / (1 - b2 ** it)) + eps),
                               0.0, 1.0)
    return NetworkWeights(theta[0], theta[1], cfg.bit_width, 1.0, init.temperature, seed, init.config_hash)


# --- deployment -----------------------------------------------------------------

@dataclass
class DeployedModel:
    weights: NetworkWeights
    params: DeviceParams
    layer1: BitSerialWeights
    array2: CrossbarArray
    adc1: AdcConfig
    adc2: AdcConfig
    hidden_scale: float
    hidden_bits: int = 8
    stats: dict = field(default_factory=dict)

    def report(self) -> str:
        rows = [f"{k}\t{v!r}" for k, v in sorted(self.stats.items())]
        return "\n".join(["quantity\tvalue"] + rows) + "\n"


def _plane_currents(layer1: BitSerialWeights, maps, params: DeviceParams) -> np.ndarray:
    cells = normalized_inputs(maps, params) * _unit_current(params)
    return np.einsum("prc,nrc->npc", layer1.planes(), cells)


def _shift_add(codes: np.ndarray, lsb: float, scale: float, bit_width: int) -> np.ndarray:
    # codes: (..., bits, cols)
    acc = (codes * (2 ** np.arange(bit_width))[:, None]).sum(axis=-2)
    return acc * lsb * scale / (2 ** bit_width - 1)


def _batch_hidden(pc1: np.ndarray, fs1: float, adc_bits: int, weights: NetworkWeights) -> np.ndarray:
    adc = AdcConfig(adc_bits, fs1)
    return _shift_add(adc.convert(pc1)[0], adc.lsb, weights.scale, weights.bit_width)


def _batch_planes2(h: np.ndarray, scale: float, hidden_bits: int, i2: np.ndarray) -> np.ndarray:
    codes = crossbar.quantize(np.maximum(h, 0.0), hidden_bits, scale).matrix
    planes = (codes[:, None, :] >> np.arange(hidden_bits)[None, :, None]) & 1
    return planes @ i2  # (N, bits, classes)


MARGINS = tuple(float(m) for m in np.round(np.linspace(1.0, 1.5, 11), 3))


def _search_ranges(weights: NetworkWeights, q1: BitSerialWeights, calibration, params: DeviceParams,
                   i2: np.ndarray, adc_bits: int, hidden_bits: int, margins=MARGINS):
    """Pick both ADC full scales and the hidden scale on calibration maps.

    Each range is a margin (>= 1) times the largest value seen, so nothing
    clips on the calibration data. Among the candidates, keep the one whose
    argmax agrees most often with the float model; ties go to the smallest
    mean error of the logit difference. Rounding on nearly constant bit-planes
    gives every range choice a fixed offset, and this search avoids the
    unlucky ones.
    """
    pc1 = _plane_currents(q1, calibration, params)
    i1 = _unit_current(params)
    zf = float_logits(weights, normalized_inputs(calibration, params), params) * i1 * i1
    df = zf[:, CLS_PREICTAL] - zf[:, CLS_INTERICTAL]
    ref = df > 0
    top1 = float(pc1.max())
    if top1 <= 0:
        return None
    best, best_key = None, None
    for m1 in margins:
        h = _batch_hidden(pc1, m1 * top1, adc_bits, weights)
        top_h = float(np.maximum(h, 0.0).max())
        if top_h <= 0:
            continue
        for mh in margins:
            pc2 = _batch_planes2(h, mh * top_h, hidden_bits, i2)
            top2 = float(pc2.max())
            if top2 <= 0:
                continue
            for m2 in margins:
                adc2 = AdcConfig(adc_bits, m2 * top2)
                z = _shift_add(adc2.convert(pc2)[0], adc2.lsb, mh * top_h, hidden_bits)
                dd = z[:, CLS_PREICTAL] - z[:, CLS_INTERICTAL]
                key = (-int(np.sum((dd > 0) == ref)), float(np.mean(np.abs(dd - df))))
                if best_key is None or key < best_key:
                    best_key, best = key, (m1 * top1, mh * top_h, m2 * top2)
    return best


def deploy(weights: NetworkWeights, params: DeviceParams | None = None, calibration: Sequence | None = None,
           adc_bits: int = 8, hidden_bits: int = 8, margins=MARGINS) -> DeployedModel:
    """Quantize layer 1 into bit-planes and program layer 2 into an 18x2 array.

    With ``calibration`` maps, the two ADC full scales and the hidden scale
    come from :func:`_search_ranges`. Without, layer 1 falls back to the worst
    case (every device at ``w = 1``), which is far coarser, the hidden scale
    to the largest possible layer-1 output, and layer 2 to the sum of its
    column currents, which can never clip.
    """
    params = params or DeviceParams()
    q1 = crossbar.quantize(weights.layer1, weights.bit_width, weights.scale)
    array2 = CrossbarArray(weights.layer2.copy(), params)
    i2 = device.current(array2.w, params, crossbar.COMPUTE_VOLTAGE)
    worst = crossbar.worst_case_full_scale(N_CHANNELS, params)
    fs1, hidden_scale, fs2 = worst, worst * weights.scale, float(i2.sum(axis=0).max())
    if calibration:
        found = _search_ranges(weights, q1, calibration, params, i2, adc_bits, hidden_bits, margins)
        if found is not None:
            fs1, hidden_scale, fs2 = found
    adc1, adc2 = AdcConfig(adc_bits, fs1), AdcConfig(adc_bits, fs2)
    model = DeployedModel(weights, params, q1, array2, adc1, adc2, hidden_scale, hidden_bits)
    err = q1.values - weights.layer1
    model.stats = {
        "layer1_weight_max_abs_err": float(np.abs(err).max()),
        "layer1_weight_rms_err": float(np.sqrt(np.mean(err ** 2))),
        "layer1_weight_bound": weights.scale / (2 * (2 ** weights.bit_width - 1)),
        "adc1_full_scale_A": adc1.full_scale,
        "adc1_lsb_A": adc1.lsb,
        "adc2_full_scale_A": adc2.full_scale,
        "adc2_lsb_A": adc2.lsb,
        "hidden_scale_A": hidden_scale,
        "worst_case_full_scale_A": worst,
        "calibration_windows": len(calibration) if calibration else 0,
    }
    return model


def _layer1(model: DeployedModel, cmap) -> crossbar.ComputeResult:
    arr = CrossbarArray(np.asarray(getattr(cmap, "states", cmap), dtype=float), model.params)
    return crossbar.first_layer_compute(arr, model.layer1, model.adc1)


def deployed_logits(model: DeployedModel, cmap, trace: bool = False) -> tuple[np.ndarray, dict]:
    """Full crossbar path for one map; returns logits (A^2 units) and a trace."""
    arr = CrossbarArray(np.asarray(getattr(cmap, "states", cmap), dtype=float), model.params)
    r1 = crossbar.first_layer_compute(arr, model.layer1, model.adc1, trace=trace)
    hidden = crossbar.quantize(crossbar.relu(r1.values), model.hidden_bits, model.hidden_scale)
    r2 = crossbar.second_layer_compute(model.array2, hidden, model.adc2, trace=trace)
    info = {"hidden": r1.values, "hidden_codes": hidden.matrix, "clipped1": r1.clipped, "clipped2": r2.clipped,
            "layer1": r1, "layer2": r2}
    return r2.values, info


def predict_window(model: DeployedModel, cmap) -> str:
    logits, _ = deployed_logits(model, cmap)
    return CLASS_NAMES[crossbar.decide(logits)]


def predict_many(model: DeployedModel, maps: Sequence) -> list[str]:
    return [predict_window(model, m) for m in maps]


# --- metrics --------------------------------------------------------------------

@dataclass
class PredictionMetrics:
    patient_id: str
    sensitivity: float  # percent of seizures with at least one preictal alarm
    fpr_per_hour: float
    predicted_time: float  # minutes of preictal horizon covered by data, mean over seizures
    accuracy: float  # percent of windows classified correctly
    n_seizures: int
    n_predicted: int
    false_alarms: int
    interictal_hours: float

    def __post_init__(self):
        if not 0.0 <= self.sensitivity <= 100.0 or self.fpr_per_hour < 0:
            raise ValueError("metrics out of range")

    HEADER = "patient,predicted_time_min,sensitivity_pct,fpr_per_h,accuracy_pct,seizures,predicted,false_alarms," \
             "interictal_h"

    def to_row(self) -> str:
        return (f"{self.patient_id},{self.predicted_time:.4f},{self.sensitivity:.4f},{self.fpr_per_hour:.6f},"
                f"{self.accuracy:.4f},{self.n_seizures},{self.n_predicted},{self.false_alarms},"
                f"{self.interictal_hours:.6f}")


def evaluate(windows: Sequence, predictions: Sequence[str], patient_id: str = "", window_seconds: float = 3.0,
             refractory: float = REFRACTORY, interictal_hours: float | None = None) -> PredictionMetrics:
    """Event-level metrics from per-window predictions.

    A seizure counts as predicted when any window in its preictal horizon is
    flagged preictal. Alarms on interictal windows count as false alarms, with
    a ``refractory`` dead time after each alarm.
    """
    if len(windows) != len(predictions):
        raise ValueError("windows and predictions differ in length")
    onsets: dict[float, list[bool]] = {}
    inter = []
    correct = 0
    for w, p in zip(windows, predictions):
        correct += p == w.label
        if w.label == PREICTAL:
            onsets.setdefault(w.onset, []).append(p == PREICTAL)
        elif w.label == INTERICTAL:
            inter.append((w.window_start, p == PREICTAL))
    n_pred = sum(any(v) for v in onsets.values())
    false_alarms, last = 0, -math.inf
    for t, fired in sorted(inter):
        if fired and t - last >= refractory:
            false_alarms += 1
            last = t
    hours = len(inter) * window_seconds / 3600.0 if interictal_hours is None else interictal_hours
    covered = [len(v) * window_seconds / 60.0 for v in onsets.values()]
    return PredictionMetrics(
        patient_id,
        100.0 * n_pred / len(onsets) if onsets else 0.0,
        false_alarms / hours if hours > 0 else 0.0,
        float(np.mean(covered)) if covered else 0.0,
        100.0 * correct / len(windows) if windows else 0.0,
        len(onsets), n_pred, false_alarms, hours)


def average(metrics: Sequence[PredictionMetrics]) -> dict:
    keys = ("predicted_time", "sensitivity", "fpr_per_hour", "accuracy")
    return {k: float(np.mean([getattr(m, k) for m in metrics])) if metrics else 0.0 for k in keys}


def metrics_table(metrics: Sequence[PredictionMetrics]) -> str:
    lines = [PredictionMetrics.HEADER] + [m.to_row() for m in metrics]
    avg = average(metrics)
    lines.append(f"average,{avg['predicted_time']:.4f},{avg['sensitivity']:.4f},{avg['fpr_per_hour']:.6f},"
                 f"{avg['accuracy']:.4f},,,,")
    return "\n".join(lines) + "\n"


def metrics_dict(m: PredictionMetrics) -> dict:
    return asdict(m)


# --- leave-one-seizure-out ---------------------------------------------------------

@dataclass
class FoldResult:
    onset: float
    weights: NetworkWeights
    stats: dict
    test_ids: list
    predictions: dict = field(default_factory=dict)


def leave_one_seizure_out(windows: Sequence, params: DeviceParams | None = None, k_sigma: float = 1.0,
                          cfg: TrainConfig = TrainConfig(), seed: int = 0, pulse_amplitude: float = 0.8,
                          slot_width: float = 40e-9, patient_id: str = "", adc_bits: int | None = None,
                          workers: int = 1) -> tuple[PredictionMetrics, list]:
    """Hold out one seizure's preictal windows plus one contiguous slice of
    interictal time per fold. Encoding thresholds, weights and ADC ranges are
    fitted on the training part of each fold only.
    """
    from . import features
    from .waveform import calibrate_thresholds

    params = params or DeviceParams()
    onsets = sorted({w.onset for w in windows if w.label == PREICTAL})
    inter = sorted((w for w in windows if w.label == INTERICTAL), key=lambda w: w.window_start)
    if len(onsets) < 2 or not inter:
        raise ValueError(f"insufficient data for leave-one-seizure-out: {len(onsets)} seizures, "
                         f"{len(inter)} interictal windows")
    chunks = np.array_split(np.arange(len(inter)), len(onsets))
    pred: dict[str, str] = {}
    folds = []
    for k, onset in enumerate(onsets):
        held = {inter[i].window_id for i in chunks[k]}
        test = [w for w in windows if (w.label == PREICTAL and w.onset == onset) or w.window_id in held]
        test_ids = {w.window_id for w in test}
        tr = [w for w in windows if w.window_id not in test_ids]
        enc = calibrate_thresholds(tr, k_sigma, pulse_amplitude, slot_width)
        tr_maps = features.extract_batch(tr, enc, params, workers=workers)
        te_maps = features.extract_batch(test, enc, params, workers=workers)
        weights = train(tr_maps, cfg=cfg, seed=seed + k, params=params)
        bits = cfg.bit_width if adc_bits is None else adc_bits
        model = deploy(weights, params, calibration=tr_maps, adc_bits=bits, hidden_bits=bits)
        fold_pred = {w.window_id: predict_window(model, m) for w, m in zip(test, te_maps)}
        pred.update(fold_pred)
        folds.append(FoldResult(onset, weights, model.stats, sorted(test_ids), fold_pred))
    ordered = sorted(windows, key=lambda w: w.window_start)
    metrics = evaluate(ordered, [pred[w.window_id] for w in ordered], patient_id or ordered[0].patient_id)
    return metrics, folds
