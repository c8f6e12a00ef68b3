import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memcorr import crossbar, device
from memcorr.crossbar import AdcConfig, CrossbarArray
from memcorr.device import DeviceParams
from memcorr.waveform import PulseTrain

P = DeviceParams()
DW_COINC_40N = 1.328830334806368251223e-5
DW_SINGLE_40N = 1.093519689945172746554e-7


def trains(bits, polarity="positive"):
    return [PulseTrain(b, 0.8, 40e-9, polarity) for b in np.asarray(bits, dtype=bool)]


def count_slots(a, b):
    """Plain-Python slot tally: (both fire, exactly one fires)."""
    both = single = 0
    for x, y in zip(a, b):
        if x and y:
            both += 1
        elif x or y:
            single += 1
    return both, single


def closed_form(pos, neg):
    n = pos.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            c1, s1 = count_slots(pos[i], pos[j])
            c2, s2 = count_slots(neg[i], neg[j])
            out[i, j] = (c1 + c2) * P.lam * math.sinh(1.6 * P.eta) * 40e-9 \
                + (s1 + s2) * P.lam * math.sinh(0.8 * P.eta) * 40e-9
    return out


def test_array_construction():
    a = CrossbarArray.fresh()
    assert (a.rows, a.cols) == (18, 18)
    assert a.wl_enable.all()
    with pytest.raises(ValueError):
        CrossbarArray(np.full((2, 2), 1.5))
    with pytest.raises(ValueError):
        CrossbarArray(np.zeros((2, 2)), wl_enable=[True])


def test_single_slot_coincidence_and_single():
    pos = np.zeros((18, 4), dtype=bool)
    pos[0, 1] = pos[1, 1] = True   # both fire in slot 1
    pos[2, 3] = True               # channel 2 alone in slot 3
    neg = np.zeros_like(pos)
    out = crossbar.extract(CrossbarArray.fresh(), trains(pos), trains(neg, "negative"))
    assert out.w[0, 1] == pytest.approx(DW_COINC_40N, rel=1e-13)
    assert out.w[0, 0] == pytest.approx(DW_COINC_40N, rel=1e-13)
    assert out.w[2, 5] == pytest.approx(DW_SINGLE_40N, rel=1e-13)
    assert out.w[5, 2] == pytest.approx(DW_SINGLE_40N, rel=1e-13)
    assert out.w[4, 5] == 0.0
    assert DW_COINC_40N / DW_SINGLE_40N == pytest.approx(121.5186, rel=1e-5)


def test_no_pulses_leaves_array_and_input_untouched():
    start = CrossbarArray(np.full((18, 18), 0.2))
    z = np.zeros((18, 30), dtype=bool)
    out = crossbar.extract(start, trains(z), trains(z, "negative"))
    assert np.array_equal(out.w, start.w)
    rng = np.random.default_rng(0)
    bits = rng.random((18, 30)) < 0.3
    out = crossbar.extract(start, trains(bits), trains(bits, "negative"))
    assert np.all(start.w == 0.2) and np.any(out.w != 0.2)


def test_extraction_matches_slot_counting_oracle():
    rng = np.random.default_rng(11)
    pos = rng.random((18, 200)) < 0.2
    neg = rng.random((18, 200)) < 0.2
    out = crossbar.extract(CrossbarArray.fresh(), trains(pos), trains(neg, "negative"))
    np.testing.assert_allclose(out.w, closed_form(pos, neg), rtol=1e-12)


def test_order_insensitive_far_from_clamp():
    rng = np.random.default_rng(5)
    pos = rng.random((18, 100)) < 0.3
    neg = rng.random((18, 100)) < 0.3
    a = crossbar.extract(CrossbarArray.fresh(), trains(pos), trains(neg, "negative"))
    b = crossbar.extract(CrossbarArray.fresh(), trains(neg), trains(pos, "negative"))
    np.testing.assert_allclose(a.w, b.w, rtol=1e-12)


def test_extract_dimension_errors():
    z = np.zeros((18, 10), dtype=bool)
    with pytest.raises(ValueError):
        crossbar.extract(CrossbarArray.fresh(), trains(z[:17]), trains(z, "negative"))
    with pytest.raises(ValueError):
        crossbar.extract(CrossbarArray.fresh(18, 2), trains(z), trains(z, "negative"))
    bad = trains(z)
    bad[3] = PulseTrain(np.zeros(11, bool))
    with pytest.raises(ValueError):
        crossbar.extract(CrossbarArray.fresh(), bad, trains(z, "negative"))


def test_disabled_word_line_blocks_row():
    a = CrossbarArray.fresh()
    a.wl_enable[3] = False
    bits = np.ones((18, 5), dtype=bool)
    out = crossbar.extract(a, trains(bits), trains(bits, "negative"))
    assert np.all(out.w[3] == 0) and np.all(out.w[4] > 0)


def test_read_map_values_and_symmetry():
    g = crossbar.read_map(CrossbarArray.fresh())
    np.testing.assert_allclose(g, 1.556396490174097154591e-6, rtol=1e-14)
    rng = np.random.default_rng(2)
    pos = rng.random((18, 300)) < 0.25
    neg = rng.random((18, 300)) < 0.25
    pos[7] = pos[4]
    neg[7] = neg[4]
    out = crossbar.extract(CrossbarArray.fresh(), trains(pos), trains(neg, "negative"))
    g = crossbar.read_map(out)
    assert np.max(np.abs(g - g.T)) <= 1e-12
    assert g[4, 7] == g[7, 4] == g[4, 4] == g[7, 7]


def test_read_map_disturb_option():
    a = CrossbarArray(np.full((2, 2), 0.1))
    g1 = crossbar.read_map(a)
    assert np.all(a.w == 0.1)
    crossbar.read_map(a, disturb_time=1e-3)
    assert np.all(a.w > 0.1)
    np.testing.assert_allclose(g1, device.conductance(0.1, P))


def test_extraction_trace_ends_at_array_value():
    rng = np.random.default_rng(8)
    pos = rng.random((18, 64)) < 0.3
    neg = rng.random((18, 64)) < 0.3
    tp, tn = trains(pos), trains(neg, "negative")
    out = crossbar.extract(CrossbarArray.fresh(), tp, tn)
    tr = crossbar.extraction_trace(tp[1], tp[0], tn[1], tn[0], P)
    assert tr.shape == (128, 3)
    assert set(np.round(tr[:, 1], 9)) <= {0.0, 0.8, 1.6}
    assert tr[-1, 2] == pytest.approx(out.w[1, 0], rel=1e-14)


def test_map_serialization_roundtrip():
    g = crossbar.read_map(CrossbarArray(np.random.default_rng(0).random((18, 18))))
    assert np.array_equal(crossbar.map_from_text(crossbar.map_to_text(g)), g)
    rec = crossbar.map_to_records(g).splitlines()
    assert rec[0] == "i,j,siemens" and len(rec) == 325
    i, j, s = rec[20].split(",")
    assert float(s) == g[int(i), int(j)]


# --- compute ----------------------------------------------------------------

def test_adc_quantization():
    adc = AdcConfig(bits=8, full_scale=255.0)
    codes, clipped = adc.convert([0.0, 0.49, 0.5, 254.6, 300.0])
    assert codes.tolist() == [0, 0, 1, 255, 255]
    assert clipped.tolist() == [False, False, False, False, True]
    with pytest.raises(ValueError):
        AdcConfig(bits=0)
    with pytest.raises(ValueError):
        AdcConfig(full_scale=0)


def test_quantize_weights():
    q = crossbar.quantize(np.array([0.0, 0.5, 1.0, 1.7, -0.2]), 8)
    assert q.matrix.tolist() == [0, 128, 255, 255, 0]
    assert q.values[1] == pytest.approx(0.50196, abs=1e-5)
    planes = crossbar.quantize(np.array([1.0]), 4).planes()
    assert planes.ravel().tolist() == [1, 1, 1, 1]
    with pytest.raises(ValueError):
        crossbar.BitSerialWeights(np.array([256]), 8)


def _random_case(seed, bits, adc_bits):
    rng = np.random.default_rng(seed)
    arr = CrossbarArray(rng.random((18, 18)))
    wq = crossbar.quantize(rng.random((18, 18)), bits)
    adc = AdcConfig(adc_bits, crossbar.worst_case_full_scale(18, P))
    cell = device.current(arr.w, P, 1.0)
    return arr, wq, adc, cell


def test_first_layer_degenerate_weights():
    arr, _, adc, cell = _random_case(0, 8, 8)
    ones = crossbar.quantize(np.ones((18, 18)), 8)
    res = crossbar.first_layer_compute(arr, ones, adc)
    codes, _ = adc.convert(cell.sum(axis=0))
    np.testing.assert_allclose(res.values, codes * adc.lsb, rtol=1e-12)
    zero = crossbar.first_layer_compute(arr, crossbar.quantize(np.zeros((18, 18))), adc)
    assert np.all(zero.values == 0)


@pytest.mark.parametrize("seed", range(10))
def test_first_layer_matches_float_oracle_8bit(seed):
    arr, wq, adc, cell = _random_case(seed, 8, 8)
    oracle = np.array([sum(wq.values[i, j] * cell[i, j] for i in range(18)) for j in range(18)])
    res = crossbar.first_layer_compute(arr, wq, adc)
    assert res.clipped == 0
    assert np.max(np.abs(res.values - oracle)) <= adc.lsb / 2 * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_first_layer_converges_at_16_bits(seed):
    rng = np.random.default_rng(100 + seed)
    arr = CrossbarArray(rng.random((18, 18)))
    w = rng.random((18, 18))
    adc = AdcConfig(16, crossbar.worst_case_full_scale(18, P))
    res = crossbar.first_layer_compute(arr, crossbar.quantize(w, 16), adc)
    exact = (w * device.current(arr.w, P, 1.0)).sum(axis=0)
    assert np.max(np.abs(res.values - exact) / exact) <= 1e-4


def test_first_layer_clipping_recorded():
    arr = CrossbarArray(np.ones((18, 18)))
    adc = AdcConfig(8, crossbar.worst_case_full_scale(18, P) / 4)
    res = crossbar.first_layer_compute(arr, crossbar.quantize(np.ones((18, 18))), adc, trace=True)
    assert res.clipped == 8 * 18
    assert res.codes.max() == 255
    assert res.dump().count("\n") == 1 + 8 * 18


def test_second_layer():
    rng = np.random.default_rng(4)
    arr2 = CrossbarArray(rng.random((18, 2)))
    adc = AdcConfig(8, crossbar.worst_case_full_scale(18, P))
    zero = crossbar.second_layer_compute(arr2, crossbar.quantize(np.zeros(18), 8, 1.0), adc)
    assert zero.values.tolist() == [0.0, 0.0]
    assert crossbar.decide(zero.values) == crossbar.INTERICTAL

    onehot = np.zeros(18)
    onehot[5] = 1.0
    res = crossbar.second_layer_compute(arr2, crossbar.quantize(onehot, 8, 1.0), adc)
    cell = device.current(arr2.w, P, 1.0)
    np.testing.assert_allclose(res.values, cell[5], atol=adc.lsb / 2)

    for seed in range(10):
        r = np.random.default_rng(seed)
        arr2 = CrossbarArray(r.random((18, 2)))
        x = crossbar.quantize(r.random(18) * 3.0, 8, 3.0)
        res = crossbar.second_layer_compute(arr2, x, adc)
        cell = device.current(arr2.w, P, 1.0)
        oracle = np.array([sum(x.values[k] * cell[k, c] for k in range(18)) for c in range(2)])
        assert np.max(np.abs(res.values - oracle)) <= adc.lsb / 2 * 3.0 * (1 + 1e-9)
    with pytest.raises(ValueError):
        crossbar.second_layer_compute(arr2, crossbar.quantize(np.zeros(5)), adc)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1.0, 50.0))
def test_argmax_invariant_to_common_full_scale(seed, factor):
    rng = np.random.default_rng(seed)
    arr2 = CrossbarArray(rng.random((18, 2)))
    x = crossbar.quantize(rng.random(18), 8)
    base = crossbar.worst_case_full_scale(18, P)
    a = crossbar.second_layer_compute(arr2, x, AdcConfig(24, base)).values
    b = crossbar.second_layer_compute(arr2, x, AdcConfig(24, base * factor)).values
    if abs(a[1] - a[0]) > 1e-3 * abs(a).max():
        assert crossbar.decide(a) == crossbar.decide(b)


def test_relu_and_decide():
    assert crossbar.relu(-3.0) == 0.0
    assert crossbar.relu(0.0) == 0.0
    assert crossbar.relu(2.5) == 2.5
    np.testing.assert_array_equal(crossbar.relu(np.array([-1.0, 1.0])), [0.0, 1.0])
    assert crossbar.decide([1.0, 1.0]) == crossbar.INTERICTAL
    assert crossbar.decide([1.0, 2.0]) == crossbar.PREICTAL
