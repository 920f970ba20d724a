import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdarray.addressability import (
    addressability_report,
    b_long_values,
    b_trans_values,
    delta_fr,
    nearest_neighbor_slopes,
    rabi_frequency,
)
from qdarray.geometry import build_dot_layout, build_mm_3x3
from qdarray.magnetostatics import MagnetAssembly

# b_trans (mT/nm) -> f_Rabi (MHz) pairs at two significant figures
REFERENCE_PAIRS = [(1.1, 13), (1.2, 14), (0.56, 6.8), (0.62, 7.4), (0.73, 8.7), (0.77, 9.3)]


def sig2(x):
    return float(f"{x:.2g}")


def half_unit(x):
    """Half of the last 2-significant-figure digit of ``x``."""
    return 0.5 * 10 ** (np.floor(np.log10(abs(x))) - 1)


def consistent_at_2sf(b, f, c_drive=12.0):
    """Some b' that rounds to ``b`` gives c_drive * b' rounding to ``f``."""
    lo, hi = c_drive * (b - half_unit(b)), c_drive * (b + half_unit(b))
    return lo < f + half_unit(f) and hi > f - half_unit(f)


@pytest.mark.parametrize("b, f", REFERENCE_PAIRS)
def test_rabi_conversion_pairs(b, f):
    assert consistent_at_2sf(b, f)
    # the rounded slope alone lands within one last digit
    assert abs(sig2(rabi_frequency(b)) - f) <= 2 * half_unit(f) + 1e-12


def test_rounding_band_is_tight():
    # a conversion factor 10% off breaks the pairs
    assert not all(consistent_at_2sf(b, f, 13.2) for b, f in REFERENCE_PAIRS)
    assert not all(consistent_at_2sf(b, f, 10.8) for b, f in REFERENCE_PAIRS)


def test_delta_fr_brackets_six_millitesla():
    # gamma between 26.7 and 28.0 MHz/mT
    lo, hi = delta_fr(0.0, 6.0, gamma=26.7), delta_fr(0.0, 6.0, gamma=28.0)
    assert 151 <= lo <= hi <= 169
    assert delta_fr(6.0, 0.0) == pytest.approx(168.0)


def test_rabi_rejects_negative_and_vectorises():
    with pytest.raises(ValueError):
        rabi_frequency(-0.1)
    np.testing.assert_allclose(rabi_frequency(np.array([0.5, 1.0]), c_drive=10), [5, 10])


def linear_field(gx, glong):
    """B = (glong * y, gx * x, 0): b_trans = gx along x, B_long varies with y."""

    def f(points):
        p = np.atleast_2d(points)
        return np.stack([glong * p[:, 1], gx * p[:, 0], np.zeros(len(p))], axis=1)

    return f


def test_callable_field_source():
    lay = build_dot_layout(3, 3)
    # 1 mT/nm == 1e6 T/m
    src = linear_field(0.5e6, 0.2e6)
    np.testing.assert_allclose(b_trans_values(src, lay), 0.5, rtol=1e-6)
    bl = b_long_values(src, lay)
    np.testing.assert_allclose(bl, 0.2 * lay.dot_positions[:, 1] * 1e9, rtol=1e-9)
    rep = addressability_report(src, lay, margin=5)
    # rows differ by 0.2 * 120 = 24 mT, dots in a row are degenerate
    assert rep.min_pairwise_delta == pytest.approx(0.0, abs=1e-6)
    assert not rep.addressable


def test_zero_field_not_addressable():
    rep = addressability_report(MagnetAssembly(()), build_dot_layout(2, 2))
    assert rep.max_f_rabi == 0 and rep.min_pairwise_delta == 0
    assert not rep.addressable and rep.ratio == 0.0


def test_verdict_follows_margin():
    lay = build_dot_layout(1, 3)

    def src(points):
        p = np.atleast_2d(points)
        # distinct B_long per dot, b_trans = 0.1 mT/nm
        return np.stack([0.3e6 * p[:, 0], 0.1e6 * p[:, 0], np.zeros(len(p))], axis=1)

    rep = addressability_report(src, lay, margin=5)
    # delta f = 28 * 36 mT = 1008 MHz, f_Rabi = 1.2 MHz
    assert rep.min_pairwise_delta == pytest.approx(28 * 0.3 * 120, rel=1e-6)
    assert rep.addressable
    assert not addressability_report(src, lay, margin=1000).addressable
    with pytest.raises(ValueError):
        addressability_report(src, lay, margin=1)


def test_report_shift_is_relative_to_reference():
    rep = addressability_report(build_mm_3x3(), build_dot_layout(3, 3))
    ref = [d for d in rep.dots if d.dot == (1, 1)][0]
    assert ref.f_r_shift == 0
    for d in rep.dots:
        assert d.f_r_shift == pytest.approx(28 * (d.b_long - ref.b_long))
    np.testing.assert_allclose(rep.delta_fr, rep.delta_fr.T)


def test_pairwise_false_matches_neighbours():
    asm, lay = build_mm_3x3(), build_dot_layout(3, 3)
    full = addressability_report(asm, lay)
    nn = addressability_report(asm, lay, pairwise=False)
    assert nn.min_nearest_neighbor_delta() == pytest.approx(full.min_nearest_neighbor_delta())
    assert nn.min_pairwise_delta >= full.min_pairwise_delta


def test_nearest_neighbor_slopes_shapes():
    sx, sy = nearest_neighbor_slopes(linear_field(0, 0.2e6), build_dot_layout(3, 4))
    assert sx.shape == (3, 3) and sy.shape == (2, 4)
    np.testing.assert_allclose(sx, 0, atol=1e-12)
    np.testing.assert_allclose(sy, 0.2, rtol=1e-9)


def test_serialisation_is_stable():
    rep = addressability_report(build_mm_3x3(), build_dot_layout(3, 3))
    text = rep.to_json()
    assert text == addressability_report(build_mm_3x3(), build_dot_layout(3, 3)).to_json()
    doc = json.loads(text)
    assert len(doc["dots"]) == 9 and doc["addressable"] is True
    rows = rep.to_csv().splitlines()
    assert rows[0].startswith("row,col,label,b_trans") and len(rows) == 10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.5, 40.0))
def test_rabi_is_linear(b, c):
    assert rabi_frequency(b, c) == pytest.approx(b * c)
    assert rabi_frequency(2 * b, c) == pytest.approx(2 * rabi_frequency(b, c))


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100))
def test_delta_fr_symmetric_nonnegative(a, b):
    assert delta_fr(a, b) == delta_fr(b, a) >= 0
