import math

import numpy as np
import pytest
from scipy.integrate import quad, trapezoid

from garnetspin.crystal import BOHR_MHZ_PER_GAUSS, FieldSpec, GTensor
from garnetspin.errors import InputError
from garnetspin.spectrum import (LineShape, ResonanceLine, group_lines, odmr_spectrum,
                                 transition_frequencies, zeeman_sweep)

N110 = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)


def test_frequencies_at_310_gauss(field110):
    f = [ln.frequency for ln in transition_frequencies(field110)]
    mu = BOHR_MHZ_PER_GAUSS * 310
    g3 = math.sqrt(1.87**2 / 4 + 0.91**2 / 4 + 2.74**2 / 2)
    assert f == pytest.approx([1.87 * mu, 0.91 * mu] + [g3 * mu] * 4, abs=1e-9)
    assert f[1] == pytest.approx(394.834, abs=1e-3)
    assert f[0] == pytest.approx(811.36, abs=1e-2)
    assert f[2] == pytest.approx(954.06, abs=1e-2)


def test_grouping_gives_1_1_4(field110):
    groups = group_lines(transition_frequencies(field110))
    assert [len(s) for _, s in groups] == [1, 1, 4]
    assert groups[2][1] == [3, 4, 5, 6]


def test_zero_field_and_linearity():
    assert all(ln.frequency == 0 for ln in transition_frequencies(FieldSpec(0.0, N110)))
    a = transition_frequencies(FieldSpec(310.0, N110))
    b = transition_frequencies(FieldSpec(620.0, N110))
    for x, y in zip(a, b):
        assert y.frequency == pytest.approx(2 * x.frequency, rel=1e-10)


def test_weights_validation(field110):
    with pytest.raises(InputError):
        transition_frequencies(field110, weights=[1, 1])
    with pytest.raises(InputError):
        ResonanceLine(1, -1.0)


@pytest.mark.parametrize("kind", ["lorentzian", "gaussian"])
def test_lineshape_unit_area(kind):
    shape = LineShape(kind, 20.0)
    area = quad(shape, -np.inf, np.inf, limit=500)[0]
    assert area == pytest.approx(1.0, abs=1e-6)
    assert shape(10.0) == pytest.approx(shape(0.0) / 2, rel=1e-12)


def test_lineshape_validation():
    with pytest.raises(InputError):
        LineShape("voigt")
    with pytest.raises(InputError):
        LineShape("gaussian", 0.0)


def test_spectrum_peaks_and_degenerate_area(field110):
    grid = np.linspace(200, 1200, 4001)
    sig = odmr_spectrum(field110, GTensor(), LineShape("gaussian", 20.0), grid)
    assert sig.y.max() == pytest.approx(1.0, abs=1e-3)
    lo = (grid > 700) & (grid < 880)
    hi = (grid > 880) & (grid < 1050)
    ratio = trapezoid(sig.y[hi], grid[hi]) / trapezoid(sig.y[lo], grid[lo])
    assert ratio == pytest.approx(4.0, rel=1e-6)
    # three local maxima
    y = sig.y
    peaks = np.where((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:]) & (y[1:-1] > 0.05))[0]
    assert len(peaks) == 3


def test_lorentzian_window_areas_match_arctan_oracle(field110):
    grid = np.linspace(200, 1200, 20001)
    sig = odmr_spectrum(field110, GTensor(), LineShape("lorentzian", 20.0), grid)
    centres = [ln.frequency for ln in transition_frequencies(field110)]

    def window_area(a, b):
        # each unit-area Lorentzian integrates to (atan((b-f)/hw) - atan((a-f)/hw)) / pi
        return sum(math.atan((b - f) / 10.0) - math.atan((a - f) / 10.0) for f in centres) / math.pi

    norm = sig.metadata["normalization"]
    for a, b in [(700, 880), (880, 1050)]:
        m = (grid >= a) & (grid <= b)
        assert trapezoid(sig.y[m], grid[m]) * norm == pytest.approx(window_area(a, b), rel=1e-5)
    ratio = window_area(880, 1050) / window_area(700, 880)
    assert 3.4 < ratio < 4.0  # tails of neighbouring lines shift it from 4


def test_zero_field_single_peak():
    grid = np.linspace(-100, 100, 401)
    sig = odmr_spectrum(FieldSpec(0.0, N110), GTensor(), LineShape(), grid)
    assert grid[np.argmax(sig.y)] == 0.0
    assert sig.y.max() == pytest.approx(1.0, abs=1e-12)


def test_grid_far_from_lines_is_dark(field110):
    grid = np.linspace(1200, 1500, 101)  # > 10 fwhm above the top line
    sig = odmr_spectrum(field110, GTensor(), LineShape("gaussian", 20.0), grid)
    assert np.all(sig.y < 1e-3)


def test_area_invariant_under_refinement(field110):
    shape = LineShape("gaussian", 20.0)
    areas = []
    for n in (3001, 6001, 12001):
        grid = np.linspace(0, 1500, n)
        sig = odmr_spectrum(field110, GTensor(), shape, grid)
        areas.append(trapezoid(sig.y, grid))
        assert areas[-1] == pytest.approx(6.0 / sig.metadata["normalization"], rel=1e-4)
    assert max(areas) - min(areas) < 1e-4 * areas[0]


def test_spectrum_rejects_bad_grid(field110):
    with pytest.raises(InputError):
        odmr_spectrum(field110, GTensor(), LineShape(), [])
    with pytest.raises(InputError):
        odmr_spectrum(field110, GTensor(), LineShape(), [300.0, 200.0])


def test_zeeman_fan_slopes_and_linearity():
    b = np.linspace(0, 400, 81)
    fan = zeeman_sweep(N110, GTensor(), b)
    assert fan.slopes[:3] == pytest.approx([2.61730, 1.27366, 3.07760], abs=1e-5)
    assert np.all(fan.frequencies[:, 0] == 0.0)
    for row, s in zip(fan.frequencies, fan.slopes):
        assert np.max(np.abs(row - s * b)) <= 1e-9 * np.max(row)
    sigs = fan.signals()
    assert len(sigs) == 6 and sigs[0].y_label == "site1_mhz"


def test_zeeman_001_pairs_degenerate():
    fan = zeeman_sweep([0, 0, 1.0], GTensor(), [0.0, 100.0])
    assert fan.slopes[0] == pytest.approx(fan.slopes[1], abs=1e-12)


def test_zeeman_scaling_and_sign():
    b = np.linspace(0, 400, 9)
    a = zeeman_sweep(N110, GTensor(), b)
    k = zeeman_sweep(N110, GTensor(), 3 * b)
    assert np.allclose(k.frequencies, 3 * a.frequencies, rtol=1e-12)
    r = zeeman_sweep(-N110, GTensor(), b)
    assert np.array_equal(r.frequencies, a.frequencies)


def test_zeeman_single_point_matches_lines(field110):
    fan = zeeman_sweep(N110, GTensor(), [310.0])
    lines = transition_frequencies(field110)
    assert fan.frequencies[:, 0] == pytest.approx([ln.frequency for ln in lines], rel=1e-12)


def test_zeeman_rejects_bad_grid():
    with pytest.raises(InputError):
        zeeman_sweep(N110, GTensor(), [10.0, 5.0])
    with pytest.raises(InputError):
        zeeman_sweep(N110, GTensor(), [-1.0, 5.0])
