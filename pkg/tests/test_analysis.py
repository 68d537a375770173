import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from franson import analysis as an
from franson import spectra as sp
from franson.errors import ContractError, DomainError, ParseError, RangeError
from franson.interference import FringeScan, spectral_map

T = an.fringe_period()


def _scan(taus, y):
    y = np.asarray(y, dtype=np.float64)
    return FringeScan(taus, y, y, y)


def _fringes(envelope, half_width, step=T / 32):
    taus = np.arange(-half_width, half_width + step / 2, step)
    w0 = 2 * math.pi / T
    return _scan(taus, envelope(taus) * 0.5 * (1 + np.cos(w0 * taus)))


# visibility -------------------------------------------------------------------


def test_visibility_pure_cosine():
    s = _fringes(lambda t: np.ones_like(t), 3 * T)
    assert an.visibility(s, (-T, T)) == pytest.approx(1.0, abs=1e-12)


def test_visibility_constant():
    taus = np.linspace(0, 3 * T, 40)
    assert an.visibility(_scan(taus, np.full(40, 0.3)), (0, 3 * T)) == 0.0


def test_visibility_errors():
    taus = np.linspace(0, 2 * T, 4)
    s = _scan(taus, np.ones(4))
    with pytest.raises(ContractError):
        an.visibility(s, (0, 2 * T))
    s = _fringes(lambda t: np.ones_like(t), 3 * T)
    with pytest.raises(ContractError):
        an.visibility(s, (0, T / 2))


@settings(max_examples=40)
@given(st.floats(1e-6, 1e6), st.floats(0.0, 0.99))
def test_visibility_scale_invariant_and_bounded(scale, floor):
    s = _fringes(lambda t: np.ones_like(t), 2 * T)
    y = s.coincidence + floor
    v1 = an.visibility(_scan(s.taus, y), (-T, T))
    v2 = an.visibility(_scan(s.taus, y * scale), (-T, T))
    assert 0.0 <= v1 <= 1.0
    assert v2 == pytest.approx(v1, rel=1e-12, abs=1e-15)


# envelope ---------------------------------------------------------------------


@pytest.mark.parametrize("sigma", [0.2e-12, 0.5e-12, 1.3e-12])
def test_envelope_gaussian(sigma):
    s = _fringes(lambda t: np.exp(-t ** 2 / (2 * sigma ** 2)), 5 * sigma)
    assert an.envelope_fwhm(s) == pytest.approx(2 * math.sqrt(2 * math.log(2)) * sigma, rel=0.02)


@pytest.mark.parametrize("half_base", [0.3e-12, 1.0e-12])
def test_envelope_triangle(half_base):
    s = _fringes(lambda t: np.clip(1 - np.abs(t) / half_base, 0, None), 2 * half_base)
    assert an.envelope_fwhm(s) == pytest.approx(half_base, rel=0.02)


def test_envelope_errors():
    s = _fringes(lambda t: np.ones_like(t), 30 * T)
    with pytest.raises(RangeError):
        an.envelope_fwhm(s)
    short = _fringes(lambda t: np.exp(-t ** 2 / 1e-32), T / 2)
    with pytest.raises(ContractError):
        an.envelope_fwhm(short)
    coarse = _fringes(lambda t: np.exp(-t ** 2 / 1e-24), 3e-12, step=T / 2)
    with pytest.raises(ContractError):
        an.envelope_fwhm(coarse)


def test_estimate_period():
    s = _fringes(lambda t: np.ones_like(t), 10 * T, step=T / 40)
    assert an.estimate_period(s) == pytest.approx(T, rel=1e-4)


# phase ------------------------------------------------------------------------


def test_phase_examples():
    assert an.delay_to_phase(5.28e-15) == pytest.approx(2 * math.pi, abs=0.01)
    assert an.delay_to_phase(15.84e-15) == pytest.approx(6 * math.pi, abs=0.02)
    assert an.delay_to_phase(0.0) == 0.0
    assert T == pytest.approx(1584e-9 / sp.C, rel=1e-15)


@given(st.floats(-1e-9, 1e-9), st.floats(400, 2000))
def test_phase_roundtrip(tau, wl):
    back = an.phase_to_delay(an.delay_to_phase(tau, wl), wl)
    assert back == pytest.approx(tau, rel=1e-12, abs=1e-300)


def test_phase_arrays_and_errors():
    a = an.delay_to_phase(np.array([0.0, T]))
    assert a[1] == pytest.approx(2 * math.pi, rel=1e-12)
    with pytest.raises(DomainError):
        an.delay_to_phase(1e-15, 0.0)


# mode counting ----------------------------------------------------------------


def _bfs_regions(mask):
    seen = np.zeros_like(mask)
    count = 0
    n, m = mask.shape
    for a in range(n):
        for b in range(m):
            if mask[a, b] and not seen[a, b]:
                count += 1
                seen[a, b] = True
                q = deque([(a, b)])
                while q:
                    x, y = q.popleft()
                    for dx in (-1, 0, 1):
                        for dy in (-1, 0, 1):
                            u, v = x + dx, y + dy
                            if 0 <= u < n and 0 <= v < m and mask[u, v] and not seen[u, v]:
                                seen[u, v] = True
                                q.append((u, v))
    return count


def _brute_peaks(p, threshold):
    p = list(p)
    top = max(p)
    if top <= 0:
        return 0
    padded = [0.0] + p + [0.0]
    count = 0
    k = 1
    while k < len(padded) - 1:
        j = k
        while j + 1 < len(padded) - 1 and padded[j + 1] == padded[k]:
            j += 1
        if padded[k - 1] < padded[k] > padded[j + 1] and padded[k] >= threshold * top:
            count += 1
        k = j + 1
    return count


def _map(values):
    g = sp.FrequencyGrid(1e15, 1e15, 1e12, 1e12, values.shape[0], values.shape[1])
    return sp.JointSpectrum(g, values, "intensity", False)


@settings(max_examples=80, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
                  elements=st.floats(0, 10, allow_nan=False)),
       st.floats(0.05, 0.95))
def test_count_modes_matches_bfs(values, thr):
    if values.max() <= 0:
        values[0, 0] = 1.0
    mc = an.count_modes(_map(values), thr)
    assert mc.total == _bfs_regions(values >= thr * values.max())
    assert mc.along_s == _brute_peaks(values.sum(1), thr)
    assert mc.along_i == _brute_peaks(values.sum(0), thr)
    assert mc.total >= 1 and mc.threshold == thr


@settings(max_examples=150)
@given(st.lists(st.integers(0, 5).map(float), min_size=1, max_size=30), st.floats(0.05, 0.95))
def test_count_peaks_matches_brute_force(profile, thr):
    assert an.count_peaks(profile, thr) == _brute_peaks(profile, thr)


def test_count_modes_errors(small):
    with pytest.raises(ContractError):
        an.count_modes(small)
    with pytest.raises(ContractError):
        an.count_modes(_map(np.zeros((4, 4))))
    with pytest.raises(DomainError):
        an.count_modes(_map(np.ones((4, 4))), 1.0)


def test_modes_at_zero_delay(jsas):
    for name, j in jsas.items():
        assert an.count_modes(spectral_map(j, 0.0)).total == 1, name


def test_noncorrelated_modes_increase(jsas):
    j = jsas["noncorrelated"]
    totals = [an.count_modes(spectral_map(j, t * 1e-12)).total for t in (0, 5, 10, 15)]
    assert totals[0] == 1
    assert totals[1] < totals[2] < totals[3], totals


@pytest.mark.parametrize("name", ["noncorrelated", "positive", "negative"])
def test_modes_non_decreasing_in_delay(jsas, name):
    # sampled at 1 ps steps; each step advances the carrier by ~189 cycles plus a fraction
    j = jsas[name]
    totals = [an.count_modes(spectral_map(j, t * 1e-12)).total for t in range(16)]
    assert all(b >= a for a, b in zip(totals, totals[1:])), totals


def test_l1_distance():
    a = np.array([1.0, 1.0, 0.0])
    assert an.l1_distance(a, 3 * a) == 0.0
    assert an.l1_distance(a, np.array([0.0, 0.0, 1.0])) == pytest.approx(2.0)
    with pytest.raises(ContractError):
        an.l1_distance(a, np.ones(2))


# reports ----------------------------------------------------------------------


def test_report_roundtrip(tmp_path):
    items = {"visibility": 0.9999391234, "envelope_fwhm_ps": 0.99, "modes_total": 7, "ok": True}
    path = tmp_path / "r.txt"
    an.write_report(items, path)
    text = path.read_text()
    assert text.splitlines()[0] == "visibility=0.9999391234"
    back = an.parse_report(text)
    assert float(back["visibility"]) == items["visibility"]
    assert back["modes_total"] == "7" and back["ok"] == "true"


def test_report_errors():
    with pytest.raises(DomainError):
        an.format_report({"a=b": 1})
    with pytest.raises(ParseError, match="line 2"):
        an.parse_report("a=1\nnonsense\n")
