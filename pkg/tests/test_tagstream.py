import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import gaussian_filter

from franson import spectra as sp
from franson import spectrometer as spm
from franson import tagstream as ts
from franson.analysis import count_modes, l1_distance
from franson.errors import ContractError, DomainError, FormatError, ParseError, RangeError, ValidationError
from franson.interference import spectral_map

QUIET = spm.SpectrometerModel(jitter_fwhm_ps=0.0)
DEFAULT_MODEL = spm.SpectrometerModel()


def _stream(events, header=None, with_ids=False):
    events = sorted(events, key=lambda e: e[1])
    h = {"format": ts.FORMAT_VERSION}
    h.update(header or {})
    ch = [e[0] for e in events]
    t = [e[1] for e in events]
    pid = [e[2] for e in events] if with_ids else None
    return ts.TagStream(h, ch, t, pid)


# file format --------------------------------------------------------------------


def test_empty_roundtrip(tmp_path):
    s = _stream([], {"seed": "1"})
    path = tmp_path / "e.tags"
    n = ts.write_tags(s, path)
    assert n == path.stat().st_size
    assert ts.parse_tags(path) == s


def test_million_event_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    t = np.sort(rng.integers(0, 10 ** 12, 1_000_000))
    ch = rng.integers(1, 3, t.size)
    pid = rng.integers(0, 10 ** 9, t.size)
    s = ts.TagStream({"format": ts.FORMAT_VERSION, "note": "a b=c"}, ch, t, pid)
    path = tmp_path / "m.tags"
    ts.write_tags(s, path)
    back = ts.parse_tags(path)
    assert back == s
    assert back.time.dtype == np.int64
    assert path.read_bytes() == ts.format_tags(back).encode()


def test_file_object_io():
    s = _stream([(1, 5), (2, 7)])
    buf = io.StringIO()
    ts.write_tags(s, buf)
    buf.seek(0)
    assert ts.parse_tags(buf) == s


def test_channel_three_names_line():
    text = "#format=tags-v1\n1,10\n2,11\n3,12\n"
    with pytest.raises(ParseError, match="line 4"):
        ts.parse_tags_text(text)


@pytest.mark.parametrize("line", ["1,x", "1", "1,2,3,4", "a,b", "1,-5"])
def test_malformed_lines(line):
    with pytest.raises(ParseError, match="line 3"):
        ts.parse_tags_text(f"#format=tags-v1\n1,1\n{line}\n")


def test_mixed_pair_id_presence():
    with pytest.raises(ParseError, match="line 3"):
        ts.parse_tags_text("#format=tags-v1\n1,1,0\n2,2\n")


def test_version_mismatch():
    with pytest.raises(FormatError):
        ts.parse_tags_text("#format=tags-v2\n1,1\n")
    with pytest.raises(FormatError):
        ts.parse_tags_text("1,1\n")


def test_out_of_order_times():
    with pytest.raises(ValidationError, match="line 3"):
        ts.parse_tags_text("#format=tags-v1\n1,10\n2,9\n")
    with pytest.raises(ValidationError):
        ts.TagStream({"format": ts.FORMAT_VERSION}, [1, 2], [10, 9])


def test_error_families():
    # the format errors are validation errors, so the CLI maps them to exit 2
    assert issubclass(ParseError, ValidationError) and issubclass(FormatError, ValidationError)


# histograms ---------------------------------------------------------------------


def test_histogram_same_time():
    h = ts.coincidence_histogram(_stream([(1, 100), (2, 100)]), 1000, 10)
    assert h.counts.sum() == 1
    assert h.counts[np.flatnonzero(h.centers_ps == 0)[0]] == 1


def test_histogram_far_events_empty():
    h = ts.coincidence_histogram(_stream([(1, 100), (2, 5000)]), 1000, 10)
    assert h.counts.sum() == 0
    assert len(h.counts) == 201


def test_histogram_errors():
    s = _stream([(1, 1), (2, 2)])
    with pytest.raises(ContractError):
        ts.coincidence_histogram(s, 10, 20)
    with pytest.raises(DomainError):
        ts.coincidence_histogram(s, 0, 1)


def test_histogram_delta_map_single_bin():
    n = 5
    g = sp.FrequencyGrid(sp.omega_of_wavelength(1584), sp.omega_of_wavelength(1585), 4e6, 4e6, n, n)
    v = np.zeros((n, n))
    v[2, 2] = 1.0
    stream = spm.sample_events(sp.JointSpectrum(g, v, "intensity", False), QUIET, QUIET, 500, 1)
    h = ts.coincidence_histogram(stream, 1000, 1)
    occupied = np.flatnonzero(h.counts)
    assert len(occupied) == 1
    assert h.centers_ps[occupied[0]] == round(27.3 * 7.5)
    assert h.counts[occupied[0]] == 500


def _brute_hist(t1, t2, window, width):
    kmax = window // width
    out = np.zeros(2 * kmax + 1, dtype=np.int64)
    for a in t1:
        for b in t2:
            dt = b - a
            if abs(dt) <= window:
                k = int(np.floor(dt / width + 0.5))
                if abs(k) <= kmax:
                    out[k + kmax] += 1
    return out


_times = st.lists(st.integers(0, 3000), max_size=40).map(sorted)


@settings(max_examples=150, deadline=None)
@given(_times, _times, st.integers(1, 400), st.integers(1, 60))
def test_histogram_matches_brute_force(t1, t2, window, width):
    if width > window:
        width, window = window, width
    events = [(1, t) for t in t1] + [(2, t) for t in t2]
    h = ts.coincidence_histogram(_stream(events), window, width)
    assert np.array_equal(h.counts, _brute_hist(t1, t2, window, width))


def test_histogram_shards_merge_exactly():
    rng = np.random.default_rng(4)
    t1 = np.sort(rng.integers(0, 10 ** 7, 20000))
    t2 = np.sort(rng.integers(0, 10 ** 7, 20000))
    full = ts.coincidence_histogram(_stream([(1, t) for t in t1] + [(2, t) for t in t2]), 2000, 50)
    merged = np.zeros_like(full.counts)
    window = 2000
    for lo in range(0, 10 ** 7, 10 ** 6):
        hi = lo + 10 ** 6
        a = t1[(t1 >= lo) & (t1 < hi)]
        b = t2[(t2 >= lo - window) & (t2 <= hi + window)]
        part = ts.coincidence_histogram(_stream([(1, t) for t in a] + [(2, t) for t in b]), window, 50)
        merged += part.counts
    assert np.array_equal(merged, full.counts)


# pairing ----------------------------------------------------------------------------


def _brute_pairs(t1, t2, window):
    used = [False] * len(t2)
    out = []
    for i, a in enumerate(t1):
        best = None
        for j, b in enumerate(t2):
            if used[j] or abs(b - a) > window:
                continue
            if best is None or abs(b - a) < abs(t2[best] - a):
                best = j
        if best is not None:
            used[best] = True
            out.append((i, best))
    return out


@settings(max_examples=150, deadline=None)
@given(_times, _times, st.integers(1, 300))
def test_window_pairing_matches_brute_force(t1, t2, window):
    s = _stream([(1, t) for t in t1] + [(2, t) for t in t2])
    i1, i2 = ts.pair_by_window(s, window)
    # split() keeps time order, which matches the sorted inputs
    assert list(zip(i1.tolist(), i2.tolist())) == _brute_pairs(t1, t2, window)


def test_window_pairing_tie_goes_to_earlier():
    s = _stream([(2, 90), (1, 100), (2, 110)])
    i1, i2 = ts.pair_by_window(s, 50)
    assert i2.tolist() == [0]


def test_pair_by_id():
    s = _stream([(1, 1, 7), (2, 2, 9), (2, 3, 7), (1, 4, 9), (1, 5, 4)], with_ids=True)
    i1, i2 = ts.pair_by_id(s)
    t1, t2, p1, p2 = s.split()
    assert np.array_equal(p1[i1], p2[i2])
    assert sorted(p1[i1].tolist()) == [7, 9]
    with pytest.raises(ContractError):
        ts.pair_by_id(_stream([(1, 1), (2, 2)]))


# reconstruction ---------------------------------------------------------------------


def test_single_pair_at_grid_center():
    grid = sp.make_grid(1584, 1584, 4, 9)
    s = _stream([(1, 0), (2, 0)])
    rec = ts.reconstruct_jsi(s, QUIET, QUIET, grid, pairing="by_window")
    assert np.count_nonzero(rec.jsi.values) == 1
    assert rec.jsi.values[4, 4] > 0
    assert rec.overflow == 0.0 and rec.n_pairs == 1


@pytest.fixture(scope="module")
def noncorr(jsas):
    s_map = spectral_map(jsas["noncorrelated"], 0.0)
    return s_map, sp.coarsen(s_map, 8)


def test_zero_jitter_equals_draw_histogram(noncorr):
    s_map, coarse = noncorr
    stream, draws = spm.sample_events(s_map, QUIET, QUIET, 200_000, 9, return_draws=True)
    rec = ts.reconstruct_jsi(stream, QUIET, QUIET, coarse.grid)
    g = coarse.grid
    edges_s = g.omega_s[0] - g.d_s / 2 + g.d_s * np.arange(g.n_s + 1)
    edges_i = g.omega_i[0] - g.d_i / 2 + g.d_i * np.arange(g.n_i + 1)
    hist, _, _ = np.histogram2d(draws.omega_s, draws.omega_i, bins=[edges_s, edges_i])
    counts = np.rint(rec.jsi.values * rec.n_pairs * g.d_s * g.d_i)
    assert np.array_equal(counts, hist)


def test_mass_plus_overflow_is_one(noncorr):
    s_map, coarse = noncorr
    stream = spm.sample_events(s_map, DEFAULT_MODEL, DEFAULT_MODEL, 100_000, 3)
    # a grid narrower than the map so some pairs overflow
    g = coarse.grid
    narrow = sp.FrequencyGrid(g.center_s, g.center_i, g.span_s / 4, g.span_i / 4, 16, 16)
    rec = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, narrow)
    assert rec.overflow > 0
    assert rec.jsi.mass() + rec.overflow == pytest.approx(1.0, abs=1e-12)
    assert rec.n_outside == round(rec.overflow * rec.n_pairs)


def test_excess_overflow_raises(noncorr):
    s_map, coarse = noncorr
    stream = spm.sample_events(s_map, QUIET, QUIET, 1000, 3)
    g = coarse.grid
    away = sp.FrequencyGrid(g.center_s * 1.01, g.center_i, g.span_s, g.span_i, 8, 8)
    with pytest.raises(RangeError):
        ts.reconstruct_jsi(stream, QUIET, QUIET, away)


def test_reconstruct_errors(noncorr):
    grid = noncorr[1].grid
    with pytest.raises(ContractError):
        ts.reconstruct_jsi(_stream([]), QUIET, QUIET, grid)
    with pytest.raises(DomainError):
        ts.reconstruct_jsi(_stream([(1, 0), (2, 0)]), QUIET, QUIET, grid, pairing="bogus")


def test_l1_decreases_with_n(noncorr):
    s_map, coarse = noncorr
    dist = []
    for n in (10_000, 100_000, 1_000_000):
        stream = spm.sample_events(s_map, QUIET, QUIET, n, 17)
        rec = ts.reconstruct_jsi(stream, QUIET, QUIET, coarse.grid)
        dist.append(l1_distance(rec.jsi.values, coarse.values))
    assert dist[0] > dist[1] > dist[2], dist


def test_window_pairing_equals_id_pairing(noncorr):
    s_map, coarse = noncorr
    stream = spm.sample_events(s_map, DEFAULT_MODEL, DEFAULT_MODEL, 50_000, 8)
    a = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, coarse.grid, pairing="by_pair_id")
    # a window wider than any in-pair delay but far below the pair period
    b = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, coarse.grid, pairing="by_window", window=10_000)
    assert np.array_equal(a.jsi.values, b.jsi.values)
    assert a.n_pairs == b.n_pairs
    # the default 1 ns window drops only the far tails of the map
    c = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, coarse.grid, pairing="by_window")
    assert 0.99 * a.n_pairs < c.n_pairs <= a.n_pairs


def test_experiment_modes_at_1p33_ps(jsas):
    s_map = spectral_map(jsas["experiment"], 1.33e-12)
    coarse = sp.coarsen(s_map, 8)
    stream = spm.sample_events(s_map, DEFAULT_MODEL, DEFAULT_MODEL, 1_000_000, 0)
    rec = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, coarse.grid)
    assert abs(count_modes(rec.jsi).total - 3) <= 1


def test_jitter_reconstruction_matches_blurred_map(noncorr):
    # with jitter, the reference is the analytic map blurred by the timing jitter
    s_map, coarse = noncorr
    stream = spm.sample_events(s_map, DEFAULT_MODEL, DEFAULT_MODEL, 1_000_000, 8)
    rec = ts.reconstruct_jsi(stream, DEFAULT_MODEL, DEFAULT_MODEL, coarse.grid)
    sigma_nm = DEFAULT_MODEL.jitter_fwhm_ps / spm.JITTER_FWHM_TO_SIGMA / DEFAULT_MODEL.ps_per_nm
    sigma_w = 2 * math.pi * sp.C * sigma_nm * 1e-9 / (1584e-9) ** 2
    blurred = gaussian_filter(s_map.values, sigma_w / s_map.grid.d_s, mode="constant")
    ref = sp.coarsen(sp.JointSpectrum(s_map.grid, blurred, "intensity", False), 8)
    assert l1_distance(rec.jsi.values, ref.values) <= 0.05
