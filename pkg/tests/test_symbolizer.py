import re
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hilo_siren.audio import AudioBuffer
from hilo_siren.mel import MelParams, band_centers, log_mel
from hilo_siren.symbolizer import (
    NO_TONE,
    BandSlice,
    CycleMatch,
    DominantVector,
    EmptyBand,
    OverlappingTones,
    OverlappingTonesWarning,
    TooFewRuns,
    band_filter,
    binarize,
    check_symbols,
    dominant_vector,
    encode_ab,
    expand,
    format_runs,
    histogram,
    match_periodicity,
    regularity_ok,
    repair,
    run_length,
    trim_outliers,
)
from hilo_siren.synth import SirenSpec, gen_siren

CENTERS = band_centers(MelParams())
symbols = st.text(alphabet="ab-", max_size=60)


def _slice(values, centers=None):
    values = np.asarray(values, dtype=float)
    centers = np.arange(values.shape[0]) * 100.0 + 800 if centers is None else centers
    return BandSlice(values, np.asarray(centers, dtype=float), 320 / 22050)


def _vector(tones):
    """DominantVector over the default centers from Hz values (None = no tone)."""
    bands = [NO_TONE if t is None else int(np.argmin(np.abs(CENTERS - t))) for t in tones]
    return DominantVector(np.array(bands), CENTERS)


# band_filter


def test_band_filter_siren_band():
    spec = log_mel(AudioBuffer(np.zeros(4096), 22050))
    sl = band_filter(spec, 700, 1500)
    oracle = [c for c in CENTERS if 700 <= c <= 1500]
    assert sl.band_centers.tolist() == oracle
    idx = np.flatnonzero((CENTERS >= 700) & (CENTERS <= 1500))
    assert np.all(np.diff(idx) == 1)
    assert len(oracle) == 20


def test_band_filter_identity_and_empty():
    spec = log_mel(AudioBuffer(np.zeros(4096), 22050))
    full = band_filter(spec, 20, 2560)
    assert np.array_equal(full.values, spec.values)
    with pytest.raises(EmptyBand):
        band_filter(spec, 3000, 4000)


# binarize / dominant / histogram


def test_binarize_cells():
    out = binarize(_slice([[0.0, -25.0, -19.9]]), 20)
    assert out.tolist() == [[1, 0, 1]]
    with pytest.raises(ValueError):
        binarize(_slice([[0.0]]), 0)


def test_silence_binarizes_to_ones():
    spec = log_mel(AudioBuffer(np.zeros(4096), 22050))
    sl = band_filter(spec, 700, 1500)
    assert binarize(sl, 20).all()
    assert len(histogram(dominant_vector(sl, 20))) == 1


def test_dominant_single_and_none():
    sl = _slice([[-30.0, -50.0], [-5.0, -40.0], [-30.0, -45.0]])
    v = dominant_vector(sl, 20)
    assert v.bands.tolist() == [1, NO_TONE]
    assert v.tones == [900.0, None]


def test_dominant_tie_takes_lowest_band():
    v = dominant_vector(_slice([[-3.0], [-3.0], [-10.0]]), 20)
    assert v.bands.tolist() == [0]


def test_dominant_alternates_for_siren():
    spec = log_mel(gen_siren(SirenSpec(f_hi=1320, f_lo=960, dwell=0.5, cycles=2)))
    v = dominant_vector(band_filter(spec, 700, 1500), 20)
    near_hi = float(CENTERS[np.argmin(np.abs(CENTERS - 1320))])
    near_lo = float(CENTERS[np.argmin(np.abs(CENTERS - 960))])
    tones = [t for t in v.tones if t is not None]
    assert set(tones) == {near_hi, near_lo}
    assert re.fullmatch(r"(h+l+){2}", "".join("h" if t == near_hi else "l" for t in tones))


def test_histogram_examples():
    v = DominantVector(np.array([NO_TONE, 3, 3, 5]), CENTERS)
    assert histogram(v) == {float(CENTERS[3]): 2, float(CENTERS[5]): 1}
    assert histogram(DominantVector(np.full(4, NO_TONE), CENTERS)) == {}


def test_histogram_equal_dwell_counts():
    spec = log_mel(gen_siren(SirenSpec(dwell=1.0, cycles=2)))
    h = histogram(dominant_vector(band_filter(spec, 700, 1500), 20))
    assert len(h) == 2
    a, b = h.values()
    assert abs(a - b) <= 1


# encode_ab


def test_encode_basic():
    v = _vector([1255.4, 1255.4, 961.9, 961.9])
    assert encode_ab(v, 1255.4, 961.9, 31) == "aabb"
    assert encode_ab(_vector([None] * 4), 1255.4, 961.9, 31) == "----"


def test_encode_closed_boundary():
    c = float(CENTERS[40])
    v = _vector([c])
    assert encode_ab(v, c + 31, c - 200, 31) == "a"
    assert encode_ab(v, c + 31.001, c - 200, 31) == "-"


def test_encode_overlap_nearest_wins():
    c = float(CENTERS[40])
    v = _vector([c])
    with pytest.warns(OverlappingTonesWarning):
        assert encode_ab(v, c + 20, c - 10, 31) == "b"
    with pytest.raises(OverlappingTones):
        encode_ab(v, c + 20, c - 10, 31, strict=True)


def test_encode_bad_args():
    with pytest.raises(ValueError):
        encode_ab(_vector([1000]), 900, 1000, 31)
    with pytest.raises(ValueError):
        encode_ab(_vector([1000]), 1200, 1000, -1)


# repair


@pytest.mark.parametrize(
    "s, gap, out",
    [
        ("a--a", 2, "aaaa"),
        ("a-b", 2, "a-b"),
        ("aa---aa", 2, "aa---aa"),
        ("b-b", 2, "bbb"),
        ("-a-a-", 2, "-aaa-"),
        ("aa---aa", 3, "aaaaaaa"),
        ("a-a", 0, "a-a"),
        ("a-a-a--b", 2, "aaaaa--b"),
    ],
)
def test_repair_examples(s, gap, out):
    assert repair(s, gap) == out


@given(s=symbols, gap=st.integers(0, 4))
def test_repair_properties(s, gap):
    r = repair(s, gap)
    assert len(r) == len(s)
    assert repair(r, gap) == r
    check_symbols(r)
    for x, y in zip(s, r):
        assert x == y or (x == "-" and y != "-")


@given(s=symbols, gap=st.integers(1, 4))
def test_repair_oracle(s, gap):
    # brute force: walk maximal dash runs and fill the ones with equal flanks
    out = list(s)
    for m in re.finditer(r"-+", s):
        i, j = m.start(), m.end()
        if 0 < i and j < len(s) and s[i - 1] == s[j] and j - i <= gap:
            out[i:j] = s[j] * (j - i)
    assert repair(s, gap) == "".join(out)


# match_periodicity


def test_periodicity_examples():
    assert match_periodicity("aabbaabb") == CycleMatch(0, 8, 2)
    assert match_periodicity("aaaa") is None
    assert match_periodicity("--aabb--", min_cycles=1) == CycleMatch(2, 6, 1)


def test_interior_dash_breaks_match():
    assert match_periodicity("aab-baabb") is None
    assert match_periodicity("aabbaa-bb", min_cycles=2) is None


def test_transition_gap_only_between_tones():
    assert match_periodicity("aa-bbaabb", 2, transition_gap=1) == CycleMatch(0, 9, 2)
    assert match_periodicity("aabb-aabb", 2, transition_gap=1) == CycleMatch(0, 9, 2)
    assert match_periodicity("aabb--aabb", 2, transition_gap=1) is None
    # a dash inside a phase still breaks the stretch
    assert match_periodicity("a-abbaabb", 2, transition_gap=1) == CycleMatch(2, 9, 2)


def test_longest_match_wins():
    m = match_periodicity("ab---aabbaabbab", 2)
    assert m == CycleMatch(5, 15, 3)


def test_periodicity_bad_args():
    with pytest.raises(ValueError):
        match_periodicity("ab", 0)
    with pytest.raises(ValueError):
        match_periodicity("ab", 1, transition_gap=-1)


def _brute_periodicity(s, k):
    best = None
    for i in range(len(s)):
        for j in range(i + 1, len(s) + 1):
            if re.fullmatch(r"(?:a+b+)+", s[i:j]):
                n = len(re.findall("a+", s[i:j]))
                if n >= k and (best is None or j - i > best[1] - best[0]):
                    best = (i, j, n)
    return best


@settings(max_examples=300)
@given(s=st.text(alphabet="ab-", max_size=24), k=st.integers(1, 3))
def test_periodicity_matches_brute_force(s, k):
    m = match_periodicity(s, k)
    ref = _brute_periodicity(s, k)
    if ref is None:
        assert m is None
    else:
        assert m is not None and m.stop - m.start == ref[1] - ref[0] and m.cycles == ref[2]


@given(s=symbols, pre=st.integers(0, 5), post=st.integers(0, 5), k=st.integers(1, 3))
def test_periodicity_dash_padding(s, pre, post, k):
    base = match_periodicity(s, k)
    padded = match_periodicity("-" * pre + s + "-" * post, k)
    if base is None:
        assert padded is None
    else:
        assert padded == CycleMatch(base.start + pre, base.stop + pre, base.cycles)


# run length


def test_run_length_examples():
    assert format_runs(run_length("aaabbaabbaab")) == "a3b2a2b2a2b1"
    assert run_length("") == []
    assert run_length("a") == [("a", 1)]


@given(s=symbols)
def test_run_length_round_trip(s):
    runs = run_length(s)
    assert expand(runs) == s
    assert all(x[0] != y[0] for x, y in zip(runs, runs[1:]))
    assert run_length(expand(runs)) == runs


# trim / regularity


def test_trim_examples():
    assert trim_outliers([3, 2, 2]) == [2, 2]
    assert trim_outliers([2, 2, 1]) == [2, 2]
    assert trim_outliers([5, 5]) == [5, 5]


def test_trim_tie_removes_later():
    # median 2; 1 and 3 are equally far, the later one goes
    assert trim_outliers([1, 2, 3]) == [1, 2]


def test_trim_too_few():
    with pytest.raises(TooFewRuns):
        trim_outliers([4])


@given(xs=st.lists(st.integers(1, 50), min_size=2, max_size=15))
def test_trim_sub_multiset(xs):
    out = trim_outliers(xs)
    assert len(out) == 2
    assert not Counter(out) - Counter(xs)


def test_regularity_examples():
    assert regularity_ok([2, 2])
    assert not regularity_ok([1, 5])
    with pytest.raises(TooFewRuns):
        regularity_ok([3])


def test_check_symbols():
    assert check_symbols("ab-") == "ab-"
    with pytest.raises(ValueError):
        check_symbols("abc")
