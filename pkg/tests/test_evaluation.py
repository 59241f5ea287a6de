import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hilo_siren.audio import encode_wav
from hilo_siren.evaluation import (
    ConfusionMatrix,
    DegeneratePrecision,
    EmptyClass,
    LengthMismatch,
    ManifestError,
    OutOfDomain,
    confusion,
    evaluate_manifest,
    metrics,
    parse_manifest,
    probit,
    read_manifest,
)
from hilo_siren.synth import SirenSpec, gen_noise, gen_siren

mpmath.mp.dps = 40


def _oracle(p):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def test_confusion_counts():
    labels = [True] * 38 + [False] * 280
    preds = [True] * 36 + [False] * 2 + [True] * 7 + [False] * 273
    assert confusion(labels, preds) == ConfusionMatrix(36, 7, 273, 2)
    assert confusion([1, 1, 1, 0, 0, 0], [1, 1, 1, 0, 0, 0]) == ConfusionMatrix(3, 0, 3, 0)


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([True], [True, False])
    with pytest.raises(EmptyClass):
        confusion([], [])


def test_probit_values():
    assert probit(0.5) == 0.0
    assert probit(0.975) == pytest.approx(1.959964, abs=1e-6)
    # dyadic p so that 1 - p is exact
    for p in (2.0**-20, 2.0**-7, 0.3125, 0.875, 1 - 2.0**-20):
        assert probit(p) == -probit(1 - p)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 2.0])
def test_probit_domain(p):
    with pytest.raises(OutOfDomain):
        probit(p)


@given(p=st.floats(1e-6, 1 - 1e-6))
def test_probit_against_oracle(p):
    assert abs(probit(p) - _oracle(p)) < 1e-9


def test_published_matrices():
    dsp = metrics(ConfusionMatrix(36, 7, 273, 2))
    assert dsp.error_rate == pytest.approx(0.03, abs=0.01)
    assert dsp.sensitivity == pytest.approx(0.95, abs=0.01)
    assert dsp.specificity == pytest.approx(0.98, abs=0.01)
    assert dsp.precision == pytest.approx(0.84, abs=0.01)
    assert dsp.f1 == pytest.approx(0.89, abs=0.01)
    assert dsp.d_prime == pytest.approx(3.58, abs=0.02)
    assert dsp.criterion == pytest.approx(0.17, abs=0.02)
    cnn = metrics(ConfusionMatrix(27, 14, 266, 11))
    assert cnn.sensitivity == pytest.approx(0.71, abs=0.01)
    assert cnn.precision == pytest.approx(0.66, abs=0.01)
    assert cnn.f1 == pytest.approx(0.68, abs=0.01)
    assert cnn.d_prime == pytest.approx(2.20, abs=0.02)
    assert cnn.criterion == pytest.approx(0.55, abs=0.02)


def test_perfect_matrix_is_clamped():
    r = metrics(ConfusionMatrix(10, 0, 10, 0))
    assert r.error_rate == 0 and r.sensitivity == 1 and r.specificity == 1 and r.f1 == 1
    assert r.d_prime == pytest.approx(_oracle(0.95) - _oracle(0.05), abs=1e-9)
    assert r.d_prime == pytest.approx(3.29, abs=0.01)
    assert r.criterion == pytest.approx(0.0, abs=1e-12)


def test_degenerate_precision():
    with pytest.warns(DegeneratePrecision):
        r = metrics(ConfusionMatrix(0, 0, 5, 5))
    assert math.isnan(r.precision) and r.f1 == 0.0
    assert "undefined" in r.to_text()


def test_empty_class():
    with pytest.raises(EmptyClass):
        metrics(ConfusionMatrix(3, 0, 0, 1))


def test_negative_counts():
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


@given(tp=st.integers(1, 50), fn=st.integers(0, 50), tn=st.integers(1, 50), fp=st.integers(0, 50),
       k=st.integers(1, 20))
def test_rates_scale_consistent(tp, fn, tn, fp, k):
    a = metrics(ConfusionMatrix(tp, fp, tn, fn))
    b = metrics(ConfusionMatrix(k * tp, k * fp, k * tn, k * fn))
    for name in ("error_rate", "sensitivity", "specificity", "precision", "f1"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12)


@given(tp=st.integers(1, 40), tn=st.integers(1, 40), n=st.integers(41, 60))
def test_dprime_antisymmetry(tp, tn, n):
    # swapping hit and false alarm rates negates d'
    a = metrics(ConfusionMatrix(tp, n - tn, tn, n - tp))
    b = metrics(ConfusionMatrix(n - tn, tp, n - tp, tn))
    assert a.d_prime == pytest.approx(-b.d_prime, abs=1e-9)


@given(tp=st.integers(1, 50), fn=st.integers(0, 50), fp=st.integers(0, 50))
def test_f1_is_harmonic_mean(tp, fn, fp):
    r = metrics(ConfusionMatrix(tp, fp, 10, fn))
    p, s = r.precision, r.sensitivity
    assert r.f1 <= (p + s) / 2 + 1e-12
    assert min(p, s) - 1e-12 <= r.f1 <= max(p, s) + 1e-12


def test_report_formats():
    cm = ConfusionMatrix(36, 7, 273, 2)
    r = metrics(cm)
    csv = r.to_csv(cm).split(",")
    assert csv[:4] == ["36", "7", "273", "2"]
    assert len(csv) == 11
    text = r.to_text(cm)
    assert "d'" in text and "3.5798" in text


# manifests


def test_parse_manifest(tmp_path):
    lines = ["# corpus", "", "a.wav\tsiren", "/abs/b.wav\tnosiren"]
    entries = parse_manifest(lines, base_dir=tmp_path)
    assert [e.label for e in entries] == [True, False]
    assert entries[0].path == str(tmp_path / "a.wav")
    assert entries[1].path == "/abs/b.wav"


@pytest.mark.parametrize("line", ["a.wav", "a.wav\tmaybe", "a.wav\tsiren\textra"])
def test_bad_manifest_line(line):
    with pytest.raises(ManifestError):
        parse_manifest([line])


def _corpus(tmp_path, broken=False):
    lines = []
    for i in range(3):
        (tmp_path / f"s{i}.wav").write_bytes(encode_wav(gen_siren(SirenSpec(cycles=3 + i % 2, seed=i))))
        (tmp_path / f"n{i}.wav").write_bytes(encode_wav(gen_noise(4.0, seed=i)))
        lines += [f"s{i}.wav\tsiren", f"n{i}.wav\tnosiren"]
    if broken:
        (tmp_path / "n2.wav").write_bytes(b"not a wav")
    (tmp_path / "m.tsv").write_text("\n".join(lines) + "\n")
    return read_manifest(tmp_path / "m.tsv")


def test_evaluate_synthetic_manifest(tmp_path):
    ev = evaluate_manifest(_corpus(tmp_path))
    assert ev.confusion == ConfusionMatrix(3, 0, 3, 0)
    assert not ev.has_skips
    assert [v.path.rsplit("/", 1)[1] for v in ev.verdicts] == ["s0.wav", "n0.wav", "s1.wav", "n1.wav", "s2.wav", "n2.wav"]


def test_evaluate_parallel_keeps_order(tmp_path):
    manifest = _corpus(tmp_path)
    serial = evaluate_manifest(manifest)
    parallel = evaluate_manifest(manifest, n_jobs=4)
    assert serial.verdicts == parallel.verdicts


def test_evaluate_skips_unreadable(tmp_path):
    ev = evaluate_manifest(_corpus(tmp_path, broken=True))
    assert ev.confusion.total == 5
    assert ev.has_skips and len(ev.skipped) == 1
    assert ev.skipped[0].to_line().split("\t")[2] == "SKIP"


def test_evaluate_empty_manifest():
    with pytest.raises(EmptyClass):
        evaluate_manifest([])


def test_evaluate_with_stub():
    manifest = parse_manifest([f"{i}.wav\t{'siren' if i < 4 else 'nosiren'}" for i in range(8)])
    truth = {"0.wav", "1.wav", "2.wav", "5.wav"}
    ev = evaluate_manifest(manifest, classify=lambda p: p in truth)
    assert ev.confusion == ConfusionMatrix(3, 1, 3, 1)
    assert np.isclose(ev.report.sensitivity, 0.75)
