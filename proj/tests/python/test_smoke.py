# SPDX-License-Identifier: Apache-2.0
import math

import pytest

import speedfit


def test_fixture_roundtrip_through_recognizer():
    samples, ref = speedfit.synth_fixture([("a", 200), ("b", 200)])
    assert ref == "ab"
    assert len(samples) == 6400
    out = speedfit.recognize(samples)
    assert out["transcript"] == "ab"
    row = out["log_posteriors"][0]
    assert len(row) == len(out["alphabet"]) + 1


def test_stretch_length_and_degradation():
    samples, ref = speedfit.synth_fixture([("a", 200), ("c", 200), ("e", 200)])
    half = speedfit.stretch(samples, 2.0)
    assert len(half) == len(samples) // 2
    assert speedfit.recognize(half)["transcript"] == ref
    assert speedfit.recognize(speedfit.stretch(samples, 8.0))["transcript"] == ""
    with pytest.raises(Exception):
        speedfit.stretch(samples, 100.0)


def test_render_schedule():
    samples, _ = speedfit.synth_fixture([("a", 200), ("b", 200)])
    out = speedfit.render(samples, [(3200, 1.0), (6400, 2.0)])
    assert len(out) == 3200 + 1600


def test_metrics():
    assert speedfit.cer("abc", "abd") == pytest.approx(1 / 3)
    assert speedfit.wer("a b", "a") == 0.5
    assert speedfit.pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)
    assert speedfit.loss_speed([2.0, 2.0]) == 0.01
    with pytest.raises(Exception):
        speedfit.cer("", "x")


def test_ctc_nll_single_frame():
    lp = [[math.log(0.25), math.log(0.75)]]
    assert speedfit.ctc_nll(lp, ["a"], [0]) == pytest.approx(-math.log(0.25))
    assert speedfit.ctc_nll(lp, ["a"], []) == pytest.approx(-math.log(0.75))
    assert math.isinf(speedfit.ctc_nll(lp, ["a"], [0, 0]))


def test_optimize_long_symbols():
    samples, ref = speedfit.synth_fixture([("a", 400), ("b", 400), ("c", 400)])
    out = speedfit.optimize(samples, ref, {"eval_budget": 100})
    assert out["cer"] == 0.0
    assert 2.5 < out["avg_speed"] <= 3.0
    assert out["loss"]["capped"] is False
    assert len(out["rates"]) == len(out["boundaries"]) - 1


def test_bad_config_key():
    samples, ref = speedfit.synth_fixture([("a", 200)])
    with pytest.raises(ValueError):
        speedfit.optimize(samples, ref, {"no_such_key": 1})
