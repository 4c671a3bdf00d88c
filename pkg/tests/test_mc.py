"""Monte Carlo guess-number estimator and guessing-curve machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwguess import (EstimatorError, FilterPolicy, GuessingCurve,
                     MonteCarloEstimator, compare_curves, corpus_from_passwords,
                     default_grid, guessing_curve, interpolate_coverage,
                     load_estimator, read_curve, save_estimator, write_curve)
from pwguess.mc import score_all


def hand_estimator():
    # Sample probabilities 0.5, 0.25, 0.25, 0.125 give importance weights
    # 1/(n*p) = 0.5, 1, 1, 2 and cumulative ranks 0.5, 1.5, 2.5, 4.5.
    return MonteCarloEstimator(np.log([0.5, 0.25, 0.25, 0.125]))


def test_hand_computed_guess_numbers():
    est = hand_estimator()
    assert est.guess_number(math.log(0.6)) == 0.0
    assert est.guess_number(math.log(0.3)) == pytest.approx(0.5)
    assert est.guess_number(math.log(0.25)) == pytest.approx(0.5)
    assert est.guess_number(math.log(0.2)) == pytest.approx(2.5)
    assert est.guess_number(math.log(0.125)) == pytest.approx(2.5)
    assert est.guess_number(math.log(0.1)) == pytest.approx(4.5)


def test_vectorized_matches_scalar():
    est = hand_estimator()
    probes = np.log([0.6, 0.3, 0.25, 0.2, 0.125, 0.1, 0.5])
    vec = est.guess_numbers(probes)
    assert vec.tolist() == [est.guess_number(float(lp)) for lp in probes]


def test_standard_error_matches_direct_formula():
    rng = np.random.default_rng(0)
    logps = np.log(rng.uniform(0.01, 0.5, size=100))
    est = MonteCarloEstimator(logps)
    probe = float(np.median(logps))
    n = est.n
    w = np.exp(-np.sort(logps)[::-1]) / n
    k = int((np.sort(logps)[::-1] > probe).sum())
    direct_est = w[:k].sum()
    direct_var = (w[:k] ** 2).sum() - direct_est ** 2 / n
    assert est.guess_number(probe) == pytest.approx(direct_est)
    assert est.standard_error(probe) == pytest.approx(math.sqrt(max(direct_var, 0.0)))
    assert est.standard_error(0.0) == 0.0  # nothing outranks probability one


def test_estimator_input_validation():
    with pytest.raises(EstimatorError):
        MonteCarloEstimator([])
    with pytest.raises(EstimatorError):
        MonteCarloEstimator([[-1.0, -2.0]])
    with pytest.raises(EstimatorError):
        MonteCarloEstimator([-1.0, np.inf])
    est = hand_estimator()
    with pytest.raises(EstimatorError):
        est.guess_number(float("nan"))
    with pytest.raises(EstimatorError):
        est.guess_numbers([math.log(0.5), float("nan")])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-30.0, max_value=-0.1), min_size=1,
                max_size=60),
       st.lists(st.floats(min_value=-35.0, max_value=0.0), min_size=2,
                max_size=10))
def test_guess_number_is_monotone(sample_logps, probes):
    est = MonteCarloEstimator(sample_logps)
    ordered = sorted(probes)
    values = [est.guess_number(lp) for lp in ordered]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert all(v >= 0.0 for v in values)


def test_recovers_true_ranks_on_enumerable_distribution():
    probs = np.array([0.4, 0.3, 0.15, 0.1, 0.04, 0.01])
    rng = np.random.default_rng(1)
    draws = rng.choice(len(probs), size=20_000, p=probs)
    est = MonteCarloEstimator(np.log(probs[draws]))
    for i, p in enumerate(probs):
        true_rank = float(i)  # strings strictly more probable
        got = est.guess_number(math.log(p))
        if true_rank == 0:
            assert got == 0.0
        else:
            assert abs(got - true_rank) <= 0.12 * true_rank + 0.05, (i, got)


def test_default_grid_shape():
    grid = default_grid()
    assert grid[0] == 1.0
    assert grid[-1] == pytest.approx(1e20)
    assert grid.size == 81
    assert np.all(np.diff(np.log10(grid)) > 0)


def test_curve_invariants_enforced():
    with pytest.raises(EstimatorError):
        GuessingCurve(guesses=[1.0, 10.0], coverage=[0.5, 0.4], test_size=10)
    with pytest.raises(EstimatorError):
        GuessingCurve(guesses=[10.0, 1.0], coverage=[0.1, 0.2], test_size=10)
    with pytest.raises(EstimatorError):
        GuessingCurve(guesses=[1.0, 10.0], coverage=[0.1, 1.2], test_size=10)


def test_guessing_curve_counts_unscored_in_denominator():
    est = hand_estimator()
    policy = FilterPolicy(min_length=1, max_length=10, charset="abx")
    test = corpus_from_passwords(["a", "b", "x", "x"], "probe", policy=policy)

    def scorer(pw):
        if "x" in pw:
            from pwguess import TokenizeError
            raise TokenizeError("x is unknown")
        return math.log(0.3) if pw == "a" else math.log(0.1)

    curve = guessing_curve(est, scorer, test, grid=[1.0, 10.0])
    assert curve.unscored == 2
    # "a" has rank 0.5 (guessed within 1), "b" rank 4.5 (within 10).
    assert curve.coverage.tolist() == [0.25, 0.5]
    assert curve.test_size == 4


def test_score_all_batch_and_fallback():
    class Batchy:
        def log_prob_batch(self, pws):
            return np.array([-1.0 * len(pw) for pw in pws])

    logps, bad = score_all(Batchy(), ["a", "bb"])
    assert logps.tolist() == [-1.0, -2.0]
    assert not bad.any()

    logps, bad = score_all(lambda pw: -2.5, ["a"])
    assert logps.tolist() == [-2.5]


def test_curve_file_round_trip(tmp_path):
    curve = GuessingCurve(guesses=np.logspace(0, 6, 13),
                          coverage=np.linspace(0, 0.9, 13),
                          test_size=200, unscored=3, model_id="m1",
                          test_label="probe", manifest={"n": 50})
    path = tmp_path / "curve.csv"
    write_curve(curve, path)
    back = read_curve(path)
    assert np.allclose(back.guesses, curve.guesses, rtol=1e-9)
    assert np.allclose(back.coverage, curve.coverage, atol=1e-9)
    assert back.test_size == 200
    assert back.unscored == 3
    assert back.model_id == "m1"
    assert back.manifest == {"n": "50"}


def test_compare_curves_hand_case():
    grid = np.logspace(0, 10, 11)
    a = GuessingCurve(guesses=grid, coverage=np.linspace(0.1, 0.6, 11),
                      test_size=10)
    b = GuessingCurve(guesses=grid, coverage=np.linspace(0.0, 0.5, 11),
                      test_size=10)
    cmp_ab = compare_curves(a, b)
    assert cmp_ab.mean_difference == pytest.approx(0.1)
    assert cmp_ab.max_difference == pytest.approx(0.1)
    same = compare_curves(a, a)
    assert same.mean_difference == 0.0
    assert same.max_difference == 0.0
    disjoint = GuessingCurve(guesses=np.logspace(15, 18, 4),
                             coverage=[0.0, 0.1, 0.2, 0.3], test_size=5)
    with pytest.raises(EstimatorError):
        compare_curves(a, disjoint)


def test_interpolation_is_flat_beyond_the_ends():
    curve = GuessingCurve(guesses=[10.0, 1000.0], coverage=[0.2, 0.8],
                          test_size=5)
    xs = np.array([0.0, 1.0, 2.0, 3.0, 5.0])
    got = interpolate_coverage(curve, xs)
    assert got[0] == 0.2  # below the range
    assert got[-1] == 0.8  # above the range
    assert got[2] == pytest.approx(0.5)


def test_estimator_save_load_round_trip(tmp_path):
    est = MonteCarloEstimator(np.log([0.5, 0.25, 0.125]), model_id="toy")
    path = tmp_path / "estimator.bin"
    save_estimator(est, path)
    back = load_estimator(path)
    assert back.model_id == "toy"
    assert np.array_equal(back.sample_logprobs, est.sample_logprobs)
    probe = math.log(0.2)
    assert back.guess_number(probe) == est.guess_number(probe)
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"nope")
    with pytest.raises(EstimatorError):
        load_estimator(junk)