import math

import numpy as np
import pytest

from conftest import EXAMPLE_H, linear_example
from mdep_rmt.estimators import (block_event_probs, estimate_extremal_index,
                                 truncated_norm_profile)
from mdep_rmt.fields import IID, LinearMA, RademacherSum
from mdep_rmt.matrices import TruncationParams, WignerEnsembleSpec
from mdep_rmt.spectra import sym_eig
from mdep_rmt.tails import TailModel


def finite_block_theta(H, alpha, r):
    """Exact one-big-jump value of u^alpha k^2 P(block max > a_{n^2} u) for a linear filter.

    A single large noise value at (i0, j0) puts h_kl Z at (i0 + k, j0 + l); the
    block exceeds when the largest in-block |h_kl| times |Z| does.
    """
    H = np.abs(np.asarray(H, dtype=float))
    m = H.shape[0] - 1
    total = 0.0
    for i0 in range(-m, r):
        for j0 in range(-m, r):
            best = 0.0
            for k in range(m + 1):
                for l in range(m + 1):
                    if 0 <= i0 + k < r and 0 <= j0 + l < r:
                        best = max(best, H[k, l])
            total += best ** alpha
    return total / ((H ** alpha).sum() * r * r)


def test_finite_block_oracle_closed_form():
    for r in (5, 10, 37):
        assert finite_block_theta(EXAMPLE_H, 1.0, r) == pytest.approx(
            (r + 1) * (2 * r + 1) / (6 * r * r))


def test_iid_theta_near_one():
    est = estimate_extremal_index(IID(TailModel(1.0)), 1.0, 2000, 10, 1.0, reps=2000, seed=1)
    assert 0.9 <= est.theta <= 1.1
    theta, se = est
    assert se == pytest.approx(est.theta * math.sqrt((1 - est.count / est.n_blocks) / est.count))


@pytest.mark.parametrize("r", [10, 40])
def test_linear_theta_matches_finite_block_value(r):
    est = estimate_extremal_index(linear_example(), 1.0, 2000, r, 1.0, reps=20_000, seed=2)
    assert abs(est.theta - finite_block_theta(EXAMPLE_H, 1.0, r)) < 4 * est.stderr


def test_linear_theta_large_block_near_closed_form():
    est = estimate_extremal_index(linear_example(), 1.0, 20_000, 100, 1.0, reps=3000, seed=3)
    assert abs(est.theta - 1 / 3) <= 0.05


def test_general_filter_and_alpha():
    H = [[0.5, 1.0, 0.0], [0.3, 0.0, 1.5], [0.0, 0.2, 0.1]]
    model = LinearMA(H, TailModel(1.5))
    est = estimate_extremal_index(model, 1.5, 4000, 20, 1.0, reps=20_000, seed=4)
    assert abs(est.theta - finite_block_theta(H, 1.5, 20)) < 4 * est.stderr


def test_rademacher_theta():
    model = RademacherSum(1, TailModel(1.0))
    r = 100
    est = estimate_extremal_index(model, 1.0, 20_000, r, 1.0, reps=4000, seed=5)
    exact_r = (r + 1) ** 2 / (4 * r * r)
    assert abs(est.theta - exact_r) < 4 * est.stderr
    assert abs(est.theta - 0.25) < 0.02


def test_theta_free_of_u():
    m = linear_example()
    e1 = estimate_extremal_index(m, 1.0, 2000, 10, 1.0, reps=5000, seed=6)
    e2 = estimate_extremal_index(m, 1.0, 2000, 10, 2.0, reps=10_000, seed=7)
    assert abs(e1.theta - e2.theta) <= 2 * math.hypot(e1.stderr, e2.stderr)


def test_theta_bounded_and_thread_independent():
    m = linear_example()
    a = estimate_extremal_index(m, 1.0, 500, 8, 1.0, reps=50, seed=8, threads=1)
    b = estimate_extremal_index(m, 1.0, 500, 8, 1.0, reps=50, seed=8, threads=4)
    assert (a.theta, a.count) == (b.theta, b.count)
    assert 0 <= a.theta <= (500 / 8) ** 2


def test_theta_errors():
    m = IID(TailModel(1.0))
    with pytest.raises(RuntimeError, match="smaller u"):
        estimate_extremal_index(m, 1.0, 1000, 10, 1e9, reps=1, seed=0)
    with pytest.raises(ValueError):
        estimate_extremal_index(m, 1.0, 100, 10, 0.5, reps=1)
    with pytest.raises(ValueError):
        estimate_extremal_index(m, 1.0, 100, 100, 1.0, reps=1)


FIXED = TruncationParams(mode="fixed", eps=0.5)


def test_block_events_vanish_in_degenerate_cases():
    spec = WignerEnsembleSpec(IID(TailModel(1.0)), 60)
    one_block = block_event_probs(spec, FIXED, 60, reps=20, seed=1)
    assert one_block["p_multi_row"] == 0.0 and one_block["p_three_consecutive"] == 0.0
    nothing = block_event_probs(spec, TruncationParams(mode="fixed", eps=1e300), 2, 20, seed=1)
    assert all(nothing[k] == 0.0 for k in ("p_multi_row", "p_diag_nonzero", "p_three_consecutive"))


def test_block_event_probability_decreases_with_n():
    model = IID(TailModel(1.0))
    small = block_event_probs(WignerEnsembleSpec(model, 500), FIXED, 2, reps=500, seed=2)
    large = block_event_probs(WignerEnsembleSpec(model, 1000), FIXED, 2, reps=500, seed=3)
    p1, p2 = small["p_multi_row"], large["p_multi_row"]
    assert p2 < p1
    assert 0 < p1 <= 1


def test_block_events_reproducible():
    spec = WignerEnsembleSpec(linear_example(), 100)
    assert block_event_probs(spec, FIXED, 4, 30, seed=9) == \
        block_event_probs(spec, FIXED, 4, 30, seed=9, threads=3)


def test_norm_profile_endpoints():
    spec = WignerEnsembleSpec(IID(TailModel(1.0)), 120)
    rows = truncated_norm_profile(spec, [0.0, 2 * 1e9], reps=3, seed=0)
    assert rows[0]["median_norm"] == 0.0
    exact = [np.abs(sym_eig(spec.sample(s).values)).max() for s in _profile_seeds(3)]
    assert rows[1]["median_norm"] == pytest.approx(np.median(exact), rel=1e-3)


def _profile_seeds(reps, seed=0):
    from mdep_rmt.estimators import NORM_TAG
    from mdep_rmt.rng import derive_seed

    return [derive_seed(seed, NORM_TAG, t) for t in range(reps)]
