import math
from itertools import product

import numpy as np
import pytest

from occupancy import SuffStats, compute_suff_stats, DetectionHistory, theta_of
from occupancy.errors import DomainError
from occupancy.likelihood import (
    OrthParams,
    conditional_information,
    conditional_loglik,
    enumerate_histories,
    full_loglik,
    history_log_probability,
    joint_scores_full,
    orth_loglik,
    partial_decomposition,
    score_eta,
    score_p_conditional,
    site_count_log_probability,
)
from occupancy.estimate import fit_two_stage

from oracles import grid_full_loglik, random_stats


def test_single_bernoulli_site():
    s = SuffStats(S=1, tau=1, f0=0, y=1)
    assert full_loglik(0.5, 0.5, s) == pytest.approx(2 * math.log(0.5), abs=1e-15)
    assert full_loglik(0.5, 0.5, s) == pytest.approx(-1.3863, abs=1e-4)


def test_psi_one_drops_occupancy_term():
    s = SuffStats(S=4, tau=3, f0=0, y=7)
    p = 0.37
    assert full_loglik(1.0, p, s) == pytest.approx(7 * math.log(p) + 5 * math.log(1 - p), rel=1e-14)


def test_zero_probability_sentinel():
    s = SuffStats(S=4, tau=3, f0=1, y=7)
    assert full_loglik(0.0, 0.5, s) == -math.inf
    assert full_loglik(0.5, 1.0, s) == -math.inf
    assert orth_loglik(1.0, 0.5, s) == -math.inf


def test_frog_mle_beats_grid(frog):
    axis = np.arange(1, 201) / 201
    PSI, P = np.meshgrid(axis, axis, indexing="ij")
    values = grid_full_loglik(PSI, P, frog)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    r = fit_two_stage(frog)
    assert full_loglik(r.psi_hat, r.p_hat, frog) >= values.max()
    # the published (rounded) estimates sit within one grid cell of the grid argmax
    assert abs(axis[i] - 0.557) <= 1 / 201 and abs(axis[j] - 0.780) <= 1 / 201
    # and the independent oracle agrees with the kernel everywhere on the grid
    for i, j in [(0, 0), (57, 150), (199, 199), (110, 156)]:
        assert full_loglik(axis[i], axis[j], frog) == pytest.approx(grid_full_loglik(axis[i], axis[j], frog), rel=1e-12)


def test_orth_equals_full_exactly(rng):
    for _ in range(100):
        s = random_stats(rng)
        psi, p = rng.uniform(0.01, 0.99, 2)
        eta = psi * theta_of(p, s.tau)
        assert orth_loglik(eta, p, s) - full_loglik(psi, p, s) == pytest.approx(0.0, abs=1e-10)


def test_orth_hand_evaluation():
    s = SuffStats(S=2, tau=2, f0=1, y=1, b=1)
    expected = 4 * math.log(0.5) - math.log(0.75)
    assert orth_loglik(0.5, 0.5, s) == pytest.approx(expected, abs=1e-15)


def test_orth_params_psi_may_exceed_one():
    assert OrthParams(0.6, 0.1).psi(2) == pytest.approx(0.6 / 0.19)
    with pytest.raises(DomainError):
        OrthParams(1.5, 0.1)


def test_score_eta_root(rng):
    for _ in range(20):
        s = random_stats(rng)
        assert score_eta(s.O / s.S, s) == pytest.approx(0.0, abs=1e-10)


def _central(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_scores_match_finite_differences(rng):
    for _ in range(50):
        s = random_stats(rng, S_max=20)
        eta, p, psi = rng.uniform(0.1, 0.9, 3)
        assert abs(score_eta(eta, s) - _central(lambda e: orth_loglik(e, p, s), eta)) < 1e-6
        assert abs(score_p_conditional(p, s) - _central(lambda q: conditional_loglik(q, s), p)) < 1e-6
        d_psi, d_p = joint_scores_full(psi, p, s)
        assert abs(d_psi - _central(lambda v: full_loglik(v, p, s), psi)) < 1e-6
        assert abs(d_p - _central(lambda v: full_loglik(psi, v, s), p)) < 1e-6


def test_conditional_information_matches_second_difference(rng):
    h = 1e-4
    for _ in range(30):
        s = random_stats(rng, S_max=20)
        p = rng.uniform(0.1, 0.9)
        f = lambda q: conditional_loglik(q, s)  # noqa: E731
        numeric = -(f(p + h) - 2 * f(p) + f(p - h)) / h**2
        assert conditional_information(p, s) == pytest.approx(numeric, rel=1e-5, abs=1e-5)


def test_conditional_score_saturated_is_positive_near_one():
    # y = O * tau: the score stays positive up to p = 1, tending to O * tau
    s = SuffStats(S=10, tau=4, f0=4, y=24)
    values = [score_p_conditional(p, s) for p in (0.5, 0.9, 0.99, 0.999, 1 - 1e-6)]
    assert all(v > 0 for v in values)
    assert values[-1] == pytest.approx(24.0, rel=1e-5)


def test_conditional_score_large_tau_is_finite():
    s = SuffStats(S=50, tau=400, f0=10, y=4000)
    for p in (1e-6, 0.5, 0.99):
        assert math.isfinite(score_p_conditional(p, s))
        assert math.isfinite(conditional_information(p, s))


def test_scores_reject_boundary():
    s = SuffStats(S=10, tau=4, f0=4, y=20)
    with pytest.raises(DomainError):
        score_p_conditional(1.0, s)
    with pytest.raises(DomainError):
        joint_scores_full(0.0, 0.5, s)


def test_mixed_partial_vanishes(rng):
    h = 1e-4
    for _ in range(100):
        s = random_stats(rng, S_max=20)
        eta, p = rng.uniform(0.05, 0.95, 2)
        f = lambda e, q: orth_loglik(e, q, s)  # noqa: E731
        mixed = (f(eta + h, p + h) - f(eta + h, p - h) - f(eta - h, p + h) + f(eta - h, p - h)) / (4 * h * h)
        assert abs(mixed) < 1e-6


def test_decomposition_sums_to_orth(rng):
    for _ in range(100):
        s = random_stats(rng)
        eta, p = rng.uniform(0.01, 0.99, 2)
        assert sum(partial_decomposition(eta, p, s)) - orth_loglik(eta, p, s) == pytest.approx(0.0, abs=1e-10)


def test_redetection_component_peaks_at_partial_estimate(rng):
    grid = np.arange(1, 10000) / 10000
    for _ in range(10):
        s = random_stats(rng)
        values = [partial_decomposition(0.5, p, s)[2] for p in grid]
        best = grid[int(np.argmax(values))]
        assert abs(best - (s.y - s.O) / s.b) <= 1e-4


def test_decomposition_without_detections():
    s = SuffStats(S=5, tau=3, f0=5, y=0, b=0)
    occ, first, redetect = partial_decomposition(0.3, 0.4, s)
    assert first == 0.0 and redetect == 0.0
    assert occ == pytest.approx(5 * math.log(0.7))


def test_psi_score_root(rng):
    for _ in range(20):
        s = random_stats(rng)
        p = rng.uniform(0.2, 0.9)
        psi = s.O / (s.S * theta_of(p, s.tau))
        if psi < 1:
            assert joint_scores_full(psi, p, s)[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("S, tau", list(product((1, 2), (1, 2, 3))))
def test_exact_model_normalises(S, tau, rng):
    for _ in range(10):
        psi, p = rng.uniform(0.01, 0.99, 2)
        by_history = math.fsum(math.exp(history_log_probability(m, psi, p))
                               for m in enumerate_histories(S, tau))
        assert by_history == pytest.approx(1.0, abs=1e-12)
        by_counts = math.fsum(math.exp(site_count_log_probability(c, tau, psi, p))
                              for c in product(range(tau + 1), repeat=S))
        assert by_counts == pytest.approx(1.0, abs=1e-12)


def test_kernel_differs_from_exact_by_a_constant():
    m = np.array([[1, 0, 1], [0, 0, 0], [0, 1, 1]])
    s = compute_suff_stats(DetectionHistory(m))
    diffs = [site_count_log_probability(m.sum(axis=1), 3, psi, p) - full_loglik(psi, p, s)
             for psi, p in [(0.3, 0.4), (0.8, 0.1), (0.55, 0.9)]]
    assert diffs == pytest.approx([math.log(3) + math.log(3)] * 3, abs=1e-12)


def test_score_systems_share_roots(rng):
    for _ in range(30):
        s = random_stats(rng)
        r = fit_two_stage(s)
        if r.psi_hat >= 1:
            continue
        assert abs(score_eta(r.eta_hat, s)) < 1e-8
        assert abs(score_p_conditional(r.p_hat, s)) < 1e-8
        d_psi, d_p = joint_scores_full(r.eta_hat / r.theta_hat, r.p_hat, s)
        assert abs(d_psi) < 1e-8 and abs(d_p) < 1e-8
