"""Log-likelihood kernels and score functions.

Two parameterisations are used: the natural one ``(psi, p)`` and the
orthogonal one ``(eta, p)`` with ``eta = psi * theta``.  In the latter the
log-likelihood separates into a binomial term in ``eta`` and a
zero-truncated binomial term in ``p``.

Binomial coefficients are omitted from all fitting kernels; the exact
probability functions at the bottom keep them and exist so the model can be
checked for normalisation by enumeration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import SuffStats, theta_of
from .errors import DomainError, MissingStatisticError

NEG_INF = -math.inf


def _xlog(n: float, x: float) -> float:
    # n * log(x) with 0 * log(0) = 0 and -inf for a zero-probability event
    if n == 0:
        return 0.0
    if x <= 0.0:
        return NEG_INF
    return n * math.log(x)


def _xlog1m(n: float, x: float) -> float:
    # n * log(1 - x)
    if n == 0:
        return 0.0
    if x >= 1.0:
        return NEG_INF
    return n * math.log1p(-x)


def _detection_ratio(p: float, tau: int) -> float:
    """``tau * (1-p)**(tau-1) / theta``, the derivative of ``log theta`` in ``p``.

    Written without the ``(1-theta)/(1-p)`` quotient, which loses all precision
    when ``p`` is close to one.
    """
    log_q = math.log1p(-p)
    return tau * math.exp((tau - 1) * log_q) / -math.expm1(tau * log_q)


def _check_interior(**values: float) -> None:
    for name, v in values.items():
        if not (0.0 < v < 1.0):
            raise DomainError(f"{name} must lie strictly inside (0, 1), got {v!r}")


@dataclass(frozen=True)
class OrthParams:
    eta: float
    p: float

    def __post_init__(self):
        for name in ("eta", "p"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")

    def psi(self, tau: int) -> float:
        """Implied occupancy; may exceed 1."""
        return self.eta / theta_of(self.p, tau)


def full_loglik(psi: float, p: float, stats: SuffStats) -> float:
    """Log-likelihood in the natural parameterisation, constants dropped."""
    theta = theta_of(p, stats.tau)
    O = stats.O
    return (
        _xlog1m(stats.f0, psi * theta)
        + _xlog(O, psi)
        + _xlog(stats.y, p)
        + _xlog1m(O * stats.tau - stats.y, p)
    )


def conditional_loglik(p: float, stats: SuffStats) -> float:
    """Zero-truncated binomial log-likelihood of ``p`` given the detected sites."""
    O = stats.O
    return (
        _xlog(stats.y, p)
        + _xlog1m(O * stats.tau - stats.y, p)
        - _xlog(O, theta_of(p, stats.tau))
    )


def orth_loglik(eta: float, p: float, stats: SuffStats) -> float:
    """Log-likelihood in the orthogonal ``(eta, p)`` parameterisation."""
    eta_part = _xlog1m(stats.f0, eta) + _xlog(stats.O, eta)
    if eta_part == NEG_INF:
        return NEG_INF
    cond = conditional_loglik(p, stats)
    return eta_part + cond


def score_eta(eta: float, stats: SuffStats) -> float:
    _check_interior(eta=eta)
    return -stats.f0 / (1.0 - eta) + stats.O / eta


def score_p_conditional(p: float, stats: SuffStats) -> float:
    """Derivative in ``p`` of :func:`conditional_loglik`."""
    _check_interior(p=p)
    O, tau, y = stats.O, stats.tau, stats.y
    return y / p - (O * tau - y) / (1.0 - p) - O * _detection_ratio(p, tau)


def conditional_information(p: float, stats: SuffStats) -> float:
    """Observed information for ``p``: minus the second derivative of the conditional log-likelihood."""
    _check_interior(p=p)
    O, tau, y = stats.O, stats.tau, stats.y
    q = 1.0 - p
    r = _detection_ratio(p, tau)
    # d/dp [tau q^(tau-1) / theta] = -(tau-1) r / q - r^2
    d_ratio = -(tau - 1) * r / q - r * r
    return y / p**2 + (O * tau - y) / q**2 + O * d_ratio


def partial_decomposition(eta: float, p: float, stats: SuffStats) -> tuple[float, float, float]:
    """Split the orthogonal log-likelihood into its three factors.

    Returns ``(occupancy, first_detection, redetection)`` log-components.  The
    first is binomial in ``eta``; the third is binomial in ``p`` over the
    ``b`` occasions that follow each site's first detection; the middle one
    is the law of the first detection time, which the partial-likelihood
    estimator discards.
    """
    if stats.b is None:
        raise MissingStatisticError("partial decomposition needs b")
    O, a, b, y = stats.O, stats.a, stats.b, stats.y
    occupancy = _xlog1m(stats.f0, eta) + _xlog(O, eta)
    first = _xlog(O, p) + _xlog1m(a, p) - _xlog(O, theta_of(p, stats.tau))
    redetect = _xlog(y - O, p) + _xlog1m(b - (y - O), p)
    return occupancy, first, redetect


def joint_scores_full(psi: float, p: float, stats: SuffStats) -> tuple[float, float]:
    """Gradient of :func:`full_loglik` with respect to ``(psi, p)``."""
    _check_interior(psi=psi, p=p)
    S, f0, O, tau, y = stats.S, stats.f0, stats.O, stats.tau, stats.y
    theta = theta_of(p, tau)
    one_minus = 1.0 - psi * theta
    d_psi = (S * one_minus - f0) / (psi * one_minus)
    dtheta = tau * math.exp((tau - 1) * math.log1p(-p))
    d_p = y / p - (O * tau - y) / (1.0 - p) - f0 * psi * dtheta / one_minus
    return d_psi, d_p


# exact probabilities, used as normalisation oracles


def site_count_log_probability(counts, tau: int, psi: float, p: float) -> float:
    """Exact log-probability of per-site detection counts, binomial coefficients included."""
    theta = theta_of(p, tau)
    total = 0.0
    for k in counts:
        if k == 0:
            total += _xlog1m(1, psi * theta)
        else:
            total += (math.log(math.comb(tau, k)) + _xlog(1, psi) + _xlog(k, p)
                      + _xlog1m(tau - k, p))
    return total


def history_log_probability(matrix, psi: float, p: float) -> float:
    """Exact log-probability of a full 0/1 detection matrix."""
    m = np.asarray(matrix)
    tau = m.shape[1]
    return site_count_log_probability(m.sum(axis=1).tolist(), tau, psi, p) - sum(
        math.log(math.comb(tau, int(k))) for k in m.sum(axis=1)
    )


def enumerate_histories(S: int, tau: int):
    """Yield every S x tau binary matrix."""
    for bits in itertools.product((0, 1), repeat=S * tau):
        yield np.array(bits, dtype=np.int8).reshape(S, tau)
