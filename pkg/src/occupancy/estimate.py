"""Full-likelihood, two-stage conditional and closed-form partial estimators,
plus the occupancy sensitivity profile."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import FitResult, SuffStats, theta_of
from .errors import (
    DegenerateDataError,
    DomainError,
    MissingStatisticError,
    NoBracketError,
    SingularInformationError,
    UndefinedPsiError,
)
from .likelihood import (
    conditional_information,
    conditional_loglik,
    full_loglik,
    joint_scores_full,
    score_p_conditional,
)
from .optim import OptimSettings, maximize_2d, numerical_hessian, root_find_1d, standard_errors

METHODS = ("full", "two_stage", "partial")

# a full-likelihood maximiser this close to psi = 1 is treated as on the edge
_EDGE = 1e-7
_ROOT_BRACKET = (1e-8, 1.0 - 1e-8)

nan = math.nan


def _require_sites(stats: SuffStats) -> None:
    if stats.O == 0:
        raise DegenerateDataError("no site has a detection; p is not estimable")


def _unidentified(stats: SuffStats, method: str) -> FitResult:
    # tau = 1: theta = p, only the product psi * p is estimable
    return FitResult(nan, nan, nan, nan, stats.O / stats.S, nan, method,
                     converged=True, identifiable=False)


def _saturated(stats: SuffStats, method: str) -> FitResult:
    # every visit to a detected site was a detection: p_hat = 1 on the boundary
    eta = stats.O / stats.S
    return FitResult(eta, 1.0, nan, nan, eta, 1.0, method, converged=True,
                     boundary_flag=True)


def var_psi_partial(psi: float, p: float, stats: SuffStats) -> float:
    """Approximate variance of the partial-likelihood occupancy estimator.

    Sum of the binomial variance of occupancy at known ``p`` and a delta-method
    term carrying the variance ``p(1-p)/b`` of the re-detection proportion.
    """
    if stats.b is None or stats.b < 1:
        raise DomainError("var_psi_partial needs b >= 1")
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must lie in (0, 1], got {p!r}")
    tau, S, b = stats.tau, stats.S, stats.b
    theta = theta_of(p, tau)
    if not psi * theta < 1.0:
        raise DomainError("psi * theta must be < 1")
    v_known_p = psi * (1.0 - psi * theta) / (S * theta)
    slope_sq = tau**2 * (1.0 - p) ** (2 * (tau - 1)) / theta**2
    return (v_known_p + psi**2) * slope_sq * p * (1.0 - p) / b + v_known_p


def fit_partial(stats: SuffStats) -> FitResult:
    """Closed-form estimates from the re-detection binomial and the detected-site binomial.

    ``p`` is estimated by the re-detection proportion ``(y - O) / b``, using
    only the visits after each site's first detection, and occupancy by
    back-transforming ``O / S``.
    """
    _require_sites(stats)
    if stats.tau == 1:
        return _unidentified(stats, "partial")
    if stats.b is None:
        raise MissingStatisticError(
            "partial estimator needs b (occasions after first detection); "
            "supply the detection matrix or b")
    if stats.b == 0:
        raise DegenerateDataError("b = 0: no visits after a first detection")
    redetections = stats.y - stats.O
    if redetections == 0:
        raise UndefinedPsiError("no re-detections, so p_tilde = 0 and theta_tilde = 0")

    p = redetections / stats.b
    theta = theta_of(p, stats.tau)
    eta = stats.O / stats.S
    psi = eta / theta
    if p == 1.0:
        return FitResult(psi, p, nan, nan, psi * theta, theta, "partial", boundary_flag=True)
    se_p = math.sqrt(p * (1.0 - p) / stats.b)
    try:
        se_psi = math.sqrt(var_psi_partial(psi, p, stats))
    except DomainError:
        se_psi = nan
    return FitResult(psi, p, se_psi, se_p, psi * theta, theta, "partial",
                     boundary_flag=bool(psi >= 1.0))


def fit_two_stage(stats: SuffStats, settings: Optional[OptimSettings] = None) -> FitResult:
    """Maximum likelihood in two stages via the orthogonal parameterisation.

    Stage one: ``eta_hat = O / S``.  Stage two: ``p_hat`` is the root of the
    zero-truncated binomial score for the detected sites.  ``psi_hat`` is
    ``eta_hat / theta_hat``, and its standard error combines the two
    independent stages by the delta method.
    """
    settings = settings or OptimSettings()
    _require_sites(stats)
    if stats.tau == 1:
        return _unidentified(stats, "two_stage")
    O, S, tau, y = stats.O, stats.S, stats.tau, stats.y
    if y == O * tau:
        return _saturated(stats, "two_stage")
    if y == O:
        raise UndefinedPsiError("conditional MLE of p is 0: every detected site has one detection")

    try:
        root = root_find_1d(
            lambda p: score_p_conditional(p, stats),
            *_ROOT_BRACKET,
            settings,
            fprime=lambda p: -conditional_information(p, stats),
            x0=y / (O * tau),
        )
    except NoBracketError as exc:
        raise DegenerateDataError(f"conditional score has no interior root: {exc}") from exc
    p = root.root
    theta = theta_of(p, tau)
    eta = O / S
    psi = eta / theta

    info_p = conditional_information(p, stats)
    var_p = 1.0 / info_p if info_p > 0 else nan
    var_eta = eta * (1.0 - eta) / S
    dtheta = tau * (1.0 - p) ** (tau - 1)
    var_psi = var_eta / theta**2 + eta**2 * dtheta**2 * var_p / theta**4
    loglik = conditional_loglik(p, stats) + (
        (stats.f0 * math.log1p(-eta) if stats.f0 else 0.0) + O * math.log(eta))
    return FitResult(psi, p, math.sqrt(var_psi), math.sqrt(var_p), eta, theta, "two_stage",
                     converged=root.converged, iterations=root.iterations,
                     boundary_flag=bool(psi >= 1.0), loglik=loglik)


def _default_start(stats: SuffStats) -> tuple[float, float]:
    if stats.b is not None:
        try:
            start = fit_partial(stats)
        except (DegenerateDataError, UndefinedPsiError):
            pass
        else:
            if start.identifiable and 0 < start.p_hat < 1 and start.psi_hat < 1:
                return start.psi_hat, start.p_hat
    return 0.5, 0.5


def _newton_polish(x: np.ndarray, stats: SuffStats, settings: OptimSettings, steps: int = 8):
    """Newton iterations on the analytic scores, accepted only while they raise the likelihood."""
    f = lambda v: full_loglik(v[0], v[1], stats)  # noqa: E731
    value = f(x)
    for _ in range(steps):
        g = np.array(joint_scores_full(x[0], x[1], stats))
        if np.max(np.abs(g)) < 1e-10:
            break
        H = numerical_hessian(f, x, settings)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        candidate = x - step
        if not np.all((candidate > 0) & (candidate < 1)):
            break
        new_value = f(candidate)
        if not new_value >= value - 1e-12:
            break
        x, value = candidate, new_value
    return x, value


def fit_full(
    stats: SuffStats,
    settings: Optional[OptimSettings] = None,
    start: Optional[Sequence[float]] = None,
) -> FitResult:
    """Joint maximum likelihood for ``(psi, p)`` with observed-information standard errors.

    Starts from the partial-likelihood estimates when ``b`` is known.  When
    the maximiser runs onto ``psi = 1`` the result is flagged and no standard
    errors are reported.
    """
    settings = settings or OptimSettings()
    _require_sites(stats)
    if stats.tau == 1:
        return _unidentified(stats, "full")
    if stats.f0 == 0:
        raise DegenerateDataError("f0 = 0: every site has a detection; psi has no interior MLE")
    if stats.y == stats.O * stats.tau:
        return _saturated(stats, "full")

    f = lambda v: full_loglik(v[0], v[1], stats)  # noqa: E731
    if start is None:
        start = _default_start(stats)
    res = maximize_2d(f, start, settings)
    x, value = res.x, res.value
    on_edge = x[0] >= 1.0 - _EDGE or x[1] >= 1.0 - _EDGE or x[1] <= _EDGE
    if not on_edge:
        x, value = _newton_polish(x, stats, settings)

    psi, p = float(x[0]), float(x[1])
    theta = theta_of(p, stats.tau)
    se_psi = se_p = nan
    if not on_edge:
        try:
            se_psi, se_p = standard_errors(numerical_hessian(f, x, settings))
        except SingularInformationError:
            pass
    return FitResult(psi, p, float(se_psi), float(se_p), psi * theta, theta, "full",
                     converged=res.converged, iterations=res.iterations,
                     boundary_flag=bool(on_edge), loglik=value)


def fit(stats: SuffStats, method: str, settings: Optional[OptimSettings] = None,
        start: Optional[Sequence[float]] = None) -> FitResult:
    if method == "full":
        return fit_full(stats, settings, start)
    if method == "two_stage":
        return fit_two_stage(stats, settings)
    if method == "partial":
        return fit_partial(stats)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True, eq=False)
class SensitivityProfile:
    """Occupancy estimate at known ``p``, ``(S - f0) / (S theta(p))``, over a grid of ``p``.

    ``derivative`` is the exact slope (negative).  ``printed_derivative`` is
    the commonly quoted magnitude ``(S-f0) tau (1-p)^(tau-1) / (S theta)``,
    kept for side-by-side comparison; it differs from ``|derivative|`` by a
    factor ``theta``.
    """

    grid: np.ndarray
    psi_bar: np.ndarray
    derivative: np.ndarray
    printed_derivative: np.ndarray
    tau: int
    detected_fraction: float

    @property
    def exceeds_one(self) -> np.ndarray:
        return self.psi_bar > 1.0

    @property
    def floor(self) -> float:
        """Limit of ``psi_bar`` as ``p -> 1``."""
        return self.detected_fraction

    def __len__(self):
        return self.grid.size


def psi_given_p(p, stats: SuffStats):
    p = np.asarray(p, dtype=float)
    theta = -np.expm1(stats.tau * np.log1p(-p))
    return (stats.O / stats.S) / theta


def sensitivity_profile(stats: SuffStats, grid_size: int = 99) -> SensitivityProfile:
    """Evaluate the occupancy estimate at known ``p`` on the open grid ``k / (n + 1)``."""
    if stats.f0 in (0, stats.S):
        raise DegenerateDataError("sensitivity profile needs 0 < f0 < S")
    if grid_size < 1:
        raise DomainError("grid_size must be >= 1")
    tau = stats.tau
    grid = np.arange(1, grid_size + 1) / (grid_size + 1)
    q = 1.0 - grid
    theta = -np.expm1(tau * np.log1p(-grid))
    frac = stats.O / stats.S
    psi_bar = frac / theta
    derivative = -frac * tau * q ** (tau - 1) / theta**2
    printed = frac * tau * q ** (tau - 1) / theta
    return SensitivityProfile(grid, psi_bar, derivative, printed, tau, frac)
