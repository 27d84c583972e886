"""Domain types, sufficient statistics and parameter transformations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainError, InputError, InvariantViolation


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


def theta_of(p: float, tau: int) -> float:
    """Probability of at least one detection in ``tau`` visits to an occupied site.

    Evaluated as ``-expm1(tau * log1p(-p))`` so small ``p`` keeps full precision.
    """
    _check_probability("p", p)
    if tau < 1:
        raise DomainError(f"tau must be >= 1, got {tau!r}")
    if p == 1.0:
        return 1.0
    return -math.expm1(tau * math.log1p(-p))


def eta_of(psi: float, p: float, tau: int) -> float:
    """Probability that occupancy is detected at a site, ``psi * theta``."""
    _check_probability("psi", psi)
    return psi * theta_of(p, tau)


@dataclass(frozen=True)
class ModelParams:
    psi: float
    p: float

    def __post_init__(self):
        _check_probability("psi", self.psi)
        _check_probability("p", self.p)

    def theta(self, tau: int) -> float:
        return theta_of(self.p, tau)

    def eta(self, tau: int) -> float:
        return eta_of(self.psi, self.p, tau)


@dataclass(frozen=True, eq=False)
class DetectionHistory:
    """An S x tau matrix of 0/1 detection indicators, one row per site."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2:
            raise InputError(f"detection history must be 2-D, got shape {m.shape}")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise InputError("detection history needs at least one site and one occasion")
        if not np.isin(m, (0, 1)).all():
            raise InputError("detection history cells must be 0 or 1")
        m = m.astype(np.int8)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def S(self) -> int:
        return self.matrix.shape[0]

    @property
    def tau(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DetectionHistory):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)


@dataclass(frozen=True)
class SuffStats:
    """Sufficient statistics of the homogeneous occupancy model.

    ``b`` (occasions remaining after the first detection) is optional because
    published data sometimes report only ``S, tau, f0, y``; without it the
    partial-likelihood estimator is unavailable.
    """

    S: int
    tau: int
    f0: int
    y: int
    b: Optional[int] = None

    def __post_init__(self):
        for name in ("S", "tau", "f0", "y") + (("b",) if self.b is not None else ()):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvariantViolation(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        S, tau, f0, y, b = self.S, self.tau, self.f0, self.y, self.b
        O = S - f0
        checks = [
            (S >= 1, f"S >= 1 (S={S})"),
            (tau >= 1, f"tau >= 1 (tau={tau})"),
            (0 <= f0 <= S, f"0 <= f0 <= S (f0={f0}, S={S})"),
            (O <= y <= O * tau, f"O <= y <= O*tau (O={O}, y={y}, O*tau={O * tau})"),
        ]
        if b is not None:
            checks += [
                (0 <= b <= O * (tau - 1), f"0 <= b <= O*(tau-1) (b={b}, O*(tau-1)={O * (tau - 1)})"),
                (y - O <= b, f"y - O <= b (y-O={y - O}, b={b})"),
            ]
        for ok, text in checks:
            if not ok:
                raise InvariantViolation(f"sufficient statistics violate {text}")

    @property
    def O(self) -> int:
        return self.S - self.f0

    @property
    def a(self) -> Optional[int]:
        """Occasions before the first detection, summed over detected sites."""
        if self.b is None:
            return None
        return self.O * self.tau - self.O - self.b

    def without_b(self) -> "SuffStats":
        return replace(self, b=None)

    def as_dict(self) -> dict:
        d = {"S": self.S, "tau": self.tau, "f0": self.f0, "O": self.O, "y": self.y}
        if self.b is not None:
            d.update(b=self.b, a=self.a)
        return d


def compute_suff_stats(history: DetectionHistory) -> SuffStats:
    m = history.matrix
    tau = history.tau
    detected = m.any(axis=1)
    first = np.argmax(m, axis=1)
    b = int(((tau - 1 - first) * detected).sum())
    return SuffStats(S=history.S, tau=tau, f0=int((~detected).sum()), y=int(m.sum()), b=b)


@dataclass(frozen=True)
class FitResult:
    """Outcome of one estimator applied to one data set.

    ``identifiable`` is False for single-occasion data, where only
    ``eta_hat`` is estimable and ``psi_hat``/``p_hat`` are NaN.
    Standard errors are NaN whenever they are not available (boundary
    estimates, singular information).
    """

    psi_hat: float
    p_hat: float
    se_psi: float
    se_p: float
    eta_hat: float
    theta_hat: float
    method: str
    converged: bool = True
    iterations: int = 0
    boundary_flag: bool = False
    identifiable: bool = True
    loglik: float = field(default=math.nan, compare=False)

    def clamped(self) -> "FitResult":
        """Copy with ``psi_hat`` truncated to 1; the boundary flag stays set."""
        if not self.psi_hat > 1.0:
            return self
        return replace(self, psi_hat=1.0, eta_hat=self.theta_hat, se_psi=math.nan,
                       boundary_flag=True)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "psi_hat": self.psi_hat,
            "se_psi": self.se_psi,
            "p_hat": self.p_hat,
            "se_p": self.se_p,
            "eta_hat": self.eta_hat,
            "theta_hat": self.theta_hat,
            "converged": self.converged,
            "boundary_flag": self.boundary_flag,
            "identifiable": self.identifiable,
            "iterations": self.iterations,
        }
