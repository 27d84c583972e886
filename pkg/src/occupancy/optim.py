"""Numeric kernels: bracketed 1-D root finding, 2-D maximisation on the unit
square, and central-difference Hessians."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import (
    DomainError,
    MaxIterError,
    NoBracketError,
    NonFiniteError,
    SingularInformationError,
)

ENV_PREFIX = "OCC_"

# logit coordinates beyond this are flat; keeps the simplex bounded when the
# maximum sits on an edge of the square
_LOGIT_CAP = 36.0


@dataclass(frozen=True)
class OptimSettings:
    tol_x: float = 1e-10
    tol_f: float = 1e-12
    max_iter: int = 500
    fd_step: float = 1e-5

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise DomainError(f"{f.name} must be strictly positive")
        if int(self.max_iter) != self.max_iter:
            raise DomainError("max_iter must be an integer")

    def updated(self, **overrides) -> "OptimSettings":
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_env(cls, environ=None) -> "OptimSettings":
        """Defaults taken from ``OCC_TOL_X``, ``OCC_TOL_F``, ``OCC_MAX_ITER``, ``OCC_FD_STEP``."""
        environ = os.environ if environ is None else environ
        kwargs = {}
        for f in fields(cls):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                kwargs[f.name] = int(raw) if f.name == "max_iter" else float(raw)
        return cls(**kwargs)


@dataclass
class RootResult:
    root: float
    iterations: int
    function_calls: int
    converged: bool = True


def root_find_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    settings: Optional[OptimSettings] = None,
    fprime: Optional[Callable[[float], float]] = None,
    x0: Optional[float] = None,
) -> RootResult:
    """Safeguarded Newton/bisection on a sign-changing bracket.

    A Newton step (secant step when ``fprime`` is not given) is taken only
    when it lands strictly inside the current bracket; otherwise the bracket
    is bisected.  ``f`` is never evaluated outside ``[lo, hi]``.  An interior
    starting guess ``x0`` is used for the first step when given.

    Raises:
        NoBracketError: ``f(lo)`` and ``f(hi)`` share a sign.
        MaxIterError: no convergence within ``settings.max_iter`` steps.
    """
    settings = settings or OptimSettings()
    if not lo < hi:
        raise NoBracketError(f"empty bracket [{lo}, {hi}]")
    calls = 2
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return RootResult(lo, 0, 1)
    if f_hi == 0.0:
        return RootResult(hi, 0, 2)
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise NoBracketError(f"no sign change on [{lo}, {hi}]: f={f_lo:.6g}, {f_hi:.6g}")

    x, fx = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    x_prev, f_prev = (hi, f_hi) if x == lo else (lo, f_lo)
    if x0 is not None and lo < x0 < hi:
        x_prev, f_prev = x, fx
        x, fx = x0, f(x0)
        calls += 1
        if fx == 0.0:
            return RootResult(x, 0, calls)
        if math.copysign(1.0, fx) == math.copysign(1.0, f_lo):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
    for it in range(1, settings.max_iter + 1):
        step = None
        if fprime is not None:
            d = fprime(x)
            if d != 0.0 and math.isfinite(d):
                step = x - fx / d
        elif fx != f_prev:
            step = x - fx * (x - x_prev) / (fx - f_prev)
        if step is not None and abs(step - x) <= settings.tol_x * max(1.0, abs(x)):
            return RootResult(step if lo <= step <= hi else x, it, calls)
        if step is None or not (lo < step < hi) or not math.isfinite(step):
            step = 0.5 * (lo + hi)

        x_prev, f_prev = x, fx
        x, fx = step, f(step)
        calls += 1
        if fx == 0.0:
            return RootResult(x, it, calls)
        if math.copysign(1.0, fx) == math.copysign(1.0, f_lo):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
        if abs(x - x_prev) <= settings.tol_x * max(1.0, abs(x)) or hi - lo <= settings.tol_x:
            return RootResult(x, it, calls)
    raise MaxIterError(f"root finder did not converge in {settings.max_iter} iterations")


@dataclass
class MaxResult:
    x: np.ndarray
    value: float
    iterations: int
    function_calls: int
    converged: bool = True


def maximize_2d(
    f: Callable[[np.ndarray], float],
    start: Sequence[float],
    settings: Optional[OptimSettings] = None,
) -> MaxResult:
    """Maximise ``f`` over the open unit square.

    Nelder-Mead runs on logit-transformed coordinates, so ``f`` only ever
    sees interior points.  Returns the maximiser on the probability scale.

    Raises:
        NonFiniteError: ``f(start)`` is not finite.
        MaxIterError: the simplex did not shrink to ``tol_x`` / ``tol_f``.
    """
    settings = settings or OptimSettings()
    start = np.clip(np.asarray(start, dtype=float), 1e-12, 1 - 1e-12)
    if not math.isfinite(f(start)):
        raise NonFiniteError(f"objective is not finite at start {start.tolist()}")

    def objective(z):
        value = f(expit(np.clip(z, -_LOGIT_CAP, _LOGIT_CAP)))
        return -value if math.isfinite(value) else math.inf

    z0 = logit(start)
    simplex = np.array([z0, z0 + [0.5, 0.0], z0 + [0.0, 0.5]])
    res = minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={
            "xatol": settings.tol_x,
            "fatol": settings.tol_f,
            "maxiter": settings.max_iter,
            "maxfev": 4 * settings.max_iter,
            "initial_simplex": simplex,
        },
    )
    if not res.success:
        raise MaxIterError(f"Nelder-Mead stopped without converging: {res.message}")
    x = expit(np.clip(res.x, -_LOGIT_CAP, _LOGIT_CAP))
    return MaxResult(x, -float(res.fun), int(res.nit), int(res.nfev))


def _steps(point: np.ndarray, fd_step: float) -> np.ndarray:
    return fd_step * np.maximum(np.abs(point), 1.0)


def numerical_hessian(
    f: Callable[[np.ndarray], float],
    point: Sequence[float],
    settings: Optional[OptimSettings] = None,
) -> np.ndarray:
    """Central-difference Hessian of ``f`` at ``point``.

    Off-diagonal entries come from a single four-point mixed difference, so
    the result is exactly symmetric.
    """
    settings = settings or OptimSettings()
    x = np.asarray(point, dtype=float)
    n = x.size
    h = _steps(x, settings.fd_step)
    f0 = f(x)
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        H[i, i] = (f(x + e) - 2.0 * f0 + f(x - e)) / h[i] ** 2
        for j in range(i):
            d = np.zeros(n)
            d[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + e + d) - f(x + e - d) - f(x - e + d) + f(x - e - d)
            ) / (4.0 * h[i] * h[j])
    return H


def standard_errors(hessian: np.ndarray) -> np.ndarray:
    """Square roots of the diagonal of the inverse observed information ``-hessian``.

    Raises:
        SingularInformationError: the information matrix is not positive definite.
    """
    info = -np.asarray(hessian, dtype=float)
    if not np.all(np.isfinite(info)):
        raise SingularInformationError("information matrix has non-finite entries")
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix is not positive definite") from exc
    inv_chol = np.linalg.inv(chol)
    cov = inv_chol.T @ inv_chol
    return np.sqrt(np.diag(cov))
