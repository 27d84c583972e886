"""Detection-history simulation and Monte-Carlo comparison of the partial and
full-likelihood estimators."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .core import DetectionHistory, compute_suff_stats
from .errors import AllDroppedError, DomainError, EstimationError, NumericalError
from .estimate import fit_full, fit_partial
from .optim import OptimSettings

MAD_SCALE = 1.4826
STUDY_METHODS = ("partial", "full")
PARAMS = ("p", "psi")


def simulate_history(S: int, tau: int, psi: float, p: float, rng: np.random.Generator) -> DetectionHistory:
    """Draw one S x tau detection matrix.

    Occupancy is drawn once per site and held fixed over the visits; an
    unoccupied site yields an all-zero row.
    """
    if S < 1 or tau < 1:
        raise DomainError("S and tau must be >= 1")
    if not (0 <= psi <= 1 and 0 <= p <= 1):
        raise DomainError("psi and p must lie in [0, 1]")
    occupied = rng.random(S) < psi
    detections = (rng.random((S, tau)) < p) & occupied[:, None]
    return DetectionHistory(detections.astype(np.int8))


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a study seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


class RobustSummary(NamedTuple):
    median: float
    mad: float
    variance: float


def robust_summaries(values) -> RobustSummary:
    """Median, normal-consistent MAD (scaled by 1.4826) and sample variance.

    NaNs are ignored.  The variance of a single value is NaN.
    """
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise ValueError("robust_summaries needs at least one value")
    med = float(np.median(x))
    mad = float(np.median(np.abs(x - med)) * MAD_SCALE)
    var = float(np.var(x, ddof=1)) if x.size > 1 else math.nan
    return RobustSummary(med, mad, var)


@dataclass(frozen=True)
class StudyCell:
    S: int
    tau: int
    psi: float
    p: float
    n_sim: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_sim < 1:
            raise DomainError("n_sim must be >= 1")
        if self.S < 1 or self.tau < 1:
            raise DomainError("S and tau must be >= 1")
        if not (0 < self.psi < 1 and 0 < self.p < 1):
            raise DomainError("psi and p must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class Replicate:
    """Estimates from one simulated data set; ``None`` marks a failed fit."""

    index: int
    partial: Optional[tuple]
    full: Optional[tuple]

    def estimates(self, method):
        return getattr(self, method)


def run_replicate(cell: StudyCell, index: int, settings: Optional[OptimSettings] = None) -> Replicate:
    rng = replicate_rng(cell.seed, index)
    stats = compute_suff_stats(simulate_history(cell.S, cell.tau, cell.psi, cell.p, rng))
    out = {}
    start = None
    for method in STUDY_METHODS:
        try:
            if method == "partial":
                r = fit_partial(stats)
                if 0 < r.p_hat < 1 and r.psi_hat < 1:
                    start = (r.psi_hat, r.p_hat)
            else:
                r = fit_full(stats, settings, start=start)
        except (EstimationError, NumericalError):
            out[method] = None
            continue
        out[method] = (r.p_hat, r.psi_hat, r.se_p, r.se_psi, r.boundary_flag)
    return Replicate(index, out["partial"], out["full"])


@dataclass(frozen=True)
class ParamSummary:
    median_estimate: float
    median_se: float
    mad: float
    variance: float


@dataclass(frozen=True)
class StudySummary:
    """Robust summaries of one simulation cell.

    ``summaries[method][param]`` holds the median estimate, median standard
    error, scaled MAD and variance.  ``efficiency[param]`` is the ratio of the
    full-likelihood to the partial-likelihood variance over the retained
    replicates; ``mad_efficiency`` is the same ratio built from squared MADs.
    """

    cell: StudyCell
    drop_boundary: bool
    n_used: int
    n_dropped: int
    summaries: dict = field(default_factory=dict)
    efficiency: dict = field(default_factory=dict)
    mad_efficiency: dict = field(default_factory=dict)

    def true_value(self, param: str) -> float:
        return self.cell.p if param == "p" else self.cell.psi


def _keep(rep: Replicate, drop_boundary: bool) -> bool:
    for method in STUDY_METHODS:
        est = rep.estimates(method)
        if est is None:
            return False
        p_hat, psi_hat = est[0], est[1]
        if math.isnan(psi_hat) or math.isnan(p_hat):
            return False
        if drop_boundary and (psi_hat >= 1.0 or (method == "full" and est[4] and psi_hat >= 1 - 1e-6)):
            return False
    return True


def _ratio(num: float, den: float) -> float:
    if den > 0 and math.isfinite(num) and math.isfinite(den):
        return num / den
    return math.nan


def summarize(cell: StudyCell, replicates, drop_boundary: bool) -> StudySummary:
    """Reduce replicates (in index order) to a :class:`StudySummary`."""
    replicates = sorted(replicates, key=lambda r: r.index)
    kept = [r for r in replicates if _keep(r, drop_boundary)]
    if not kept:
        raise AllDroppedError(f"all {len(replicates)} replicates were dropped")
    summaries = {}
    for method in STUDY_METHODS:
        arr = np.array([r.estimates(method)[:4] for r in kept], dtype=float)
        summaries[method] = {}
        for k, param in enumerate(PARAMS):
            est = robust_summaries(arr[:, k])
            se = arr[:, k + 2]
            median_se = float(np.median(se[~np.isnan(se)])) if np.any(~np.isnan(se)) else math.nan
            summaries[method][param] = ParamSummary(est.median, median_se, est.mad, est.variance)
    efficiency = {}
    mad_efficiency = {}
    for param in PARAMS:
        full, part = summaries["full"][param], summaries["partial"][param]
        efficiency[param] = _ratio(full.variance, part.variance)
        mad_efficiency[param] = _ratio(full.mad**2, part.mad**2)
    return StudySummary(cell, drop_boundary, len(kept), len(replicates) - len(kept),
                        summaries, efficiency, mad_efficiency)


def _run_chunk(args):
    cell, indices, settings = args
    return [run_replicate(cell, i, settings) for i in indices]


def run_study(
    cell: StudyCell,
    drop_boundary: bool = False,
    settings: Optional[OptimSettings] = None,
    n_jobs: int = 1,
) -> StudySummary:
    """Simulate ``cell.n_sim`` data sets and summarise both estimators.

    Replicate ``i`` draws from its own generator seeded by ``(cell.seed, i)``,
    so the summary does not depend on ``n_jobs``.  A replicate is dropped
    when either estimator fails and, with ``drop_boundary``, when either
    occupancy estimate reaches 1.
    """
    indices = range(cell.n_sim)
    if n_jobs <= 1:
        replicates = [run_replicate(cell, i, settings) for i in indices]
    else:
        chunks = [(cell, list(indices[k::n_jobs]), settings) for k in range(n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            replicates = [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]
    return summarize(cell, replicates, drop_boundary)
