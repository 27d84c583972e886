"""Input parsing and report serialisation (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import DetectionHistory, FitResult, SuffStats, compute_suff_stats
from .errors import EmptyFileError, InputError, InvariantViolation, MalformedCellError, RaggedRowsError
from .estimate import SensitivityProfile
from .sim import PARAMS, STUDY_METHODS, StudyCell, StudySummary

FIT_FIELDS = ("method", "psi_hat", "se_psi", "p_hat", "se_p", "eta_hat", "theta_hat",
              "converged", "boundary_flag", "identifiable", "iterations")
STUDY_ROWS = ("True value", "Median estimate", "Median SE", "MAD", "Efficiency", "MAD efficiency")
STUDY_KEYS = ("S", "tau", "psi_true", "p_true", "n_sim", "seed", "drop_boundary")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_history_csv(path) -> DetectionHistory:
    """Read a rectangular 0/1 table, one row per site.

    A first row containing any non-numeric token is taken as a header.  Row
    numbers in error messages are 1-based file lines.
    """
    text = Path(path).read_text()
    rows = [(n, [c.strip() for c in row]) for n, row in enumerate(csv.reader(io.StringIO(text)), 1)]
    rows = [(n, row) for n, row in rows if any(row)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path}: no detection rows")
    width = len(rows[0][1])
    matrix = []
    for n, row in rows:
        if len(row) != width:
            raise RaggedRowsError(n, width, len(row))
        for col, cell in enumerate(row, 1):
            if cell not in ("0", "1"):
                raise MalformedCellError(n, col, cell)
        matrix.append([int(c) for c in row])
    return DetectionHistory(np.array(matrix, dtype=np.int8))


def suffstats_from_mapping(data) -> SuffStats:
    if not isinstance(data, dict):
        raise InputError("sufficient statistics must be a JSON object")
    missing = [k for k in ("S", "tau", "f0", "y") if k not in data]
    if missing:
        raise InvariantViolation(f"missing keys: {', '.join(missing)}")
    return SuffStats(S=data["S"], tau=data["tau"], f0=data["f0"], y=data["y"], b=data.get("b"))


def parse_suffstats_json(path) -> SuffStats:
    """Read ``{"S", "tau", "f0", "y"[, "b"]}``; without ``b`` the partial estimator is refused."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return suffstats_from_mapping(data)


def load_stats(path) -> SuffStats:
    """Sufficient statistics from either a ``.json`` stats file or a detection-matrix CSV."""
    if Path(path).suffix.lower() == ".json":
        return parse_suffstats_json(path)
    return compute_suff_stats(parse_history_csv(path))


def _json_number(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _write_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_value(v) for v in row])
    return buf.getvalue()


def emit_fit(results: Sequence[FitResult], fmt: str = "json", stats: Optional[SuffStats] = None) -> str:
    """Serialise fit results, one JSON object or CSV row per method.

    Floats are written with ``repr`` so they round-trip exactly; NaN becomes
    ``null`` in JSON and an empty CSV cell.
    """
    rows = [r.as_dict() for r in results]
    if fmt == "csv":
        return _write_csv(FIT_FIELDS, ([row[k] for k in FIT_FIELDS] for row in rows))
    doc = {"fits": [{k: _json_number(row[k]) if k != "method" else row[k] for k in FIT_FIELDS}
                    for row in rows]}
    if stats is not None:
        doc = {"stats": stats.as_dict(), **doc}
    return json.dumps(doc, indent=2) + "\n"


def _cell_values(summary: StudySummary) -> list:
    c = summary.cell
    return [c.S, c.tau, c.psi, c.p, c.n_sim, c.seed, summary.drop_boundary]


def study_table(summary: StudySummary) -> list[tuple[str, dict]]:
    """Rows of the summary table; each maps ``"<method>_<param>"`` to a number or None."""
    columns = [f"{m}_{p}" for m in STUDY_METHODS for p in PARAMS]
    table = []
    for label in STUDY_ROWS:
        values = {}
        for m in STUDY_METHODS:
            for p in PARAMS:
                s = summary.summaries[m][p]
                value = {
                    "True value": summary.true_value(p),
                    "Median estimate": s.median_estimate,
                    "Median SE": s.median_se,
                    "MAD": s.mad,
                    "Efficiency": summary.efficiency[p] if m == "partial" else None,
                    "MAD efficiency": summary.mad_efficiency[p] if m == "partial" else None,
                }[label]
                values[f"{m}_{p}"] = value
        table.append((label, {k: values[k] for k in columns}))
    return table


def emit_study(summaries: Sequence[StudySummary], fmt: str = "csv") -> str:
    """Serialise study summaries in the layout of a published simulation table.

    One block of rows per cell (true value, median estimate, median SE, MAD,
    efficiency, MAD-based efficiency) with columns per method and parameter,
    plus the replicate bookkeeping.
    """
    if isinstance(summaries, StudySummary):
        summaries = [summaries]
    columns = [f"{m}_{p}" for m in STUDY_METHODS for p in PARAMS]
    if fmt == "csv":
        header = [*STUDY_KEYS, "statistic", *columns, "n_used", "n_dropped"]
        rows = []
        for s in summaries:
            for label, values in study_table(s):
                rows.append([*_cell_values(s), label, *(values[c] for c in columns),
                             s.n_used, s.n_dropped])
        return _write_csv(header, rows)
    cells = []
    for s in summaries:
        cells.append({
            **dict(zip(STUDY_KEYS, (_json_number(v) for v in _cell_values(s)))),
            "n_used": s.n_used,
            "n_dropped": s.n_dropped,
            "rows": {label: {c: (None if v is None else _json_number(v)) for c, v in values.items()}
                     for label, values in study_table(s)},
        })
    return json.dumps({"cells": cells}, indent=2) + "\n"


def emit_sensitivity(profile: SensitivityProfile, p_hat: Optional[float] = None) -> str:
    """CSV of the occupancy-at-known-p curve, ready for external plotting.

    When ``p_hat`` is given an extra row with ``marker=1`` carries the
    curve evaluated at the fitted detection probability.
    """
    header = ("p", "psi_bar", "derivative", "printed_derivative", "exceeds_one", "marker")
    rows = [
        (float(p), float(v), float(d), float(pd), bool(v > 1.0), 0)
        for p, v, d, pd in zip(profile.grid, profile.psi_bar, profile.derivative,
                               profile.printed_derivative)
    ]
    if p_hat is not None and 0.0 < p_hat < 1.0:
        tau, frac = profile.tau, profile.detected_fraction
        theta = -math.expm1(tau * math.log1p(-p_hat))
        q_pow = (1.0 - p_hat) ** (tau - 1)
        v = frac / theta
        rows.append((float(p_hat), v, -frac * tau * q_pow / theta**2, frac * tau * q_pow / theta,
                     v > 1.0, 1))
    return _write_csv(header, rows)


def emit_history(history: DetectionHistory) -> str:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in history.matrix)


def parse_study_config(path, base_seed: int) -> list[StudyCell]:
    """Read a JSON list of cells ``{"S", "tau", "psi", "p"[, "n_sim", "seed"]}``.

    Cells without a seed get one derived from ``base_seed`` and their position.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(data, dict):
        data = data.get("cells", [data])
    if not isinstance(data, list) or not data:
        raise InputError(f"{path}: expected a non-empty list of study cells")
    cells = []
    for k, item in enumerate(data):
        try:
            seed = item.get("seed")
            if seed is None:
                seed = int(np.random.SeedSequence([base_seed, k]).generate_state(1)[0])
            cells.append(StudyCell(S=int(item["S"]), tau=int(item["tau"]), psi=float(item["psi"]),
                                   p=float(item["p"]), n_sim=int(item.get("n_sim", 1000)),
                                   seed=int(seed)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputError(f"{path}: cell {k} is invalid ({exc})") from exc
    return cells
