"""Repeated simulation -> bootstrap -> quantile-table experiment harness.

Each replication simulates a fresh AR(1) panel, runs the block bootstrap,
and evaluates the empirical CDF of the scaled bootstrap deltas at the
percentile points of the analytic limit law (which is not centred at zero).
Averaging those CDF values over replications gives a QQ-comparison in table
form, one row per block geometry, together with bias and coverage summaries.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dgp import Ar1Design, ar1_limit_law, simulate_ar1
from .errors import IndivisibleBlockLength, InputError, InsufficientReps, UnknownFormat
from .inference import bias_corrected_estimate, reverse_percentile_ci, studentized_ci
from .mbb import bootstrap_distribution, valid_block_lengths
from .normal import norm_ppf
from .panel import Contrast, within_group_estimate
from .rng import derive_seed
from .variance import contrast_variance, omega_plug_in_hac, upsilon

DEFAULT_ALPHA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
FORMATS = ("text", "csv", "json")


@dataclass(frozen=True, slots=True)
class ExperimentSpec:
    """One quantile-study configuration: design, block length, and budgets."""

    design: Ar1Design
    q: int
    B: int
    R: int
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    seed: int = 0
    threads: int = 1
    ci_levels: tuple[float, ...] = (0.9,)
    studentized: bool = False

    def __post_init__(self):
        if self.design.m % self.q != 0:
            raise IndivisibleBlockLength(
                f"q={self.q} does not divide m={self.design.m}; "
                f"valid lengths: {valid_block_lengths(self.design.m)}"
            )
        if self.B < 1 or self.R < 1 or self.threads < 1:
            raise InputError("B, R, and threads must be positive")
        grid = tuple(float(a) for a in self.alpha_grid)
        if any(not 0.0 < a < 1.0 for a in grid):
            raise InputError("alpha grid entries must lie in (0, 1)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError("alpha grid must be strictly increasing")
        object.__setattr__(self, "alpha_grid", grid)
        levels = tuple(float(v) for v in self.ci_levels)
        if any(not 0.0 < v < 1.0 for v in levels):
            raise InputError("ci levels must lie in (0, 1)")
        object.__setattr__(self, "ci_levels", levels)


@dataclass(frozen=True, slots=True)
class RowSummary:
    """Across-replication averages attached to one table row."""

    mean_beta_hat: float
    mean_beta_corrected: float
    coverage: dict


@dataclass(frozen=True, slots=True)
class QuantileRow:
    n: int
    m: int
    p: int
    q: int
    levels: tuple[float, ...]
    cells: tuple[float, ...]
    mc_se: tuple[float, ...] | None
    summary: RowSummary | None = None


@dataclass(frozen=True, slots=True)
class QuantileTable:
    rows: tuple[QuantileRow, ...]
    spec: dict | None = None


def mc_standard_error(cells: np.ndarray) -> np.ndarray:
    """Per-cell Monte Carlo standard error: sample s.d. over replications / sqrt(R)."""
    cells = np.asarray(cells, dtype=np.float64)
    if cells.ndim != 2:
        raise InputError("expected a (replications, cells) array")
    R = cells.shape[0]
    if R < 2:
        raise InsufficientReps(f"need at least 2 replications, got {R}")
    return cells.std(axis=0, ddof=1) / math.sqrt(R)


def _replication(spec: ExperimentSpec, r: int, grid_points: np.ndarray, contrast: Contrast):
    design = replace(spec.design, seed=derive_seed(spec.seed, 2 * r))
    boot_seed = derive_seed(spec.seed, 2 * r + 1)
    panel = simulate_ar1(design)
    fit = within_group_estimate(panel)
    run = bootstrap_distribution(
        panel, spec.q, spec.B, boot_seed, contrast=contrast, studentize=spec.studentized
    )
    scale = math.sqrt(panel.n * panel.m)
    deltas = scale * (run.beta_stars[:, 0] - fit.beta_hat[0])
    cells = (deltas[:, None] <= grid_points[None, :]).mean(axis=0)
    theta_hat = float(fit.beta_hat[0])
    theta_checked = float(bias_corrected_estimate(fit, run)[0])
    truth = spec.design.beta
    covers = []
    sigma = None
    if spec.studentized:
        bandwidth = min(spec.q, panel.m - 1)
        ups = upsilon(fit.sigma_hat, omega_plug_in_hac(panel, fit, bandwidth))
        sigma = math.sqrt(contrast_variance(ups, contrast))
    for level in spec.ci_levels:
        alpha = 1.0 - level
        lo, hi = reverse_percentile_ci(theta_hat, run, contrast, alpha)
        covers.append(1.0 if lo <= truth <= hi else 0.0)
        if spec.studentized:
            lo, hi = studentized_ci(theta_hat, sigma, run, contrast, alpha)
            covers.append(1.0 if lo <= truth <= hi else 0.0)
            lo, hi = normal_approx_ci(theta_checked, sigma, panel.n * panel.m, alpha)
            covers.append(1.0 if lo <= truth <= hi else 0.0)
    return cells, theta_hat, theta_checked, np.array(covers)


def run_experiment(spec: ExperimentSpec) -> QuantileTable:
    """Run the full quantile study for one block geometry.

    Replication r derives its dataset and bootstrap seeds from
    (spec.seed, r); replications are embarrassingly parallel and merged by
    index, so the result is identical for any thread count. No partial
    tables are produced: any replication error aborts the run.
    """
    law = ar1_limit_law(spec.design.beta, spec.design.n, spec.design.m)
    grid_points = law.mean + law.sd * norm_ppf(np.asarray(spec.alpha_grid))
    contrast = Contrast(np.array([1.0]))

    def work(r: int):
        return _replication(spec, r, grid_points, contrast)

    if spec.threads <= 1:
        results = [work(r) for r in range(spec.R)]
    else:
        with ThreadPoolExecutor(max_workers=spec.threads) as ex:
            results = list(ex.map(work, range(spec.R)))

    cells = np.vstack([res[0] for res in results])
    mean_cells = cells.mean(axis=0)
    ses = mc_standard_error(cells) if spec.R >= 2 else None
    beta_hats = np.array([res[1] for res in results])
    beta_checks = np.array([res[2] for res in results])
    cover = np.vstack([res[3] for res in results]).mean(axis=0)
    coverage: dict = {}
    pos = 0
    for level in spec.ci_levels:
        entry = {"reverse_percentile": float(cover[pos])}
        pos += 1
        if spec.studentized:
            entry["studentized"] = float(cover[pos])
            pos += 1
        coverage[_fmt(level)] = entry
    summary = RowSummary(
        mean_beta_hat=float(beta_hats.mean()),
        mean_beta_corrected=float(beta_checks.mean()),
        coverage=coverage,
    )
    row = QuantileRow(
        n=spec.design.n,
        m=spec.design.m,
        p=spec.design.m // spec.q,
        q=spec.q,
        levels=spec.alpha_grid,
        cells=tuple(float(c) for c in mean_cells),
        mc_se=tuple(float(s) for s in ses) if ses is not None else None,
        summary=summary,
    )
    return QuantileTable(rows=(row,), spec=_spec_dict(spec))


def _spec_dict(spec: ExperimentSpec) -> dict:
    # threads is deliberately not echoed: it cannot affect any result, and
    # serialized tables must be byte-identical across thread counts.
    return {
        "beta": spec.design.beta,
        "n": spec.design.n,
        "m": spec.design.m,
        "q": spec.q,
        "B": spec.B,
        "R": spec.R,
        "alpha_grid": list(spec.alpha_grid),
        "seed": spec.seed,
        "ci_levels": list(spec.ci_levels),
        "studentized": spec.studentized,
    }


def merge_tables(tables, spec: dict | None = None) -> QuantileTable:
    """Concatenate rows of several tables (e.g. one per block length)."""
    rows = tuple(row for table in tables for row in table.rows)
    if spec is None and tables:
        spec = tables[0].spec
    return QuantileTable(rows=rows, spec=spec)


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _round6(x: float) -> float:
    return float(_fmt(x))


def emit_table(table: QuantileTable, fmt: str) -> bytes:
    """Serialise a quantile table; all floats carry 6 significant digits."""
    if fmt == "csv":
        return _emit_csv(table)
    if fmt == "json":
        return _emit_json(table)
    if fmt == "text":
        return _emit_text(table)
    raise UnknownFormat(f"unknown format {fmt!r}; choose from {FORMATS}")


def _emit_csv(table: QuantileTable) -> bytes:
    buf = io.StringIO()
    if table.spec is not None:
        buf.write("# spec: " + json.dumps(table.spec, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "m", "p", "q", "level", "cell", "mc_se"])
    for row in table.rows:
        ses = row.mc_se if row.mc_se is not None else [""] * len(row.levels)
        for level, cell, se in zip(row.levels, row.cells, ses):
            writer.writerow(
                [row.n, row.m, row.p, row.q, _fmt(level), _fmt(cell), _fmt(se) if se != "" else ""]
            )
    return buf.getvalue().encode()


def parse_table_csv(data: bytes) -> QuantileTable:
    """Inverse of the CSV emitter (summaries are not part of the CSV form)."""
    text = data.decode()
    spec = None
    lines = []
    for line in text.splitlines():
        if line.startswith("# spec: "):
            spec = json.loads(line[len("# spec: "):])
        elif line.strip():
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["n", "m", "p", "q", "level", "cell", "mc_se"]:
        raise UnknownFormat(f"unexpected CSV header: {header}")
    groups: dict[tuple, dict] = {}
    for rec in reader:
        if len(rec) != 7:
            raise UnknownFormat(f"malformed CSV record: {rec}")
        key = (int(rec[0]), int(rec[1]), int(rec[2]), int(rec[3]))
        g = groups.setdefault(key, {"levels": [], "cells": [], "mc_se": []})
        g["levels"].append(float(rec[4]))
        g["cells"].append(float(rec[5]))
        g["mc_se"].append(float(rec[6]) if rec[6] != "" else None)
    rows = []
    for (n, m, p, q), g in groups.items():
        ses = None if any(s is None for s in g["mc_se"]) else tuple(g["mc_se"])
        rows.append(
            QuantileRow(
                n=n, m=m, p=p, q=q,
                levels=tuple(g["levels"]),
                cells=tuple(g["cells"]),
                mc_se=ses,
            )
        )
    return QuantileTable(rows=tuple(rows), spec=spec)


def _summary_dict(row: QuantileRow) -> dict:
    out = {
        "n": row.n,
        "m": row.m,
        "p": row.p,
        "q": row.q,
        "mean_beta_hat": _round6(row.summary.mean_beta_hat),
        "mean_beta_corrected": _round6(row.summary.mean_beta_corrected),
        "coverage": {
            level: {meth: _round6(rate) for meth, rate in entry.items()}
            for level, entry in row.summary.coverage.items()
        },
    }
    return out


def _emit_json(table: QuantileTable) -> bytes:
    obj = {
        "spec": table.spec,
        "rows": [
            {
                "n": row.n,
                "m": row.m,
                "p": row.p,
                "q": row.q,
                "levels": [_round6(v) for v in row.levels],
                "cells": [_round6(v) for v in row.cells],
                "mc_se": [_round6(v) for v in row.mc_se] if row.mc_se is not None else None,
            }
            for row in table.rows
        ],
        "summaries": [
            _summary_dict(row) for row in table.rows if row.summary is not None
        ],
    }
    return (json.dumps(obj, indent=2) + "\n").encode()


def _emit_text(table: QuantileTable) -> bytes:
    lines = []
    if table.spec is not None:
        lines.append("# spec: " + json.dumps(table.spec, separators=(",", ":")))
    by_nm: dict[tuple, list[QuantileRow]] = {}
    for row in table.rows:
        by_nm.setdefault((row.n, row.m), []).append(row)
    for (n, m), rows in by_nm.items():
        levels = rows[0].levels
        lines.append(f"(n,m)=({n},{m})")
        lines.append("  ".join(["   p", "   q"] + [f"{lvl:>8.4f}" for lvl in levels]))
        for row in rows:
            lines.append(
                "  ".join(
                    [f"{row.p:>4d}", f"{row.q:>4d}"]
                    + [f"{cell:>8.4f}" for cell in row.cells]
                )
            )
        if any(row.mc_se is not None for row in rows):
            lines.append("mc standard errors:")
            for row in rows:
                if row.mc_se is not None:
                    lines.append(
                        "  ".join(
                            [f"{row.p:>4d}", f"{row.q:>4d}"]
                            + [f"{se:>8.4f}" for se in row.mc_se]
                        )
                    )
    for row in table.rows:
        if row.summary is None:
            continue
        s = row.summary
        cov = "; ".join(
            f"level {level}: " + ", ".join(f"{meth}={_fmt(rate)}" for meth, rate in entry.items())
            for level, entry in s.coverage.items()
        )
        lines.append(
            f"summary (n,m,p,q)=({row.n},{row.m},{row.p},{row.q}): "
            f"mean_beta_hat={_fmt(s.mean_beta_hat)} "
            f"mean_beta_corrected={_fmt(s.mean_beta_corrected)} "
            f"coverage: {cov}"
        )
    return ("\n".join(lines) + "\n").encode()
