"""Command-line front end: estimate, bootstrap, simulate, table1.

Panels travel as long-format CSV with header ``unit,time,y,x1[,x2,...]``.
Option precedence is flags > config file (--config, JSON) > environment
(PANEL_MBB_THREADS for --threads) > built-in defaults, and the effective
configuration is echoed into every report. Exit codes: 0 success, 2 input
error, 3 numerical error; stderr carries the error identifier.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .dgp import Ar1Design, simulate_ar1, simulate_linear
from .errors import (
    DuplicateCell,
    InputError,
    MalformedCsv,
    NonFiniteValue,
    NumericalError,
    PanelMbbError,
    UnbalancedPanel,
    UnknownFormat,
)
from .inference import inference_report
from .mbb import bootstrap_distribution
from .montecarlo import (
    DEFAULT_ALPHA_GRID,
    ExperimentSpec,
    emit_table,
    merge_tables,
    run_experiment,
)
from .panel import (
    Contrast,
    PanelData,
    recover_fixed_effects,
    validate_panel,
    within_group_estimate,
)
from .variance import contrast_variance, variance_estimates

PAPER_SCALE_R = 10000
PAPER_SCALE_B = 1999
THREADS_ENV = "PANEL_MBB_THREADS"


# ---------------------------------------------------------------------------
# panel CSV ingestion
# ---------------------------------------------------------------------------

def parse_panel_csv(data) -> PanelData:
    """Long-format CSV (unit,time,y,x1,...) -> validated PanelData.

    Rows may arrive in any order; units are ordered by first appearance and
    periods ascending within unit. Every unit must cover the same set of
    time labels.
    """
    if isinstance(data, bytes):
        data = data.decode()
    reader = csv.reader(io.StringIO(data))
    header = next(reader, None)
    if header is None:
        raise MalformedCsv("empty file")
    header = [h.strip() for h in header]
    expected = ["unit", "time", "y"] + [f"x{j}" for j in range(1, max(1, len(header) - 3) + 1)]
    if len(header) < 4 or header != expected[: len(header)]:
        raise MalformedCsv(
            f"header must be unit,time,y,x1[,x2,...]; got {','.join(header)}"
        )
    k = len(header) - 3
    cells: dict[tuple[int, int], np.ndarray] = {}
    unit_order: list[int] = []
    seen_units: set[int] = set()
    times: set[int] = set()
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise MalformedCsv(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            unit = int(rec[0])
            time = int(rec[1])
            vals = np.array([float(v) for v in rec[2:]])
        except ValueError as exc:
            raise MalformedCsv(f"line {lineno}: {exc}") from exc
        if (unit, time) in cells:
            raise DuplicateCell(f"duplicate observation for unit {unit}, time {time}")
        if unit not in seen_units:
            seen_units.add(unit)
            unit_order.append(unit)
        cells[(unit, time)] = vals
        times.add(time)
    if not cells:
        raise MalformedCsv("no data rows")
    period_labels = sorted(times)
    m = len(period_labels)
    n = len(unit_order)
    if len(cells) != n * m:
        missing = [
            (u, t) for u in unit_order for t in period_labels if (u, t) not in cells
        ]
        raise UnbalancedPanel(
            f"missing {len(missing)} (unit,time) cells, e.g. {missing[:3]}"
        )
    y = np.empty((n, m))
    X = np.empty((n, m, k))
    for i, u in enumerate(unit_order):
        for t, label in enumerate(period_labels):
            row = cells[(u, label)]
            y[i, t] = row[0]
            X[i, t, :] = row[1:]
    return validate_panel(PanelData.from_arrays(y, X))


def write_panel_csv(panel: PanelData) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["unit", "time", "y"] + [f"x{j + 1}" for j in range(panel.k)])
    for i in range(panel.n):
        for t in range(panel.m):
            writer.writerow(
                [i + 1, t + 1, repr(float(panel.y[i, t]))]
                + [repr(float(v)) for v in panel.X[i, t, :]]
            )
    return buf.getvalue().encode()


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config file must hold a JSON object")
    return cfg


class _Resolver:
    """flags > config file > (env for threads) > defaults, with an echo trail."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config
        self.effective: dict = {}

    def get(self, key: str, default, cast=None):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key)
        if value is None:
            value = default
        if cast is not None and value is not None:
            value = cast(value)
        self.effective[key] = value
        return value

    def threads(self) -> int:
        # not recorded in the echoed config: reports must be byte-identical
        # across thread counts
        value = getattr(self.args, "threads", None)
        if value is None:
            value = self.config.get("threads")
        if value is None:
            env = os.environ.get(THREADS_ENV)
            if env is not None:
                try:
                    value = int(env)
                except ValueError as exc:
                    raise InputError(f"{THREADS_ENV} must be an integer") from exc
        if value is None:
            value = 1
        value = int(value)
        if value < 1:
            raise InputError("threads must be at least 1")
        return value


def _parse_float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip() != "")
    except ValueError as exc:
        raise InputError(f"bad numeric list {text!r}") from exc


def _parse_int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip() != "")
    except ValueError as exc:
        raise InputError(f"bad integer list {text!r}") from exc


def _parse_seed(value) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise InputError("seed must fit in an unsigned 64-bit integer")
    return seed


def _write_output(data: bytes, path: str | None):
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _round6(x: float) -> float:
    return float(_fmt(x))


def _matrix6(mat: np.ndarray) -> list:
    return [[_round6(v) for v in row] for row in np.atleast_2d(mat)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _default_bandwidth(m: int) -> int:
    # Newey-West style rule of thumb; used only when no bandwidth is given.
    return int(math.floor(4.0 * (m / 100.0) ** (2.0 / 9.0)))


def cmd_estimate(res: _Resolver) -> bytes:
    input_path = res.get("input", None)
    if input_path is None:
        raise InputError("estimate requires --input")
    fmt = res.get("format", "text")
    bandwidth_opt = res.get("bandwidth", None)
    with_fe = bool(res.get("fixed_effects", False))
    with open(input_path, "rb") as fh:
        panel = parse_panel_csv(fh.read())
    fit = within_group_estimate(panel)
    bandwidth = int(bandwidth_opt) if bandwidth_opt is not None else _default_bandwidth(panel.m)
    res.effective["bandwidth"] = bandwidth
    ve = variance_estimates(panel, fit, "plug_in_hac", bandwidth=bandwidth)
    nm = panel.n * panel.m
    ses = np.sqrt(np.diag(ve.upsilon) / nm)
    alpha_hat = recover_fixed_effects(fit) if with_fe else None
    if fmt == "json":
        obj = {
            "config": res.effective,
            "n": panel.n,
            "m": panel.m,
            "k": panel.k,
            "beta_hat": [_round6(b) for b in fit.beta_hat],
            "std_errors": [_round6(s) for s in ses],
            "sigma_hat": _matrix6(fit.sigma_hat),
            "upsilon_hac": _matrix6(ve.upsilon),
        }
        if alpha_hat is not None:
            obj["fixed_effects"] = [_round6(a) for a in alpha_hat]
        return (json.dumps(obj, indent=2) + "\n").encode()
    if fmt != "text":
        raise UnknownFormat(f"estimate supports text or json, not {fmt!r}")
    lines = ["# config: " + json.dumps(res.effective, separators=(",", ":"))]
    lines.append(f"within-group estimate  n={panel.n} m={panel.m} k={panel.k}")
    for j in range(panel.k):
        lines.append(f"beta[{j + 1}] = {_fmt(fit.beta_hat[j])}   se = {_fmt(ses[j])}")
    lines.append("sigma_hat:")
    for row in np.atleast_2d(fit.sigma_hat):
        lines.append("  " + "  ".join(_fmt(v) for v in row))
    lines.append(f"upsilon (HAC, bandwidth={bandwidth}):")
    for row in np.atleast_2d(ve.upsilon):
        lines.append("  " + "  ".join(_fmt(v) for v in row))
    if alpha_hat is not None:
        lines.append("fixed effects:")
        for i, a in enumerate(alpha_hat, start=1):
            lines.append(f"  alpha[{i}] = {_fmt(a)}")
    return ("\n".join(lines) + "\n").encode()


def cmd_bootstrap(res: _Resolver) -> bytes:
    input_path = res.get("input", None)
    if input_path is None:
        raise InputError("bootstrap requires --input")
    q = res.get("q", None, cast=int)
    if q is None:
        raise InputError("bootstrap requires --q (a divisor of m)")
    B = res.get("B", 399, cast=int)
    alphas = _parse_float_list(res.get("alpha", "0.10"))
    res.effective["alpha"] = list(alphas)
    seed = _parse_seed(res.get("seed", 0))
    threads = res.threads()
    fmt = res.get("format", "json")
    methods_opt = res.get("method", "reverse_percentile,studentized")
    methods = (
        ("reverse_percentile", "studentized", "normal_approx")
        if methods_opt == "all"
        else tuple(str(methods_opt).split(","))
    )
    for meth in methods:
        if meth not in ("reverse_percentile", "studentized", "normal_approx"):
            raise InputError(f"unknown method {meth!r}")
    res.effective["method"] = list(methods)
    with open(input_path, "rb") as fh:
        panel = parse_panel_csv(fh.read())
    contrast_opt = res.get("contrast", None)
    if contrast_opt is None:
        c = np.zeros(panel.k)
        c[0] = 1.0
        contrast = Contrast(c)
    else:
        contrast = Contrast(np.array(_parse_float_list(contrast_opt)))
    res.effective["contrast"] = [float(v) for v in contrast.c]

    fit = within_group_estimate(panel)
    needs_sigma = any(meth in ("studentized", "normal_approx") for meth in methods)
    run = bootstrap_distribution(
        panel, q, B, seed,
        contrast=contrast,
        studentize="studentized" in methods,
        threads=threads,
    )
    sigma_hat = None
    if needs_sigma:
        # bootstrap workflows default to the HAC sandwich at the block length
        # (capped at m-1 so a full-length block still studentises)
        bandwidth = min(q, panel.m - 1)
        ve = variance_estimates(panel, fit, "plug_in_hac", bandwidth=bandwidth)
        sigma_hat = math.sqrt(contrast_variance(ve.upsilon, contrast))
    nm = panel.n * panel.m
    reports = {
        meth: inference_report(meth, fit, run, contrast, alphas, sigma_hat=sigma_hat, nm=nm)
        for meth in methods
    }
    first = next(iter(reports.values()))
    obj = {
        "config": res.effective,
        "n": panel.n,
        "m": panel.m,
        "k": panel.k,
        "p": run.plan_geometry[0],
        "q": run.plan_geometry[1],
        "B": run.B,
        "seed": seed,
        "theta_hat": _round6(first.theta_hat),
        "theta_corrected": _round6(first.theta_checked),
        "sigma_hat": _round6(sigma_hat) if sigma_hat is not None else None,
        "reports": {
            meth: {
                "alpha_levels": [_round6(a) for a in rep.alpha_levels],
                "ci_lower": [_round6(v) for v in rep.ci_lower],
                "ci_upper": [_round6(v) for v in rep.ci_upper],
            }
            for meth, rep in reports.items()
        },
    }
    if fmt == "json":
        return (json.dumps(obj, indent=2) + "\n").encode()
    if fmt != "text":
        raise UnknownFormat(f"bootstrap supports text or json, not {fmt!r}")
    lines = ["# config: " + json.dumps(res.effective, separators=(",", ":"))]
    lines.append(
        f"block bootstrap  n={panel.n} m={panel.m} p={obj['p']} q={q} B={B} seed={seed}"
    )
    lines.append(f"theta_hat = {_fmt(first.theta_hat)}")
    lines.append(f"theta_corrected = {_fmt(first.theta_checked)}")
    if sigma_hat is not None:
        lines.append(f"sigma_hat = {_fmt(sigma_hat)}")
    for meth, rep in reports.items():
        for a, lo, hi in zip(rep.alpha_levels, rep.ci_lower, rep.ci_upper):
            lines.append(
                f"{meth} {100 * (1 - a):.4g}% CI: [{_fmt(lo)}, {_fmt(hi)}]"
            )
    return ("\n".join(lines) + "\n").encode()


def cmd_simulate(res: _Resolver) -> bytes:
    n = res.get("n", None, cast=int)
    m = res.get("m", None, cast=int)
    if n is None or m is None:
        raise InputError("simulate requires --n and --m")
    spec = res.get("spec", "ar1")
    seed = _parse_seed(res.get("seed", 0))
    if spec == "ar1":
        beta = float(res.get("beta", 0.0))
        panel = simulate_ar1(Ar1Design(beta=beta, n=n, m=m, seed=seed))
    else:
        k = res.get("k", 1, cast=int)
        beta_list = _parse_float_list(res.get("beta", "0.0"))
        if len(beta_list) == 1 and k > 1:
            beta_list = beta_list * k
        alpha_sd = float(res.get("alpha_sd", 1.0))
        panel = simulate_linear(n, m, k, beta_list, spec=spec, seed=seed, alpha_sd=alpha_sd)
    return write_panel_csv(panel)


def cmd_table1(res: _Resolver) -> bytes:
    n = res.get("n", 200, cast=int)
    m = res.get("m", 200, cast=int)
    beta = float(res.get("beta", 0.0))
    qs = _parse_int_list(res.get("q", "10"))
    res.effective["q"] = list(qs)
    paper_scale = bool(res.get("paper_scale", False))
    default_R = PAPER_SCALE_R if paper_scale else 500
    default_B = PAPER_SCALE_B if paper_scale else 399
    R = res.get("R", default_R, cast=int)
    B = res.get("B", default_B, cast=int)
    alpha_grid = _parse_float_list(res.get("alpha", ",".join(str(a) for a in DEFAULT_ALPHA_GRID)))
    res.effective["alpha"] = list(alpha_grid)
    ci_levels = _parse_float_list(res.get("ci_level", "0.9"))
    res.effective["ci_level"] = list(ci_levels)
    seed = _parse_seed(res.get("seed", 0))
    threads = res.threads()
    studentized = bool(res.get("studentized", False))
    fmt = res.get("format", "text")
    tables = []
    for q in qs:
        spec = ExperimentSpec(
            design=Ar1Design(beta=beta, n=n, m=m, seed=0),
            q=q,
            B=B,
            R=R,
            alpha_grid=alpha_grid,
            seed=seed,
            threads=threads,
            ci_levels=ci_levels,
            studentized=studentized,
        )
        tables.append(run_experiment(spec))
    effective = dict(res.effective)
    table = merge_tables(tables, spec=effective)
    return emit_table(table, fmt)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panel-mbb",
        description="Within-group panel estimation with moving block bootstrap inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--format", choices=["text", "csv", "json"], default=None)
        p.add_argument("--seed", default=None, help="64-bit unsigned seed")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (fallback: ${THREADS_ENV})")

    p_est = sub.add_parser("estimate", help="within-group fit with HAC sandwich errors")
    common(p_est)
    p_est.add_argument("--input", help="panel CSV (unit,time,y,x1,...)")
    p_est.add_argument("--bandwidth", type=int, default=None, help="HAC lag truncation")
    p_est.add_argument("--fixed-effects", dest="fixed_effects", action="store_const",
                       const=True, default=None, help="also report unit intercepts")

    p_boot = sub.add_parser("bootstrap", help="block bootstrap confidence intervals")
    common(p_boot)
    p_boot.add_argument("--input", help="panel CSV (unit,time,y,x1,...)")
    p_boot.add_argument("--q", type=int, default=None, help="block length (must divide m)")
    p_boot.add_argument("--B", type=int, default=None, help="bootstrap replications")
    p_boot.add_argument("--alpha", default=None,
                        help="comma list of miscoverage levels (default 0.10)")
    p_boot.add_argument("--contrast", default=None,
                        help="comma list c for inference on c'beta (default e1)")
    p_boot.add_argument("--method", default=None,
                        help="all or comma list of reverse_percentile,studentized,normal_approx")

    p_sim = sub.add_parser("simulate", help="write a simulated panel as CSV")
    common(p_sim)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--m", type=int, default=None)
    p_sim.add_argument("--beta", default=None, help="slope (comma list for k > 1)")
    p_sim.add_argument("--spec", choices=["ar1", "iid", "feedback", "zero_noise"], default=None)
    p_sim.add_argument("--k", type=int, default=None, help="regressor count (iid/zero_noise)")
    p_sim.add_argument("--alpha-sd", dest="alpha_sd", default=None,
                       help="s.d. of unit effects for the linear menu")

    p_tab = sub.add_parser("table1", help="quantile study of the bootstrap distribution")
    common(p_tab)
    p_tab.add_argument("--n", type=int, default=None)
    p_tab.add_argument("--m", type=int, default=None)
    p_tab.add_argument("--beta", default=None)
    p_tab.add_argument("--q", default=None, help="block length or comma list of divisors of m")
    p_tab.add_argument("--B", type=int, default=None)
    p_tab.add_argument("--R", type=int, default=None, help="Monte Carlo replications")
    p_tab.add_argument("--alpha", default=None, help="comma list of nominal CDF levels")
    p_tab.add_argument("--ci-level", dest="ci_level", default=None,
                       help="comma list of CI confidence levels for coverage summaries")
    p_tab.add_argument("--studentized", action="store_const", const=True, default=None,
                       help="also studentized coverage (slower)")
    p_tab.add_argument("--paper-scale", dest="paper_scale", action="store_const",
                       const=True, default=None, help=f"R={PAPER_SCALE_R}, B={PAPER_SCALE_B}")

    return parser


_HANDLERS = {
    "estimate": cmd_estimate,
    "bootstrap": cmd_bootstrap,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        res = _Resolver(args, config)
        res.effective["command"] = args.command
        out = _HANDLERS[args.command](res)
        _write_output(out, getattr(args, "output", None))
    except InputError as exc:
        print(f"panel-mbb: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"panel-mbb: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except PanelMbbError as exc:  # pragma: no cover - defensive
        print(f"panel-mbb: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"panel-mbb: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
