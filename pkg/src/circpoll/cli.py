"""Command-line interface: ``circpoll {analyze,simulate,compare,figures,profile}``.

Exit codes: 0 ok, 1 comparison found a failing statistic, 2 configuration
error, 3 unstable system, 4 simulation or quadrature failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import analytic
from .config import RunConfig, load_config, with_overrides
from .dists import SystemParams, make_batch_dist, make_service_dist
from .errors import (
    DegenerateDistribution,
    DomainError,
    InvalidConfig,
    InvalidParameter,
    MissingGridPoint,
    QuadratureFailure,
    SimDegenerate,
    TooFewReplications,
    UnstableSystem,
    WrongDistribution,
    ZeroElapsed,
)
from .sim_core import SimConfig, run_continuous
from .sim_discrete import CONVERGENCE_COLUMNS, DiscreteConfig, convergence_table, format_row, run_discrete
from .stats import t_quantile

EXIT_OK = 0
EXIT_COMPARE_FAIL = 1
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_SIM = 4

_CONFIG_ERRORS = (InvalidConfig, InvalidParameter, DegenerateDistribution, DomainError, WrongDistribution, MissingGridPoint)
_SIM_ERRORS = (SimDegenerate, QuadratureFailure, TooFewReplications, ZeroElapsed, MemoryError)


def _g(v: float) -> str:
    return f"{v:.9g}"


def _csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get("CP_SEED"):
        try:
            seed = int(os.environ["CP_SEED"])
        except ValueError as e:
            raise InvalidConfig(f"CP_SEED must be an integer, got {os.environ['CP_SEED']!r}") from e
    try:
        return with_overrides(cfg, seed=seed, reps=getattr(args, "reps", None), horizon=getattr(args, "horizon", None))
    except TypeError as e:  # pragma: no cover - argparse already types the flags
        raise InvalidConfig(str(e)) from e


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    p = _resolve(args).system()
    _emit(_json(analytic.analyze(p).to_dict()), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    p = cfg.system()
    if args.mode == "discrete":
        n = args.n if args.n is not None else cfg.n_queues
        res = run_discrete(p, DiscreteConfig(n, cfg.total_switchover), cfg.sim, workers=args.workers)
    else:
        res = run_continuous(p, cfg.sim, workers=args.workers)
    doc = res.to_dict()
    doc.pop("backend", None)  # output bytes must not depend on which kernel ran
    sys.stdout.write(_json(doc))
    if args.out and res.l_profile:
        _emit(res.profile_csv(), args.out)
    return EXIT_OK


def _parse_tamper(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise InvalidConfig(f"--tamper expects NAME=VALUE, got {item!r}")
        out[key] = float(val)
    return out


def cmd_compare(args) -> int:
    """Analytic value vs. simulation CI for each statistic; fail beyond 3 standard errors."""
    cfg = _resolve(args)
    p = cfg.system()
    rep = analytic.analyze(p)
    res = run_continuous(p, cfg.sim, workers=args.workers)
    lk = p.lam * p.batch.mean_k
    expected = {
        "mean_l": rep.mean_l,
        "mean_batch_sojourn": rep.mean_sojourn_batch,
        "mean_wait": rep.mean_l / lk,  # Little's law for the waiting room
    }
    observed = {"mean_l": res.mean_l, "mean_batch_sojourn": res.mean_batch_sojourn, "mean_wait": res.mean_wait}
    for x, e in res.l_profile.items():
        expected[f"l_of_x[{_g(x)}]"] = analytic.cum_density(rep.density, x)
        observed[f"l_of_x[{_g(x)}]"] = e
    for key, val in _parse_tamper(args.tamper).items():
        if key not in expected:
            raise InvalidConfig(f"--tamper: unknown statistic {key!r}")
        expected[key] = val

    rows = []
    failed = False
    for key, val in expected.items():
        e = observed[key]
        se = e.halfwidth_95 / t_quantile(0.95, e.n - 1) if e.n > 1 else 0.0
        dev = abs(e.mean - val) / se if se > 0 else (0.0 if e.mean == val else math.inf)
        ok = dev <= 3.0
        failed |= not ok
        rows.append([key, _g(val), _g(e.mean), _g(e.halfwidth_95), _g(dev), "pass" if ok else "fail"])
    text = _csv(["statistic", "analytic", "sim_mean", "sim_halfwidth", "std_errors", "result"], rows)
    _emit(text, args.out)
    return EXIT_COMPARE_FAIL if failed else EXIT_OK


FIGURE_COLUMNS = ("figure", "rho", "batch_dist", "N") + CONVERGENCE_COLUMNS[3:]


def figure_rows(cfg: RunConfig, figure: int, workers: int = 1) -> list[list[str]]:
    f = cfg.figures
    if figure == 1:
        batches, service = f.figure1_batches, f.figure1_service
    elif figure == 2:
        batches, service = f.figure2_batches, f.figure2_service
    else:
        raise InvalidConfig(f"--figure must be 1 or 2, got {figure}")
    svc = make_service_dist(service)
    rows = []
    for rho in f.rho_grid:
        horizon = cfg.sim.horizon * (1.0 - rho) ** (-f.horizon_load_exponent)
        sim = replace(cfg.sim, horizon=horizon)
        for spec in batches:
            p = SystemParams.for_load(rho, f.alpha, make_batch_dist(spec), svc)
            for r in convergence_table(p, f.n_grid, sim, switchover=f.total_switchover, workers=workers):
                n, rho_s, label, *rest = format_row(r)
                rows.append([str(figure), rho_s, label, n, *rest])
    return rows


def cmd_figures(args) -> int:
    cfg = _resolve(args)
    rows = figure_rows(cfg, args.figure, workers=args.workers)
    _emit(_csv(FIGURE_COLUMNS, rows), args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _resolve(args)
    p = cfg.system()
    dens = analytic.density_f(p)
    sim_cfg = cfg.sim if cfg.sim.pasta_rate > 0 else replace(cfg.sim, pasta_rate=1.0)
    res = run_continuous(p, sim_cfg, workers=args.workers)
    rows = []
    for x, e in res.l_profile.items():
        rows.append([_g(x), _g(dens(x)), _g(analytic.cum_density(dens, x)), _g(e.mean), _g(e.halfwidth_95)])
    _emit(_csv(["x", "f_x", "l_of_x_analytic", "l_of_x_sim", "l_of_x_halfwidth"], rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="circpoll", description="Polling on a circle with batch arrivals.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, sim=True):
        sp.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
        sp.add_argument("--out", metavar="PATH", help="write the CSV/JSON output here instead of stdout")
        if sim:
            sp.add_argument("--seed", type=int, help="override the seed (takes precedence over CP_SEED)")
            sp.add_argument("--reps", type=int, help="override the number of replications")
            sp.add_argument("--horizon", type=float, help="override the simulated horizon")
            sp.add_argument("--workers", type=int, default=1, help="replications run on this many threads")

    sp = sub.add_parser("analyze", help="closed-form results as JSON")
    common(sp, sim=False)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="simulation estimates as JSON (profile CSV to --out)")
    common(sp)
    sp.add_argument("--mode", choices=("continuous", "discrete"), default="continuous")
    sp.add_argument("--n", type=int, help="number of queues for --mode discrete")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="analytic values against simulation CIs")
    common(sp)
    sp.add_argument("--tamper", action="append", metavar="NAME=VALUE", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("figures", help="discrete vs. continuous batch sojourn data as CSV")
    common(sp)
    sp.add_argument("--figure", type=int, choices=(1, 2), required=True)
    sp.set_defaults(func=cmd_figures)

    sp = sub.add_parser("profile", help="spatial density and L(x): analytic vs. simulated")
    common(sp)
    sp.set_defaults(func=cmd_profile)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnstableSystem as e:
        print(f"error: unstable system, rho = {e.rho:.6g} (must be < 1)", file=sys.stderr)
        return EXIT_UNSTABLE
    except _CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _SIM_ERRORS as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
