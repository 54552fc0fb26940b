"""nbstein command-line driver.

    nbstein table1
    nbstein table2 --n 10,20,30 --format csv
    nbstein verify --suite lemmas --seed 1
    nbstein bound --config cfg.json [--z 4.5]
    nbstein cdo --config portfolio.json

Exit status: 0 success, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds as B
from .cdo import compare_bounds, oracle_tranche_loss, tranche_expected_loss
from .config import SHIPPED, load_config, shipped_config
from .errors import ConfigError, NBSteinError
from .nb import match_mean
from .oracle import true_error_profile
from .suites import SUITES, run_suite

SCHEMA_VERSION = 1
ORACLE_MAX_N = 20

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def table1_q() -> list[float]:
    """The 75 q_i: 1-10 -> 0.05, 11-20 -> 0.10, ..., 41-50 -> 0.25, 51-75 -> 0.30."""
    out = []
    for hi, q in ((10, 0.05), (20, 0.10), (30, 0.15), (40, 0.20), (50, 0.25), (75, 0.30)):
        out += [q] * (hi - len(out))
    return out


# -- output helpers -------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    fmt = args.format or ("csv" if rows is not None and args.command in ("table1", "table2") else "json")
    if fmt == "csv":
        if rows is None:
            raise ConfigError("this command has no tabular output; use --format json", "--format")
        text = _csv(rows)
    else:
        body = {"schema_version": SCHEMA_VERSION, "command": args.command, **payload}
        text = json.dumps(_jsonable(body), indent=2) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot write: {e.strerror}", args.out) from e
    else:
        sys.stdout.write(text)


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _load(spec: str):
    """A config path, or the stem of a shipped config."""
    if not Path(spec).exists() and spec in SHIPPED:
        return load_config(shipped_config(spec))
    return load_config(spec)


# -- commands -------------------------------------------------------------------

def cmd_table1(args) -> int:
    rows = [{"i": i + 1, "q_i": q} for i, q in enumerate(table1_q())]
    _emit(args, {"rows": rows}, rows)
    return EXIT_OK


def table2_rows(n_values, bernoulli_p=None) -> list[dict]:
    q = table1_q()
    rows = []
    for n in n_values:
        qn = q[:n]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            gen = B.theorem2_meanvar(B.geometric_dists(qn))
        row = {
            "n": n,
            "geo_poisson": B.remark_geometric_poisson(qn),
            "geo_nb_mean": B.remark_geometric_nb(qn, "mean"),
            "geo_nb_meanvar": B.remark_geometric_nb(qn, "meanvar"),
            "geo_nb_meanvar_theorem2": gen.bound_value,
        }
        if bernoulli_p is not None:
            pn = bernoulli_p[:n]
            row["bern_poisson"] = B.remark_bernoulli_poisson(pn)
            row["bern_nb_mean"] = B.remark_bernoulli_nb(pn)
        rows.append(row)
    return rows


def cmd_table2(args) -> int:
    n_values = args.n or [10, 20, 30, 40, 50]
    bad = [n for n in n_values if not 10 <= n <= 75]
    if bad:
        raise ConfigError(f"n must lie in 10..75, got {bad}", "--n")
    bp = None
    notes = ["geometric columns use the first n entries of the built-in q_i sequence",
             "geo_nb_meanvar uses the constant sqrt(2/pi)(sum q - 1/4)^(-1/2); "
             "geo_nb_meanvar_theorem2 uses sqrt(2/pi)(1/4 + sum delta - delta*)^(-1/2)"]
    if args.bernoulli_p is not None:
        bp = args.bernoulli_p
        if len(bp) == 1:
            bp = bp * max(n_values)
        if len(bp) < max(n_values):
            raise ConfigError(f"need at least {max(n_values)} values", "--bernoulli-p")
        if any(not 0 < x < 1 for x in bp):
            raise ConfigError("values must lie in (0, 1)", "--bernoulli-p")
        notes.append("Bernoulli columns use user-supplied p_i (no reference parameterization)")
        print("note: " + notes[-1], file=sys.stderr)
    rows = table2_rows(n_values, bp)
    _emit(args, {"rows": rows, "notes": notes}, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}", "--suite")
    res = run_suite(args.suite, seed=args.seed, budget=args.budget, tol=args.tol)
    _emit(args, {**res.summary(), "seed": args.seed, "failure_records": res.failures[:200]},
          [res.summary()])
    return EXIT_OK if res.passed else EXIT_FAIL


def _bound_reports(cfg, z):
    """Main report(s) for a config plus the Poisson competitor value."""
    mode = cfg.mode
    reports = []
    extras = {}
    if cfg.independent:
        dists = cfg.dists() if cfg.kind == "bernoulli" else B.geometric_dists(cfg.values)
        if mode == "meanvar":
            rep = B.theorem2_meanvar(dists)
            if cfg.kind == "geometric":
                extras["remark_closed_form"] = B.remark_geometric_nb(cfg.values, "meanvar")
                extras["remark_smoothing_factor"] = math.sqrt(2 / math.pi) / math.sqrt(cfg.values.sum() - 0.25)
                extras["theorem2_smoothing_factor"] = rep.extras["smoothing_factor"]
        else:
            rep = B.theorem2_mean(dists, r=cfg.r, params=cfg.explicit_params())
            if cfg.kind == "geometric":
                extras["remark_closed_form"] = B.remark_geometric_nb(cfg.values, "mean", r=rep.matched_params.r)
        reports.append(rep)
        if z is not None:
            nu = B.theorem2_meanvar(dists, z=z) if mode == "meanvar" else \
                B.theorem2_mean(dists, r=rep.matched_params.r, z=z)
            reports.append(nu)
        poisson = (B.remark_bernoulli_poisson(cfg.values) if cfg.kind == "bernoulli"
                   else B.remark_geometric_poisson(cfg.values))
    else:
        model = cfg.model()
        if mode == "meanvar":
            m = model if cfg.kind == "table" else model.as_table()
            reports.append(B.theorem1_meanvar(m))
            if z is not None:
                reports.append(B.theorem1_meanvar(m, z=z))
        elif cfg.kind == "pairwise":
            if mode == "explicit":
                raise ConfigError("pairwise configs use mean mode with optional r", "$.nb.mode")
            rep = B.corollary2_model(model, r=cfg.r)
            reports.append(rep)
            if z is not None:
                reports.append(B.corollary2_model(model, r=rep.matched_params.r, z=z))
        else:
            rep = B.theorem1_mean(model, r=cfg.r, params=cfg.explicit_params())
            reports.append(rep)
            if z is not None:
                reports.append(B.theorem1_mean(model, r=rep.matched_params.r, z=z))
        poisson = None
        if cfg.kind == "pairwise":
            poisson = B.poisson_local_bound(cfg.values, cfg.pairs, model.A)
    return reports, poisson, extras


def cmd_bound(args) -> int:
    cfg = _load(args.config)
    reports, poisson, extras = _bound_reports(cfg, args.z)
    oracle = None
    if cfg.n <= ORACLE_MAX_N:
        model, params = cfg.model(), reports[0].matched_params
        prof = true_error_profile(model, params, cfg.z_grid)
        worst = float(prof.true_error.max())
        oracle = {"z": prof.z, "true_error": prof.true_error, "max_true_error": worst}
        at_z = None
        if args.z is not None:
            at_z = float(true_error_profile(model, params, [args.z]).true_error[0])
            oracle["true_error_at_z"] = at_z
        reports = [r.with_true_error(worst if r.uniform else at_z) for r in reports]
    if poisson is not None:
        reports = [r.with_comparison(poisson=poisson) for r in reports]
    dicts = [r.to_dict() for r in reports]
    payload = {"config": str(args.config), "kind": cfg.kind, "reports": dicts, "extras": extras}
    if oracle is not None:
        payload["oracle"] = oracle
    rows = [{k: v for k, v in d.items() if not isinstance(v, (dict, list))} for d in dicts]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_cdo(args) -> int:
    cfg = _load(args.config)
    pf = cfg.portfolio()
    if not pf.tranches:
        raise ConfigError("at least one tranche is required", "$.tranches")
    params = cfg.explicit_params()
    if params is None and cfg.r is not None:
        params = match_mean(float(pf.p_star.sum()), cfg.r)
    rows, failed = [], False
    for t_id, tr in enumerate(pf.tranches):
        rep = tranche_expected_loss(pf, tr, params, tranche_id=t_id)
        row = rep.to_dict()
        row.pop("notes")
        row["note"] = "; ".join(rep.notes)
        if pf.N <= ORACLE_MAX_N:
            oc, ot = oracle_tranche_loss(pf, tr)
            lo, hi = rep.interval
            clo, chi = rep.call_interval
            ok = (clo - 1e-12 <= oc <= chi + 1e-12) and (lo - 1e-12 <= ot <= hi + 1e-12)
            row.update(oracle_call_loss=oc, oracle_expected_loss=ot, contains_oracle=ok)
            failed |= not ok
        rows.append(row)
    comparison = compare_bounds(pf, r=None if params is None else params.r)
    _emit(args, {"config": str(args.config), "N": pf.N, "recovery": pf.recovery,
                 "tranches": rows, "comparison": comparison}, rows)
    return EXIT_FAIL if failed else EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="csv for tables, json for reports (defaults per command)")

    ap = argparse.ArgumentParser(prog="nbstein", description="Negative binomial approximation bounds for call functions.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("table1", parents=[common], help="print the built-in q_i sequence")

    t2 = sub.add_parser("table2", parents=[common], help="bound comparison for geometric sums")
    t2.add_argument("--n", type=_int_list, default=None, help="comma-separated n values (default 10,20,30,40,50)")
    t2.add_argument("--bernoulli-p", type=_float_list, default=None,
                    help="p_i for the optional Bernoulli columns (one value is repeated)")

    v = sub.add_parser("verify", parents=[common], help="run a seeded verification suite")
    v.add_argument("--suite", required=True, help=f"one of {sorted(SUITES)}")
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--budget", type=int, default=None, help="number of random cases")
    v.add_argument("--tol", type=float, default=None, help="override the suite tolerance")

    b = sub.add_parser("bound", parents=[common], help="bound report for a config file")
    b.add_argument("--config", required=True, metavar="PATH", help="JSON file or shipped config name")
    b.add_argument("--z", type=float, default=None, help="strike for the non-uniform bound (z > 1)")

    c = sub.add_parser("cdo", parents=[common], help="tranche expected losses with certificates")
    c.add_argument("--config", required=True, metavar="PATH", help="JSON file or shipped config name")
    return ap


COMMANDS = {"table1": cmd_table1, "table2": cmd_table2, "verify": cmd_verify,
            "bound": cmd_bound, "cdo": cmd_cdo}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NBSteinError as e:
        err = {"schema_version": SCHEMA_VERSION, "error": {"type": type(e).__name__, "message": str(e)}}
        print(json.dumps(err), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
