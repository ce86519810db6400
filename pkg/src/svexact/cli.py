"""Command-line driver.

Exit status: 0 success, 1 usage error, 2 data or model error, 3 fit did not
converge. Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .configuration import format_matrix
from .errors import NoConvergence, SVError
from .fiber_oracle import DEFAULT_CAP, check_connectivity, oracle_report
from .groebner import format_basis, generate_groebner_basis, moves_matrix, pair_is_sorted
from .io import load_inputs, load_model, write_fitted, write_histogram, write_samples
from .sampler import ChainConfig, run_chain
from .stats import PearsonStatistic, TestReport, chi2_survival, default_df, fit_mle, pearson_chi2

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3

# sample sizes above this get the long default burn-in
LARGE_N = 10_000
BURN_IN_SMALL = 100_000
BURN_IN_LARGE = 5_000_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text, encoding="utf-8")


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(u) for k, u in v.items()}
        if isinstance(v, list):
            return [clean(u) for u in v]
        return v

    return json.dumps(clean(obj), indent=2) + "\n"


def _chain_config(args, n: int) -> ChainConfig:
    burn_in = args.burn_in
    if burn_in is None:
        burn_in = BURN_IN_LARGE if n > LARGE_N else BURN_IN_SMALL
    return ChainConfig(seed=args.seed, burn_in=burn_in, samples=args.samples, thin=args.thin,
                       batches=args.batches)


def _fit(args, model, x):
    return fit_mle(model, x, tol=args.tol, max_iter=args.max_iter)


# --- subcommands -----------------------------------------------------------


def cmd_cells(args) -> int:
    model = load_model(args.model)
    config = model.configuration
    lines = [f"ν = {config.nu}"]
    for lab, cell in zip(model.labels, config.cells):
        lines.append(f"{lab}\t{' '.join(str(k) for k in cell)}")
    _emit("\n".join(lines) + "\n", _out_dir(args), "cells.txt")
    return EXIT_OK


def cmd_matrix(args) -> int:
    config = load_model(args.model).configuration
    out = _out_dir(args)
    if args.which in ("A", "both"):
        _emit(format_matrix(config.A), out, "A.mat")
    if args.which in ("Atilde", "both"):
        _emit(format_matrix(config.Atilde), out, "Atilde.mat")
    return EXIT_OK


def cmd_groebner(args) -> int:
    config = load_model(args.model).configuration
    basis = generate_groebner_basis(config)
    out = _out_dir(args)
    _emit(format_basis(config, basis), out, "basis.txt")
    if out is not None:
        (out / "moves.mat").write_text(format_matrix(moves_matrix(config, basis)), encoding="utf-8")
    print(f"{len(basis)} basis elements", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    model, x = load_inputs(args.model, args.data)
    out = _out_dir(args)
    target = sys.stdout if out is None else out / "fitted.csv"
    try:
        fitted = _fit(args, model, x)
    except NoConvergence as exc:
        if exc.fitted is not None:
            write_fitted(target, model, x, exc.fitted.m_hat)
        raise
    write_fitted(target, model, x, fitted.m_hat)
    print(_json({"n": int(x.sum()), "iterations": fitted.iterations, "final_gap": fitted.final_gap}),
          file=sys.stderr, end="")
    return EXIT_OK


def cmd_chi2(args) -> int:
    model, x = load_inputs(args.model, args.data)
    fitted = _fit(args, model, x)
    stat = pearson_chi2(x, fitted.m_hat)
    df = args.df if args.df is not None else default_df(model, fitted)
    doc = {"chi2": stat, "n": int(x.sum()), "df": df,
           "p_asymptotic": chi2_survival(stat, df) if df > 0 else None}
    _emit(_json(doc), _out_dir(args), "chi2.json")
    return EXIT_OK


def _run(args):
    model, x = load_inputs(args.model, args.data)
    fitted = _fit(args, model, x)
    statistic = PearsonStatistic(fitted.m_hat)
    cfg = _chain_config(args, int(x.sum()))
    chain = run_chain(model, x, cfg, statistic, unit_weights=args.unit_weights)
    df = args.df if args.df is not None else default_df(model, fitted)
    return model, x, fitted, chain, cfg, df


def cmd_sample(args) -> int:
    _, x, _, chain, cfg, df = _run(args)
    out = _out_dir(args) or Path(".")
    meta = chain.metadata()
    meta["df"] = df
    write_samples(out / "samples.csv", chain.statistics, meta)
    bins = args.bins if args.bins == "fd" else int(args.bins)
    write_histogram(out / "histogram.csv", chain.statistics, bins=bins, density_df=df if df > 0 else None)
    sys.stdout.write(_json(meta))
    return EXIT_OK


def cmd_test(args) -> int:
    _, x, _, chain, cfg, df = _run(args)
    p, se = chain.p_value, chain.se_batch
    report = TestReport(
        chi2_observed=chain.observed,
        p_mcmc=p,
        se_batch=se,
        p_asymptotic=chi2_survival(chain.observed, df) if df > 0 else float("nan"),
        df=df,
        acceptance_rate=chain.acceptance_rate,
        n=int(x.sum()),
        samples=cfg.samples,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
    )
    _emit(report.to_json() + "\n", _out_dir(args), "report.json")
    return EXIT_OK


def cmd_fiber(args) -> int:
    model, x = load_inputs(args.model, args.data)
    statistic = None
    if not args.no_statistic:
        statistic = PearsonStatistic(_fit(args, model, x).m_hat)
    doc = oracle_report(model, x, statistic, cap=args.cap, max_states=args.max_states)
    _emit(_json(doc), _out_dir(args), "fiber.json")
    return EXIT_OK


def verify_configuration(config, n_max: int) -> dict:
    basis = generate_groebner_basis(config)
    Z = moves_matrix(config, basis)
    kernel_ok = bool(np.all(config.A @ Z.T == 0)) if len(basis) else True
    lead_ok = all(b.lead[0] != b.lead[1] and not pair_is_sorted(*b.lead) for b in basis)
    trail_ok = all(pair_is_sorted(*b.trail) for b in basis)
    conn = check_connectivity(config, n_max)
    return {
        "nu": config.nu,
        "basis_size": len(basis),
        "moves_in_kernel": kernel_ok,
        "leads_squarefree_nonsorted": lead_ok,
        "trails_sorted": trail_ok,
        "connectivity": json.loads(conn.to_json()),
        "passed": bool(kernel_ok and lead_ok and trail_ok and conn.passed),
    }


def cmd_verify(args) -> int:
    config = load_model(args.model).configuration
    doc = verify_configuration(config, args.n_max)
    _emit(_json(doc), _out_dir(args), "verify.json")
    return EXIT_OK if doc["passed"] else EXIT_DATA


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svexact", description="Exact conditional tests with sorting Markov bases.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, fn, help, data=False, fit=False, chain=False):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--model", required=True, help="model JSON (path or bundled name)")
        if data:
            sp.add_argument("--data", required=True, help="counts CSV (path or bundled name)")
        if fit:
            sp.add_argument("--tol", type=float, default=None, help="marginal gap tolerance (default 1e-8 n)")
            sp.add_argument("--max-iter", type=int, default=100_000)
            sp.add_argument("--df", type=int, default=None, help="degrees of freedom for the asymptotic P-value")
        if chain:
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--burn-in", type=int, default=None,
                            help=f"default {BURN_IN_SMALL}, or {BURN_IN_LARGE} when n > {LARGE_N}")
            sp.add_argument("--samples", type=int, default=10_000)
            sp.add_argument("--thin", type=int, default=1)
            sp.add_argument("--batches", type=int, default=50)
            sp.add_argument("--unit-weights", action="store_true",
                            help="sample prod 1/x! instead of the model's conditional distribution")
        sp.add_argument("--out", default=None, help="output directory")
        sp.set_defaults(func=fn)
        return sp

    add("cells", cmd_cells, "list cells")
    m = add("matrix", cmd_matrix, "dump A and/or Atilde")
    m.add_argument("--which", choices=["A", "Atilde", "both"], default="A")
    add("groebner", cmd_groebner, "emit the sorting Groebner basis")
    add("fit", cmd_fit, "maximum likelihood fit", data=True, fit=True)
    add("chi2", cmd_chi2, "observed Pearson chi-square", data=True, fit=True)
    s = add("sample", cmd_sample, "run a chain; write samples and histogram CSV", data=True, fit=True, chain=True)
    s.add_argument("--bins", default="fd", help="histogram bin count, or 'fd' (Freedman-Diaconis)")
    add("test", cmd_test, "fit, chi-square, chain and report", data=True, fit=True, chain=True)
    f = add("fiber", cmd_fiber, "exact fiber enumeration and P-value", data=True, fit=True)
    f.add_argument("--cap", type=int, default=DEFAULT_CAP)
    f.add_argument("--max-states", type=int, default=1000, help="list states only for fibers this small")
    f.add_argument("--no-statistic", action="store_true", help="skip the fit and exact P-value")
    v = add("verify", cmd_verify, "basis invariants and fiber connectivity")
    v.add_argument("--n-max", type=int, default=3)
    return p


def _error(kind: str, message: str, **extra) -> None:
    doc = {"error": kind, "message": message}
    doc.update(extra)
    print(json.dumps(doc), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if getattr(args, "bins", "fd") != "fd" and not str(args.bins).isdigit():
            raise UsageError("--bins must be a positive integer or 'fd'")
    except UsageError as exc:
        _error("UsageError", str(exc))
        return EXIT_USAGE
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except NoConvergence as exc:
        gap = exc.fitted.final_gap if exc.fitted is not None else None
        _error("NoConvergence", str(exc), final_gap=gap)
        return EXIT_NOCONV
    except ValueError as exc:
        _error("UsageError", str(exc))
        return EXIT_USAGE
    except (SVError, FileNotFoundError) as exc:
        extra = {}
        if getattr(exc, "line", None) is not None:
            extra["line"] = exc.line
        if getattr(exc, "labels", None) is not None:
            extra["labels"] = exc.labels
        _error(type(exc).__name__, str(exc), **extra)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
