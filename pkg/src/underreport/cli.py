"""Command-line front end.

    underreport fit --input cantabria.csv --fix a0=1 --output cantabria.fit.json
    underreport reconstruct --input cantabria.csv --fit cantabria.fit.json --deaths 209
    underreport forecast --input cantabria.csv --mode dynamic --holdout 15
    underreport sir --fit cantabria.fit.json --a-star 1631.9
    underreport simulate --params p.json --days 100 --seed 7 --output sim.csv
    underreport report --regions cantabria,canarias,baleares

Options may also come from ``--config FILE``, a flat ``key = value`` text
file (``#`` starts a comment, keys are long option names with dashes or
underscores).  Flags on the command line override the config file, which
overrides the built-in defaults.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .core import (DEFAULT_FIXED, PARAM_NAMES, ModelError, NoRootError,
                   NonConvergence, SingularHessian, UndefinedRate, ValidationError)
from .decoding import coverage_summary, viterbi
from .estimation import FitOptions, default_init, fit
from .forecast import dynamic_forecast, static_forecast
from .reports import (data_path, fit_to_dict, ingest_csv,
                      load_fit, load_json, load_params, rows_csv, series_csv,
                      to_json, write_files)
from .simulate import simulate_series
from .sir import a_star_from_path, recover_from_fit, sir_residuals

log = logging.getLogger("underreport")

EXIT_USAGE = 2
EXIT_CODES = (  # most specific first
    (ValidationError, 3),
    (NoRootError, 4),
    (NonConvergence, 5),
    (SingularHessian, 6),
    (UndefinedRate, 7),
    (ModelError, 8),
    (OSError, 9),
)
FORECAST_COLUMNS = ["day", "point", "se", "mean", "median", "p2.5", "p97.5"]
LIST_KEYS = {"fix", "free"}

__all__ = ["ingest_csv", "main", "run", "build_parser", "read_config"]


class CliError(Exception):
    """Bad option combination detected after parsing."""


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into argparse destinations."""
    values = {}
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key in LIST_KEYS:
            values[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            values[key] = value
    return values


def _fix_pairs(items) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        name = name.strip()
        if name not in PARAM_NAMES:
            raise ValidationError(f"--fix: unknown parameter {name!r}")
        try:
            out[name] = float(value) if sep else None
        except ValueError:
            raise ValidationError(f"--fix: bad value in {item!r}") from None
    return out


def _fit_options(args) -> FitOptions:
    return FitOptions(truncation=args.truncation, truncation_factor=args.truncation_factor,
                      initial=args.initial, restarts=args.restarts, seed=args.seed,
                      simplex=args.simplex, compute_se=not args.no_se,
                      require_convergence=args.require_convergence)


def _start_and_fixed(args, series):
    """Starting point and fixed set from --init, --fix and --free."""
    init = load_params(args.init) if args.init else default_init(series)
    pinned = _fix_pairs(args.fix)
    fixed = set(DEFAULT_FIXED) | set(pinned)
    fixed -= set(args.free or ())
    unknown = set(args.free or ()) - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"--free: unknown parameters {sorted(unknown)}")
    values = {k: v for k, v in pinned.items() if v is not None}
    if values:
        init = init.replace(**values)
    return init, frozenset(fixed)


def _fit_series(args, series):
    init, fixed = _start_and_fixed(args, series)
    return fit(series, init, fixed, _fit_options(args))


def _fmt(value, digits=4):
    if value is None:
        return "-"
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return f"{value:.{digits}f}" if abs(value) < 1e5 else f"{value:.4g}"
    return str(value)


def _table(rows, headers) -> str:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def _fit_table(result) -> str:
    ses = result.std_errors or {}
    rows = [(name, getattr(result.params, name),
             ses.get(name) if name in result.free_names else "fixed")
            for name in PARAM_NAMES]
    text = _table(rows, ["parameter", "estimate", "s.e."])
    return (f"{text}\n\nlog-likelihood {result.log_likelihood:.6f}  "
            f"truncation {result.truncation}  converged {result.converged}")


# subcommands: each returns (text for stdout, {path: file contents})

def cmd_fit(args):
    series = ingest_csv(args.input)
    result = _fit_series(args, series)
    report = fit_to_dict(result, series)
    files = {}
    if args.output:
        files[args.output] = to_json(report)
    if args.json:
        files[args.json] = to_json(report)
    return _fit_table(result), files


def _obtain_fit(args, series):
    if args.fit:
        return load_fit(args.fit)
    return _fit_series(args, series)


def cmd_reconstruct(args):
    series = ingest_csv(args.input)
    result = _obtain_fit(args, series)
    path = viterbi(series, result.params, result.truncation, result.initial)
    summary = coverage_summary(series, path, args.deaths)
    report = {"fit": fit_to_dict(result, series), "coverage": summary.as_dict(),
              "dates": [d.isoformat() for d in series.dates],
              "observed": series.counts.tolist(), "latent": path.states.tolist()}
    files = {}
    if args.output:
        files[args.output] = series_csv(series, path.states)
    if args.json:
        files[args.json] = to_json(report)
    rows = [("observed total", summary.observed_total),
            ("reconstructed total", summary.reconstructed_total),
            ("coverage %", summary.coverage)]
    if summary.deaths is not None:
        rows += [("deaths", summary.deaths),
                 ("lethality % (observed)", summary.lethality_observed),
                 ("lethality % (reconstructed)", summary.lethality_reconstructed)]
    return _table(rows, ["quantity", "value"]), files


def _record_dict(record):
    row = record.as_row()
    row.update(observed=record.observed, covered=record.covered, error=record.error)
    return row


def cmd_forecast(args):
    series = ingest_csv(args.input)
    if args.mode == "static":
        result = _obtain_fit(args, series)
        path = viterbi(series, result.params, result.truncation, result.initial)
        records = static_forecast(series, result, path, args.horizon, args.alpha_star)
        coverage = None
    else:
        if args.fit:
            raise CliError("--fit is only used with --mode static")
        init, fixed = _start_and_fixed(args, series)
        outcome = dynamic_forecast(series, args.holdout, _fit_options(args),
                                   init=init if args.init else None, fixed=fixed,
                                   alpha_star=args.alpha_star)
        records, coverage = outcome.records, outcome.coverage
    rows = [_record_dict(r) for r in records]
    report = {"mode": args.mode, "alpha_star": args.alpha_star, "records": rows,
              "coverage": coverage}
    files = {}
    if args.output:
        files[args.output] = rows_csv(rows, FORECAST_COLUMNS)
    if args.json:
        files[args.json] = to_json(report)
    headers = FORECAST_COLUMNS + (["observed"] if args.mode == "dynamic" else [])
    text = _table([[row[h] for h in headers] for row in rows], headers)
    if coverage is not None:
        text += f"\n\ninterval coverage {100 * coverage:.1f}%"
    return text, files


def _sir_rows(sir):
    plateau, inflection = sir_residuals(sir)
    return [("N", sir.n_pop), ("beta", sir.beta), ("gamma", sir.gamma_rate),
            ("beta/gamma", sir.reproduction_number), ("A0", sir.a0),
            ("A_inf", sir.a_inf), ("A*", sir.a_star),
            ("plateau residual", plateau), ("inflection residual", inflection)]


def cmd_sir(args):
    result = load_fit(args.fit)
    a_star = args.a_star
    if a_star is None:
        if not args.input:
            raise CliError("sir needs --a-star or --input to locate A* on the Viterbi path")
        series = ingest_csv(args.input)
        path = viterbi(series, result.params, result.truncation, result.initial)
        a_star = a_star_from_path(path)
    sir = recover_from_fit(result, a_star)
    rows = _sir_rows(sir)
    files = {args.json: to_json({k: v for k, v in rows})} if args.json else {}
    return _table(rows, ["quantity", "value"]), files


def cmd_simulate(args):
    params = load_params(args.params)
    start = dt.date.fromisoformat(args.start)
    path, series = simulate_series(params, args.days, seed=args.seed, start=start)
    text = series_csv(series, path.states if args.latent else None)
    if args.output:
        return f"wrote {args.days} days to {args.output}", {args.output: text}
    return text.rstrip("\n"), {}


def _region_result(entry, base, fit_kwargs):
    """Fit, decode and summarize one region (runs in a worker process)."""
    series = ingest_csv(base / entry["file"], entry["label"])
    fixed = frozenset(entry.get("fixed", DEFAULT_FIXED))
    init = default_init(series)
    zeroed = {name: 0.0 for name in fixed if name.startswith("gamma")}
    if zeroed:
        init = init.replace(**zeroed)
    result = fit(series, init, fixed, FitOptions(**fit_kwargs))
    path = viterbi(series, result.params, result.truncation, result.initial)
    row = {"label": entry["label"], "name": entry.get("name", entry["label"]),
           "fit": fit_to_dict(result, series)}
    try:
        row["coverage"] = coverage_summary(series, path, entry.get("deaths")).as_dict()
    except UndefinedRate as exc:
        row["coverage"] = {"error": str(exc)}
    try:
        sir = recover_from_fit(result, a_star_from_path(path))
        row["sir"] = {k: v for k, v in _sir_rows(sir)}
    except ModelError as exc:
        row["sir"] = {"error": str(exc)}
    return row


def _report_table(rows) -> str:
    headers = ["", *(r["label"] for r in rows)]
    body = []
    for name in PARAM_NAMES[:-1]:
        body.append([name, *(r["fit"]["params"][name] if name in r["fit"]["free"] else None
                             for r in rows)])
        body.append(["  s.e.", *((r["fit"]["std_errors"] or {}).get(name) for r in rows)])
    body.append(["loglik", *(r["fit"]["log_likelihood"] for r in rows)])
    for key in ("observed_total", "reconstructed_total", "coverage",
                "lethality_observed", "lethality_reconstructed"):
        body.append([key, *(r["coverage"].get(key) for r in rows)])
    for key in ("N", "beta", "gamma"):
        body.append([key, *(r["sir"].get(key) for r in rows)])
    return _table(body, headers)


def cmd_report(args):
    manifest_path = Path(args.manifest) if args.manifest else data_path("regions.json")
    entries = load_json(manifest_path)
    if args.regions:
        wanted = [r.strip() for r in args.regions.split(",") if r.strip()]
        by_label = {e["label"]: e for e in entries}
        missing = [w for w in wanted if w not in by_label]
        if missing:
            raise ValidationError(f"unknown regions: {', '.join(missing)}")
        entries = [by_label[w] for w in wanted]
    base = manifest_path.parent
    options = _fit_options(args)
    fit_kwargs = {k: getattr(options, k) for k in
                  ("truncation", "truncation_factor", "initial", "restarts", "seed",
                   "simplex", "compute_se", "require_convergence")}
    if args.workers > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_region_result, e, base, fit_kwargs) for e in entries]
            rows = [f.result() for f in futures]
    else:
        rows = [_region_result(e, base, fit_kwargs) for e in entries]
    observed = sum(r["coverage"].get("observed_total", 0) for r in rows)
    reconstructed = sum(r["coverage"].get("reconstructed_total", 0) for r in rows)
    overall = {"observed_total": observed, "reconstructed_total": reconstructed,
               "coverage": 100.0 * observed / reconstructed if reconstructed else None}
    report = {"regions": rows, "overall": overall}
    files = {args.json: to_json(report)} if args.json else {}
    if args.output:
        flat = []
        for r in rows:
            flat.append({"label": r["label"], **r["fit"]["params"],
                         "log_likelihood": r["fit"]["log_likelihood"],
                         **{k: v for k, v in r["coverage"].items() if k != "error"},
                         **{f"sir_{k}": v for k, v in r["sir"].items() if k != "error"}})
        columns = list(dict.fromkeys(k for row in flat for k in row))
        files[args.output] = rows_csv(flat, columns)
    text = _report_table(rows)
    if overall["coverage"] is not None:
        text += (f"\n\noverall: observed {observed}, reconstructed {reconstructed}, "
                 f"coverage {overall['coverage']:.1f}%")
    return text, files


def _add_fit_flags(p):
    p.add_argument("--init", help="JSON with starting parameter values")
    p.add_argument("--fix", action="append", metavar="NAME[=VALUE]",
                   help="hold a parameter fixed (repeatable); a0 is fixed by default")
    p.add_argument("--free", action="append", metavar="NAME",
                   help="estimate a parameter that is fixed by default")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="seed for restart jitter")
    p.add_argument("--truncation", type=int, help="largest latent state")
    p.add_argument("--truncation-factor", type=float, default=1.5)
    p.add_argument("--initial", choices=("poisson", "uniform"), default="poisson")
    p.add_argument("--simplex", action="store_true",
                   help="run a Nelder-Mead search before each BFGS polish")
    p.add_argument("--no-se", action="store_true", help="skip standard errors")
    p.add_argument("--require-convergence", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="underreport",
        description="Under-reported count series: fitting, reconstruction, "
                    "forecasting and SIR recovery.")
    parser.add_argument("--config", help="flat key = value file of option defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood estimates and standard errors")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="write the fit report (JSON) here")
    p.add_argument("--json", help="additional copy of the JSON report")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("reconstruct", help="Viterbi path and coverage summary")
    p.add_argument("--input", required=True)
    p.add_argument("--fit", help="fit report; fitted afresh when omitted")
    p.add_argument("--deaths", type=int)
    p.add_argument("--output", help="CSV with date,count,latent")
    p.add_argument("--json")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("forecast", help="static or dynamic forecasts")
    p.add_argument("--input", required=True)
    p.add_argument("--fit", help="fit report for static mode")
    p.add_argument("--mode", choices=("static", "dynamic"), default="static")
    p.add_argument("--horizon", type=int, default=7)
    p.add_argument("--holdout", type=int, default=14)
    p.add_argument("--alpha-star", type=float, default=0.05)
    p.add_argument("--output", help="forecast CSV")
    p.add_argument("--json")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("sir", help="recover beta, gamma and N from a fit")
    p.add_argument("--fit", required=True)
    p.add_argument("--a-star", type=float, help="affected count at fastest growth")
    p.add_argument("--input", help="series used to find A* on the Viterbi path")
    p.add_argument("--json")
    p.set_defaults(handler=cmd_sir)

    p = sub.add_parser("simulate", help="draw a synthetic series")
    p.add_argument("--params", required=True)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2020-01-01")
    p.add_argument("--latent", action="store_true", help="add the latent column")
    p.add_argument("--output")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("report", help="fit several regions into one table")
    p.add_argument("--manifest", help="regions JSON (default: bundled regions)")
    p.add_argument("--regions", help="comma-separated labels to include")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", help="flat CSV, one row per region")
    p.add_argument("--json")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_report)
    return parser


def _parse(parser, argv):
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    config_path = pre.parse_known_args(argv)[0].config
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if not config_path or command is None:
        return parser.parse_args(argv)
    config = read_config(config_path)
    sub = choices[command]
    known = {a.dest: a for a in sub._actions}
    unknown = set(config) - set(known)
    if unknown:
        raise ValidationError(f"{config_path}: unknown keys {sorted(unknown)}")
    converted = {}
    for key, value in config.items():
        action = known[key]
        if action.nargs == 0:
            converted[key] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(value, list) or action.type is None:
            converted[key] = value
        else:
            try:
                converted[key] = action.type(value)
            except ValueError:
                raise ValidationError(
                    f"{config_path}: bad value for {key}: {value!r}") from None
    # a value from the config satisfies a required flag
    relaxed = [known[k] for k in converted if known[k].required]
    for action in relaxed:
        action.required = False
    original = {k: known[k].default for k in converted}
    sub.set_defaults(**converted)
    try:
        return parser.parse_args(argv)
    finally:
        sub.set_defaults(**original)
        for action in relaxed:
            action.required = True


def run(argv=None) -> int:
    """Execute one command; return the process exit code."""
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text, files = args.handler(args)
        write_files(files)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise
    if text:
        print(text)
    return 0


def main() -> None:
    sys.exit(run())
