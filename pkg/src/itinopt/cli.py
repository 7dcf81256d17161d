"""``itinopt`` command-line entry point.

Exit codes: 0 success, 1 acceptance threshold missed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench
from .catalog import (
    EMISSIONS_MODELS,
    GeneratorSpec,
    catalog_to_json,
    cost_history_to_csv,
    generate_catalog,
    generate_cost_history,
    load_catalog,
    read_cost_history,
)
from .costmodel import DEFAULT_TRUE_COEFFICIENTS, PricingContext, default_cost_model
from .costmodel import fit as fit_cost_model
from .domain import Catalog, Preferences
from .exceptions import ItinOptError
from .nsga2 import GaConfig
from .orchestrator.gateway import DEFAULT_DEADLINE_S, MODES, Gateway, OptimizeRequest

logger = logging.getLogger("itinopt")

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE = 0, 1, 2

# thresholds checked by the benchmark subcommands
ACCURACY_MIN_RATE = 0.92
ACCURACY_MIN_COMPLIANCE = 0.95
SUSTAINABILITY_MIN_REDUCTION = 15.0
SUSTAINABILITY_MIN_GREEN = 0.60
LOAD_MIN_AVAILABILITY = 0.999


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _weights(text: str) -> tuple[float, float, float]:
    try:
        w = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad weights {text!r}") from None
    if len(w) != 3:
        raise argparse.ArgumentTypeError("weights need three values: cost,time,emissions")
    return w


def _attr(text: str) -> tuple[str, str, str]:
    kind, _, rest = text.partition(".")
    tag, _, value = rest.partition("=")
    if not (kind and tag and value):
        raise argparse.ArgumentTypeError(f"attribute must look like kind.tag=value, got {text!r}")
    return kind, tag, value


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    g.add_argument("--catalog", default=d(None), help="catalog JSON file (default: generated from --seed)")
    g.add_argument("--out-dir", default=d(None), help="directory for report files")
    g.add_argument("--format", choices=("json", "csv"), default=d("json"), help="stdout format")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))


def _ga_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--population", type=int, default=None, help="GA population size")
    parser.add_argument("--generations", type=int, default=None, help="GA generation cap")
    parser.add_argument("--window", type=int, default=None, help="GA stagnation window")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itinopt", description="Sustainable itinerary optimization toolkit")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("gen-catalog", "generate a seeded synthetic catalog")
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--options", type=int, default=6)
    p.add_argument("--model", choices=EMISSIONS_MODELS, default="cost_anticorrelated")
    p.add_argument("--cost-history", type=int, default=0, metavar="N",
                   help="also write N rows of synthetic cost history")

    p = add("serve", "run the HTTP gateway")
    p.add_argument("--host", default=os.environ.get("ITINOPT_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("ITINOPT_PORT", "8080")))
    p.add_argument("--deadline", type=float, default=float(os.environ.get("ITINOPT_DEADLINE_S", DEFAULT_DEADLINE_S)),
                   help="aggregation deadline in seconds")
    p.add_argument("--catalog-dir", default=os.environ.get("ITINOPT_CATALOG_DIR"))
    p.add_argument("--cost-history-file", default=None, help="CSV used to fit the cost model")
    _ga_flags(p)

    p = add("optimize", "optimize one request without a server")
    p.add_argument("--prefs", help="preferences JSON file (overrides the flags below)")
    p.add_argument("--budget", type=float)
    p.add_argument("--max-time", type=float)
    p.add_argument("--emissions-cap", type=float)
    p.add_argument("--require", type=_attr, action="append", default=[], metavar="KIND.TAG=VALUE")
    p.add_argument("--prefer", type=_attr, action="append", default=[], metavar="KIND.TAG=VALUE")
    p.add_argument("--weights", type=_weights, default=(1.0, 1.0, 1.0), metavar="C,T,E")
    p.add_argument("--mode", choices=MODES, default="pareto")
    p.add_argument("--days-to-departure", type=float, default=30.0)
    p.add_argument("--season", type=int, default=0)
    p.add_argument("--demand", type=float, default=1.0)
    p.add_argument("--distance", type=float, default=0.0)
    p.add_argument("--timings", action="store_true", help="include per-service timings")
    _ga_flags(p)

    p = add("loadtest", "closed-loop latency test")
    p.add_argument("--users", type=_int_list, default=[1, 10, 50, 200], help="comma-separated concurrency levels")
    p.add_argument("--requests-per-user", type=int, default=2)
    p.add_argument("--url", default=None, help="gateway base URL (default: in-process gateway)")
    p.add_argument("--mode", choices=MODES, default="greedy")
    p.add_argument("--deadline", type=float, default=DEFAULT_DEADLINE_S)

    p = add("accuracy", "preference-matching accuracy over seeded requests")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--mode", choices=MODES, default="pareto")
    _ga_flags(p)

    p = add("convergence", "NSGA-II convergence against the brute-force oracle")
    p.add_argument("--runs", type=int, default=10, help="number of seeds, starting at --seed")
    p.add_argument("--history-file", default=None, help="history CSV path (default: <out-dir>/history.csv)")
    _ga_flags(p)

    p = add("sustainability", "emissions of eco vs cost-only recommendations")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--mode", choices=MODES, default="pareto")
    _ga_flags(p)

    p = add("oracle", "exact Pareto front and minimum-emission itinerary by enumeration")
    p.add_argument("--budget", type=float)
    p.add_argument("--max-time", type=float)
    return parser


# ---------------------------------------------------------------- helpers

def _catalog(args) -> Catalog:
    if args.catalog:
        return load_catalog(args.catalog)
    return generate_catalog(GeneratorSpec(seed=args.seed))


def _ga_config(args, seed: int | None = None) -> GaConfig | None:
    kw = {k: v for k, v in (("population_size", args.population), ("max_generations", args.generations),
                             ("stagnation_window", args.window)) if v is not None}
    if seed is not None:
        kw["seed"] = seed
    if not kw:
        return None
    cfg = GaConfig(**kw)
    cfg.validate()
    return cfg


def _emit(args, name: str, doc, rows=None, extra_files: dict | None = None) -> None:
    """Print ``doc`` in the chosen format and mirror it into ``--out-dir``."""
    text_json = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    text_csv = bench.rows_to_csv(rows if rows is not None else [doc])
    sys.stdout.write(text_json if args.format == "json" else text_csv)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text_json)
        (out / f"{name}.csv").write_text(text_csv)
        for fname, content in (extra_files or {}).items():
            (out / fname).write_text(content)


def _check(label: str, ok: bool) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}: {label}", file=sys.stderr)
    return ok


# ---------------------------------------------------------------- commands

def cmd_gen_catalog(args) -> int:
    spec = GeneratorSpec(seed=args.seed, num_segments=args.segments, options_per_segment=args.options,
                         emissions_model=args.model)
    catalog = generate_catalog(spec)
    doc = json.loads(catalog_to_json(catalog))
    rows = [{"segment": s.index, "kind": s.kind, **o.to_dict()} for s in catalog.segments for o in s.options]
    for r in rows:
        r["attributes"] = ";".join(f"{k}={v}" for k, v in sorted(r["attributes"].items()))
    extra = {"catalog.json": catalog_to_json(catalog)}
    if args.cost_history:
        history = generate_cost_history(args.seed, args.cost_history, DEFAULT_TRUE_COEFFICIENTS)
        extra["cost_history.csv"] = cost_history_to_csv(history)
    _emit(args, "catalog", doc, rows, extra)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .orchestrator.http import GatewayServer

    model = fit_cost_model(read_cost_history(args.cost_history_file)) if args.cost_history_file else default_cost_model()
    gateway = Gateway({"default": _catalog(args)}, catalog_dir=args.catalog_dir, cost_model=model,
                      deadline_s=args.deadline, default_ga_config=_ga_config(args))
    server = GatewayServer(gateway, args.host, args.port)
    print(f"serving on {server.url}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
        gateway.close()
    return EXIT_OK


def _preferences(args) -> Preferences:
    if args.prefs:
        return Preferences.from_dict(json.loads(Path(args.prefs).read_text()))
    if args.budget is None or args.max_time is None:
        raise UsageError("--budget and --max-time are required without --prefs")
    return Preferences(budget=args.budget, max_time=args.max_time, emissions_cap=args.emissions_cap,
                       required_attributes=args.require, preferred_attributes=args.prefer,
                       objective_weights=args.weights)


def cmd_optimize(args) -> int:
    prefs = _preferences(args)
    ctx = PricingContext(args.days_to_departure, args.season, args.demand, args.distance)
    ctx.validate()
    with Gateway({"default": _catalog(args)}) as gateway:
        resp = gateway.handle_optimize(OptimizeRequest(
            f"cli-{args.seed}", "default", prefs, ctx, args.mode, _ga_config(args, args.seed)))
    doc = resp.to_dict(timings=args.timings)
    row = {"request_id": resp.request_id, "mode": resp.mode, **resp.recommended.to_dict()["objectives"],
           "choices": list(resp.recommended.choices), "option_ids": list(resp.recommended.option_ids),
           "green": resp.green, "match_rate": resp.match_report.rate if resp.match_report else None,
           "diagnostics": resp.diagnostics}
    _emit(args, "optimize", doc, [row])
    return EXIT_OK


def cmd_loadtest(args) -> int:
    template = bench.default_load_template(args.seed)
    template["mode"] = args.mode
    gateway = None
    if args.url:
        bench.check_reachable(args.url)
        send = bench.http_sender(args.url, timeout=args.deadline * 3)
    else:
        gateway = Gateway({"default": _catalog(args)}, deadline_s=args.deadline)
        send = bench.gateway_sender(gateway)
    try:
        result = bench.cmd_loadtest(args.users, args.requests_per_user, template, args.seed, send)
    finally:
        if gateway is not None:
            gateway.close()
    _emit(args, "loadtest", result.to_dict(), result.rows())
    ok = _check("availability >= 0.999 at every level",
                all(r.availability >= LOAD_MIN_AVAILABILITY for r in result.levels))
    ok &= _check("p50 trend non-decreasing (Spearman >= 0)", result.spearman_p50 >= 0)
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_accuracy(args) -> int:
    report = bench.cmd_accuracy(args.n, args.seed, args.mode, _ga_config(args))
    _emit(args, "accuracy", report.to_dict(), report.rows())
    ok = _check(f"mean matching rate >= {ACCURACY_MIN_RATE}", report.mean_rate >= ACCURACY_MIN_RATE)
    ok &= _check(f"budget compliance >= {ACCURACY_MIN_COMPLIANCE}", report.budget_compliance >= ACCURACY_MIN_COMPLIANCE)
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_convergence(args) -> int:
    catalog = load_catalog(args.catalog) if args.catalog else None
    seeds = list(range(args.seed, args.seed + args.runs))
    report = bench.cmd_convergence(seeds, _ga_config(args) or GaConfig(), catalog)
    history = report.history_csv()
    if args.history_file:
        Path(args.history_file).write_text(history)
    _emit(args, "convergence", report.to_dict(), report.rows(), {"history.csv": history})
    doc = report.to_dict()
    ok = _check("every run reaches the oracle front", doc["share_reached_oracle"] == 1.0)
    ok &= _check("evaluation accounting exact", doc["evaluations_exact"])
    ok &= _check("history monotone in every run", all(r.history_monotone for r in report.runs))
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_sustainability(args) -> int:
    report = bench.cmd_sustainability(args.n, args.seed, mode=args.mode, ga_config=_ga_config(args))
    _emit(args, "sustainability", report.to_dict())
    ok = _check(f"reduction_pct >= {SUSTAINABILITY_MIN_REDUCTION}", report.reduction_pct >= SUSTAINABILITY_MIN_REDUCTION)
    ok &= _check(f"green_share >= {SUSTAINABILITY_MIN_GREEN}", report.green_share >= SUSTAINABILITY_MIN_GREEN)
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_oracle(args) -> int:
    catalog = _catalog(args)
    prefs = None
    if args.budget is not None or args.max_time is not None:
        # an omitted bound is effectively unbounded
        prefs = Preferences(budget=args.budget if args.budget is not None else 1e300,
                            max_time=args.max_time if args.max_time is not None else 1e300)
    doc = bench.oracle_report(catalog, prefs)
    _emit(args, "oracle", doc, doc["front"])
    return EXIT_OK


COMMANDS = {
    "gen-catalog": cmd_gen_catalog,
    "serve": cmd_serve,
    "optimize": cmd_optimize,
    "loadtest": cmd_loadtest,
    "accuracy": cmd_accuracy,
    "convergence": cmd_convergence,
    "sustainability": cmd_sustainability,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ItinOptError, OSError, json.JSONDecodeError) as exc:
        print(f"itinopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
