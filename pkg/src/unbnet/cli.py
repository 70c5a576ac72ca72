"""Command-line front end: ``unbnet {analytic,simulate,optimize,sweep}``.

Every subcommand writes CSV (header always present, '.' decimals) to
``--out`` or stdout. Exit status: 0 when all rows were produced, 2 for
usage or configuration errors, 1 for failures while computing.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings

from . import analytic, config, optimize, sweep
from .model import ConfigError, IncumbentKind, derive_params

log = logging.getLogger("unbnet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(rows, fh, fields=None):
    rows = list(rows)
    if fields is None:
        fields = list(rows[0]) if rows else []
    w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="raise")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})


def _common(p: argparse.ArgumentParser, sim: bool):
    p.add_argument("--config", help="YAML or JSON file of flat key: value settings")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--protocol", action="append", default=None,
                   help="protocol name, optionally name:pn; repeatable (default: the config's)")
    p.add_argument("--var", choices=sweep.VARIABLES, help="variable to sweep")
    p.add_argument("--range", dest="range_", metavar="A:B:STEP", help="sweep values (or a,b,c)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (value parsed as YAML)")
    if sim:
        p.add_argument("--seed", type=int, help="master seed (0 <= seed < 2**64)")
        p.add_argument("--realizations", type=int, help="spatial realizations per point")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--access", choices=["async", "time-slotted", "freq-slotted", "sync"])
        p.add_argument("--dump", help="write per-realization records (JSON lines) here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unbnet", description="UNB IoT success probability toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("analytic", help="closed-form success probability or capacity"), sim=False)
    _common(sub.add_parser("simulate", help="Monte Carlo success probability"), sim=True)
    _common(sub.add_parser("sweep", help="analytic and Monte Carlo side by side"), sim=True)
    po = sub.add_parser("optimize", help="repetition count, BS bound and band-selection probabilities")
    po.add_argument("--config")
    po.add_argument("--out")
    po.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    po.add_argument("--eps", type=float, default=0.9, help="target success probability for the BS bound")
    po.add_argument("--var", choices=["tau_db", "lambda_I", "lambda_IoT", "M", "N"])
    po.add_argument("--range", dest="range_", metavar="A:B:STEP")
    return ap


def _raw_config(args) -> dict:
    import yaml
    raw = config.read_mapping(args.config) if args.config else {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        raw[key.strip()] = yaml.safe_load(value)
    config.build(raw)   # validate early, report every problem at once
    return raw


def _spec(args) -> sweep.SweepSpec:
    if (args.var is None) != (args.range_ is None):
        raise ValueError("--var and --range go together")
    values = sweep.parse_range(args.range_) if args.range_ else []
    return sweep.SweepSpec(args.var, values, out=args.out)


def _protocols(args, raw):
    if args.protocol:
        names = [n for item in args.protocol for n in item.split(",") if n.strip()]
        return [sweep.parse_protocol(n) for n in names]
    return [config.build(raw).proto]


def _sim_overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")
        out["seed"] = args.seed
    if args.realizations is not None:
        if args.realizations < 1:
            raise ValueError("--realizations must be >= 1")
        out["realizations"] = args.realizations
    if args.workers is not None:
        out["workers"] = args.workers
    if args.access is not None:
        out["access"] = args.access
    if args.dump is not None:
        out["dump_path"] = args.dump
    return out


def _optimize_rows(raw: dict, args):
    spec = sweep.SweepSpec(args.var, sweep.parse_range(args.range_) if args.range_ else [])
    key = args.var or "point"
    for value in spec.points():
        exp, _ = sweep.experiment_at(raw, spec.variable, value)
        cfg, inc = exp.cfg, exp.inc
        d = derive_params(cfg, inc)
        row = {key: "" if value is None else value}
        try:
            nstar = optimize.optimal_repetitions(d, cfg)
            row["N_star"], row["N_star_saturated"] = nstar.n, nstar.saturated
        except ValueError:
            # no UNB interferers at all
            row["N_star"], row["N_star_saturated"] = 1, False
        one = cfg.replace(N=1)
        d1 = derive_params(one, inc)
        row["eps"] = args.eps
        row["M_lambda_B_nearest"] = optimize.min_resource_product(args.eps, d1, one, nearest=True)
        row["M_lambda_B_no_assoc"] = optimize.min_resource_product(args.eps, d1, one)
        bc = optimize.optimize_band_constrained(optimize.band_costs(d, cfg))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", optimize.ConvergenceWarning)
            bh = optimize.optimize_band_hopped(d, cfg)
        for w in caught:
            log.warning("%s", w.message)
        for name, pt in (("bc", bc), ("bh", bh)):
            for m, pm in enumerate(pt.p, start=1):
                row[f"{name}_p{m}"] = float(pm)
            row[f"{name}_kkt_residual"] = pt.kkt_residual
        row["bc_ps"] = analytic.ps_band_constrained(d, cfg, bc.p)
        row["bh_ps"] = analytic.ps_band_hopped(d, cfg, bh.p)
        row["incumbents"] = inc.kind.value if inc.kind is IncumbentKind.TYPE_II or inc.lambda_I0 else "none"
        yield row


def _execute(args) -> int:
    raw = _raw_config(args)
    if args.command == "optimize":
        rows = list(_optimize_rows(raw, args))
    else:
        spec = _spec(args)
        protocols = _protocols(args, raw)
        sweep.check_protocols(protocols, spec)
        if args.command == "analytic":
            rows = list(sweep.analytic_rows(raw, spec, protocols))
        else:
            overrides = _sim_overrides(args)
            mc = list(sweep.mc_rows(raw, spec, protocols, overrides))
            if args.command == "simulate":
                rows = mc
            else:
                an = list(sweep.analytic_rows(raw, spec, protocols))
                rows = list(sweep.joined_rows(an, mc, spec.variable))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return EXIT_OK


def _glue_range(argv):
    """Let ``--range -10:20:1`` through; argparse would read -10:20:1 as an option."""
    out, it = [], iter(argv)
    for a in it:
        if a == "--range":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--range={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_range(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _execute(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a run failure
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
