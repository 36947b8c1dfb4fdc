"""Command-line front end: ``convbid {ingest,cluster,optimize,backtest,report,synth}``.

Settings come from one TOML file (``--config``); individual keys can be
overridden with ``--set section.key=value`` or the dedicated flags.
Exit codes: 0 success, 1 validation/usage error, 2 data coverage,
3 solver failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import backtest as bt
from .bidmodels import ModelConfig, write_bids_csv, write_bids_json
from .errors import ConvBidError, CoverageError, ExtractionError, ParseError
from .market_data import (DEFAULT_SCHEMA, cluster_nodes, load_panel, load_price_csv, save_panel,
                          write_clustering_csv)

log = logging.getLogger("convbid")

EXIT_OK, EXIT_VALIDATION, EXIT_COVERAGE, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run needs; mirrors the sections of the TOML file."""

    data: dict = field(default_factory=lambda: {
        "raw_csv": None, "panel": None, "tz": "UTC", "schema": dict(DEFAULT_SCHEMA)})
    model: dict = field(default_factory=dict)
    backtest: dict = field(default_factory=lambda: {
        "models": list(bt.MODEL_KINDS), "start": None, "end": None, "lookback_days": 365,
        "n_positions": 100, "n_max_positions": 10, "workers": 1, "nodes": None})
    stats: dict = field(default_factory=lambda: {
        "alpha": 0.05, "block_length": None, "confidence": 0.95, "stride": 24})
    cluster: dict = field(default_factory=lambda: {"threshold": 0.98, "event_quantile": 0.95})
    output: dict = field(default_factory=lambda: {"dir": "convbid-out"})

    SECTIONS = ("data", "model", "backtest", "stats", "cluster", "output")

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        cfg = cls()
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    doc = tomllib.load(fh)
            except FileNotFoundError:
                raise UsageError(f"config file {path} not found") from None
            except tomllib.TOMLDecodeError as exc:
                raise UsageError(f"{path}: {exc}") from None
            for section, values in doc.items():
                cfg._merge(section, values)
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep or "." not in key:
                raise UsageError(f"override {item!r} must look like section.key=value")
            section, name = key.split(".", 1)
            try:
                value = tomllib.loads(f"v = {raw}")["v"]
            except tomllib.TOMLDecodeError:
                value = raw  # bare strings
            cfg._merge(section, {name: value})
        return cfg

    def _merge(self, section, values):
        if section not in self.SECTIONS or not isinstance(values, dict):
            raise UsageError(f"unknown config section {section!r}")
        getattr(self, section).update(values)

    def model_config(self) -> ModelConfig:
        names = {f.name for f in dataclasses.fields(ModelConfig)}
        unknown = set(self.model) - names
        if unknown:
            raise UsageError(f"unknown model keys: {sorted(unknown)}")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in self.model.items()}
        try:
            return ModelConfig(**kw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid model settings: {exc}") from None

    def settings(self) -> bt.BacktestSettings:
        b = self.backtest
        nodes = b.get("nodes")
        try:
            s = bt.BacktestSettings(int(b["lookback_days"]), int(b["n_positions"]),
                                    int(b["n_max_positions"]), None if nodes is None else tuple(nodes))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid backtest settings: {exc}") from None
        if s.lookback_days < 1 or s.n_positions < 1 or s.n_max_positions < 1:
            raise UsageError("lookback_days and position counts must be positive")
        return s

    def to_dict(self) -> dict:
        return {s: getattr(self, s) for s in self.SECTIONS}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="convbid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration key (repeatable)")

    sp = sub.add_parser("ingest", help="validate a price CSV and write the panel cache")
    common(sp)
    sp.add_argument("--input", help="raw CSV (overrides data.raw_csv)")
    sp.add_argument("--output", help="panel cache .npz (overrides data.panel)")
    sp.add_argument("--tz", help="market timezone (overrides data.tz)")
    sp.add_argument("--dry-run", action="store_true", help="validate only, write nothing")

    sp = sub.add_parser("cluster", help="event-synchronization node clustering")
    common(sp)
    sp.add_argument("--panel")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--event-quantile", type=float)
    sp.add_argument("--output", help="clustering CSV (default <output.dir>/clustering.csv)")

    sp = sub.add_parser("optimize", help="bids for one target hour")
    common(sp)
    sp.add_argument("--panel")
    sp.add_argument("--model", required=True)
    sp.add_argument("--hour", required=True, help="target hour, UTC ISO-8601")
    sp.add_argument("--output-dir")

    sp = sub.add_parser("backtest", help="rolling backtest plus statistics tables")
    common(sp)
    sp.add_argument("--panel")
    sp.add_argument("--models", help="comma-separated model kinds")
    sp.add_argument("--start", help="first target hour (UTC)")
    sp.add_argument("--end", help="end target hour, exclusive (UTC)")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--resume", action="store_true", help="reuse finished hours from checkpoints")
    sp.add_argument("--output-dir")

    sp = sub.add_parser("report", help="statistics tables from saved report JSON files")
    common(sp)
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--output-dir")

    sp = sub.add_parser("synth", help="write the seeded synthetic panel (cache and/or CSV)")
    sp.add_argument("--nodes", type=int, default=20)
    sp.add_argument("--days", type=int, default=730)
    sp.add_argument("--start", default="2019-01-01")
    sp.add_argument("--seed", type=int, default=20240601)
    sp.add_argument("--zero-delta", action="store_true")
    sp.add_argument("--output", help="panel cache .npz")
    sp.add_argument("--csv", help="long-format CSV")
    return p


def _panel_path(cfg, args):
    path = getattr(args, "panel", None) or cfg.data.get("panel")
    if not path:
        raise UsageError("no panel cache given (--panel or data.panel)")
    if not Path(path).exists():
        raise UsageError(f"panel cache {path} not found")
    return path


def _out_dir(cfg, args):
    d = Path(getattr(args, "output_dir", None) or cfg.output["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_ingest(cfg: RunConfig, args) -> int:
    src = args.input or cfg.data.get("raw_csv")
    if not src:
        raise UsageError("no input CSV (--input or data.raw_csv)")
    tz = args.tz or cfg.data.get("tz", "UTC")
    panel = load_price_csv(src, cfg.data.get("schema"), tz)
    n_missing = int(panel.missing.sum())
    print(f"nodes={panel.num_nodes} hours={panel.num_hours} missing_cells={n_missing}")
    if args.dry_run:
        print("dry run: nothing written")
        return EXIT_OK
    dst = args.output or cfg.data.get("panel")
    if not dst:
        raise UsageError("no output cache (--output or data.panel)")
    save_panel(panel, dst)
    print(f"wrote {dst}")
    return EXIT_OK


def cmd_cluster(cfg: RunConfig, args) -> int:
    panel = load_panel(_panel_path(cfg, args))
    thr = args.threshold if args.threshold is not None else cfg.cluster["threshold"]
    q = args.event_quantile if args.event_quantile is not None else cfg.cluster["event_quantile"]
    clustering = cluster_nodes(panel, thr, q)
    out = Path(args.output) if args.output else _out_dir(cfg, args) / "clustering.csv"
    write_clustering_csv(clustering, out)
    print(f"{len(clustering.representatives())} representatives out of {panel.num_nodes} nodes; wrote {out}")
    return EXIT_OK


def _digest(cfg: RunConfig, panel) -> str:
    return bt.config_hash(cfg.to_dict(), bt.panel_fingerprint(panel))


def cmd_optimize(cfg: RunConfig, args) -> int:
    if args.model not in bt.MODEL_KINDS:
        raise UsageError(f"unknown model {args.model!r}; choose from {', '.join(bt.MODEL_KINDS)}")
    panel = load_panel(_panel_path(cfg, args))
    config = cfg.model_config()
    hour = np.datetime64(args.hour.rstrip("Z"), "h")
    digest = _digest(cfg, panel)
    t0 = time.perf_counter()
    bids, obj, window = bt.optimize_hour(panel, hour, args.model, config, cfg.settings())
    elapsed = time.perf_counter() - t0
    out = _out_dir(cfg, args)
    stem = f"bids_{args.model}_{str(hour).replace(':', '')}"
    write_bids_csv([bids], out / f"{stem}.csv", [f"config_hash={digest}"])
    write_bids_json([bids], out / f"{stem}.json", {"config_hash": digest})
    note = ("empty bid set: no position has positive in-sample value within the risk budget"
            if len(bids) == 0 else f"{len(bids)} segment(s) over {len(bids.curves)} curve(s)")
    solve_log = {"config_hash": digest, "model": args.model, "target_hour": str(hour),
                 "status": "optimal", "objective": obj, "solve_seconds": elapsed,
                 "training_samples": window.T, "note": note}
    with open(out / f"{stem}.log.json", "w") as fh:
        json.dump(solve_log, fh, indent=1)
    print(f"{args.model} {hour}: objective={obj:.6g} time={elapsed:.3f}s; {note}")
    return EXIT_OK


def _write_outputs(reports, out, cfg):
    st = cfg.stats
    for rep in reports:
        bt.write_report(rep, out)
    bt.write_tables(reports, out, alpha=st["alpha"], block_length=st["block_length"],
                    confidence=st["confidence"], stride=st["stride"])
    bt.write_solve_times(reports, out / "solve_times.csv")


def cmd_backtest(cfg: RunConfig, args) -> int:
    b = cfg.backtest
    models = args.models.split(",") if args.models else list(b["models"])
    for m in models:
        if m not in bt.MODEL_KINDS:
            raise UsageError(f"unknown model {m!r}; choose from {', '.join(bt.MODEL_KINDS)}")
    start = args.start or b.get("start")
    end = args.end or b.get("end")
    if not start or not end:
        raise UsageError("backtest needs a period (--start/--end or backtest.start/end)")
    workers = args.workers if args.workers is not None else int(b.get("workers", 1))
    panel = load_panel(_panel_path(cfg, args))
    config = cfg.model_config()
    settings = cfg.settings()
    out = _out_dir(cfg, args)
    marker = out / "INCOMPLETE"
    marker.write_text("backtest in progress or aborted; outputs in this directory are partial\n")
    hours = bt.hour_range(start.rstrip("Z"), end.rstrip("Z"))
    t0 = time.perf_counter()
    reports = bt.run_backtests(panel, models, config, hours, settings, workers=workers,
                               checkpoint_dir=out / "checkpoints", resume=args.resume)
    reps = [reports[m] for m in models]
    _write_outputs(reps, out, cfg)
    marker.unlink()
    failed = sum(len(r.failures) for r in reps)
    print(f"{len(hours)} hours x {len(models)} model(s) in {time.perf_counter() - t0:.1f}s; "
          f"{failed} failed hour(s); outputs in {out}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    reps = [bt.read_report(p) for p in args.reports]
    out = _out_dir(cfg, args)
    st = cfg.stats
    bt.write_tables(reps, out, alpha=st["alpha"], block_length=st["block_length"],
                    confidence=st["confidence"], stride=st["stride"])
    print(f"tables for {len(reps)} report(s) written to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import make_synthetic_panel, write_panel_csv

    if not args.output and not args.csv:
        raise UsageError("give --output and/or --csv")
    panel = make_synthetic_panel(args.nodes, args.days, args.start, args.seed,
                                 zero_delta=args.zero_delta)
    if args.output:
        save_panel(panel, args.output)
    if args.csv:
        write_panel_csv(panel, args.csv)
    print(f"synthetic panel: {panel.num_nodes} nodes x {panel.num_hours} hours")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "cluster": cmd_cluster, "optimize": cmd_optimize,
            "backtest": cmd_backtest, "report": cmd_report}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = RunConfig.load(args.config, args.set)
        if getattr(args, "tz", None):
            cfg.data["tz"] = args.tz
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"convbid: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ParseError as exc:
        print(f"convbid: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CoverageError as exc:
        print(f"convbid: data coverage: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (bt.SolveFailure, ExtractionError) as exc:
        print(f"convbid: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConvBidError as exc:
        print(f"convbid: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
