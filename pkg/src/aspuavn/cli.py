"""Command line front end.

Subcommands:
  run      one scenario instance, trace and CSV row to disk
  sweep    antibody-count x malicious-fraction x seed x defense grid
  fixture  deterministic small-graph oracle checks for CI

Exit codes: 0 success, 1 configuration error, 2 run failure, 3 fixture
mismatch. ASPUAVN_WORKERS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import statistics
import sys
from dataclasses import fields, replace
from multiprocessing import get_context
from pathlib import Path

from aspuavn import analysis
from aspuavn.engine import ConfigurationError
from aspuavn.scenario import (CSV_COLUMNS, PRESETS, RunResult, ScenarioConfig,
                              run_scenario)

_TUPLE_INT = {"seeds", "antibody_sweep"}
_TUPLE_FLOAT = {"malicious_sweep"}
_TUPLE_STR = {"attack_kinds"}
_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def load_config(path: str) -> ScenarioConfig:
    """Parse a scenario file: INI ([scenario] section) or a JSON object with
    the same keys. A `preset` key starts from that preset's values."""
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = p.read_text()
    if p.suffix == ".json" or text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        ini = configparser.ConfigParser()
        ini.read_string(text)
        if "scenario" not in ini:
            raise ConfigurationError("config file needs a [scenario] section")
        raw = dict(ini["scenario"])
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> ScenarioConfig:
    base = ScenarioConfig()
    if "preset" in raw:
        name = str(raw.pop("preset"))
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}")
        base = PRESETS[name]
    updates = {}
    for key, value in raw.items():
        if key == "bounds":
            updates[key] = _parse_bounds(value)
            continue
        if key == "range":  # accepted alias used in scenario files
            key = "comm_range"
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"unknown config field {key!r}")
        updates[key] = _coerce(key, value)
    cfg = replace(base, **updates)
    cfg.validate()
    return cfg


def _parse_bounds(value):
    if isinstance(value, str):
        parts = [float(v) for v in value.replace("x", " ").split()]
    else:
        parts = [float(v) for v in value]
    if len(parts) == 2:
        parts.append(100.0)
    if len(parts) != 3:
        raise ConfigurationError("config field 'bounds': need 2 or 3 extents")
    return tuple(parts)


def _coerce(key: str, value):
    if key in _TUPLE_INT:
        if isinstance(value, str):
            value = value.replace(",", " ").split()
        return tuple(int(v) for v in value)
    if key in _TUPLE_FLOAT:
        if isinstance(value, str):
            value = value.replace(",", " ").split()
        return tuple(float(v) for v in value)
    if key in _TUPLE_STR:
        if isinstance(value, str):
            value = value.replace(",", " ").split()
        return tuple(str(v).upper() for v in value)
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(value)
        if ftype == "float":
            return float(value)
        if ftype == "bool":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"config field {key!r}: {exc}") from None


def _fmt_cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, out_path: Path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row[c]) for c in CSV_COLUMNS))
    out_path.write_text("\n".join(lines) + "\n")


def _worker(args):
    cfg_kwargs, seed, defense, antibodies = args
    cfg = ScenarioConfig(**cfg_kwargs)
    result = run_scenario(cfg, seed, defense=defense, antibodies=antibodies)
    return result.row()


def sweep_rows(cfg: ScenarioConfig, workers: int = 0) -> list:
    """Cartesian product of antibody counts x malicious fractions x seeds x
    defense modes, one CSV row per run, deterministically ordered."""
    antibody_axis = list(cfg.antibody_sweep) or [cfg.antibody_count]
    malicious_axis = list(cfg.malicious_sweep) or [cfg.malicious_fraction]
    jobs = []
    for mal in malicious_axis:
        base = replace(cfg, malicious_fraction=mal)
        kw = {f.name: getattr(base, f.name) for f in fields(ScenarioConfig)}
        for defense in (True, False):
            for ni in antibody_axis:
                for seed in cfg.seeds:
                    jobs.append((kw, seed, defense, ni))
    if workers <= 0:
        workers = int(os.environ.get("ASPUAVN_WORKERS", "0") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        ctx = get_context("spawn")
        with ctx.Pool(workers) as pool:
            rows = pool.map(_worker, jobs)
    else:
        rows = [_worker(j) for j in jobs]
    rows.sort(key=lambda r: (r["scenario"], r["malicious_pct"], r["defense"],
                             r["antibodies"], r["seed"]))
    return rows


def summarize(rows) -> list:
    """Mean and stddev per (malicious, defense, antibodies) cell."""
    cells: dict = {}
    for row in rows:
        key = (row["malicious_pct"], row["defense"], row["antibodies"])
        cells.setdefault(key, []).append(row)
    out = []
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2])):
        group = cells[key]
        entry = {"malicious_pct": key[0], "defense": key[1],
                 "antibodies": key[2], "runs": len(group)}
        for metric in ("pooled_pdr", "pdr", "plr", "fpr", "fnr", "dr"):
            vals = [r[metric] for r in group if r[metric] is not None]
            if vals:
                entry[metric + "_mean"] = statistics.fmean(vals)
                entry[metric + "_std"] = (statistics.pstdev(vals)
                                          if len(vals) > 1 else 0.0)
            else:
                entry[metric + "_mean"] = None
                entry[metric + "_std"] = None
        out.append(entry)
    return out


def write_plot_data(summary, out_dir: Path) -> None:
    """One TSV per metric: x = antibody count, one (mean, std) column pair per
    (defense, malicious%) series."""
    for metric in ("pooled_pdr", "plr", "dr", "fpr", "fnr"):
        series: dict = {}
        for entry in summary:
            skey = (entry["defense"], entry["malicious_pct"])
            series.setdefault(skey, {})[entry["antibodies"]] = (
                entry[metric + "_mean"], entry[metric + "_std"])
        xs = sorted({x for vals in series.values() for x in vals})
        keys = sorted(series)
        header = ["antibodies"]
        for defense, mal in keys:
            tag = f"{defense}_m{mal:g}"
            header += [f"{tag}_mean", f"{tag}_std"]
        lines = ["\t".join(header)]
        for x in xs:
            cells = [str(x)]
            for k in keys:
                mean, std = series[k].get(x, (None, None))
                cells.append(_fmt_cell(mean))
                cells.append(_fmt_cell(std))
            lines.append("\t".join(cells))
        (out_dir / f"plot_{metric}.tsv").write_text("\n".join(lines) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    result = run_scenario(cfg, seed, keep_trace=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from aspuavn.engine import format_record
    trace_path = out / f"trace_{cfg.name}_{seed}.log"
    trace_path.write_text(
        "\n".join(format_record(r) for r in result.trace) + "\n")
    write_csv([result.row()], out / f"run_{cfg.name}_{seed}.csv")
    row = result.row()
    print(f"scenario={cfg.name} seed={seed} defense={row['defense']} "
          f"pooled_pdr={_fmt_num(row['pooled_pdr'])} dr={_fmt_num(row['dr'])} "
          f"fpr={_fmt_num(row['fpr'])} control_msgs={row['control_msg_count']}")
    print(f"trace: {trace_path}")
    return 0


def _fmt_num(v):
    return "nan" if v is None else f"{v:.2f}"


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(cfg, workers=args.workers)
    write_csv(rows, out / f"sweep_{cfg.name}.csv")
    summary = summarize(rows)
    write_plot_data(summary, out)
    lines = ["malicious% defense antibodies runs pooled_pdr plr dr fpr"]
    for e in summary:
        lines.append(
            f"{e['malicious_pct']:>9g} {e['defense']:>7} {e['antibodies']:>10} "
            f"{e['runs']:>4} "
            f"{_fmt_num(e['pooled_pdr_mean'])}±{_fmt_num(e['pooled_pdr_std'])} "
            f"{_fmt_num(e['plr_mean'])}±{_fmt_num(e['plr_std'])} "
            f"{_fmt_num(e['dr_mean'])}±{_fmt_num(e['dr_std'])} "
            f"{_fmt_num(e['fpr_mean'])}±{_fmt_num(e['fpr_std'])}")
    summary_text = "\n".join(lines)
    (out / f"summary_{cfg.name}.txt").write_text(summary_text + "\n")
    print(summary_text)
    return 0


def cmd_fixture(args) -> int:
    """Deterministic oracle fixtures; exit 3 on any mismatch."""
    failures = []

    def check(name, ok, detail=""):
        print(f"  {'ok' if ok else 'MISMATCH'}  {name}" +
              (f"  ({detail})" if detail and not ok else ""))
        if not ok:
            failures.append(name)

    from aspuavn.testkit import (chain_world, discovery_on_chain,
                                 lanes_fixture_outcome)
    print("chain message-complexity fixtures:")
    for n in (2, 5, 10):
        world, spacing = chain_world(n)
        measured, expected, latency, exp_latency = discovery_on_chain(world, n)
        delta = abs(measured - expected)
        check(f"chain n={n} control messages", delta <= 2,
              f"measured {measured} expected {expected}")
        ratio = exp_latency / latency if latency else math.inf
        check(f"chain n={n} discovery latency", 0.5 <= ratio <= 2.0,
              f"measured {latency} expected {exp_latency}")
    print("suspicion-pipeline fixture:")
    ok = lanes_fixture_outcome(seed=7)
    check("contaminated lane rejected, clean lanes survive", ok)
    if failures:
        print(f"{len(failures)} fixture(s) failed")
        return 3
    print("all fixtures passed")
    return 0


def _config_from_args(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {args.preset!r}")
        cfg = PRESETS[args.preset]
    else:
        cfg = PRESETS["desk"]
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.defense is not None:
        updates["defense_enabled"] = args.defense == "on"
    if args.antibodies is not None:
        updates["antibody_count"] = args.antibodies
    if args.malicious is not None:
        updates["malicious_fraction"] = args.malicious
    if args.attack is not None:
        updates["attack_kinds"] = tuple(
            a.upper() for a in args.attack.replace(",", " ").split())
    if updates:
        cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aspuavn",
        description="Self-protective UAV network simulator and sweep harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep),
                     ("fixture", cmd_fixture)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="scenario file (INI or JSON)")
        sp.add_argument("--preset", help="preset name: " + ", ".join(PRESETS))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out")
        sp.add_argument("--defense", choices=["on", "off"])
        sp.add_argument("--antibodies", type=int)
        sp.add_argument("--malicious", type=float)
        sp.add_argument("--attack", help="comma list among WH,SF,SH")
        sp.add_argument("--workers", type=int, default=0)
        sp.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # run failure
        print(f"run failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
