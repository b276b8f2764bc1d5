"""Command line entry point: ``transitlabel simulate|process|evaluate``.

Exit codes: 0 success, 2 usage or configuration error, 3 invalid input data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path

from .config import ConfigError, PipelineConfig, flatten, load_pipeline_config
from .evaluation import evaluate, format_json, format_text
from .mapper import to_annotated
from .model import TraceError, read_floorplan, read_map, read_trace, write_floorplan, write_map, write_trace
from .pipeline import analyse_trace, format_sidecar, parse_sidecar, run_pipeline, sidecar_path
from .simulator import generate_station, load_sim_config, plan_corpus, simulate_trace

log = logging.getLogger("transitlabel")

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 2, 3
TRACE_SUFFIX = ".trace"
STATION_FILE = "station.txt"
MANIFEST_FILE = "manifest.json"


class UsageError(Exception):
    pass


def _trace_files(trace_dir: Path) -> list[Path]:
    if not trace_dir.is_dir():
        raise UsageError(f"{trace_dir}: not a directory")
    files = sorted(trace_dir.rglob(f"*{TRACE_SUFFIX}"))
    if not files:
        raise UsageError(f"{trace_dir}: no {TRACE_SUFFIX} files")
    return files


def _read_traces(files):
    out = []
    for p in files:
        try:
            out.append(read_trace(p))
        except TraceError as exc:
            raise TraceError(f"{p}: {exc}") from None
    return out


def _configs(path) -> tuple[PipelineConfig, object]:
    """Both halves of a shared config file, so a typo in either half is caught."""
    return load_pipeline_config(path), load_sim_config(path)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    _, config = _configs(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.n_traces is not None:
        config = replace(config, n_traces=args.n_traces)
    out = Path(args.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    template = generate_station(config.seed, config.station)
    write_floorplan(template.floorplan(), out / STATION_FILE)
    plan = plan_corpus(config.n_traces, None, config.seed, config.placement_pocket, config.free_fraction)
    entries = []
    for i, (scenario, trace_seed) in enumerate(plan):
        tid = f"{template.station_id}-{i:04d}"
        trace, _ = simulate_trace(template, scenario, config.noise, trace_seed, tid,
                                  config.audio_rate, config.behaviour)
        name = f"traces/{tid}{TRACE_SUFFIX}"
        write_trace(trace, out / name)
        entries.append({"id": tid, "file": name, "seed": trace_seed, "activities": list(scenario.activities),
                        "placement": scenario.placement.value, "free": scenario.free})
        log.info("simulated %s", tid)
    manifest = {
        "station": STATION_FILE,
        "station_id": template.station_id,
        "seed": config.seed,
        "config": {f"simulator.{k}": v for k, v in flatten(config).items()},
        "traces": entries,
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(entries)} traces to {out}")
    return EXIT_OK


def _analyse_all(traces, config: PipelineConfig, jobs: int):
    if jobs <= 1 or len(traces) < 2:
        return [analyse_trace(t, config) for t in traces]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(partial(analyse_trace, config=config), traces, chunksize=4))


def cmd_process(args) -> int:
    config, _ = _configs(args.config)
    if args.passes < 1:
        raise UsageError("--passes must be at least 1")
    traces = _read_traces(_trace_files(Path(args.traces)))
    analyses = _analyse_all(traces, config, args.jobs)
    result = run_pipeline(analyses, config, passes=args.passes)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_map(to_annotated(result.smap, config.mapper), out)
    sidecar_path(out).write_text(format_sidecar(result), encoding="utf-8")
    print(f"map with {len(result.smap.clusters)} clusters from {len(traces)} traces written to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config, _ = _configs(args.config)
    map_path = Path(args.map)
    if not map_path.is_file():
        raise UsageError(f"{map_path}: no such map")
    amap = read_map(map_path)
    side = sidecar_path(map_path)
    if not side.is_file():
        raise UsageError(f"{side}: detections file missing, run process first")
    sidecar = parse_sidecar(side.read_text(encoding="utf-8"))
    trace_dir = Path(args.traces)
    traces = _read_traces(_trace_files(trace_dir))
    truth = {t.trace_id: t.ground_truth for t in traces if t.ground_truth is not None}
    if not truth:
        raise UsageError("traces carry no ground truth")
    station = Path(args.station) if args.station else trace_dir / STATION_FILE
    if not station.is_file():
        station = trace_dir.parent / STATION_FILE
    if not station.is_file():
        raise UsageError(f"no station file found, pass --station")
    plan = read_floorplan(station)
    report = evaluate(truth, sidecar.labels, sidecar.detections, amap, plan.true_semantics,
                      sidecar.traces, config.mapper, seed=args.seed or 0)
    text = format_text(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        out.with_name(out.name + ".json").write_text(format_json(report), encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transitlabel", description="Semantic labelling of station maps from phone sensor traces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic station and trace corpus")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-traces", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("process", help="classify traces and build the annotated map")
    s.add_argument("traces", help="directory of trace files")
    s.add_argument("--config")
    s.add_argument("--passes", type=int, default=2)
    s.add_argument("--jobs", type=int, default=1, help="worker processes for per-trace analysis")
    s.add_argument("--out", required=True, help="map file to write")
    s.set_defaults(func=cmd_process)

    s = sub.add_parser("evaluate", help="score a processed map against ground truth")
    s.add_argument("map")
    s.add_argument("traces", help="directory of trace files with ground truth")
    s.add_argument("--station", help="station ground-truth file (default: next to the traces)")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, help="seed for the location-curve subsampling")
    s.add_argument("--out", help="text report path; JSON goes to <out>.json")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return args.func(args)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"transitlabel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceError as exc:
        print(f"transitlabel: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
