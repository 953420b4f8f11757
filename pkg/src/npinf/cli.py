"""``npinf`` command-line interface.

Every subcommand is a pure function of its inputs, flags and master seed.
Results go to ``--out`` (or stdout); a run manifest with parameters, input
digests and wall-clock timings is written next to each output as
``<out>.manifest.json``, so the outputs themselves stay byte-identical
across re-runs.

Exit codes: 0 success, 1 internal error, 2 input error (missing or
malformed files, bad flags), 3 contract violation (well-formed input that
breaks a precondition, e.g. a seed id outside the graph).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import secrets
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .graph import (
    GraphFormatError,
    cnp_to_dnp,
    dnp_to_cnp,
    load_cnp_graph,
    load_dnp_graph,
    read_seed_file,
    read_topology,
    save_cnp_graph,
    save_dnp_graph,
    write_seed_file,
)
from .inflmax import default_jobs, estimate_spread, greedy_celf
from .learner import ActionLog, IdMap, LogFormatError, learn_model, read_action_log
from .seeding import DEFAULT_SEED, run_random

EXIT_INTERNAL, EXIT_INPUT, EXIT_CONTRACT = 1, 2, 3


class InputError(Exception):
    """Missing or unreadable input (exit code 2)."""


class ContractError(Exception):
    """Well-formed input violating a precondition (exit code 3)."""


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int | None
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    timings: dict[str, float] = field(default_factory=dict)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _require(*paths) -> None:
    missing = [str(p) for p in paths if p is not None and not os.path.isfile(p)]
    if missing:
        raise InputError("missing input file(s): " + ", ".join(missing))


def _resolve_seed(raw: str) -> int:
    if raw == "random":
        return secrets.randbits(63)
    try:
        seed = int(raw)
    except ValueError:
        raise InputError(f"--seed must be a non-negative integer or 'random', got {raw!r}") from None
    if seed < 0:
        raise InputError("--seed must be non-negative")
    return seed


def _int_list(raw: str) -> list[int]:
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from None


def _str_list(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


class _Run:
    """Collects manifest data while a subcommand executes."""

    def __init__(self, args, seed: int | None):
        self.args = args
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.t0 = time.perf_counter()

    def track_inputs(self, *paths) -> None:
        _require(*paths)
        for p in paths:
            if p is not None:
                self.inputs[str(p)] = sha256_file(p)

    def emit(self, text: str, path=None) -> None:
        if path is None:
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            self.outputs.append(str(path))

    def finish(self, manifest_path) -> None:
        if manifest_path is None:
            return
        params = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(self.args).items()
            if k not in ("func", "seed")
        }
        RunManifest(
            command=self.args.command,
            parameters=params,
            seed=self.seed,
            inputs=self.inputs,
            outputs=self.outputs,
            timings={"wall_time_ms": (time.perf_counter() - self.t0) * 1e3},
        ).write(manifest_path)


def _manifest_for(out) -> Path | None:
    return None if out is None else Path(f"{out}.manifest.json")


def _load_graph(run: _Run, args, kind: str = "cnp"):
    run.track_inputs(args.edges, args.nodes)
    if kind == "dnp":
        return load_dnp_graph(args.edges, args.nodes)
    return load_cnp_graph(args.edges, args.nodes, getattr(args, "global_rate", None))


def _load_seeds(run: _Run, args, n: int) -> list[int]:
    if args.seeds is None:
        return []
    run.track_inputs(args.seeds)
    seeds = read_seed_file(args.seeds)
    bad = [v for v in seeds if v >= n]
    if bad:
        raise ContractError(f"seed ids outside [0, {n}): {bad[:5]}")
    return seeds


def _positive_T(T: float) -> float:
    if not (math.isfinite(T) and T > 0):
        raise ContractError(f"horizon must be positive and finite, got {T}")
    return T


# -- subcommands --------------------------------------------------------------

def cmd_learn(args) -> int:
    run = _Run(args, None)
    run.track_inputs(args.log, args.topology)
    pairs = read_topology(args.topology)
    raw = read_action_log(args.log, time_scale=args.time_scale)
    ext = [raw.id_map.external(i) for i in range(len(raw.id_map))]
    ids = IdMap.sorted_from(ext + [x for pair in pairs for x in pair])
    log = ActionLog([ids[ext[u]] for u in raw.users], raw.times, ids)
    src = [ids[a] for a, _ in pairs]
    dst = [ids[b] for _, b in pairs]
    if len(log) == 0:
        raise ContractError("action log is empty")
    lo, hi = log.span()
    train_start = lo if args.train_start is None else args.train_start
    train_end = math.nextafter(hi, math.inf) if args.train_end is None else args.train_end
    if not train_start < train_end:
        raise ContractError("training period is empty")
    percentile = None if args.percentile < 0 else args.percentile
    if percentile is not None and percentile > 100:
        raise ContractError("--percentile must lie in [0, 100]")
    try:
        model = learn_model(
            log, len(ids), src, dst, train_end,
            train_start=train_start, window=args.window, percentile=percentile,
            horizon=args.horizon, unit=args.unit,
        )
    except GraphFormatError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cnp_graph(model.graph, out / "edges.tsv", out / "nodes.tsv")
    ids.write(out / "id_map.tsv")
    write_seed_file(out / "seeds.txt", model.seeds)
    run.emit(_dumps(model.sidecar()), out / "model.json")
    run.outputs[:0] = [str(out / f) for f in ("edges.tsv", "nodes.tsv", "id_map.tsv", "seeds.txt")]
    run.finish(out / "manifest.json")
    return 0


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args.seed)
    run = _Run(args, seed)
    g = _load_graph(run, args, "dnp" if args.engine == "dnp" else "cnp")
    seeds = _load_seeds(run, args, g.n)
    T = _positive_T(args.T)
    if args.engine == "dnp" and T != int(T):
        raise ContractError("the discrete engine needs an integer horizon")
    if args.runs < 1:
        raise ContractError("--runs must be >= 1")
    est = estimate_spread(g, seeds, T, args.runs, seed, engine=args.engine, jobs=args.jobs)
    report = {"engine": args.engine, "T": T, "seeds": seeds, **est.to_dict()}
    run.emit(_dumps(report), args.out)
    run.finish(_manifest_for(args.out))
    return 0


def cmd_maximize(args) -> int:
    seed = _resolve_seed(args.seed)
    run = _Run(args, seed)
    g = _load_graph(run, args)
    T = _positive_T(args.T)
    if not 0 <= args.k <= g.n:
        raise ContractError(f"k must lie in [0, {g.n}], got {args.k}")
    if args.runs < 1:
        raise ContractError("--runs must be >= 1")
    sel = greedy_celf(g, args.k, T, args.runs, seed, jobs=args.jobs, fresh_worlds=args.fresh_worlds)
    run.emit(_dumps(sel.to_dict()), args.out)
    run.finish(_manifest_for(args.out))
    return 0


def cmd_simulate(args) -> int:
    from .cnp import simulate_event_driven
    from .dnp import simulate_dnp

    seed = _resolve_seed(args.seed)
    run = _Run(args, seed)
    g = _load_graph(run, args, "dnp" if args.engine == "dnp" else "cnp")
    seeds = _load_seeds(run, args, g.n)
    T = _positive_T(args.T)
    rng = run_random(seed, args.run_index)
    out = Path(args.out)
    summary = Path(f"{out}.summary.json")
    if args.engine == "dnp":
        if T != int(T):
            raise ContractError("the discrete engine needs an integer horizon")
        trace = simulate_dnp(g, seeds, int(T), rng, record=True)
        trace.write(out)
        run.emit(_dumps({"spread": trace.spread(), "steps": trace.T_steps, "draws": trace.draws}), summary)
    else:
        eg = g.progressive() if args.engine == "cp" else g
        trace = simulate_event_driven(eg, seeds, T, rng, precision=args.precision)
        trace.write(out)
        run.emit(_dumps(trace.summary()), summary)
    run.outputs.insert(0, str(out))
    run.finish(_manifest_for(out))
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthConfig, forest_fire, gen_events, events_to_log

    seed = _resolve_seed(args.seed)
    run = _Run(args, seed)
    try:
        cfg = SynthConfig(
            n=args.n, forward=args.forward, backward=args.backward, max_burn=args.max_burn,
            cascades=args.cascades, cascade_size=args.cascade_size, branching=args.branching,
            delay=tuple(args.delay), deactivations=args.deactivations, horizon=args.horizon,
            heartbeat=tuple(args.heartbeat), window=args.window, seed=seed,
        )
    except ValueError as exc:
        raise ContractError(str(exc)) from exc
    topo = forest_fire(cfg)
    log = events_to_log(gen_events(topo, cfg), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cnp_graph(topo, out / "edges.tsv", out / "nodes.tsv")
    log.write_csv(out / "log.csv")
    run.emit(_dumps(cfg.to_dict()), out / "config.json")
    run.outputs[:0] = [str(out / f) for f in ("edges.tsv", "nodes.tsv", "log.csv")]
    run.finish(out / "manifest.json")
    return 0


def cmd_convert(args) -> int:
    run = _Run(args, None)
    if args.to == "dnp":
        g = _load_graph(run, args, "cnp")
        save_dnp_graph(cnp_to_dnp(g), args.out_edges, args.out_nodes)
    else:
        g = _load_graph(run, args, "dnp")
        try:
            cg = dnp_to_cnp(g)
        except ValueError as exc:
            raise ContractError(str(exc)) from exc
        save_cnp_graph(cg, args.out_edges, args.out_nodes)
    run.outputs += [str(args.out_edges), str(args.out_nodes)]
    run.finish(_manifest_for(args.out_edges))
    return 0


BENCH_COLUMNS = ("engine", "size", "horizon", "reps", "wall_mean_s", "wall_min_s", "spread_mean")


def cmd_bench(args) -> int:
    from .experiments import BenchConfig, runtime_scaling

    seed = _resolve_seed(args.seed)
    run = _Run(args, seed)
    for e in args.engines:
        if e not in ("cnp", "dnp", "cp"):
            raise ContractError(f"unknown engine {e!r}")
    if any(h < 1 for h in args.horizons) or any(s < 1 for s in args.sizes):
        raise ContractError("horizons and sizes must be positive")
    if args.reps < 1:
        raise ContractError("--reps must be >= 1")
    bc = BenchConfig(
        activation_rate=args.activation_rate,
        deactivation_rate=args.deactivation_rate,
        global_rate=args.global_rate,
        seed_fraction=args.seed_fraction,
    )
    rows = runtime_scaling(args.engines, args.horizons, args.sizes, args.reps, seed, bc)
    lines = [",".join(BENCH_COLUMNS)]
    for r in rows:
        lines.append(",".join([
            r.engine, str(r.size), str(r.horizon), str(r.reps),
            f"{r.wall_mean_s:.6f}", f"{r.wall_min_s:.6f}", repr(r.spread_mean),
        ]))
    run.emit("\n".join(lines) + "\n", args.out)
    run.finish(_manifest_for(args.out))
    return 0


# -- parser -------------------------------------------------------------------

def _graph_args(p, seeds: bool = False) -> None:
    p.add_argument("--edges", required=True, type=Path, help="edge file (src, dst, rate or probability)")
    p.add_argument("--nodes", required=True, type=Path, help="node file (node, deactivation rate or probability)")
    if seeds:
        p.add_argument("--seeds", type=Path, help="seed file: one node id per line")


def _run_args(p, jobs: bool = True) -> None:
    p.add_argument("--seed", default=str(DEFAULT_SEED), help=f"master seed or 'random' (default {DEFAULT_SEED})")
    if jobs:
        p.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes (default $NPINF_JOBS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="npinf", description="Non-progressive influence: learn, simulate, maximize.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn CNP parameters from an action log")
    p.add_argument("--log", required=True, type=Path, help="CSV of user_id,timestamp")
    p.add_argument("--topology", required=True, type=Path, help="edge list; first two columns are user ids")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--window", type=float, help="deactivation window (default: mean gap above one time unit)")
    p.add_argument("--percentile", type=float, default=50.0,
                   help="percentile of learned deactivation rates used as the default; negative disables")
    p.add_argument("--horizon", type=float, help="global-rate denominator (default: training length)")
    p.add_argument("--train-start", type=float)
    p.add_argument("--train-end", type=float, help="exclusive end of the training period (default: after the last action)")
    p.add_argument("--time-scale", type=float, default=1.0, help="multiply timestamps by this factor")
    p.add_argument("--unit", default="days", help="time unit label written to the headers")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("estimate", help="Monte Carlo spread estimate")
    _graph_args(p, seeds=True)
    p.add_argument("-T", "--horizon", dest="T", type=float, required=True)
    p.add_argument("-R", "--runs", type=int, default=100)
    p.add_argument("--engine", choices=("cnp", "dnp", "cp"), default="cnp")
    p.add_argument("--out", type=Path, help="JSON report (default stdout)")
    _run_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("maximize", help="lazy greedy seed selection")
    _graph_args(p)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("-T", "--horizon", dest="T", type=float, required=True)
    p.add_argument("-R", "--runs", type=int, default=100, help="shared possible worlds")
    p.add_argument("--fresh-worlds", action="store_true", help="redraw worlds in every greedy round")
    p.add_argument("--out", type=Path)
    _run_args(p)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("simulate", help="dump one simulated trace")
    _graph_args(p, seeds=True)
    p.add_argument("-T", "--horizon", dest="T", type=float, required=True)
    p.add_argument("--engine", choices=("cnp", "dnp", "cp"), default="cnp")
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--precision", type=int, default=20)
    p.add_argument("--out", required=True, type=Path, help="trace TSV; summary goes to <out>.summary.json")
    _run_args(p, jobs=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="forest-fire topology and synthetic action log")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--forward", type=float, default=0.35)
    p.add_argument("--backward", type=float, default=0.32)
    p.add_argument("--max-burn", type=int)
    p.add_argument("--cascades", type=int, default=60)
    p.add_argument("--cascade-size", type=int, default=30)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--delay", type=float, nargs=2, default=(0.5, 3.0), metavar=("LO", "HI"))
    p.add_argument("--deactivations", type=int, default=0)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--heartbeat", type=float, nargs=2, default=(1.0, 3.0), metavar=("LO", "HI"))
    p.add_argument("--window", type=float, default=6.0)
    _run_args(p, jobs=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="map parameters between the continuous and discrete models")
    _graph_args(p)
    p.add_argument("--to", choices=("dnp", "cnp"), required=True)
    p.add_argument("--out-edges", required=True, type=Path)
    p.add_argument("--out-nodes", required=True, type=Path)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("bench", help="wall time versus horizon and graph size")
    p.add_argument("--engines", type=_str_list, default=["cnp", "dnp"])
    p.add_argument("--horizons", type=_int_list, default=[30, 60, 120, 240])
    p.add_argument("--sizes", type=_int_list, default=[10_000])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--activation-rate", type=float, default=2.0**-13)
    p.add_argument("--deactivation-rate", type=float, default=2.0**-14)
    p.add_argument("--global-rate", type=float, default=2.0**-10)
    p.add_argument("--seed-fraction", type=float, default=0.3)
    p.add_argument("--out", type=Path, help="CSV (default stdout)")
    _run_args(p, jobs=False)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, GraphFormatError, LogFormatError) as exc:
        print(f"npinf {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, ValueError, KeyError) as exc:
        print(f"npinf {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except Exception as exc:  # noqa: BLE001
        print(f"npinf {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
