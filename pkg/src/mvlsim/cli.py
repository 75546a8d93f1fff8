"""Command-line front end: ``mvlsim generate|stats|validate|run``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .core import Mode, MvlError
from .engine.runner import RunError, run
from .engine.trace_io import write_csv, write_json
from .population import (
    GenerationError,
    GeneratorParams,
    format_stats_table,
    population_from_json_obj,
    population_stats,
    population_to_json_obj,
    sample_population,
)
from .speclang import ScenarioError, load_scenario

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3
TOOL = "mvlsim"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _read_bytes(path: str) -> bytes:
    try:
        if path == "-":
            return sys.stdin.buffer.read()
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", encoding="utf-8", newline=""), True
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _meta(seed, data: bytes | None, **extra) -> dict:
    meta = {
        "tool": TOOL,
        "version": __version__,
        "seed": seed,
        "input_sha256": hashlib.sha256(data).hexdigest() if data is not None else None,
    }
    meta.update(extra)
    return meta


def cmd_generate(args) -> int:
    raw = None
    params = GeneratorParams()
    if args.params:
        raw = _read_bytes(args.params)
        try:
            params = GeneratorParams.from_dict(json.loads(raw))
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError(f"{args.params}: invalid generator parameters: {exc}", EXIT_INVALID) from None
    seed = params.seed if args.seed is None else args.seed
    try:
        population = sample_population(params, args.n, seed=seed, jobs=args.jobs)
    except (GenerationError, ValueError) as exc:
        raise CliError(f"generation failed: {exc}", EXIT_RUNTIME) from None
    doc = {
        "meta": _meta(seed, raw, n=args.n, params=params.to_dict()),
        "population": population_to_json_obj(population),
    }
    fh, close = _open_out(args.out)
    try:
        # dumps uses the C encoder; streaming dump does not
        fh.write(json.dumps(doc, sort_keys=True) + "\n")
    finally:
        if close:
            fh.close()
    counts = population_stats(population)["morphology"]
    summary = f"generated {len(population)} MVLs: " + ", ".join(
        f"{name} {d['count']}" for name, d in counts.items()
    )
    print(summary, file=sys.stdout if close else sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    raw = _read_bytes(args.population)
    try:
        population = population_from_json_obj(json.loads(raw))
    except (ValueError, KeyError, TypeError, MvlError) as exc:
        raise CliError(f"{args.population}: malformed population JSON: {exc}", EXIT_INVALID) from None
    if not population:
        raise CliError(f"{args.population}: population is empty", EXIT_INVALID)
    stats = population_stats(population)
    if args.format == "json":
        print(json.dumps(stats, sort_keys=True, indent=2))
    else:
        sys.stdout.write(format_stats_table(stats))
    return EXIT_OK


def _load(path: str):
    raw = _read_bytes(path)
    try:
        scenario = load_scenario(raw)
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(d.format(path), file=sys.stderr)
        raise CliError(f"{path}: {len(exc.diagnostics)} error(s)", EXIT_INVALID) from None
    for w in scenario.warnings:
        print(w.format(path), file=sys.stderr)
    return scenario, raw


def cmd_validate(args) -> int:
    scenario, _ = _load(args.scenario)
    state = scenario.state
    print(
        f"{args.scenario}: ok ({state.mode.value} mode, {len(state.species)} species, "
        f"{len(state.mvls)} MVLs, {len(state.rules)} rules, {len(scenario.schedule)} interventions)"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, raw = _load(args.scenario)
    state, config = scenario.state, scenario.config
    kinetic = state.mode is Mode.KINETIC
    if args.dt is not None:
        if not kinetic:
            raise CliError("--dt applies to kinetic scenarios only", EXIT_INVALID)
        config.dt = args.dt
    if args.steps is not None:
        config.max_steps = args.steps
    if args.sample_every is not None:
        config.sample_every = args.sample_every
    seed = state.rng_seed if args.seed is None else args.seed
    state.rng_seed = seed
    if not kinetic:
        config.rng_seed = seed
    try:
        trace = run(state, config, scenario.schedule, scenario.atoms)
    except RunError as exc:
        raise CliError(f"runtime error: {exc}", EXIT_RUNTIME) from None
    except MvlError as exc:
        raise CliError(f"runtime error: {exc}", EXIT_RUNTIME) from None
    meta = _meta(
        seed,
        raw,
        scenario=scenario.name,
        mode=state.mode.value,
        dt=config.dt if kinetic else None,
        max_steps=config.max_steps,
        sample_every=config.sample_every,
    )
    fh, close = _open_out(args.out)
    try:
        (write_json if args.format == "json" else write_csv)(trace, fh, meta)
    finally:
        if close:
            fh.close()
    report = sys.stdout if close else sys.stderr
    print(f"halt reason: {trace.halt_reason}", file=report)
    print(f"steps: {trace.steps}, simulated time: {state.clock:g} s", file=report)
    kinds = sorted({e.kind for e in trace.events})
    detail = ", ".join(f"{k} {trace.count(k)}" for k in kinds)
    print(f"events: {len(trace.events)}" + (f" ({detail})" if detail else ""), file=report)
    if not kinetic:
        print(f"total objects: {trace.samples[-1].total()}", file=report)
    drift = trace.audit_drift()
    if drift:
        print("atom drift: " + ", ".join(f"{k} {v:.3g}" for k, v in drift.items()), file=report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description="Membrane computer simulator for multivesicular liposomes.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a population of MVLs as JSON")
    g.add_argument("-n", type=_positive_int, default=1, help="number of MVLs (default 1)")
    g.add_argument("--seed", type=_seed, help="master seed (default: from --params, else 0)")
    g.add_argument("--params", help="JSON file with generator parameters")
    g.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="summarize a population JSON file ('-' reads stdin)")
    s.add_argument("population")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_stats)

    v = sub.add_parser("validate", help="parse and lower a scenario without running it")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="simulate a scenario and write its trace")
    r.add_argument("scenario")
    r.add_argument("--seed", type=_seed)
    r.add_argument("--dt", type=_positive_float, help="time step in s (kinetic mode)")
    r.add_argument("--steps", type=_nonneg_int, help="maximum number of steps")
    r.add_argument("--sample-every", type=_positive_int)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--out", help="trace output path (default stdout)")
    r.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{TOOL}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
