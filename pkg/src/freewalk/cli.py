"""Command-line front end.

Every data-producing command writes its outputs plus a manifest recording the
full parameter set and the sha256 of each output, so ``replay`` can rebuild
them byte for byte.  Exit codes: 0 success, 1 usage error or replay mismatch,
2 input error, 3 resource error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Callable

from . import __version__
from .boundary import CylinderMeasure, empirical_cylinder_measure, stationarity_residual, tv_error_bar, tv_lower_bound, uniform_cylinder_measure
from .cosets import TrackingReport, cesaro_coset_measure, coset_distances, thm3_trials, thm4_trials
from .errors import InputError, ResourceError
from .quotient import (
    AbelianProjection,
    StoppingBatch,
    induced_measure_empirical,
    induced_moment_scan,
    induced_stationarity_check,
    stopping_batch,
    tau_tail_fit,
)
from .rng import FORWARD, map_trials
from .stepmeasure import load_measure
from .subgroup import SchreierBall, StallingsGraph, commensurable, contains, fold, index, parse_generators
from .walk import drift_estimate, sample_path

MANIFEST_SCHEMA = "freewalk-manifest/1"
CSV_SCHEMAS = {"cylinders": "cylinders/1", "tracking": "tracking/1", "taus": "taus/1"}

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class UsageError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting.  Routing parsers report usage errors (exit 1),
    leaf parsers report bad flag values as input errors (exit 2)."""

    exit_code = EXIT_USAGE

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}", self.exit_code)


class _LeafParser(_Parser):
    exit_code = EXIT_INPUT


# --- helpers ------------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _int_list(text: str) -> list[int]:
    """``"0,2,4"`` or a range ``"0,2,...,20"``."""
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if len(parts) >= 4 and parts[-2] in ("...", ".."):
        a, b, end = int(parts[0]), int(parts[1]), int(parts[-1])
        return list(range(a, end + 1, b - a))
    return [int(p) for p in parts]


def _float_list(text: str) -> list[float]:
    return [float(p) for p in str(text).split(",") if p.strip()]


def _generators(spec: str, rank: int) -> StallingsGraph:
    """A generator list ``"aa,bb"``, a text file of generators, or a graph JSON file."""
    if os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            return StallingsGraph.from_json(text)
        return fold(parse_generators(text.replace("\n", ","), rank), rank)
    return fold(parse_generators(spec, rank), rank)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


# --- commands -------------------------------------------------------------------------
# Each command returns {output name: text}.  The first output goes to --out
# (or stdout); further outputs go to the paths named by their own flags.


def cmd_walk_drift(a) -> dict[str, str]:
    est = drift_estimate(load_measure(a.measure, a.rank), a.steps, a.trials, a.seed, a.parallel)
    return {"out": _dump(est.to_dict())}


def cmd_walk_path(a) -> dict[str, str]:
    path = sample_path(load_measure(a.measure, a.rank), a.steps, a.seed)
    return {"out": path.serialize().decode("utf-8") + "\n"}


def cmd_boundary_hitting(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    cm = empirical_cylinder_measure(m, a.depth, a.trials, a.steps, a.seed, a.horizon, a.parallel)
    return {"out": cm.to_csv()}


def cmd_boundary_tv(a) -> dict[str, str]:
    cm1 = CylinderMeasure.from_csv(_read(a.a), a.rank)
    cm2 = CylinderMeasure.from_csv(_read(a.b), a.rank)
    depth = min(cm1.depth, cm2.depth) if a.depth is None else a.depth
    rows = []
    for L in range(1, depth + 1):
        c1, c2 = cm1.truncate(L), cm2.truncate(L)
        rows.append({"depth": L, "tv": float(tv_lower_bound(c1, c2)), "error_bar": tv_error_bar(c1, c2)})
    return {"out": _dump({"curve": rows, "tv": rows[-1]["tv"], "depth": depth})}


def cmd_boundary_stationarity(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    if a.cylinders:
        cm = CylinderMeasure.from_csv(_read(a.cylinders), a.rank)
    elif a.depth:
        cm = uniform_cylinder_measure(a.rank, a.depth)
    else:
        raise InputError("give --cylinders FILE or --depth L for the analytic uniform measure")
    res = stationarity_residual(m, cm)
    return {"out": _dump({"residual": float(res.value), "redistributed": float(res.redistributed), "exact": cm.exact and m.exact})}


def cmd_subgroup_fold(a) -> dict[str, str]:
    return {"out": _generators(a.gens, a.rank).to_json() + "\n"}


def cmd_subgroup_commensurable(a) -> dict[str, str]:
    return {"out": _dump(commensurable(_generators(a.a, a.rank), _generators(a.b, a.rank)).to_dict())}


def cmd_subgroup_contains(a) -> dict[str, str]:
    return {"out": _dump({"word": a.word, "contains": contains(_generators(a.gens, a.rank), a.word)})}


def cmd_subgroup_index(a) -> dict[str, str]:
    idx = index(_generators(a.gens, a.rank))
    return {"out": _dump({"index": "inf" if math.isinf(idx) else int(idx)})}


def _tracking_csv(reports) -> str:
    rows = ["trial,R,horizon,fraction,failures"]
    for t, curve in enumerate(reports):
        rows += [f"{t},{r.R},{r.horizon},{r.fraction!r},{r.failures}" for r in curve]
    return "\r\n".join(rows) + "\r\n"


def cmd_track_thm3(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    return {"out": _tracking_csv(thm3_trials(m, a.steps, a.germ_depth, _int_list(a.radii), a.trials, a.seed, a.parallel))}


def cmd_track_thm4(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    return {"out": _tracking_csv(thm4_trials(m, a.steps, a.germ_depth, _int_list(a.radii), a.T, a.trials, a.seed, a.parallel))}


def cmd_track_lemma52(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    H2 = _generators(a.subgroup, a.rank)
    radii = _int_list(a.radii)

    def one(t):
        # each trial owns its Schreier ball, so trials stay independent of scheduling
        d = coset_distances(sample_path(m, a.steps, a.seed, t, FORWARD), SchreierBall(H2, a.budget))[1:]
        return [TrackingReport(R, a.steps, int((d < R).sum()) / a.steps) for R in radii]

    return {"out": _tracking_csv(map_trials(one, a.trials, a.parallel))}


def cmd_coset_cesaro(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    cm = cesaro_coset_measure(m, _generators(a.subgroup, a.rank), a.N, a.radius, a.budget, a.engine)
    return {"out": _dump(cm.to_dict())}


def _projection(a) -> AbelianProjection:
    modulus = _int_list(a.modulus) if a.modulus else None
    return AbelianProjection.parse(a.proj, a.rank, modulus)


def cmd_quotient_induce(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    im = induced_measure_empirical(m, _projection(a), a.trials, a.cap, a.seed, a.parallel)
    out = {"out": _dump(im.to_dict())}
    if a.taus:
        out["taus"] = im.batch.to_csv()
    return out


def cmd_quotient_tail(a) -> dict[str, str]:
    if a.input:
        batch = StoppingBatch.from_csv(_read(a.input))
    else:
        batch = stopping_batch(load_measure(a.measure, a.rank), _projection(a), a.trials, a.cap, a.seed, a.parallel)
    lo, hi = _int_list(a.window)
    fit = tau_tail_fit(batch.taus, batch.capped, (lo, hi))
    return {"out": _dump({"slope": fit.slope, "stderr": fit.stderr, "rvalue": fit.rvalue, "window": [lo, hi], "samples": batch.trials})}


def cmd_quotient_moments(a) -> dict[str, str]:
    batch = stopping_batch(load_measure(a.measure, a.rank), _projection(a), a.trials, a.cap, a.seed, a.parallel)
    scan = induced_moment_scan(batch.xi_lengths(), _float_list(a.p))
    body = {
        str(p): {"stabilized": c.stabilized, "relative_change": c.relative_change, "n": c.n.tolist(), "running_mean": c.running_mean.tolist()}
        for p, c in scan.items()
    }
    return {"out": _dump({"p": body, "uncapped": int((~batch.capped).sum()), "trials": batch.trials})}


def cmd_quotient_stationarity(a) -> dict[str, str]:
    m = load_measure(a.measure, a.rank)
    r = induced_stationarity_check(m, _projection(a), a.depth, a.trials, a.seed, a.steps, a.cap, a.horizon, a.shift, a.parallel)
    return {"out": _dump({"residual": r.residual, "failures": r.failures, "capped": r.capped, "depth": a.depth, "shift": a.shift})}


# --- parser -----------------------------------------------------------------------------


@dataclass(frozen=True)
class Flag:
    name: str
    type: Callable = str
    default: object = None
    required: bool = False
    help: str = ""


MEASURE = Flag("measure", str, None, True, "preset (nn-uniform, lazy-nn, squares), delta:w, uniform:w1,w2 or a JSON file")
SEED = Flag("seed", int, 7, False, "root seed (64-bit unsigned)")
PROJ = [Flag("proj", str, "a:1,b:0", False, 'generator images, "a:1,b:0" or "a:1/0,b:0/1"'), Flag("modulus", str, None, False, "optional modulus per coordinate")]

COMMANDS: dict[tuple[str, str], tuple[Callable, list[Flag]]] = {
    ("walk", "drift"): (cmd_walk_drift, [MEASURE, Flag("steps", int, 10_000), Flag("trials", int, 100), SEED]),
    ("walk", "path"): (cmd_walk_path, [MEASURE, Flag("steps", int, 1000), SEED]),
    ("boundary", "hitting"): (
        cmd_boundary_hitting,
        [MEASURE, Flag("depth", int, 3), Flag("trials", int, 100_000), Flag("steps", int, 2000), Flag("horizon", float, 0.5), SEED],
    ),
    ("boundary", "tv"): (cmd_boundary_tv, [Flag("a", str, None, True), Flag("b", str, None, True), Flag("depth", int, None)]),
    ("boundary", "stationarity"): (cmd_boundary_stationarity, [MEASURE, Flag("cylinders", str, None), Flag("depth", int, None)]),
    ("subgroup", "fold"): (cmd_subgroup_fold, [Flag("gens", str, None, True)]),
    ("subgroup", "commensurable"): (cmd_subgroup_commensurable, [Flag("a", str, None, True), Flag("b", str, None, True)]),
    ("subgroup", "contains"): (cmd_subgroup_contains, [Flag("gens", str, None, True), Flag("word", str, None, True)]),
    ("subgroup", "index"): (cmd_subgroup_index, [Flag("gens", str, None, True)]),
    ("track", "thm3"): (
        cmd_track_thm3,
        [MEASURE, Flag("steps", int, 100_000), Flag("germ-depth", int, 20), Flag("radii", str, "0,2,...,20"), Flag("trials", int, 100), SEED],
    ),
    ("track", "thm4"): (
        cmd_track_thm4,
        [MEASURE, Flag("steps", int, 100_000), Flag("germ-depth", int, 20), Flag("radii", str, "0,2,...,20"), Flag("T", int, 10_000), Flag("trials", int, 100), SEED],
    ),
    ("track", "lemma52"): (
        cmd_track_lemma52,
        [MEASURE, Flag("subgroup", str, None, True), Flag("steps", int, 10_000), Flag("radii", str, "1,2,4,8"), Flag("trials", int, 100), Flag("budget", int, 10**6), SEED],
    ),
    ("coset", "cesaro"): (
        cmd_coset_cesaro,
        [MEASURE, Flag("subgroup", str, None, True), Flag("N", int, 1000), Flag("radius", int, 30), Flag("engine", str, "auto"), Flag("budget", int, 10**6)],
    ),
    ("quotient", "induce"): (cmd_quotient_induce, [MEASURE, *PROJ, Flag("trials", int, 100_000), Flag("cap", int, 100_000), SEED, Flag("taus", str, None, False, "also write tau samples as CSV")]),
    ("quotient", "tail"): (
        cmd_quotient_tail,
        [Flag("in", str, None, False, "tau CSV from quotient induce --taus"), Flag("measure", str, "nn-uniform"), *PROJ, Flag("trials", int, 100_000), Flag("cap", int, 100_000), Flag("window", str, "100,1000"), SEED],
    ),
    ("quotient", "moments"): (cmd_quotient_moments, [MEASURE, *PROJ, Flag("p", str, "0,0.25,1"), Flag("trials", int, 100_000), Flag("cap", int, 100_000), SEED]),
    ("quotient", "stationarity"): (
        cmd_quotient_stationarity,
        [Flag("measure", str, "nn-uniform"), *PROJ, Flag("depth", int, 2), Flag("trials", int, 100_000), Flag("steps", int, 2000), Flag("cap", int, 10_000), Flag("horizon", float, 0.5), Flag("shift", str, None), SEED],
    ),
}

# flags that shape where output goes or how fast it is produced, never what it contains
RUN_FLAGS = {"out", "manifest", "parallel", "config", "group", "command"}
OUTPUT_FLAGS = {"taus"}


def _dest(flag: Flag) -> str:
    return "input" if flag.name == "in" else flag.name.replace("-", "_")


def build_parser() -> _Parser:
    parser = _Parser(prog="freewalk", description="Random walks on free groups: boundary, tracking, cosets, induced measures.")
    parser.add_argument("--version", action="version", version=f"freewalk {__version__}")
    groups = parser.add_subparsers(dest="group", metavar="{walk,boundary,subgroup,track,coset,quotient,replay}", parser_class=_Parser)
    subs: dict[str, argparse._SubParsersAction] = {}
    for group, command in COMMANDS:
        if group not in subs:
            subs[group] = groups.add_parser(group).add_subparsers(dest="command", parser_class=_LeafParser)
        p = subs[group].add_parser(command)
        for f in COMMANDS[group, command][1]:
            p.add_argument(f"--{f.name}", dest=_dest(f), type=f.type, default=None, help=f.help or None)
        p.add_argument("--rank", type=int, default=None, help="number of free generators (default 2)")
        _run_flags(p)
    rp = groups.add_parser("replay")
    rp.add_argument("manifest")
    rp.add_argument("--seed", type=int, default=None, help="override the seed (marks a derived run)")
    rp.add_argument("--parallel", type=int, default=1)
    rp.add_argument("--dir", default=None, help="write replayed outputs here instead of a temporary directory")
    return parser


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest.json)")
    p.add_argument("--parallel", type=int, default=None, help="trial-level threads; results do not depend on it")
    p.add_argument("--config", default=None, help="TOML file of flag values; explicit flags win")


def _usage(group: str, command: str) -> str:
    flags = COMMANDS[group, command][1]
    need = " ".join(f"--{f.name} {f.name.upper().replace('-', '_')}" for f in flags if f.required)
    rest = " ".join(f"[--{f.name}]" for f in flags if not f.required)
    return f"usage: freewalk {group} {command} {need} {rest} [--rank] [--out] [--manifest] [--parallel] [--config]".replace("  ", " ")


def _config_values(path: str, group: str, command: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"bad TOML in {path}: {exc}") from exc
    values = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(group, {})
    values.update({k: v for k, v in section.items() if not isinstance(v, dict)})
    values.update(section.get(command, {}))
    return {k.replace("-", "_"): v for k, v in values.items()}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from defaults; check required ones."""
    flags = COMMANDS[args.group, args.command][1]
    cfg = _config_values(args.config, args.group, args.command) if args.config else {}
    known = {_dest(f) for f in flags} | {"rank", "parallel"}
    unknown = set(cfg) - known - {"out", "manifest"}
    if unknown:
        raise InputError(f"unknown config keys for {args.group} {args.command}: {', '.join(sorted(unknown))}")
    for f in flags:
        d = _dest(f)
        if getattr(args, d) is None and d in cfg:
            setattr(args, d, f.type(cfg[d]))
        if getattr(args, d) is None:
            setattr(args, d, f.default)
        if f.required and getattr(args, d) is None:
            raise UsageError(f"{_usage(args.group, args.command)}\nfreewalk {args.group} {args.command}: error: missing required flag --{f.name}", EXIT_INPUT)
    for d, default in (("rank", 2), ("parallel", 1)):
        if getattr(args, d) is None:
            setattr(args, d, int(cfg.get(d, default)))
    for d in ("out", "manifest"):
        if getattr(args, d) is None and d in cfg:
            setattr(args, d, cfg[d])
    return args


def params_of(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in RUN_FLAGS}


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def execute(group: str, command: str, params: dict, parallel: int = 1) -> dict[str, str]:
    args = argparse.Namespace(**params, parallel=parallel, group=group, command=command)
    return COMMANDS[group, command][0](args)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(args: argparse.Namespace, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = resolve(args)
    params = params_of(args)
    t0 = time.perf_counter()
    outputs = execute(args.group, args.command, params, args.parallel)
    wall = time.perf_counter() - t0
    paths = {"out": args.out}
    for name in OUTPUT_FLAGS:
        if name in outputs:
            paths[name] = params[name]
    for name, text in outputs.items():
        if paths.get(name):
            _write(paths[name], text)
        else:
            stdout.write(text)
    if args.out:
        manifest = {
            "schema": MANIFEST_SCHEMA,
            "version": __version__,
            "command": [args.group, args.command],
            "params": params,
            "seed": params.get("seed"),
            "wall_clock_s": round(wall, 3),
            "outputs": {name: {"path": os.path.basename(paths[name]), "sha256": sha256(text)} for name, text in outputs.items() if paths.get(name)},
            "csv_schemas": CSV_SCHEMAS,
        }
        _write(args.manifest or f"{args.out}.manifest.json", _dump(manifest))
    return EXIT_OK


def replay(path: str, seed: int | None = None, parallel: int = 1, directory: str | None = None) -> dict:
    """Re-run a manifest and compare output digests."""
    manifest = json.loads(_read(path))
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise InputError(f"unsupported manifest schema {manifest.get('schema')!r}")
    if manifest.get("version") != __version__:
        raise InputError(f"manifest written by version {manifest.get('version')}, this is {__version__}")
    group, command = manifest["command"]
    if (group, command) not in COMMANDS:
        raise InputError(f"unknown command {group} {command} in manifest")
    params = dict(manifest["params"])
    derived = seed is not None and seed != params.get("seed")
    if seed is not None:
        params["seed"] = seed
    outputs = execute(group, command, params, parallel)
    report = {"command": [group, command], "derived": derived, "parallel": parallel, "outputs": {}}
    for name, rec in manifest["outputs"].items():
        got = sha256(outputs.get(name, ""))
        report["outputs"][name] = {"expected": rec["sha256"], "got": got, "match": got == rec["sha256"]}
        if directory:
            _write(os.path.join(directory, rec["path"]), outputs.get(name, ""))
    report["match"] = all(r["match"] for r in report["outputs"].values())
    return report


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.group is None:
            raise UsageError(parser.format_usage() + "freewalk: error: a subcommand is required", EXIT_USAGE)
        if args.group == "replay":
            report = replay(args.manifest, args.seed, args.parallel, args.dir)
            sys.stdout.write(_dump(report))
            return EXIT_OK if report["match"] or report["derived"] else EXIT_USAGE
        if args.command is None:
            raise UsageError(f"freewalk {args.group}: error: a command is required", EXIT_USAGE)
        return run(args)
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return exc.code
    except ValueError as exc:
        sys.stderr.write(f"freewalk: input error: {exc}\n")
        return EXIT_INPUT
    except ResourceError as exc:
        sys.stderr.write(f"freewalk: resource error: {exc}\n")
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
