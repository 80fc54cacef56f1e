"""Command-line front end.

``fracimp check|solve|steer <config> [--out PATH] [--control PATH] [--force]``

Configurations are TOML documents with the sections ``[order]``,
``[partition]``, ``[generator]``, ``[control]``, ``[nonlinearity]``,
``[impulses]``, ``[initial]``, ``[solver]`` and ``[steering]``. Unknown
sections or keys are rejected with the line they appear on. Numbers are
written with 17 significant digits so that every double round-trips.

Exit codes: 0 success, 1 load error, 2 failed hypothesis, 3 non-convergence.
The environment variable ``FRACIMP_LOG`` selects ``quiet`` (default),
``info`` or ``debug`` logging on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on the interpreter
    import tomli as tomllib

import tomli_w

from fracimp.control import SteeringProblem, steer
from fracimp.errors import ConfigError, FracImpError, HypothesisViolated, NonConvergence
from fracimp.fracops import SampledFunction
from fracimp.hypotheses import check_all
from fracimp.operators import ControlKind, ControlMap, Generator, GeneratorKind
from fracimp.solver import SolverConfig, solve, verify_initial_condition
from fracimp.system import (
    ImpulseMap,
    ImpulseSpec,
    Nonlinearity,
    Partition,
    StateSpace,
    SystemSpec,
    Trajectory,
    pc_norm,
)

__all__ = [
    "EXIT_FAIL",
    "EXIT_LOAD",
    "EXIT_NONCONVERGENCE",
    "EXIT_OK",
    "LoadedConfig",
    "cmd_check",
    "cmd_solve",
    "cmd_steer",
    "config_path",
    "dump_config",
    "load_config",
    "main",
    "read_control_csv",
    "write_control_csv",
    "write_run_csv",
    "write_trajectory_csv",
]

logger = logging.getLogger("fracimp")

EXIT_OK = 0
EXIT_LOAD = 1
EXIT_FAIL = 2
EXIT_NONCONVERGENCE = 3


# {{{ schema


_SECTIONS: dict[str, frozenset[str]] = {
    "order": frozenset({"eta", "q"}),
    "partition": frozenset({"p", "t", "a"}),
    "generator": frozenset({"kind", "eigenvalues", "matrix", "modes", "points", "M"}),
    "control": frozenset({"kind", "matrix"}),
    "nonlinearity": frozenset({"kind", "delta", "beta", "gain", "offset"}),
    "impulses": frozenset({"maps"}),
    "initial": frozenset({"z0"}),
    "solver": frozenset({"mesh", "grading", "tol", "max_iters", "window_points",
                         "history_points"}),
    "steering": frozenset({"target", "epsilon", "max_iters"}),
}
_REQUIRED = ("order", "partition", "generator", "initial")
_IMPULSE_KEYS = frozenset({"kind", "coeff", "rate", "offset", "b", "c"})


def config_path(name: str) -> Path:
    """Path of a configuration shipped with the package."""
    return Path(__file__).parent / "configs" / name


def _line_of(text: str, section: str | None, key: str | None = None) -> int:
    """1-based line of ``[section]`` (or of ``key`` inside it); 0 if not
    found."""
    lines = text.splitlines()
    start = 0
    if section is not None:
        head = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"(\.[^\]]*)?\s*\]\]?")
        for i, line in enumerate(lines):
            if head.match(line):
                start = i
                break
        else:
            return 0
        if key is None:
            return start + 1
    pat = re.compile(r"(^|[\s{,])" + re.escape(key or "") + r"\s*=")
    for i in range(start, len(lines)):
        if i > start and re.match(r"^\s*\[", lines[i]) and section is not None \
                and not re.match(r"^\s*\[\[?\s*" + re.escape(section), lines[i]):
            break
        if pat.search(lines[i]):
            return i + 1
    return start + 1


# }}}


# {{{ loading


@dataclass(frozen=True, eq=False)
class LoadedConfig:
    """A validated configuration.

    ``document`` is the normalized form: every default made explicit and
    every computed constant (semigroup bound, impulse constants) stored, so
    that :func:`dump_config` followed by :func:`load_config` rebuilds an
    identical system.
    """

    path: str
    spec: SystemSpec
    solver: SolverConfig
    steering: dict | None
    document: dict


def _floats(value, what: str) -> list[float]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a list of numbers")
    return [float(v) for v in arr]


def _matrix(value, what: str) -> list[list[float]]:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{what} must be a list of rows")
    return [[float(v) for v in row] for row in arr]


class _Loader:
    def __init__(self, text: str, path: str) -> None:
        self.text = text
        self.path = path

    def fail(self, message: str, section: str | None = None, key: str | None = None):
        line = _line_of(self.text, section, key) if section is not None else 0
        where = f"{self.path}:{line}" if line else self.path
        return ConfigError(f"{where}: {message}")

    def run(self) -> LoadedConfig:
        try:
            raw = tomllib.loads(self.text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{self.path}: {exc}") from exc
        for name, body in raw.items():
            if name not in _SECTIONS:
                raise self.fail(f"unknown section [{name}]", name)
            if not isinstance(body, dict):
                raise self.fail(f"[{name}] must be a section", None)
            for key in body:
                if key not in _SECTIONS[name]:
                    raise self.fail(f"unknown key {key!r} in [{name}]", name, key)
        for name in _REQUIRED:
            if name not in raw:
                raise self.fail(f"missing section [{name}]")

        doc: dict = {}
        spec = self._system(raw, doc)
        solver = self._solver(raw.get("solver", {}), doc)
        steering = self._steering(raw.get("steering"), spec, doc)
        return LoadedConfig(self.path, spec, solver, steering, doc)

    def _get(self, section: str, body: dict, key: str, default=None, required: bool = False):
        if key not in body:
            if required:
                raise self.fail(f"[{section}] needs {key!r}", section)
            return default
        return body[key]

    def _guard(self, section: str, key: str | None, build):
        try:
            return build()
        except ConfigError:
            raise
        except (ValueError, TypeError, FracImpError) as exc:
            raise self.fail(f"[{section}] {exc}", section, key) from exc

    def _system(self, raw: dict, doc: dict) -> SystemSpec:
        o = raw["order"]
        eta = self._guard("order", "eta", lambda: float(self._get("order", o, "eta", required=True)))
        q = self._guard("order", "q", lambda: float(self._get("order", o, "q", required=True)))
        doc["order"] = {"eta": eta, "q": q}

        pt = raw["partition"]
        p = self._guard("partition", "p", lambda: _floats(self._get("partition", pt, "p", required=True), "p"))
        t = self._guard("partition", "t", lambda: _floats(self._get("partition", pt, "t", required=True), "t"))
        part = self._guard("partition", None, lambda: Partition(tuple(p), tuple(t)))
        a = self._get("partition", pt, "a")
        if a is not None and float(a) != part.a:
            raise self.fail(f"a = {a} differs from the last flow end {part.a}", "partition", "a")
        doc["partition"] = {"p": list(part.p), "t": list(part.t), "a": part.a}

        gen, gdoc = self._guard("generator", None, lambda: self._generator(raw["generator"]))
        doc["generator"] = gdoc
        space = StateSpace.of(gen)
        n = gen.dim

        c = raw.get("control", {"kind": "identity"})
        ckind = c.get("kind", "identity")
        if ckind == ControlKind.IDENTITY.value:
            bmap = ControlMap.identity(n)
            doc["control"] = {"kind": "identity"}
        else:
            mat = self._guard("control", "matrix", lambda: _matrix(self._get("control", c, "matrix", required=True), "matrix"))
            bmap = self._guard("control", "kind", lambda: ControlMap(ckind, mat))
            doc["control"] = {"kind": bmap.kind.value, "matrix": mat}

        nl = dict(raw.get("nonlinearity", {"kind": "zero"}))
        nkind = nl.pop("kind", "zero")
        h = self._guard("nonlinearity", None, lambda: Nonlinearity(
            nkind, nl, eta=eta, span=max(part.segment_length(r) for r in range(part.m + 1)),
            space=space))
        doc["nonlinearity"] = {"kind": h.kind.value, **h.params}

        maps_raw = raw.get("impulses", {}).get("maps", [])
        maps = []
        mdoc = []
        for i, entry in enumerate(maps_raw):
            if not isinstance(entry, dict):
                raise self.fail(f"impulse map {i + 1} must be a table", "impulses", "maps")
            unknown = set(entry) - _IMPULSE_KEYS
            if unknown:
                key = sorted(unknown)[0]
                raise self.fail(f"unknown key {key!r} in impulse map {i + 1}", "impulses", key)
            entry = dict(entry)
            kind = entry.pop("kind", "zero")
            b = entry.pop("b", None)
            cc = entry.pop("c", None)
            f = self._guard("impulses", "maps", lambda: ImpulseMap(kind, entry, b, cc))
            maps.append(f)
            mdoc.append({"kind": f.kind.value, **f.params, "b": f.b, "c": f.c})
        imp = self._guard("impulses", "maps", lambda: ImpulseSpec(tuple(maps), space))
        doc["impulses"] = {"maps": mdoc}

        z0 = self._guard("initial", "z0", lambda: _floats(self._get("initial", raw["initial"], "z0", required=True), "z0"))
        doc["initial"] = {"z0": z0}
        return self._guard("order", None, lambda: SystemSpec(eta, q, part, gen, bmap, h, imp, z0))

    def _generator(self, g: dict) -> tuple[Generator, dict]:
        kind = g.get("kind")
        declared = g.get("M")
        extra = {} if declared is None else {"M": float(declared)}
        if kind == "heat":
            modes = int(self._get("generator", g, "modes", required=True))
            points = int(g.get("points", 257))
            gen = Generator.heat(modes, points, **extra)
            return gen, {"kind": "heat", "modes": modes, "points": points, "M": float(gen.M)}
        if kind == GeneratorKind.SPECTRAL.value:
            lam = _floats(self._get("generator", g, "eigenvalues", required=True), "eigenvalues")
            gen = Generator.spectral(lam, **extra)
            return gen, {"kind": kind, "eigenvalues": lam, "M": float(gen.M)}
        if kind == GeneratorKind.DENSE.value:
            mat = _matrix(self._get("generator", g, "matrix", required=True), "matrix")
            gen = Generator.dense(mat, **extra)
            return gen, {"kind": kind, "matrix": mat, "M": float(gen.M)}
        raise ValueError(f"unknown generator kind {kind!r}")

    def _solver(self, s: dict, doc: dict) -> SolverConfig:
        kwargs = {}
        for key, name, conv in (("mesh", "mesh_per_interval", int), ("grading", "grading", float),
                                ("tol", "fp_tolerance", float),
                                ("max_iters", "max_picard_iters", int),
                                ("window_points", "window_points", int),
                                ("history_points", "history_points", int)):
            if key in s:
                kwargs[name] = self._guard("solver", key, lambda: conv(s[key]))
        cfg = self._guard("solver", None, lambda: SolverConfig(**kwargs))
        sdoc = {"mesh": cfg.mesh_per_interval, "tol": cfg.fp_tolerance,
                "max_iters": cfg.max_picard_iters, "window_points": cfg.window_points,
                "history_points": cfg.history_points}
        if cfg.grading is not None:
            sdoc["grading"] = cfg.grading
        doc["solver"] = sdoc
        return cfg

    def _steering(self, s: dict | None, spec: SystemSpec, doc: dict) -> dict | None:
        if s is None:
            return None
        target = self._guard("steering", "target", lambda: _floats(self._get("steering", s, "target", required=True), "target"))
        eps = self._guard("steering", "epsilon", lambda: float(self._get("steering", s, "epsilon", required=True)))
        iters = self._guard("steering", "max_iters", lambda: int(s.get("max_iters", 50)))
        if len(target) != spec.dim:
            raise self.fail(f"target has dimension {len(target)}, state is {spec.dim}", "steering", "target")
        if not eps > 0.0 or iters < 1:
            raise self.fail("epsilon must be positive and max_iters at least 1", "steering")
        out = {"target": target, "epsilon": eps, "max_iters": iters}
        doc["steering"] = dict(out)
        return out


def load_config(path) -> LoadedConfig:
    """Load and validate a configuration file.

    :raises ConfigError: with a ``path:line:`` prefix when the problem can
        be located.
    """
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from exc
    return _Loader(text, path).run()


def dump_config(document: dict) -> str:
    """Serialize a normalized document."""
    return tomli_w.dumps(document)


# }}}


# {{{ CSV


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def write_trajectory_csv(z: Trajectory, stream) -> None:
    """One row per node: time, segment index, branch, components and the
    weighted norm."""
    n = z.dim
    stream.write(",".join(["t", "interval_index", "branch"]
                          + [f"comp_{i}" for i in range(n)] + ["weighted_norm"]) + "\n")
    for t, r, branch, vals, nz in z.rows():
        stream.write(",".join([_num(t), str(r), branch] + [_num(v) for v in vals]
                              + [_num(nz)]) + "\n")


def write_control_csv(u: SampledFunction, stream) -> None:
    stream.write(",".join(["t"] + [f"u_{i}" for i in range(u.dim)]) + "\n")
    for t, vals in zip(u.nodes, u.values):
        stream.write(",".join([_num(t)] + [_num(v) for v in vals]) + "\n")


def read_control_csv(path, control_dim: int) -> SampledFunction:
    """Read a control written by :func:`write_control_csv`."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from exc
    expected = ["t"] + [f"u_{i}" for i in range(control_dim)]
    if not lines or lines[0].split(",") != expected:
        raise ConfigError(f"{path}:1: control header must be {','.join(expected)}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != control_dim + 1:
            raise ConfigError(f"{path}:{i}: expected {control_dim + 1} fields")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ConfigError(f"{path}:{i}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: control file has no samples")
    data = np.array(rows)
    try:
        return SampledFunction(0.0, data[:, 0], data[:, 1:])
    except (ValueError, FracImpError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_run_csv(rows, stream) -> None:
    stream.write("r,n,e_n,ratio\n")
    for r, n, e, rho in rows:
        stream.write(f"{r},{n},{_num(e)},{_num(rho)}\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def _write_json(document: dict, path) -> None:
    text = json.dumps(_jsonable(document), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# }}}


# {{{ commands


def cmd_check(config, out=None) -> int:
    """Evaluate every hypothesis and write the report document."""
    cfg = load_config(config)
    report = check_all(cfg.spec, cfg=cfg.solver)
    _write_json(report.to_document(), out)
    return EXIT_OK if report.all_pass else EXIT_FAIL


def _solve_report(spec: SystemSpec, z: Trajectory, rep) -> dict:
    return {
        "iterations": rep.iterations,
        "residuals": list(rep.residual_history),
        "contraction_estimate": rep.contraction_estimate,
        "converged": rep.converged,
        "pc_norm": pc_norm(z),
        "initial_defect": verify_initial_condition(spec, z),
        "terminal": list(z.terminal()),
    }


def cmd_solve(config, out=None, control=None, force: bool = False) -> int:
    """Solve with the zero control or the control read from ``control`` and
    write the trajectory CSV and its ``.report.json`` sidecar."""
    cfg = load_config(config)
    spec = cfg.spec
    u = None if control is None else read_control_csv(control, spec.B.control_dim)
    status = EXIT_OK
    try:
        z, rep = solve(spec, u, cfg.solver, force=force)
    except HypothesisViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        z, rep = exc.payload
        status = EXIT_NONCONVERGENCE
    stream, close = _open_out(out)
    try:
        write_trajectory_csv(z, stream)
    finally:
        if close:
            stream.close()
    doc = _solve_report(spec, z, rep)
    if out is None:
        sys.stderr.write(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    else:
        _write_json(doc, f"{out}.report.json")
    return status


def cmd_steer(config, out=None, force: bool = False) -> int:
    """Steer to the ``[steering]`` target and write ``control.csv``,
    ``trajectory.csv``, ``control-run.csv`` and ``report.json`` into the
    directory ``out``."""
    cfg = load_config(config)
    if cfg.steering is None:
        raise ConfigError(f"{cfg.path}: steering needs a [steering] section")
    spec = cfg.spec
    outdir = Path("fracimp-steer" if out is None else out)
    outdir.mkdir(parents=True, exist_ok=True)
    problem = SteeringProblem(spec, cfg.steering["target"], cfg.steering["epsilon"],
                              cfg.steering["max_iters"], cfg=cfg.solver, force=force)
    try:
        u, run, z = steer(problem)
    except HypothesisViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        run = exc.payload
        with open(outdir / "control-run.csv", "w", encoding="utf-8", newline="") as f:
            write_run_csv(run.rows(), f)
        _write_json({"converged": False, "last_error": exc.last_error, "ratio": exc.ratio,
                     "decay_ratio": run.decay_ratio()}, outdir / "report.json")
        return EXIT_NONCONVERGENCE

    final = float(np.linalg.norm(z.terminal() - problem.target))
    with open(outdir / "control.csv", "w", encoding="utf-8", newline="") as f:
        write_control_csv(u, f)
    with open(outdir / "trajectory.csv", "w", encoding="utf-8", newline="") as f:
        write_trajectory_csv(z, f)
    with open(outdir / "control-run.csv", "w", encoding="utf-8", newline="") as f:
        write_run_csv(run.rows(), f)
    _write_json({"converged": final <= problem.epsilon, "final_error": final,
                 "epsilon": problem.epsilon, "decay_ratio": run.decay_ratio(),
                 "iterations": [r.iterations for r in run.intervals],
                 "terminal": list(z.terminal())}, outdir / "report.json")
    return EXIT_OK if final <= problem.epsilon else EXIT_NONCONVERGENCE


# }}}


# {{{ entry point


_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = os.environ.get("FRACIMP_LOG", "quiet").strip().lower() or "quiet"
    if level not in _LEVELS:
        raise ConfigError(f"FRACIMP_LOG must be one of {', '.join(_LEVELS)}: got {level!r}")
    root = logging.getLogger("fracimp")
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(_LEVELS[level])
    root.propagate = False


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracimp",
        description="Simulate, check and steer impulsive fractional evolution systems.")
    parser.add_argument("command", choices=("check", "solve", "steer"))
    parser.add_argument("config", help="configuration file (TOML)")
    parser.add_argument("--out", help="output file (check, solve) or directory (steer)")
    parser.add_argument("--control", help="control CSV for solve (default: zero control)")
    parser.add_argument("--force", action="store_true",
                        help="run even when a required hypothesis fails")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _configure_logging()
        if args.command == "check":
            return cmd_check(args.config, args.out)
        if args.command == "solve":
            return cmd_solve(args.config, args.out, args.control, args.force)
        return cmd_steer(args.config, args.out, args.force)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD


# }}}

# vim: foldmethod=marker
