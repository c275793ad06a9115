"""Command-line front end: ``kreinspec run <config>`` and ``kreinspec verify <config>``.

Configs are JSON documents. A run config looks like::

    {
      "model": "toy4",
      "params": {"base": "triple_root", "epsilon": 1, "delta": 1, "z": 0.99},
      "sweep": {"parameter": "t", "range": [-0.2, 0.2], "steps": 401},
      "secondary": {"parameter": "z", "range": [0.99, 1.01]},
      "tolerances": {"precision": 1e-10},
      "tracking": {"keep": null, "select": "all"},
      "output": {"dir": "out", "branches": "branches.csv", "report": "ep_report.json"}
    }

``secondary`` is optional and triggers a triple-point search. A verify
config names a suite: ``{"suite": "box-exact", "params": {"b": 2.0}}``.

Exit codes: 0 success, 2 invalid config, 3 solver failure, 4 ambiguous
bracket or ambiguous EP pairing.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, branch_tracker, dynamo, squire, suites, toy_model
from .errors import (
    AmbiguityError,
    AmbiguousBracketError,
    ConfigError,
    InvalidInputError,
    KreinSpecError,
)

__all__ = ["RunConfig", "ModelSpec", "build_model", "run", "verify", "main", "format_number", "THREADS_ENV"]

THREADS_ENV = "KREINSPEC_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_AMBIGUOUS = 0, 2, 3, 4
BRANCH_COLUMNS = ["param", "branch_id", "re", "im", "is_real"]

DEFAULT_TOLERANCES = {"precision": 1e-10, "reality_tol": 1e-8, "jump_factor": 10.0, "triple_precision": 1e-8}
DEFAULT_TRACKING = {"keep": None, "select": "all"}
DEFAULT_OUTPUT = {"dir": ".", "branches": "branches.csv", "report": "ep_report.json"}


# ---------------------------------------------------------------------------
# models


@dataclass
class ModelSpec:
    """Matrix family built from a config: ``matrix({name: value, ...})``."""

    name: str
    parameters: tuple[str, ...]
    matrix: Callable[[dict], np.ndarray]
    descriptor: str

    def family(self, parameter: str) -> branch_tracker.Family:
        return lambda p: self.matrix({parameter: p})

    def family2(self, primary: str, secondary: str) -> branch_tracker.Family2:
        return lambda p, s: self.matrix({primary: p, secondary: s})


def _two_by_two(params: dict) -> ModelSpec:
    w = params.get("w", 0.0)
    w = complex(*w) if isinstance(w, (list, tuple)) else complex(w)
    base = {"x": float(params.get("x", 0.0)), "y": float(params.get("y", 1.0)), "w": w}

    def matrix(over):
        vals = {**base, **over}
        return toy_model.two_by_two_matrix(toy_model.TwoByTwoParams(vals["x"], vals["y"], vals["w"]))

    return ModelSpec("two_by_two", ("x", "y", "w"), matrix, "2x2 pseudo-Hermitian [[x+y, w], [-w*, x-y]]")


def _toy4(params: dict) -> ModelSpec:
    names = tuple(f.name for f in fields(toy_model.ToyParams))
    base = params.get("base", "triple_root")
    if base == "triple_root":
        sol = toy_model.triple_root_params(int(params.get("epsilon", 1)), int(params.get("delta", 1)))
        t0 = float(params.get("t", 0.0))
        fixed = {k: float(params[k]) for k in names if k in params}

        def matrix(over):
            vals = {"t": t0, **fixed, **over}
            p = toy_model.blowup_path(sol, vals["t"], z=vals.get("z"))
            extra = {k: vals[k] for k in names if k in vals and k != "z"}
            return toy_model.assemble_h4(p.with_(**extra) if extra else p)

        desc = f"4x4 toy, blow-up path through triple root (epsilon={sol.epsilon:+d}, delta={sol.delta:+d})"
        return ModelSpec("toy4", ("t",) + names, matrix, desc)
    if base == "explicit":
        fixed = toy_model.ToyParams(**{k: float(params.get(k, 0.0)) for k in names})

        def matrix(over):
            return toy_model.assemble_h4(fixed.with_(**{k: float(v) for k, v in over.items()}))

        return ModelSpec("toy4", names, matrix, "4x4 toy, explicit parameters")
    raise ConfigError(f"toy4 base must be 'triple_root' or 'explicit', got {base!r}")


def _dynamo(params: dict) -> ModelSpec:
    prof = dynamo.AlphaProfile(C=float(params.get("C", 1.0)), zeta=float(params.get("zeta", 0.0)),
                               constant=params.get("constant"))
    cfg = dynamo.DynamoConfig(l=int(params.get("l", 1)), N=int(params.get("N", 200)),
                              bc_kind=params.get("bc_kind", "realistic"), profile=prof)
    families = {k: dynamo.dynamo_family(cfg, k) for k in ("zeta", "C")}

    def matrix(over):
        if not over:
            return dynamo.assemble_dynamo(cfg).matrix
        if len(over) == 1:
            (k, v), = over.items()
            return families[k](v)
        prof2 = dynamo.AlphaProfile(C=float(over.get("C", prof.C)), zeta=float(over.get("zeta", prof.zeta)),
                                    constant=prof.constant)
        return dynamo.assemble_dynamo(dynamo.DynamoConfig(cfg.l, cfg.N, cfg.bc_kind, prof2)).matrix

    op = dynamo.assemble_dynamo(cfg)
    return ModelSpec("dynamo", ("zeta", "C"), matrix, f"alpha^2 dynamo, {op.meta}")


def _squire(params: dict) -> ModelSpec:
    cfg = squire.SquireConfig(g=float(params.get("g", 1.0)), nu=float(params.get("nu", 0.0)),
                              b=float(params.get("b", 1.0)), N=int(params.get("N", 64)),
                              elements=int(params.get("elements", 2)))

    def matrix(over):
        c = squire.SquireConfig(**{**cfg.__dict__, **{k: float(v) for k, v in over.items()}})
        return squire.pt_real_form(squire.assemble_squire(c).matrix)

    return ModelSpec("squire", ("b", "nu", "g"), matrix,
                     f"extended Squire equation, Chebyshev N={cfg.N}, PT real form")


MODELS = {"two_by_two": _two_by_two, "toy4": _toy4, "dynamo": _dynamo, "squire": _squire}


def build_model(name: str, params: dict) -> ModelSpec:
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    return MODELS[name](params)


# ---------------------------------------------------------------------------
# config


def _range(spec: dict, where: str) -> list[float]:
    r = spec.get("range")
    if not isinstance(r, (list, tuple)) or len(r) != 2:
        raise ConfigError(f"{where}.range must be a two-element list")
    lo, hi = float(r[0]), float(r[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo == hi:
        raise ConfigError(f"{where}.range must be finite and nonempty, got {r}")
    return [lo, hi]


@dataclass
class RunConfig:
    model: str
    params: dict
    sweep: dict
    secondary: dict | None
    tolerances: dict
    tracking: dict
    output: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - {"model", "params", "sweep", "secondary", "tolerances", "tracking", "output"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in raw or "sweep" not in raw:
            raise ConfigError("config needs 'model' and 'sweep'")
        sweep = dict(raw["sweep"])
        sweep["range"] = _range(sweep, "sweep")
        if sweep["range"][0] > sweep["range"][1]:
            raise ConfigError("sweep.range must be increasing")
        sweep["steps"] = int(sweep.get("steps", 201))
        if sweep["steps"] < 2:
            raise ConfigError("sweep.steps must be at least 2")
        secondary = raw.get("secondary")
        if secondary is not None:
            secondary = dict(secondary)
            secondary["range"] = _range(secondary, "secondary")
            secondary.setdefault("march", 8)
        tol = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
        if set(tol) != set(DEFAULT_TOLERANCES):
            raise ConfigError(f"unknown tolerance keys: {sorted(set(tol) - set(DEFAULT_TOLERANCES))}")
        cfg = cls(
            model=raw["model"],
            params=dict(raw.get("params", {})),
            sweep=sweep,
            secondary=secondary,
            tolerances=tol,
            tracking={**DEFAULT_TRACKING, **raw.get("tracking", {})},
            output={**DEFAULT_OUTPUT, **raw.get("output", {})},
        )
        spec = build_model(cfg.model, cfg.params)
        for where, s in (("sweep", cfg.sweep), ("secondary", cfg.secondary)):
            if s is not None and s.get("parameter") not in spec.parameters:
                raise ConfigError(f"{where}.parameter {s.get('parameter')!r} is not a parameter of "
                                  f"{cfg.model} ({', '.join(spec.parameters)})")
        return cfg

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "params": self.params,
            "sweep": self.sweep,
            "tolerances": self.tolerances,
            "tracking": self.tracking,
            "output": self.output,
        }
        if self.secondary is not None:
            out["secondary"] = self.secondary
        return copy.deepcopy(out)

    def settings(self) -> branch_tracker.TrackerSettings:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
        return branch_tracker.TrackerSettings(
            reality_tol=float(self.tolerances["reality_tol"]),
            jump_factor=float(self.tolerances["jump_factor"]),
            keep=self.tracking["keep"],
            select=self.tracking["select"],
            workers=max(1, workers),
        )


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# output


def format_number(x: float) -> str:
    """12 significant digits, no negative zero."""
    s = f"{float(x):.12g}"
    return "0" if s == "-0" else s


def write_branches(path: Path, branches: list[branch_tracker.SpectralBranch]) -> None:
    params = branches[0].params
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BRANCH_COLUMNS)
        for k, p in enumerate(params):
            for b in branches:
                v = b.values[k]
                w.writerow([format_number(p), b.branch_id, format_number(v.real), format_number(v.imag),
                            int(b.reality_flags[k])])


def run(cfg: RunConfig) -> dict:
    """Sweep, locate EPs and optionally search for a triple point; write both outputs."""
    spec = build_model(cfg.model, cfg.params)
    settings = cfg.settings()
    pname = cfg.sweep["parameter"]
    family = spec.family(pname)
    branches = branch_tracker.sweep(family, cfg.sweep["range"], cfg.sweep["steps"], settings)
    eps = branch_tracker.find_eps(branches, family, float(cfg.tolerances["precision"]), settings)

    report = {
        "tool": "kreinspec",
        "version": __version__,
        "model": {"name": spec.name, "descriptor": spec.descriptor,
                  "dimension": int(spec.matrix({}).shape[0])},
        "config": cfg.to_dict(),
        "exceptional_points": [e.to_dict() for e in eps],
    }
    if cfg.secondary is not None:
        cand = branch_tracker.find_triple_point(
            spec.family2(pname, cfg.secondary["parameter"]),
            cfg.sweep["range"], cfg.secondary["range"],
            precision=float(cfg.tolerances["triple_precision"]),
            steps=cfg.sweep["steps"], march=int(cfg.secondary["march"]), settings=settings,
        )
        report["triple_point"] = cand.to_dict()

    out = Path(cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_branches(out / cfg.output["branches"], branches)
    with open(out / cfg.output["report"], "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def verify(raw: dict, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    if not isinstance(raw, dict) or "suite" not in raw:
        raise ConfigError("verify config needs a 'suite' key")
    checks = suites.run_suite(raw["suite"], raw.get("params"))
    for c in checks:
        print(c.line(), file=stream)
    return EXIT_OK if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kreinspec", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="sweep a model and write branches CSV + EP report")
    r.add_argument("config")
    r.add_argument("--steps", type=int, help="override sweep.steps")
    r.add_argument("--precision", type=float, help="override tolerances.precision")
    r.add_argument("--out-dir", help="override output.dir")
    v = sub.add_parser("verify", help="run a built-in oracle suite")
    v.add_argument("config")
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (AmbiguousBracketError, AmbiguityError)):
        return EXIT_AMBIGUOUS
    # LinAlgError subclasses ValueError but is a solver failure
    if isinstance(exc, np.linalg.LinAlgError):
        return EXIT_SOLVER
    if isinstance(exc, (ConfigError, InvalidInputError, ValueError, TypeError, KeyError)):
        return EXIT_INVALID
    return EXIT_SOLVER


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        raw = load_json(args.config)
        if args.command == "verify":
            return verify(raw)
        if isinstance(raw, dict):
            if args.steps is not None:
                raw.setdefault("sweep", {})["steps"] = args.steps
            if args.precision is not None:
                raw.setdefault("tolerances", {})["precision"] = args.precision
            if args.out_dir is not None:
                raw.setdefault("output", {})["dir"] = args.out_dir
        run(RunConfig.from_dict(raw))
        return EXIT_OK
    except (KreinSpecError, ValueError, TypeError, KeyError, NotImplementedError, ArithmeticError, RuntimeError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"kreinspec: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
