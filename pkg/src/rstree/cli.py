"""Command-line entry point: ``rstree <command> [options]``.

Every command accepts ``--config FILE`` (JSON) and flat flags; flags win.
Outputs land in ``--out``, else the ``output_dir`` config key, else
``$RSTREE_OUTPUT_DIR``, else ``./rstree-out``, next to a ``manifest.json``.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import evaluate_curve
from .forest import (GreedySpec, build_dsf, build_greedy, build_rst, build_voronoi_internal,
                     build_voronoi_local, sample_cluster_scene)
from .paths import directed_path, estimate_path_constants, radial_path
from .pointprocess import ConfigError, SamplerConfig, sample
from .rng import derive_seed
from .statistics import Estimator, sandwich_holds, shape_statistic
from .validation import SUITES, format_table, reports_to_json, run_validation_suite

ENV_OUTPUT = "RSTREE_OUTPUT_DIR"
COMMANDS = ("sample", "build", "curve", "paths", "estimate", "shape", "validate")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

# key -> (type, default); nested dicts are sections
SCHEMA: dict = {
    "command": (str, None),
    "seed": (int, 0),
    "replicates": (int, 1),
    "workers": (int, 1),
    "output_dir": (str, None),
    "sampler": {
        "kind": (str, "palm_poisson_disk"),
        "intensity": (float, 1.0),
        "window_radius": (float, 10.0),
        "guard_margin": (float, 0.2),
        "count": (int, None),
    },
    "forest": {
        "kind": (str, "rst"),
        "norm": (str, "l2"),
        "direction": (list, [-1.0, 0.0]),
        "level": (str, "radial_l2"),
        "cost": (str, "euclidean"),
        "head_intensity": (float, 1.0),
        "node_intensity": (float, 10.0),
    },
    "curve": {
        "name": (str, None),
        "params": (dict, {}),
        "min": (float, 0.0),
        "max": (float, 1.0),
        "n": (int, 101),
    },
    "path": {
        "start": (float, 20.0),
        "max_hops": (int, 1000),
    },
    "estimate": {
        "transitions": (int, 20_000),
        "alphas": (list, [1.0]),
    },
    "shape": {
        "k": (int, 80),
        "p": (float, None),
        "eps": (float, 0.3),
    },
    "suite": {
        "name": (str, None),
        "checks": (dict, None),
    },
}


def _defaults(schema: dict) -> dict:
    return {k: (_defaults(v) if isinstance(v, dict) else copy.deepcopy(v[1])) for k, v in schema.items()}


def _coerce(value, typ, path):
    if value is None:
        return None
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, typ):
        raise ConfigError(f"{path}: expected {typ.__name__}, got {type(value).__name__}")
    return value


def _merge(base: dict, update: dict, schema: dict, prefix: str = "") -> dict:
    for k, v in update.items():
        path = f"{prefix}{k}"
        if k not in schema:
            raise ConfigError(f"{path}: unknown key")
        if isinstance(schema[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path}: expected an object")
            _merge(base[k], v, schema[k], path + ".")
        else:
            base[k] = _coerce(v, schema[k][0], path)
    return base


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    replicates: int = 1
    workers: int = 1
    output_dir: str | None = None
    sampler: dict = field(default_factory=dict)
    forest: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)
    path: dict = field(default_factory=dict)
    estimate: dict = field(default_factory=dict)
    shape: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(seed=self.seed, **self.sampler)

    def to_dict(self) -> dict:
        return asdict(self)


def parse_config(text: str | dict, overrides: dict | None = None) -> RunConfig:
    """Strict parse of a JSON config; ``overrides`` (same shape) take precedence.

    Raises :class:`ConfigError` naming the offending field.
    """
    if isinstance(text, str):
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
    else:
        data = text
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    cfg = _merge(_defaults(SCHEMA), data, SCHEMA)
    if overrides:
        _merge(cfg, overrides, SCHEMA)
    if cfg["command"] is None:
        raise ConfigError("command: required")
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command: unknown {cfg['command']!r}; choose from {COMMANDS}")
    for key in ("replicates", "workers"):
        if cfg[key] < 1:
            raise ConfigError(f"{key}: must be >= 1")
    if cfg["command"] in ("sample", "build", "paths", "shape"):
        try:
            SamplerConfig(seed=cfg["seed"], **cfg["sampler"])
        except ConfigError as e:
            raise ConfigError(f"sampler.{e}") from None
    if cfg["command"] == "curve" and not cfg["curve"]["name"]:
        raise ConfigError("curve.name: required for the curve command")
    if cfg["command"] == "curve" and cfg["curve"]["n"] < 2:
        raise ConfigError("curve.n: must be >= 2")
    return RunConfig(**cfg)


# -------------------------------------------------------------- commands


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _pool_map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _sample_one(args):
    cfg, rid = args
    return sample(cfg.sampler_config(), rid).to_csv()


def _build_one(args):
    cfg, rid = args
    fk = cfg.forest
    kind = fk["kind"]
    if kind in ("voronoi_local", "voronoi_internal"):
        scene = sample_cluster_scene(fk["head_intensity"], fk["node_intensity"], cfg.sampler["window_radius"],
                                     seed=cfg.seed, replicate_id=rid)
        f = build_voronoi_local(scene) if kind == "voronoi_local" else build_voronoi_internal(scene)
        return f.points.to_csv(), f.to_csv()
    ps = sample(cfg.sampler_config(), rid)
    if kind == "rst":
        f = build_rst(ps, fk["norm"])
    elif kind == "dsf":
        f = build_dsf(ps, tuple(fk["direction"]))
    elif kind == "greedy":
        spec = GreedySpec(fk["level"], fk["cost"],
                          tuple(fk["direction"]) if fk["level"] == "coordinate_along" else None)
        f = build_greedy(ps, spec)
    else:
        raise ConfigError(f"forest.kind: unknown {kind!r}")
    return ps.to_csv(), f.to_csv()


def _paths_one(args):
    cfg, rid = args
    x = cfg.path["start"]
    ps = sample(cfg.sampler_config(), rid).with_point((x, 0.0))
    if cfg.forest["kind"] == "dsf":
        t = directed_path(build_dsf(ps, tuple(cfg.forest["direction"])), len(ps) - 1, cfg.path["max_hops"])
    else:
        t = radial_path(build_rst(ps), len(ps) - 1)
    return t.to_csv()


def _shape_one(args):
    cfg, rid, p = args
    f = build_rst(sample(cfg.sampler_config(), rid))
    k, eps = cfg.shape["k"], cfg.shape["eps"]
    return shape_statistic(f, k, p, eps), sandwich_holds(f, k, p, eps)


def run(cfg: RunConfig, out_dir: Path | None = None, stdout=None) -> tuple[dict, int]:
    """Execute ``cfg``; returns ``(manifest, exit_code)``."""
    stdout = stdout or sys.stdout
    out = Path(out_dir or cfg.output_dir or os.environ.get(ENV_OUTPUT) or "rstree-out")
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    seeds = {"seed": cfg.seed}
    code = EXIT_OK
    reps = list(range(cfg.replicates))

    def emit(name: str, text: str) -> None:
        p = out / name
        p.write_text(text)
        written.append(p)

    if cfg.command == "sample":
        for rid, text in zip(reps, _pool_map(_sample_one, [(cfg, r) for r in reps], cfg.workers)):
            emit(f"points_{rid:04d}.csv", text)
    elif cfg.command == "build":
        for rid, (pts, forest) in zip(reps, _pool_map(_build_one, [(cfg, r) for r in reps], cfg.workers)):
            emit(f"points_{rid:04d}.csv", pts)
            emit(f"forest_{rid:04d}.csv", forest)
    elif cfg.command == "curve":
        c = cfg.curve
        grid = np.linspace(c["min"], c["max"], c["n"])
        try:
            curve = evaluate_curve(c["name"], grid, **c["params"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"curve: {e}") from None
        csv_path, side = curve.write(out / f"{c['name']}.csv")
        written += [csv_path, side]
    elif cfg.command == "paths":
        for rid, text in zip(reps, _pool_map(_paths_one, [(cfg, r) for r in reps], cfg.workers)):
            emit(f"path_{rid:04d}.csv", text)
    elif cfg.command == "estimate":
        e = cfg.estimate
        pc = estimate_path_constants(e["transitions"], cfg.seed, tuple(float(a) for a in e["alphas"]))
        emit("constants.json", pc.to_json() + "\n")
        print(pc.to_json(), file=stdout)
    elif cfg.command == "shape":
        p = cfg.shape["p"]
        if p is None:
            seeds["p_seed"] = derive_seed(cfg.seed, "p")
            p = estimate_path_constants(20_000, seeds["p_seed"]).p
        res = _pool_map(_shape_one, [(cfg, r, p) for r in reps], cfg.workers)
        g = Estimator.of([r[0] for r in res])
        body = {"k": cfg.shape["k"], "p": p, "eps": cfg.shape["eps"], "replicates": len(res),
                "shape_mean": g.mean, "shape_se": g.se if len(res) > 1 else None,
                "reference": float(np.pi * p * p), "sandwich_fraction": sum(r[1] for r in res) / len(res)}
        emit("shape.json", json.dumps(body, indent=2, sort_keys=True) + "\n")
        print(json.dumps(body, indent=2, sort_keys=True), file=stdout)
    elif cfg.command == "validate":
        s = cfg.suite
        checks = s["checks"] if s["checks"] is not None else (s["name"] or "core")
        reports = run_validation_suite(checks, seed=cfg.seed, workers=cfg.workers)
        emit("report.json", reports_to_json(reports))
        print(format_table(reports), file=stdout)
        if not all(r.passed for r in reports):
            code = EXIT_FAIL
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": {p.name: _sha256(p) for p in written},
        "seeds": seeds,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, code


# ------------------------------------------------------------------ argv


def _direction(text: str) -> list[float]:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"direction must be 'dx,dy', got {text!r}") from None
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"direction must be 'dx,dy', got {text!r}")
    return parts


def _param(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    k, v = text.split("=", 1)
    return k, float(v)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="rstree", description="Radial spanning trees on Poisson samples.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", dest="seed", type=int, default=S)
        p.add_argument("--workers", dest="workers", type=int, default=S)

    def sampler(p):
        p.add_argument("--replicates", dest="replicates", type=int, default=S)
        p.add_argument("--sampler", dest="sampler.kind", default=S,
                       choices=["palm_poisson_disk", "binomial_disk", "radial_chain"])
        p.add_argument("--intensity", dest="sampler.intensity", type=float, default=S)
        p.add_argument("--window-radius", dest="sampler.window_radius", type=float, default=S)
        p.add_argument("--guard-margin", dest="sampler.guard_margin", type=float, default=S)
        p.add_argument("--count", dest="sampler.count", type=int, default=S)

    p = sub.add_parser("sample", help="draw point sets")
    common(p)
    sampler(p)

    p = sub.add_parser("build", help="build forests")
    common(p)
    sampler(p)
    p.add_argument("--kind", dest="forest.kind", default=S,
                   choices=["rst", "dsf", "greedy", "voronoi_local", "voronoi_internal"])
    p.add_argument("--norm", dest="forest.norm", default=S, choices=["l2", "linf"])
    p.add_argument("--direction", dest="forest.direction", type=_direction, default=S)
    p.add_argument("--level", dest="forest.level", default=S)
    p.add_argument("--cost", dest="forest.cost", default=S)
    p.add_argument("--head-intensity", dest="forest.head_intensity", type=float, default=S)
    p.add_argument("--node-intensity", dest="forest.node_intensity", type=float, default=S)

    p = sub.add_parser("curve", help="evaluate an analytic curve")
    common(p)
    p.add_argument("--name", dest="curve.name", default=S)
    p.add_argument("--rmin", dest="curve.min", type=float, default=S)
    p.add_argument("--rmax", dest="curve.max", type=float, default=S)
    p.add_argument("--n", dest="curve.n", type=int, default=S)
    p.add_argument("--x", dest="x", type=float, default=S, help="shorthand for --param x=VALUE")
    p.add_argument("--param", dest="params", type=_param, action="append", default=S)

    p = sub.add_parser("paths", help="export ancestor paths")
    common(p)
    sampler(p)
    p.add_argument("--kind", dest="forest.kind", default=S, choices=["rst", "dsf"])
    p.add_argument("--direction", dest="forest.direction", type=_direction, default=S)
    p.add_argument("--start", dest="path.start", type=float, default=S)
    p.add_argument("--max-hops", dest="path.max_hops", type=int, default=S)

    p = sub.add_parser("estimate", help="long-run directed path constants")
    common(p)
    p.add_argument("--transitions", dest="estimate.transitions", type=int, default=S)
    p.add_argument("--alpha", dest="estimate.alphas", type=float, action="append", default=S)

    p = sub.add_parser("shape", help="generation-set shape statistic")
    common(p)
    sampler(p)
    p.add_argument("--k", dest="shape.k", type=int, default=S)
    p.add_argument("--p", dest="shape.p", type=float, default=S)
    p.add_argument("--eps", dest="shape.eps", type=float, default=S)

    p = sub.add_parser("validate", help="run validation checks")
    common(p)
    p.add_argument("--suite", dest="suite.name", default=S, choices=sorted(SUITES))
    p.add_argument("--checks", dest="checks", default=S, help="comma-separated check names")
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    out: dict = {"command": ns.command}
    params = {}
    for key, val in vars(ns).items():
        if key in ("command", "config", "out"):
            continue
        if key == "x":
            params["x"] = val
            continue
        if key == "params":
            params.update(dict(val))
            continue
        if key == "checks":
            out.setdefault("suite", {})["checks"] = {c.strip(): {} for c in val.split(",") if c.strip()}
            continue
        node = out
        *head, last = key.split(".")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = val
    if params:
        out.setdefault("curve", {})["params"] = params
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        text = Path(ns.config).read_text() if ns.config else "{}"
        base = json.loads(text) if text.strip() else {}
        if isinstance(base, dict) and "command" in base and base["command"] != ns.command:
            raise ConfigError(f"command: config says {base['command']!r} but {ns.command!r} was invoked")
        cfg = parse_config(text, _overrides(ns))
    except (ConfigError, json.JSONDecodeError, OSError) as e:
        print(f"rstree: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _, code = run(cfg, Path(ns.out) if ns.out else None)
    except ConfigError as e:
        print(f"rstree: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"rstree: runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
