"""Experiment configuration: loading (TOML or JSON), validation and object construction."""
import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import tomli

from .certify import SamplingPlan
from .errors import InvalidInputError
from .maps import map_from_spec, seeded_operator
from .spaces import DenseOperator, read_matrix, read_vector
from .sparse import SparseTriple

TASKS = ("certify", "solve", "recover", "triple")
ALGOS = ("left-inverse", "van-cittert", "localized")
TOP_KEYS = {"task", "seed", "map", "operator", "triple", "plan", "solver", "noise", "signal", "recover",
            "certify", "outputs", "data"}
RANDOM_DISTRIBUTIONS = ("gaussian", "orthogonal", "graded", "banded")
SEED_ENV = "NLFRAME_SEED"


def _bundled(path):
    """Resolve ``examples/<name>`` against the packaged example configs."""
    name = os.path.basename(path)
    ref = resources.files("nlframe") / "examples" / name
    return str(ref) if ref.is_file() else None


def load_config(source):
    """Parse a config file (``.toml`` or ``.json``) or pass a dict through.

    Returns ``(config_dict, base_dir)``; relative file references in the
    config are resolved against ``base_dir``.
    """
    if isinstance(source, dict):
        return copy.deepcopy(source), os.getcwd()
    path = str(source)
    if not os.path.exists(path):
        alt = _bundled(path) if path.startswith("examples") else None
        if alt is None:
            raise InvalidInputError(f"config file not found: {path}")
        path = alt
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        if path.endswith(".json"):
            cfg = json.loads(raw.decode())
        else:
            cfg = tomli.loads(raw.decode())
    except (tomli.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot parse {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InvalidInputError("config must be a table/object")
    return cfg, os.path.dirname(os.path.abspath(path))


def apply_seed_override(cfg, env=None):
    env = os.environ if env is None else env
    val = env.get(SEED_ENV)
    if val is not None and val.strip() != "":
        try:
            cfg["seed"] = int(val)
        except ValueError:
            raise InvalidInputError(f"{SEED_ENV} must be an integer, got {val!r}") from None
    return cfg


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: str
    task: str
    seed: int = None
    errors: list = field(default_factory=list)

    def path(self, p):
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def section(self, name):
        return dict(self.raw.get(name) or {})

    # -- builders -----------------------------------------------------------

    def operator(self):
        spec = self.raw.get("operator")
        if spec is None:
            return None
        if "file" in spec:
            return DenseOperator(read_matrix(self.path(spec["file"])))
        if "matrix" in spec:
            return DenseOperator(np.asarray(spec["matrix"], dtype=float))
        if "identity" in spec:
            return DenseOperator(np.eye(int(spec["identity"])))
        seed = spec.get("seed", self.seed)
        return seeded_operator(spec["shape"], seed, spec["distribution"])

    def map_and_operator(self):
        return map_from_spec(dict(self.raw["map"]), self.operator())

    def plan(self):
        d = self.section("plan")
        d.setdefault("seed", self.seed if self.seed is not None else 0)
        return SamplingPlan.from_dict(d)

    def triple(self):
        t = self.raw.get("triple")
        return SparseTriple.parse(t["spec"] if isinstance(t, dict) else t)

    def signal(self, n):
        s = self.raw.get("signal")
        if s is None:
            return None
        if "x" in s:
            x = np.asarray(s["x"], dtype=float)
        elif "file" in s:
            x = read_vector(self.path(s["file"]))
        else:
            k = int(s["sparse"])
            rng = np.random.default_rng([s.get("seed", self.seed), 21])
            x = np.zeros(n)
            idx = np.sort(rng.choice(n, size=k, replace=False))
            x[idx] = rng.standard_normal(k)
        if x.shape != (n,):
            raise InvalidInputError(f"signal has shape {x.shape}, expected ({n},)")
        return x

    def noise(self, m):
        s = self.section("noise")
        mag = float(s.get("magnitude", 0.0))
        if mag == 0.0:
            return np.zeros(m), mag, s.get("norm", "l2")
        rng = np.random.default_rng([s.get("seed", self.seed), 22])
        e = rng.standard_normal(m)
        norm = str(s.get("norm", "l2")).lower()
        scale = np.max(np.abs(e)) if norm in ("linf", "inf") else np.linalg.norm(e)
        return e * (mag / scale), mag, norm

    def data(self, m):
        d = self.raw.get("data")
        if d is None:
            return None
        return read_vector(self.path(d["file"] if isinstance(d, dict) else d))

    def outputs(self, out_dir=None):
        o = self.section("outputs")
        base = out_dir or self.path(o.get("dir", "."))
        names = {"report": "report.json", "trace": "trace.csv", "summary": "summary.md",
                 "manifest": "manifest.json"}
        out = {}
        for k, default in names.items():
            v = o.get(k, default)
            out[k] = None if v in (None, False, "") else (v if os.path.isabs(v) else os.path.join(base, v))
        return out


def _need(cfg, key, errs, where=""):
    if key not in cfg or cfg[key] is None:
        errs.append(f"{where}{key}: required field missing")
        return False
    return True


def validate(cfg, base_dir="."):
    """Check a config dict; raises InvalidInputError listing every problem found."""
    errs = []
    if not isinstance(cfg, dict):
        raise InvalidInputError("config must be a table/object")
    for k in sorted(set(cfg) - TOP_KEYS):
        errs.append(f"{k}: unknown field")
    task = cfg.get("task")
    if not _need(cfg, "task", errs):
        pass
    elif task not in TASKS:
        errs.append(f"task: must be one of {list(TASKS)}, got {task!r}")
    seed = cfg.get("seed")
    if seed is not None and not isinstance(seed, int):
        errs.append("seed: must be an integer")
    if task != "triple":
        if _need(cfg, "map", errs) and not (isinstance(cfg["map"], dict) and "kind" in cfg["map"]):
            errs.append("map.kind: required field missing")
    op = cfg.get("operator")
    if op is not None:
        if not isinstance(op, dict):
            errs.append("operator: must be a table")
        elif "file" in op:
            p = op["file"] if os.path.isabs(op["file"]) else os.path.join(base_dir, op["file"])
            if not os.path.exists(p):
                errs.append(f"operator.file: {op['file']} does not exist")
        elif not any(k in op for k in ("matrix", "identity")):
            if op.get("distribution") not in RANDOM_DISTRIBUTIONS:
                errs.append(f"operator.distribution: must be one of {list(RANDOM_DISTRIBUTIONS)}")
            if "shape" not in op:
                errs.append("operator.shape: required field missing")
            if op.get("seed", seed) is None:
                errs.append("operator.seed: required when the operator is random (or set a top-level seed)")
    elif task in ("solve", "recover") and isinstance(cfg.get("map"), dict) and \
            cfg["map"].get("kind") in ("linear", "perturbed_linear"):
        errs.append("operator: required for linear and perturbed_linear maps")
    if task in ("recover", "triple"):
        _need(cfg, "triple", errs)
    if task == "solve":
        if _need(cfg, "solver", errs):
            s = cfg["solver"]
            if s.get("algo") not in ALGOS:
                errs.append(f"solver.algo: must be one of {list(ALGOS)}")
            mu = s.get("mu", "auto")
            if mu != "auto" and not (isinstance(mu, (int, float)) and mu > 0):
                errs.append("solver.mu: must be a positive number or 'auto'")
    if task in ("solve", "recover"):
        if cfg.get("signal") is None and cfg.get("data") is None:
            errs.append("signal: required field missing (or give data)")
        sig = cfg.get("signal") or {}
        if "sparse" in sig and sig.get("seed", seed) is None:
            errs.append("signal.seed: required for a random signal (or set a top-level seed)")
        noise = cfg.get("noise") or {}
        if float(noise.get("magnitude", 0.0) or 0.0) > 0 and noise.get("seed", seed) is None:
            errs.append("noise.seed: required for random noise (or set a top-level seed)")
    if task == "recover":
        r = cfg.get("recover") or {}
        if "eps" not in r:
            errs.append("recover.eps: required field missing")
        if r.get("method", "enum") not in ("enum", "penalty"):
            errs.append("recover.method: must be 'enum' or 'penalty'")
    if cfg.get("plan") is not None:
        try:
            d = dict(cfg["plan"])
            d.setdefault("seed", 0)
            SamplingPlan.from_dict(d)
        except (InvalidInputError, TypeError) as exc:
            errs.append(f"plan: {exc}")
    if errs:
        raise InvalidInputError("invalid config:\n  " + "\n  ".join(errs))
    return ExperimentConfig(raw=cfg, base_dir=base_dir, task=task, seed=seed)
