"""Lab configuration: shipped JSON defaults, deep merge, validation.

A user config is a JSON object whose keys must already exist in the
defaults; it is merged over them recursively.  Leaf types follow the
defaults (ints are accepted where floats are expected).  Semantic checks run
at load time so that every experiment precondition fails before any work is
done.
"""

from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path

from .errors import ConfigError, LabError
from .phase_space import PhaseSpace

U64_MAX = 2 ** 64 - 1


def default_config() -> dict:
    text = resources.files("clonelab").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def _kind(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "str"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "dict"
    return "null" if value is None else type(value).__name__


def _compatible(default, value) -> bool:
    want, got = _kind(default), _kind(value)
    return want == got or (want == "float" and got == "int")


def merge(base: dict, override: dict, path: str = "", problems: list | None = None,
          free: tuple = ("selftest.overrides",)) -> dict:
    """Recursive merge of ``override`` into a copy of ``base``; collects key and type problems."""
    problems = [] if problems is None else problems
    if not isinstance(override, dict):
        problems.append(f"{path or '<root>'}: expected an object, got {_kind(override)}")
        return copy.deepcopy(base)
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            problems.append(f"{where}: unknown key")
        elif where in free:
            out[key] = copy.deepcopy(value)
        elif isinstance(base[key], dict):
            out[key] = merge(base[key], value, where, problems, free)
        elif not _compatible(base[key], value):
            problems.append(f"{where}: expected {_kind(base[key])}, got {_kind(value)}")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _space(cfg, where, problems):
    try:
        return PhaseSpace.from_dict(cfg)
    except (LabError, TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _positive(value, where, problems, allow_zero=False):
    ok = isinstance(value, (int, float)) and math.isfinite(value) and (value >= 0 if allow_zero else value > 0)
    if not ok:
        problems.append(f"{where}: must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")


def _point(values, space, where, problems):
    if space is None:
        return
    if len(values) != space.dim or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
        problems.append(f"{where}: need {space.dim} finite coordinates, got {values!r}")


def _seed(value, where, problems):
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= U64_MAX:
        problems.append(f"{where}: seeds are unsigned 64-bit integers, got {value!r}")


def _even_dims(dims, where, problems):
    if not dims:
        problems.append(f"{where}: need at least one dimension")
    for d in dims:
        if not isinstance(d, int) or d < 2 or d % 2:
            problems.append(f"{where}: Euclidean dimension must be even and >= 2, got {d!r}")


def _check_setup(sec, where, problems):
    system = _space(sec["system"], f"{where}.system", problems)
    machine = _space(sec["machine"], f"{where}.machine", problems)
    _point(sec["blank"], system, f"{where}.blank", problems)
    _point(sec["machine_point"], machine, f"{where}.machine_point", problems)
    return system, machine


def _check_search(sec, where, problems, euclidean: bool):
    system, _ = _check_setup(sec, where, problems)
    if system is not None and euclidean == system.has_angles:
        problems.append(f"{where}.system: {'a Euclidean' if euclidean else 'an angular'} system space is required")
    fam = sec["family"]
    if fam["kind"] not in ("quadratic", "fourier"):
        problems.append(f"{where}.family.kind: unknown family {fam['kind']!r}")
    for d in fam["durations"]:
        _positive(d, f"{where}.family.durations", problems)
    _positive(fam["h"], f"{where}.family.h", problems)
    for key in ("max_freq", "max_power", "max_total"):
        if not 0 <= fam[key] <= 6:
            problems.append(f"{where}.family.{key}: must lie in [0, 6]")
    budget = sec["budget"]
    if budget < 0 or 0 < budget < 100:
        problems.append(f"{where}.budget: must be 0 or at least 100, got {budget}")
    if not sec["seeds"]:
        problems.append(f"{where}.seeds: need at least one seed")
    for s in sec["seeds"]:
        _seed(s, f"{where}.seeds", problems)
    for key in ("sample_size", "sigma0", "popsize", "stagnation"):
        _positive(sec[key], f"{where}.{key}", problems)
    if sec["popsize"] < 4:
        problems.append(f"{where}.popsize: need at least 4")


def validate(cfg: dict) -> list:
    """Semantic problems of a fully merged config (empty when valid)."""
    problems = []
    _seed(cfg["seed"], "seed", problems)
    c = cfg["clone_r2n"]
    _even_dims(c["dims"], "clone_r2n.dims", problems)
    _even_dims(c["generator"]["dims"], "clone_r2n.generator.dims", problems)
    if c["g"] not in (1, -1):
        problems.append(f"clone_r2n.g: must be +1 or -1, got {c['g']}")
    for key in ("samples", "box"):
        _positive(c[key], f"clone_r2n.{key}", problems)
    for key in ("h", "samples", "box", "delta", "trajectory_h"):
        _positive(c["generator"][key], f"clone_r2n.generator.{key}", problems)
    for key in ("jacobian_points", "trajectory_points"):
        _positive(c["generator"][key], f"clone_r2n.generator.{key}", problems, allow_zero=True)

    n = cfg["no_go"]
    system, _ = _check_setup(n, "no_go", problems)
    if system is not None and not system.has_angles:
        problems.append("no_go.system: the probe loop needs an angular slot")
    for key in ("isotopies", "stages", "h", "loop_samples", "scale"):
        _positive(n[key], f"no_go.{key}", problems)
    for key in ("torus_isotopies", "csv_loops", "max_freq", "max_power", "max_total"):
        _positive(n[key], f"no_go.{key}", problems, allow_zero=True)
    if n["loop_samples"] < 8:
        problems.append("no_go.loop_samples: need at least 8 samples")

    _check_search(cfg["approx"]["r2"], "approx.r2", problems, euclidean=True)
    cyl = cfg["approx"]["cylinder"]
    _check_search(cyl, "approx.cylinder", problems, euclidean=False)
    for key in ("momentum_range", "floor_margin"):
        _positive(cyl[key], f"approx.cylinder.{key}", problems)
    if cyl["probe_samples"] < 8:
        problems.append("approx.cylinder.probe_samples: need at least 8 samples")

    p = cfg["points"]
    for key in ("h", "probes", "delta", "loop_samples"):
        _positive(p[key], f"points.{key}", problems)
    _space(p["random"]["space"], "points.random.space", problems)
    if not 0 <= p["random"]["count"] <= 16:
        problems.append("points.random.count: must lie in [0, 16]")
    for key in ("min_spacing", "momentum_range"):
        _positive(p["random"][key], f"points.random.{key}", problems)

    q = cfg["quantum"]
    for key in ("samples", "max_dim", "tolerance"):
        _positive(q[key], f"quantum.{key}", problems)

    d = cfg["dynamics"]
    if len(d["z0"]) != 2:
        problems.append("dynamics.z0: the pendulum state is (theta, p)")
    if len(d["steps"]) < 2:
        problems.append("dynamics.steps: need at least two step sizes")
    for key in ("t1", "reversal_h", "reversal_tol", "ratio", "ratio_tol"):
        _positive(d[key], f"dynamics.{key}", problems)
    for h in d["steps"]:
        _positive(h, "dynamics.steps", problems)

    over = cfg["selftest"]["overrides"]
    if not isinstance(over, dict):
        problems.append("selftest.overrides: expected an object")
    else:
        base = {k: v for k, v in cfg.items() if k != "selftest"}
        merge(base, over, "selftest.overrides", problems, free=())
    return problems


def load_config(path=None, seed: int | None = None) -> dict:
    """Defaults merged with the JSON file at ``path``; raises :class:`ConfigError` listing every problem."""
    cfg = default_config()
    problems = []
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = merge(cfg, user, problems=problems)
    if seed is not None:
        cfg["seed"] = seed
    if not problems:
        problems = validate(cfg)
    if problems:
        err = ConfigError(f"{len(problems)} config problem(s)")
        err.problems = problems
        raise err
    return cfg


def selftest_config(cfg: dict) -> dict:
    """The config with its ``selftest.overrides`` applied."""
    return merge(cfg, cfg["selftest"]["overrides"], free=())
