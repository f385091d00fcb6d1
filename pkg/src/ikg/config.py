"""Configuration loading, validation and normalization.

A configuration is a plain JSON tree with five sections: ``problem``,
``policy``, ``budget``, ``eval`` and ``output``, plus top-level
``replications`` and ``seed``. :func:`normalize_config` fills defaults,
type-checks every field and rejects unknown keys; all errors are
:class:`~ikg.exceptions.ConfigError` whose message starts with the dotted
path of the offending field, e.g. ``policy.sga.step_exponent``.

Normalization is idempotent and the result is JSON-serializable, so a
normalized config can be echoed into a run manifest verbatim.
"""

from __future__ import annotations

import json
from copy import deepcopy

from .exceptions import ConfigError
from .kernels import Kernel

__all__ = [
    "load_config",
    "normalize_config",
    "apply_overrides",
    "default_config",
]

_PROBLEM_NAMES = ("p1", "p2", "p3")
_POLICY_NAMES = ("ikg", "ikgwrc", "bse", "prs")
_COST_MODELS = ("truthful", "unit")
_VARIANCE_MODES = ("known", "estimated")
_OPTIMIZERS = ("sga", "saa")


def load_config(path) -> dict:
    """Read a JSON config file; parse errors become config errors."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def default_config(problem: str = "p1", d: int = 1, policy: str = "ikg") -> dict:
    """A complete, normalized config for quick starts and tests."""
    return normalize_config(
        {"problem": {"name": problem, "d": d}, "policy": {"name": policy}}
    )


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _as_section(tree: dict, key: str, required: bool = False) -> dict:
    value = tree.get(key)
    if value is None:
        if required:
            _fail(key, "section is required")
        return {}
    if not isinstance(value, dict):
        _fail(key, "must be a JSON object")
    return value


def _check_known(section: dict, path: str, known: tuple) -> None:
    for key in section:
        if key not in known:
            _fail(_join(path, key), "unknown key")


def _get_int(section: dict, path: str, key: str, default, minimum=None):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(_join(path, key), f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(_join(path, key), f"must be >= {minimum}, got {value}")
    return int(value)


def _get_float(section: dict, path: str, key: str, default, minimum=None,
               exclusive: bool = False, maximum=None):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(_join(path, key), f"must be a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        _fail(_join(path, key), "must be finite")
    if minimum is not None:
        if exclusive and value <= minimum:
            _fail(_join(path, key), f"must be > {minimum}, got {value}")
        if not exclusive and value < minimum:
            _fail(_join(path, key), f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        _fail(_join(path, key), f"must be <= {maximum}, got {value}")
    return value


def _get_choice(section: dict, path: str, key: str, default, choices: tuple):
    value = section.get(key, default)
    if value not in choices:
        _fail(_join(path, key), f"must be one of {list(choices)}, got {value!r}")
    return value


def _get_bool(section: dict, path: str, key: str, default):
    value = section.get(key, default)
    if not isinstance(value, bool):
        _fail(_join(path, key), f"must be true or false, got {value!r}")
    return value


def _normalize_problem(tree: dict) -> dict:
    section = _as_section(tree, "problem", required=True)
    _check_known(section, "problem", (
        "name", "d", "M", "noise_value", "cost_model", "variance", "kernel",
        "jitter",
    ))
    name = _get_choice(section, "problem", "name", None, _PROBLEM_NAMES)
    d = _get_int(section, "problem", "d", None, minimum=1)
    if d is None:
        _fail("problem.d", "is required")
    out = {
        "name": name,
        "d": d,
        "M": _get_int(section, "problem", "M", 5, minimum=2),
        "noise_value": _get_float(section, "problem", "noise_value", 0.01,
                                  minimum=0.0, exclusive=True),
        "cost_model": _get_choice(section, "problem", "cost_model", "truthful",
                                  _COST_MODELS),
        "jitter": _get_float(section, "problem", "jitter", 0.0, minimum=0.0),
        "variance": _normalize_variance(section),
        "kernel": _normalize_kernel(section, d),
    }
    return out


def _normalize_variance(problem_section: dict) -> dict:
    section = problem_section.get("variance")
    if section is None:
        return {"mode": "known"}
    if not isinstance(section, dict):
        _fail("problem.variance", "must be a JSON object")
    _check_known(section, "problem.variance",
                 ("mode", "design_points", "replications", "floor"))
    mode = _get_choice(section, "problem.variance", "mode", "known",
                       _VARIANCE_MODES)
    if mode == "known":
        for key in ("design_points", "replications", "floor"):
            if key in section:
                _fail(f"problem.variance.{key}",
                      "only applies when mode is 'estimated'")
        return {"mode": "known"}
    return {
        "mode": "estimated",
        "design_points": _get_int(section, "problem.variance", "design_points",
                                  10, minimum=2),
        "replications": _get_int(section, "problem.variance", "replications",
                                 200, minimum=2),
        "floor": _get_float(section, "problem.variance", "floor", 1e-6,
                            minimum=0.0, exclusive=True),
    }


def _normalize_kernel(problem_section: dict, d: int):
    spec = problem_section.get("kernel")
    if spec is None:
        return None
    if not isinstance(spec, dict):
        _fail("problem.kernel", "must be a JSON object")
    try:
        kernel = Kernel.from_config(spec)
    except (ValueError, TypeError) as err:
        detail = str(err)
        path = "problem.kernel.alpha" if "alpha" in detail else "problem.kernel"
        _fail(path, detail)
    if kernel.dim != d:
        _fail("problem.kernel.alpha", f"has dimension {kernel.dim}, problem.d is {d}")
    return kernel.to_config()


def _normalize_policy(tree: dict, d: int) -> dict:
    section = _as_section(tree, "policy")
    _check_known(section, "policy", ("name", "sga", "saa", "bse"))
    name = _get_choice(section, "policy", "name", "ikg", _POLICY_NAMES)

    sga = section.get("sga") or {}
    if not isinstance(sga, dict):
        _fail("policy.sga", "must be a JSON object")
    _check_known(sga, "policy.sga", (
        "max_iters", "averaging_start", "step_scale", "step_exponent",
        "batch_size",
    ))
    sga_out = {
        "max_iters": _get_int(sga, "policy.sga", "max_iters", None, minimum=0),
        "averaging_start": _get_int(sga, "policy.sga", "averaging_start", None,
                                    minimum=1),
        "step_scale": _get_float(sga, "policy.sga", "step_scale", None,
                                 minimum=0.0, exclusive=True),
        "step_exponent": _get_float(sga, "policy.sga", "step_exponent", None,
                                    minimum=0.5, exclusive=True, maximum=1.0),
        "batch_size": _get_int(sga, "policy.sga", "batch_size", None, minimum=1),
    }

    saa = section.get("saa") or {}
    if not isinstance(saa, dict):
        _fail("policy.saa", "must be a JSON object")
    _check_known(saa, "policy.saa", ("J", "optimizer", "size", "multistart"))
    saa_out = {
        "J": _get_int(saa, "policy.saa", "J", 500 * d * d, minimum=1),
        "optimizer": _get_choice(saa, "policy.saa", "optimizer", "sga",
                                 _OPTIMIZERS),
        "size": _get_int(saa, "policy.saa", "size", None, minimum=1),
        "multistart": _get_int(saa, "policy.saa", "multistart", 1, minimum=1),
    }

    bse = section.get("bse") or {}
    if not isinstance(bse, dict):
        _fail("policy.bse", "must be a JSON object")
    _check_known(bse, "policy.bse", ("bins_per_dim", "threshold_scale"))
    bse_out = {
        "bins_per_dim": _get_int(bse, "policy.bse", "bins_per_dim", 3, minimum=1),
        "threshold_scale": _get_float(bse, "policy.bse", "threshold_scale", 2.0,
                                      minimum=0.0, exclusive=True),
    }

    return {"name": name, "sga": sga_out, "saa": saa_out, "bse": bse_out}


def _normalize_budget(tree: dict) -> dict:
    section = _as_section(tree, "budget")
    _check_known(section, "budget", ("total", "grid"))
    total = _get_float(section, "budget", "total", 100.0, minimum=0.0,
                       exclusive=True)
    grid = section.get("grid")
    if grid is not None:
        if not isinstance(grid, (list, tuple)) or not grid:
            _fail("budget.grid", "must be a nonempty list of numbers")
        cleaned = []
        previous = 0.0
        for pos, value in enumerate(grid):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                _fail(f"budget.grid[{pos}]", f"must be a number, got {value!r}")
            value = float(value)
            if value <= previous:
                _fail(f"budget.grid[{pos}]", "must be strictly increasing and positive")
            if value > total:
                _fail(f"budget.grid[{pos}]", f"exceeds budget.total={total}")
            cleaned.append(value)
            previous = value
        grid = cleaned
    return {"total": total, "grid": grid}


def _normalize_eval(tree: dict, d: int) -> dict:
    section = _as_section(tree, "eval")
    _check_known(section, "eval", ("draws",))
    return {"draws": _get_int(section, "eval", "draws", 1000 * d * d, minimum=1)}


def _normalize_output(tree: dict) -> dict:
    section = _as_section(tree, "output")
    _check_known(section, "output", ("dir", "timings"))
    out_dir = section.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        _fail("output.dir", f"must be a string path, got {out_dir!r}")
    return {
        "dir": out_dir,
        "timings": _get_bool(section, "output", "timings", False),
    }


def normalize_config(raw: dict) -> dict:
    """Validate ``raw`` and return a fully defaulted copy.

    Raises :class:`ConfigError` on the first problem found; the message
    names the offending field by its dotted path.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_known(raw, "", (
        "problem", "policy", "budget", "eval", "output", "replications", "seed",
    ))
    problem = _normalize_problem(raw)
    cfg = {
        "problem": problem,
        "policy": _normalize_policy(raw, problem["d"]),
        "budget": _normalize_budget(raw),
        "eval": _normalize_eval(raw, problem["d"]),
        "output": _normalize_output(raw),
        "replications": _get_int(raw, "", "replications", 20, minimum=1),
        "seed": _get_int(raw, "", "seed", 1, minimum=0),
    }
    return cfg


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``path.to.key=value`` strings on top of a raw config.

    Values are parsed as JSON when possible and kept as strings otherwise,
    so ``policy.name=prs`` and ``budget.total=50`` both work. Returns a
    new tree; re-normalize afterwards.
    """
    tree = deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        dotted = dotted.strip()
        if not dotted:
            raise ConfigError(f"override {item!r} has an empty key")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = tree
        parts = dotted.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
                node[part] = child
            elif not isinstance(child, dict):
                raise ConfigError(
                    f"override {dotted!r} descends into non-object {part!r}"
                )
            node = child
        node[parts[-1]] = value
    return tree
