"""Benchmark problems and the replication harness.

The benchmark family shares one box domain ``[0, 10]^d`` and M competing
response surfaces built from a revised Griewank function,

    theta_i(x) = sum_j x_j^2 / 4000 - 1.5^(d-1) * prod_j cos(x_j / sqrt(i*j)),

with 1-based alternative index i and coordinate index j; the alternatives
differ only through the oscillation frequencies. Three problem variants
are provided:

* ``p1`` - uniform covariate density, unit sampling cost;
* ``p2`` - truncated-normal covariate density (mean 0, scale 4), unit cost;
* ``p3`` - uniform density with location- and alternative-dependent cost
  ``c_i(x) = 2^(3-i) * (1 + ||x - 5||^2 / (10 d))``.

Sampling noise is location-constant (default variance 0.01) and the
belief prior for every alternative is a zero mean with squared-exponential
covariance ``exp(-||x - x'||^2 / d)``.

The harness runs L independent replications of (problem, policy, budget),
evaluates the opportunity cost of the learned decision rule at a grid of
budget checkpoints on one common covariate sample per replication (so
curve differences across checkpoints are not masked by evaluation noise),
and emits one CSV row per
(replication, budget point). Replications are embarrassingly parallel;
row order and content are independent of the worker count because every
random stream is keyed by (seed, problem, d, policy, replication) and
rows are sorted before writing.

A small kriging facility estimates an unknown sampling-variance surface
from replicated pilot samples at Latin-hypercube design points; the
resulting model can be handed to the budget loop as the policy's noise
view to study the effect of estimating the variance instead of knowing it.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm

from . import config as config_mod
from .acquisition import BeliefState
from .exceptions import ConfigError
from .gp import ConstantMean
from .kernels import Kernel, _as_points, _as_vector
from .policies import (
    BsePolicy,
    IkgPolicy,
    IkgRandomCandidatePolicy,
    PrsPolicy,
    learned_decision_rule,
    run_budget_loop,
)
from .sga import BoxDomain, SgaConfig

__all__ = [
    "CovariateDensity",
    "Problem",
    "VarianceModel",
    "ExperimentResult",
    "griewank_truth",
    "make_problem",
    "sample_covariates",
    "estimate_oc",
    "latin_hypercube",
    "fit_variance_model",
    "predict_variance",
    "build_problem",
    "build_policy",
    "run_experiment",
    "write_csv",
    "write_manifest",
    "mean_oc_curve",
    "summarize_oc",
    "CSV_HEADER",
]

CSV_HEADER = "problem,policy,d,replication,budget,oc,wall_ms,n_samples"

_PROBLEM_CODES = {"p1": 1, "p2": 2, "p3": 3}
_POLICY_CODES = {"ikg": 1, "ikgwrc": 2, "bse": 3, "prs": 4, "ikg_saa": 5}

# Rejection sampling below this acceptance rate means the density is
# effectively zero on the box; treat as a configuration problem.
_MIN_ACCEPT_RATE = 1e-4


class CovariateDensity:
    """Covariate distribution on a box: uniform, or a spherical normal
    truncated to the box.

    The truncated normal has independent coordinates with common scale,
    density ``prod_j pdf((x_j - mean_j)/scale) / (scale * Z_j)`` on the
    box with per-coordinate normalizers ``Z_j``. It is sampled by
    rejection; pathological truncations (acceptance below 1e-4) raise a
    configuration error rather than spinning.
    """

    __slots__ = ("kind", "mean", "scale")

    def __init__(self, kind: str, mean=None, scale: float | None = None) -> None:
        if kind not in ("uniform", "truncated_normal"):
            raise ValueError(f"unknown density kind {kind!r}")
        if kind == "truncated_normal":
            if mean is None or scale is None:
                raise ValueError("truncated_normal needs a mean vector and a scale")
            mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
            scale = float(scale)
            if not np.all(np.isfinite(mean)):
                raise ValueError("density mean must be finite")
            if not (np.isfinite(scale) and scale > 0):
                raise ValueError("density scale must be positive")
            mean.flags.writeable = False
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    def __setattr__(self, name, value):
        raise AttributeError("CovariateDensity is immutable")

    def __repr__(self) -> str:
        if self.kind == "uniform":
            return "CovariateDensity('uniform')"
        return (
            f"CovariateDensity('truncated_normal', mean={self.mean.tolist()!r}, "
            f"scale={self.scale!r})"
        )

    def _check_mean_dim(self, domain: BoxDomain) -> np.ndarray:
        mean = self.mean
        if mean.shape != (domain.dim,):
            raise ValueError(
                f"density mean has dimension {mean.shape[0]}, domain has {domain.dim}"
            )
        return mean

    def sample(self, domain: BoxDomain, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` i.i.d. draws; shape (count, d)."""
        count = int(count)
        if count < 1:
            raise ValueError("count must be at least 1")
        if self.kind == "uniform":
            return domain.sample_uniform(rng, count)
        mean = self._check_mean_dim(domain)
        out = np.empty((count, domain.dim))
        have = 0
        drawn = 0
        while have < count:
            chunk = max(count - have, 256)
            raw = mean + self.scale * rng.standard_normal((chunk, domain.dim))
            drawn += chunk
            ok = raw[
                np.all((raw >= domain.lower) & (raw <= domain.upper), axis=1)
            ]
            take = min(ok.shape[0], count - have)
            out[have : have + take] = ok[:take]
            have += take
            if drawn >= 4096 and have / drawn < _MIN_ACCEPT_RATE:
                raise ConfigError(
                    "problem.density: truncated-normal acceptance rate below "
                    f"{_MIN_ACCEPT_RATE}; the density is degenerate on the box"
                )
        return out

    def pdf(self, X, domain: BoxDomain) -> np.ndarray:
        """Density values at rows of X, normalized over the box; zero outside."""
        X = _as_points(X, domain.dim, "X")
        inside = np.all((X >= domain.lower) & (X <= domain.upper), axis=1)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / domain.volume, 0.0)
        mean = self._check_mean_dim(domain)
        z = (X - mean) / self.scale
        log_num = norm.logpdf(z).sum(axis=1) - domain.dim * np.log(self.scale)
        normalizers = norm.cdf((domain.upper - mean) / self.scale) - norm.cdf(
            (domain.lower - mean) / self.scale
        )
        density = np.exp(log_num - np.log(normalizers).sum())
        return np.where(inside, density, 0.0)

    def to_config(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {
            "kind": "truncated_normal",
            "mean": self.mean.tolist(),
            "scale": self.scale,
        }

    @classmethod
    def from_config(cls, spec: dict) -> "CovariateDensity":
        kind = spec.get("kind")
        if kind == "uniform":
            return cls("uniform")
        if kind == "truncated_normal":
            return cls("truncated_normal", spec.get("mean"), spec.get("scale"))
        raise ValueError(f"unknown density spec {spec!r}")


def griewank_truth(i: int, x):
    """Revised Griewank response of the i-th alternative (i is 1-based).

    Accepts one point (shape ``(d,)``) or a stack of points
    (shape ``(q, d)``) and returns a float or a ``(q,)`` array.
    """
    if int(i) != i or i < 1:
        raise ValueError("alternative index i is 1-based and must be >= 1")
    arr = np.asarray(x, dtype=float)
    X = np.atleast_2d(arr)
    d = X.shape[1]
    freq = np.sqrt(float(i) * np.arange(1, d + 1))
    value = (X * X).sum(axis=1) / 4000.0 - 1.5 ** (d - 1) * np.cos(X / freq).prod(axis=1)
    return float(value[0]) if arr.ndim == 1 else value


class Problem:
    """One benchmark instance: truth, noise, cost, density, prior.

    Alternative indices are 0-based at this interface; the Griewank
    formula's 1-based index is applied internally.
    """

    __slots__ = (
        "name",
        "M",
        "d",
        "domain",
        "density",
        "prior_kernel",
        "prior_mean",
        "jitter",
        "_truth",
        "_noise",
        "_noise_grad",
        "_cost",
        "_cost_grad",
    )

    def __init__(
        self,
        name: str,
        M: int,
        d: int,
        domain: BoxDomain,
        density: CovariateDensity,
        prior_kernel: Kernel,
        truth_fn,
        noise_fn,
        cost_fn,
        noise_grad_fn=None,
        cost_grad_fn=None,
        prior_mean=None,
        jitter: float = 0.0,
    ) -> None:
        if M < 2:
            raise ValueError("need at least two alternatives")
        if domain.dim != d or prior_kernel.dim != d:
            raise ValueError("domain, prior kernel and d must agree")
        self.name = name
        self.M = int(M)
        self.d = int(d)
        self.domain = domain
        self.density = density
        self.prior_kernel = prior_kernel
        self.prior_mean = prior_mean if prior_mean is not None else ConstantMean(0.0)
        self.jitter = float(jitter)
        self._truth = truth_fn
        self._noise = noise_fn
        self._noise_grad = noise_grad_fn
        self._cost = cost_fn
        self._cost_grad = cost_grad_fn

    def __repr__(self) -> str:
        return f"Problem({self.name!r}, M={self.M}, d={self.d})"

    def _check_alt(self, i: int) -> int:
        if not 0 <= i < self.M:
            raise ValueError(f"alternative index {i} out of range [0, {self.M})")
        return int(i)

    def truth(self, i: int, x):
        """True response of alternative ``i`` (0-based) at point(s) x."""
        return self._truth(self._check_alt(i), x)

    def truth_matrix(self, X) -> np.ndarray:
        """All alternatives' true responses at rows of X; shape (M, q)."""
        X = _as_points(X, self.d, "X")
        return np.stack([np.atleast_1d(self._truth(i, X)) for i in range(self.M)])

    def true_best(self, X) -> np.ndarray:
        """Index of the truly best alternative at each row of X (ties go low)."""
        return np.argmax(self.truth_matrix(X), axis=0)

    def noise(self, i: int, x) -> float:
        value = float(self._noise(self._check_alt(i), x))
        if not (np.isfinite(value) and value > 0):
            raise ValueError(f"noise variance must be positive, got {value!r}")
        return value

    def cost(self, i: int, x) -> float:
        value = float(self._cost(self._check_alt(i), x))
        if not (np.isfinite(value) and value > 0):
            raise ValueError(f"sampling cost must be positive, got {value!r}")
        return value

    def sample_observation(self, i: int, x, rng: np.random.Generator) -> float:
        """Draw y ~ Normal(truth_i(x), noise_i(x))."""
        x = _as_vector(np.asarray(x, dtype=float), self.d, "x")
        mean = float(self._truth(self._check_alt(i), x))
        return mean + np.sqrt(self.noise(i, x)) * rng.standard_normal()

    # Per-alternative callable views, as the policy context wants them.

    def noise_fns(self) -> list:
        return [lambda x, i=i: self.noise(i, x) for i in range(self.M)]

    def noise_grad_fns(self) -> list:
        if self._noise_grad is None:
            return [None] * self.M
        return [lambda x, i=i: self._noise_grad(i, x) for i in range(self.M)]

    def cost_fns(self) -> list:
        return [lambda x, i=i: self.cost(i, x) for i in range(self.M)]

    def cost_grad_fns(self) -> list:
        if self._cost_grad is None:
            return [None] * self.M
        return [lambda x, i=i: self._cost_grad(i, x) for i in range(self.M)]

    def fresh_state(self) -> BeliefState:
        return BeliefState.fresh(self.prior_kernel, self.M, self.prior_mean,
                                 jitter=self.jitter)


def make_problem(
    name: str,
    d: int,
    M: int = 5,
    noise_value: float = 0.01,
    jitter: float = 0.0,
    kernel: Kernel | None = None,
) -> Problem:
    """Construct one of the benchmark problems ``p1``/``p2``/``p3``."""
    if name not in _PROBLEM_CODES:
        raise ValueError(f"unknown problem {name!r}; expected one of p1, p2, p3")
    if d < 1:
        raise ValueError("d must be at least 1")
    noise_value = float(noise_value)
    if not (np.isfinite(noise_value) and noise_value > 0):
        raise ValueError("noise_value must be positive")
    domain = BoxDomain(np.zeros(d), np.full(d, 10.0))
    if kernel is None:
        kernel = Kernel("se", 1.0, np.full(d, 1.0 / d))
    if name == "p2":
        density = CovariateDensity("truncated_normal", np.zeros(d), 4.0)
    else:
        density = CovariateDensity("uniform")

    def truth(i0, x):
        return griewank_truth(i0 + 1, x)

    def noise(i0, x):
        return noise_value

    if name == "p3":
        center = np.full(d, 5.0)

        def cost(i0, x):
            gap = np.asarray(x, dtype=float) - center
            return 2.0 ** (2 - i0) * (1.0 + float(gap @ gap) / (10.0 * d))

        def cost_grad(i0, x):
            gap = np.asarray(x, dtype=float) - center
            return 2.0 ** (2 - i0) * gap / (5.0 * d)

    else:

        def cost(i0, x):
            return 1.0

        cost_grad = None

    return Problem(
        name, M, d, domain, density, kernel, truth, noise, cost,
        noise_grad_fn=None, cost_grad_fn=cost_grad, jitter=jitter,
    )


def sample_covariates(density: CovariateDensity, domain: BoxDomain, count: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Functional alias for :meth:`CovariateDensity.sample`."""
    return density.sample(domain, count, rng)


def estimate_oc(state: BeliefState, problem: Problem, eval_points) -> float:
    """Opportunity cost of the learned rule, averaged over eval points.

    For each point, the gap between the truly best alternative's response
    and the response of the alternative the posterior ranks first.
    Nonnegative by construction.
    """
    X = _as_points(eval_points, problem.d, "eval_points")
    truths = problem.truth_matrix(X)
    best_values = truths.max(axis=0)
    learned = np.argmax(state.means_at(X), axis=0)
    chosen_values = truths[learned, np.arange(X.shape[0])]
    return float(np.mean(best_values - chosen_values))


# -- sampling-variance kriging ------------------------------------------------


def latin_hypercube(count: int, domain: BoxDomain, rng: np.random.Generator) -> np.ndarray:
    """Stratified design: one point per row, one stratum per point and
    coordinate, independently permuted across coordinates."""
    count = int(count)
    if count < 1:
        raise ValueError("count must be at least 1")
    d = domain.dim
    u = rng.random((count, d))
    cells = np.empty((count, d))
    for j in range(d):
        cells[:, j] = rng.permutation(count)
    unit = (cells + u) / count
    return domain.lower + (domain.upper - domain.lower) * unit


class VarianceModel:
    """Noiseless kriging interpolator of per-location sample variances.

    Predictions interpolate the fitted variances exactly at the design
    points and are clamped below at ``floor`` (downstream formulas need a
    strictly positive variance; the zero-mean prior makes the raw surface
    dip toward zero far from the design).
    """

    __slots__ = ("design_points", "sample_variances", "kernel", "prior_mean",
                 "floor", "_weights")

    def __init__(self, design_points, sample_variances, kernel: Kernel,
                 prior_mean: float = 0.0, floor: float = 1e-6) -> None:
        X = _as_points(design_points, kernel.dim, "design_points")
        s2 = np.asarray(sample_variances, dtype=float).reshape(-1)
        if s2.shape[0] != X.shape[0]:
            raise ValueError("need one sample variance per design point")
        if np.any(s2 < 0) or not np.all(np.isfinite(s2)):
            raise ValueError("sample variances must be finite and nonnegative")
        if not (np.isfinite(floor) and floor > 0):
            raise ValueError("floor must be positive")
        gram = kernel.matrix(X, X)
        try:
            cho = cho_factor(gram, lower=True)
        except LinAlgError as err:
            raise ValueError(
                "design points produce a singular interpolation system "
                "(duplicate or near-duplicate points)"
            ) from err
        self.design_points = X.copy()
        self.sample_variances = s2.copy()
        self.kernel = kernel
        self.prior_mean = float(prior_mean)
        self.floor = float(floor)
        self._weights = cho_solve(cho, s2 - self.prior_mean)

    def predict(self, x) -> float:
        """Clamped interpolated variance at one point."""
        x = _as_vector(np.asarray(x, dtype=float), self.kernel.dim, "x")
        raw = self.prior_mean + float(self.kernel.vec(self.design_points, x) @ self._weights)
        return max(raw, self.floor)

    def predict_grad(self, x) -> np.ndarray:
        """Gradient of the clamped prediction; zero where the clamp binds."""
        x = _as_vector(np.asarray(x, dtype=float), self.kernel.dim, "x")
        raw = self.prior_mean + float(self.kernel.vec(self.design_points, x) @ self._weights)
        if raw <= self.floor:
            return np.zeros(self.kernel.dim)
        return self.kernel.grad_x_batch(self.design_points, x).T @ self._weights


def fit_variance_model(
    design_points,
    replications: int,
    problem: Problem,
    i: int,
    rng: np.random.Generator,
    kernel: Kernel | None = None,
    floor: float = 1e-6,
) -> VarianceModel:
    """Estimate alternative ``i``'s sampling-variance surface from pilot
    replications at the design points."""
    replications = int(replications)
    if replications < 2:
        raise ValueError("need at least 2 replications per design point")
    X = _as_points(design_points, problem.d, "design_points")
    sample_vars = np.empty(X.shape[0])
    for row, x in enumerate(X):
        mean = float(problem.truth(i, x))
        noise_sd = np.sqrt(problem.noise(i, x))
        draws = mean + noise_sd * rng.standard_normal(replications)
        sample_vars[row] = draws.var(ddof=1)
    if kernel is None:
        kernel = problem.prior_kernel
    return VarianceModel(X, sample_vars, kernel, prior_mean=0.0, floor=floor)


def predict_variance(model: VarianceModel, x) -> float:
    """Functional alias for :meth:`VarianceModel.predict`."""
    return model.predict(x)


# -- experiment harness ----------------------------------------------------------


@dataclass
class ExperimentResult:
    rows: list
    manifest: dict
    failures: list = field(default_factory=list)


def build_problem(cfg: dict) -> Problem:
    """Instantiate the problem section of a normalized config."""
    p = cfg["problem"]
    kernel = Kernel.from_config(p["kernel"]) if p.get("kernel") else None
    return make_problem(
        p["name"], p["d"], M=p["M"], noise_value=p["noise_value"],
        jitter=p["jitter"], kernel=kernel,
    )


def build_policy(cfg: dict, problem: Problem):
    """Instantiate a fresh policy object from a normalized config."""
    pol = cfg["policy"]
    name = pol["name"]
    if name == "ikg":
        sga_cfg = _sga_config_for(cfg, problem.d)
        saa = pol["saa"]
        size = saa["size"] if saa["size"] is not None else saa["J"]
        return IkgPolicy(
            sga_cfg,
            optimizer=saa["optimizer"],
            saa_size=size,
            saa_multistart=saa["multistart"],
        )
    if name == "ikgwrc":
        return IkgRandomCandidatePolicy()
    if name == "bse":
        return BsePolicy(
            pol["bse"]["bins_per_dim"],
            cfg["budget"]["total"],
            pol["bse"]["threshold_scale"],
        )
    if name == "prs":
        return PrsPolicy()
    raise ConfigError(f"policy.name: unknown policy {name!r}")


def _sga_config_for(cfg: dict, d: int) -> SgaConfig:
    overrides = {k: v for k, v in cfg["policy"]["sga"].items() if v is not None}
    return SgaConfig.defaults(d, **overrides)


def default_budget_grid(total: float, points: int = 10) -> list:
    """Ceil-spaced checkpoints {total/points, ..., total}."""
    grid = sorted({float(np.ceil(k * total / points)) for k in range(1, points + 1)})
    return grid


def _replication_streams(cfg: dict, replication: int):
    seed_key = [
        cfg["seed"],
        _PROBLEM_CODES[cfg["problem"]["name"]],
        cfg["problem"]["d"],
        _POLICY_CODES.get(_policy_label(cfg), 0),
        replication,
    ]
    root = np.random.SeedSequence(seed_key)
    run_ss, eval_ss, aux_ss = root.spawn(3)
    return (
        np.random.Generator(np.random.PCG64(run_ss)),
        np.random.Generator(np.random.PCG64(eval_ss)),
        np.random.Generator(np.random.PCG64(aux_ss)),
    )


def _policy_label(cfg: dict) -> str:
    pol = cfg["policy"]
    if pol["name"] == "ikg" and pol["saa"]["optimizer"] == "saa":
        return "ikg_saa"
    return pol["name"]


def _noise_views(cfg: dict, problem: Problem, aux_rng):
    """Policy-facing noise callables: the truth, or kriging estimates."""
    variance = cfg["problem"]["variance"]
    if variance["mode"] == "known":
        return None, None, {}
    design = latin_hypercube(variance["design_points"], problem.domain, aux_rng)
    models = [
        fit_variance_model(
            design, variance["replications"], problem, i, aux_rng,
            floor=variance["floor"],
        )
        for i in range(problem.M)
    ]
    info = {
        "design_points": design.tolist(),
        "sample_variances": [m.sample_variances.tolist() for m in models],
    }
    noise_view = [m.predict for m in models]
    noise_grad_view = [m.predict_grad for m in models]
    return noise_view, noise_grad_view, info


def _cost_views(cfg: dict, problem: Problem):
    if cfg["problem"]["cost_model"] == "unit":
        return [lambda x: 1.0] * problem.M, [None] * problem.M
    return None, None


def run_replication(cfg: dict, replication: int) -> list:
    """Run one replication of a normalized config; returns its CSV rows."""
    problem = build_problem(cfg)
    policy = build_policy(cfg, problem)
    run_rng, eval_rng, aux_rng = _replication_streams(cfg, replication)
    noise_view, noise_grad_view, _ = _noise_views(cfg, problem, aux_rng)
    cost_view, cost_grad_view = _cost_views(cfg, problem)
    grid = cfg["budget"]["grid"] or default_budget_grid(cfg["budget"]["total"])

    # One common evaluation point set per replication: differences between
    # budget checkpoints then measure true belief improvement instead of
    # fresh-draw noise, which would otherwise dominate once the curve is
    # near its floor.
    eval_points = sample_covariates(problem.density, problem.domain,
                                    cfg["eval"]["draws"], eval_rng)

    def oc_evaluator(state, budget_point):
        return estimate_oc(state, problem, eval_points)

    record = run_budget_loop(
        policy,
        problem,
        cfg["budget"]["total"],
        run_rng,
        saa_batch=cfg["policy"]["saa"]["J"],
        checkpoints=grid,
        oc_evaluator=oc_evaluator,
        noise_view=noise_view,
        noise_grad_view=noise_grad_view,
        cost_view=cost_view,
        cost_grad_view=cost_grad_view,
        record_timing=cfg["output"]["timings"],
        seed=replication,
    )
    timings = cfg["output"]["timings"]
    rows = []
    for (point, oc), (point_b, summary) in zip(record.oc_evals, record.checkpoints):
        assert point == point_b
        rows.append(
            {
                "problem": problem.name,
                "policy": policy.name,
                "d": problem.d,
                "replication": replication,
                "budget": point,
                "oc": oc,
                "wall_ms": summary["wall_ms"] if timings else 0.0,
                "n_samples": summary["n_samples"],
            }
        )
    return rows


def _replication_task(args):
    cfg, replication = args
    try:
        return replication, run_replication(cfg, replication), None
    except Exception as err:  # noqa: BLE001 - a replication must not kill the run
        return replication, [], f"{type(err).__name__}: {err}"


def run_experiment(config: dict, workers: int = 1) -> ExperimentResult:
    """Run all replications of a config; aggregate rows and a manifest.

    Parameters
    ----------
    config : dict
        Raw or normalized configuration tree.
    workers : int
        Process count for replication parallelism. Results are identical
        for any worker count.
    """
    cfg = config_mod.normalize_config(config)
    reps = range(1, cfg["replications"] + 1)
    tasks = [(cfg, r) for r in reps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            outcomes = list(pool.map(_replication_task, tasks))
    else:
        outcomes = [_replication_task(t) for t in tasks]
    outcomes.sort(key=lambda item: item[0])
    rows, failures = [], []
    for replication, rep_rows, error in outcomes:
        if error is not None:
            failures.append({"replication": replication, "error": error})
        rows.extend(rep_rows)
    manifest = {
        "config": cfg,
        "version": _package_version(),
        "seed": cfg["seed"],
        "policy": _policy_label(cfg),
        "problem": cfg["problem"]["name"],
        "rows": len(rows),
        "failures": failures,
        "oc_summary": summarize_oc(rows),
    }
    return ExperimentResult(rows=rows, manifest=manifest, failures=failures)


def _package_version() -> str:
    from . import __version__

    return __version__


def mean_oc_curve(rows) -> dict:
    """Budget point -> mean opportunity cost across replications."""
    buckets: dict = {}
    for row in rows:
        buckets.setdefault(float(row["budget"]), []).append(float(row["oc"]))
    return {b: float(np.mean(v)) for b, v in sorted(buckets.items())}

def summarize_oc(rows) -> list:
    """Per-budget mean and 99% normal-approximation half width."""
    buckets: dict = {}
    for row in rows:
        buckets.setdefault(float(row["budget"]), []).append(float(row["oc"]))
    summary = []
    for budget, values in sorted(buckets.items()):
        arr = np.asarray(values)
        half = 0.0
        if arr.size > 1:
            half = float(2.5758293035489004 * arr.std(ddof=1) / np.sqrt(arr.size))
        summary.append(
            {
                "budget": budget,
                "mean_oc": float(arr.mean()),
                "half_width_99": half,
                "replications": int(arr.size),
            }
        )
    return summary


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows, path) -> None:
    """Write result rows with a fixed header and shortest-roundtrip floats,
    so identical results are identical bytes."""
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    str(row["problem"]),
                    str(row["policy"]),
                    str(int(row["d"])),
                    str(int(row["replication"])),
                    _format_value(float(row["budget"])),
                    _format_value(float(row["oc"])),
                    _format_value(float(row["wall_ms"])),
                    str(int(row["n_samples"])),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
