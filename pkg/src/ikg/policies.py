"""Sequential sampling policies and the cost-budget loop.

Four policies decide, at each step, which alternative to sample and at
which covariate location:

``ikg``
    For each alternative, maximize the integrated knowledge gradient over
    the box by projected stochastic gradient ascent; then compare the
    optimized candidates on one shared batch of covariate draws in the
    log domain and sample the argmax alternative at its candidate. An
    optional deterministic-optimizer mode replaces the ascent with
    multistart gradient ascent on a frozen draw batch (used only for
    optimizer-comparison studies).
``ikgwrc``
    Identical comparison step, but the candidate locations are the ascent
    *initial* points (uniform draws from the same streams), so the gap to
    ``ikg`` isolates the value of optimizing step (i).
``bse``
    Binned successive elimination: partition the box into ``bins_per_dim``
    uniform divisions per coordinate, draw the location uniformly, sample
    the active arm with the fewest bin-local samples, and eliminate arms
    whose bin-local mean falls far enough behind the bin leader.
``prs``
    Uniform alternative, uniform location.

The budget loop charges each decision its true sampling cost and stops
once the cumulative cost reaches the budget: decision n is taken if and
only if the cost already spent is below B, so with unit costs a budget of
B yields exactly B decisions, and with continuous costs the final sample
is the first crossing of B. The loop draws observations, feeds policies
and the belief state, and can evaluate the opportunity cost of the learned
rule at configured budget checkpoints.

All randomness flows through numpy Generators handed in by the caller.
One decision step spawns per-alternative optimizer streams plus a
shared-batch stream, which is what makes ``ikg`` and ``ikgwrc`` coincide
stream-for-stream when the ascent is configured with zero iterations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    BeliefState,
    ikg_gradient_batch,
    log_ikg_estimate,
)
from .exceptions import DegenerateStateError, NumericalError
from .gp import Observation
from .kernels import _as_vector
from .sga import BoxDomain, SgaConfig, optimize, optimize_saa

__all__ = [
    "SamplingDecision",
    "PolicyContext",
    "BudgetLedger",
    "RunRecord",
    "IkgPolicy",
    "IkgRandomCandidatePolicy",
    "BsePolicy",
    "PrsPolicy",
    "ikg_decide",
    "ikgwrc_decide",
    "prs_decide",
    "learned_decision_rule",
    "run_budget_loop",
]


@dataclass(frozen=True)
class SamplingDecision:
    """One step's choice: which alternative (0-based) to sample where."""

    alternative: int
    location: np.ndarray


@dataclass
class PolicyContext:
    """Everything a policy may consult when deciding.

    The noise and cost callables are what the *policy believes*; the
    budget loop charges true costs and draws observations with true noise
    separately, which is how misspecification studies are expressed.
    ``noise_grad_fns`` / ``cost_grad_fns`` entries may be ``None`` for
    location-constant functions.
    """

    domain: BoxDomain
    density: object
    noise_fns: list
    cost_fns: list
    rng: np.random.Generator
    saa_batch: int
    noise_grad_fns: list | None = None
    cost_grad_fns: list | None = None

    def __post_init__(self):
        if int(self.saa_batch) != self.saa_batch or self.saa_batch < 1:
            raise ValueError("saa_batch must be a positive integer")
        m = len(self.noise_fns)
        if len(self.cost_fns) != m:
            raise ValueError("noise_fns and cost_fns must have equal length")
        if self.noise_grad_fns is None:
            self.noise_grad_fns = [None] * m
        if self.cost_grad_fns is None:
            self.cost_grad_fns = [None] * m


@dataclass
class BudgetLedger:
    """Cumulative sampling-cost account for one run."""

    budget: float
    spent: float = 0.0
    n_samples: int = 0

    def charge(self, cost: float) -> None:
        cost = float(cost)
        if not (np.isfinite(cost) and cost > 0):
            raise ValueError("cost must be finite and positive")
        self.spent += cost
        self.n_samples += 1

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.budget


@dataclass
class RunRecord:
    """Everything one budget-loop run produced."""

    policy_id: str
    problem_id: str
    seed: object
    decisions: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    oc_evals: list = field(default_factory=list)
    final_state: BeliefState | None = None
    ledger: BudgetLedger | None = None
    wall_ms: float = 0.0


# -- decision functions --------------------------------------------------


def _gradient_oracle(state, i, ctx, batch_size, planned_iters=None):
    noise_fn = ctx.noise_fns[i]
    noise_grad_fn = ctx.noise_grad_fns[i]
    cost_fn = ctx.cost_fns[i]
    cost_grad_fn = ctx.cost_grad_fns[i]
    density, domain = ctx.density, ctx.domain
    # The posterior is fixed for the whole ascent run, so when the number
    # of oracle calls is known up front we draw every batch at once and
    # price the posterior means in a single vectorized pass.
    cache: dict = {}

    def oracle(x, rng):
        if planned_iters:
            if "draws" not in cache:
                cache["draws"] = density.sample(domain,
                                                planned_iters * batch_size, rng)
                cache["means"] = state.means_at(cache["draws"])
                cache["next"] = 0
            start = cache["next"]
            stop = start + batch_size
            if stop <= cache["draws"].shape[0]:
                cache["next"] = stop
                grads = ikg_gradient_batch(
                    state, i, cache["draws"][start:stop], x,
                    noise_fn, noise_grad_fn, cost_fn, cost_grad_fn,
                    means=cache["means"][:, start:stop],
                )
                return grads.mean(axis=0)
        draws = density.sample(domain, batch_size, rng)
        grads = ikg_gradient_batch(
            state, i, draws, x, noise_fn, noise_grad_fn, cost_fn, cost_grad_fn
        )
        return grads.mean(axis=0)

    return oracle


def _frozen_objective(state, i, ctx, frozen_draws):
    noise_fn = ctx.noise_fns[i]
    noise_grad_fn = ctx.noise_grad_fns[i]
    cost_fn = ctx.cost_fns[i]
    cost_grad_fn = ctx.cost_grad_fns[i]
    means = state.means_at(frozen_draws)

    def objective(x):
        sample = log_ikg_estimate(
            state, i, x, frozen_draws, noise_fn, cost_fn, means=means
        )
        value = 0.0 if sample.log_value == -np.inf else float(np.exp(sample.log_value))
        grad = ikg_gradient_batch(
            state, i, frozen_draws, x, noise_fn, noise_grad_fn,
            cost_fn, cost_grad_fn, means=means,
        ).mean(axis=0)
        return value, grad

    return objective


def _compare_on_shared_batch(state, ctx, candidates, batch_rng):
    """Step (ii): rank candidate (i, x_i) pairs on one shared draw batch."""
    draws = ctx.density.sample(ctx.domain, ctx.saa_batch, batch_rng)
    means = state.means_at(draws)
    log_values = [
        log_ikg_estimate(
            state, i, candidates[i], draws, ctx.noise_fns[i], ctx.cost_fns[i],
            means=means,
        ).log_value
        for i in range(state.num_alternatives)
    ]
    if all(v == -np.inf for v in log_values):
        raise DegenerateStateError(
            "every alternative's acquisition estimate is -inf; cannot rank"
        )
    best = int(np.argmax(log_values))  # ties resolve to the lowest index
    return best, log_values


def ikg_decide(
    state: BeliefState,
    ctx: PolicyContext,
    sga_config: SgaConfig,
    optimizer: str = "sga",
    saa_size: int | None = None,
    saa_multistart: int = 1,
):
    """One full decision: per-alternative candidate search, then the
    shared-batch comparison.

    Returns ``(SamplingDecision, diagnostics)`` where diagnostics carry
    the candidate locations, their log acquisition values, and the
    optimizer init points.
    """
    M = state.num_alternatives
    streams = ctx.rng.spawn(M + 1)
    candidates, inits = [], []
    for i in range(M):
        stream = streams[i]
        if optimizer == "sga":
            result = optimize(
                _gradient_oracle(state, i, ctx, sga_config.batch_size,
                                 planned_iters=sga_config.max_iters),
                ctx.domain, sga_config, stream,
            )
            candidates.append(result.solution)
            inits.append(result.init_point)
        elif optimizer == "saa":
            if saa_size is None or saa_size < 1:
                raise ValueError("saa_size must be a positive integer in saa mode")
            frozen = ctx.density.sample(ctx.domain, int(saa_size), stream)
            x0 = ctx.domain.sample_uniform(stream)
            best = optimize_saa(
                _frozen_objective(state, i, ctx, frozen),
                ctx.domain, saa_multistart, stream, init=x0,
            )
            candidates.append(best)
            inits.append(x0)
        else:
            raise ValueError(f"unknown optimizer mode {optimizer!r}")
    best, log_values = _compare_on_shared_batch(state, ctx, candidates, streams[M])
    decision = SamplingDecision(best, candidates[best])
    diagnostics = {
        "candidates": [c.copy() for c in candidates],
        "log_ikg": list(log_values),
        "init_points": [p.copy() for p in inits],
    }
    return decision, diagnostics


def ikgwrc_decide(state: BeliefState, ctx: PolicyContext) -> SamplingDecision:
    """Random-candidate variant: candidates are the would-be ascent inits."""
    M = state.num_alternatives
    streams = ctx.rng.spawn(M + 1)
    candidates = [ctx.domain.sample_uniform(streams[i]) for i in range(M)]
    best, _ = _compare_on_shared_batch(state, ctx, candidates, streams[M])
    return SamplingDecision(best, candidates[best])


def prs_decide(state: BeliefState, ctx: PolicyContext) -> SamplingDecision:
    """Uniform alternative at a uniform location."""
    alternative = int(ctx.rng.integers(state.num_alternatives))
    return SamplingDecision(alternative, ctx.domain.sample_uniform(ctx.rng))


def learned_decision_rule(state: BeliefState, x) -> int:
    """Alternative with the highest posterior mean at x; ties go low."""
    x = _as_vector(x, state.dim, "x")
    return int(np.argmax(state.means_at(x[None, :])[:, 0]))


# -- policy objects --------------------------------------------------------


class IkgPolicy:
    """Integrated knowledge-gradient policy (optionally in frozen-batch
    deterministic-optimizer mode)."""

    def __init__(self, sga_config: SgaConfig, optimizer: str = "sga",
                 saa_size: int | None = None, saa_multistart: int = 1) -> None:
        if optimizer not in ("sga", "saa"):
            raise ValueError(f"unknown optimizer mode {optimizer!r}")
        self.sga_config = sga_config
        self.optimizer = optimizer
        self.saa_size = saa_size
        self.saa_multistart = saa_multistart
        self.name = "ikg" if optimizer == "sga" else "ikg_saa"

    def decide(self, state, ctx):
        return ikg_decide(
            state, ctx, self.sga_config,
            optimizer=self.optimizer,
            saa_size=self.saa_size,
            saa_multistart=self.saa_multistart,
        )

    def observe(self, decision, y):
        pass


class IkgRandomCandidatePolicy:
    name = "ikgwrc"

    def decide(self, state, ctx):
        return ikgwrc_decide(state, ctx), None

    def observe(self, decision, y):
        pass


class PrsPolicy:
    name = "prs"

    def decide(self, state, ctx):
        return prs_decide(state, ctx), None

    def observe(self, decision, y):
        pass


class BsePolicy:
    """Binned successive elimination.

    Parameters
    ----------
    bins_per_dim : int
        Uniform divisions per coordinate; the box splits into
        ``bins_per_dim ** d`` independent elimination problems.
    budget : float
        Total sampling budget B; enters the elimination radius.
    threshold_scale : float, optional
        The multiplier c in the elimination rule
        ``leader_mean - arm_mean > c * sqrt(2 log(B*M) / T_arm)``.

    Notes
    -----
    Bin statistics live in the policy instance, so a fresh instance is
    needed per run. Arms never eliminate down to an empty bin: the last
    active arm in a bin always survives. Locations map to bins by
    ``floor(bins * (x - lower) / (upper - lower))`` clamped to the top
    bin at the upper boundary.
    """

    name = "bse"

    def __init__(self, bins_per_dim: int, budget: float,
                 threshold_scale: float = 2.0) -> None:
        if int(bins_per_dim) != bins_per_dim or bins_per_dim < 1:
            raise ValueError("bins_per_dim must be a positive integer")
        if not (np.isfinite(budget) and budget > 0):
            raise ValueError("budget must be positive")
        if not (np.isfinite(threshold_scale) and threshold_scale > 0):
            raise ValueError("threshold_scale must be positive")
        self.bins_per_dim = int(bins_per_dim)
        self.budget = float(budget)
        self.threshold_scale = float(threshold_scale)
        self._bins: dict = {}
        self._num_alternatives: int | None = None
        self._domain: BoxDomain | None = None

    def bin_index(self, x, domain: BoxDomain) -> tuple:
        frac = (np.asarray(x, dtype=float) - domain.lower) / (
            domain.upper - domain.lower
        )
        idx = np.floor(self.bins_per_dim * frac).astype(int)
        idx = np.clip(idx, 0, self.bins_per_dim - 1)
        return tuple(int(j) for j in idx)

    def _bin_stats(self, key: tuple, M: int):
        stats = self._bins.get(key)
        if stats is None:
            stats = {
                "counts": np.zeros(M, dtype=int),
                "sums": np.zeros(M),
                "active": np.ones(M, dtype=bool),
            }
            self._bins[key] = stats
        return stats

    def decide(self, state, ctx):
        M = state.num_alternatives
        self._num_alternatives = M
        self._domain = ctx.domain
        location = ctx.domain.sample_uniform(ctx.rng)
        stats = self._bin_stats(self.bin_index(location, ctx.domain), M)
        active = np.flatnonzero(stats["active"])
        if active.size == 0:
            raise AssertionError("bin with empty active set; elimination bug")
        counts = stats["counts"][active]
        choice = int(active[int(np.argmin(counts))])  # round-robin, ties go low
        return SamplingDecision(choice, location), None

    def observe(self, decision, y):
        if self._domain is None or self._num_alternatives is None:
            raise AssertionError("observe called before any decision")
        stats = self._bin_stats(
            self.bin_index(decision.location, self._domain), self._num_alternatives
        )
        arm = decision.alternative
        stats["counts"][arm] += 1
        stats["sums"][arm] += float(y)
        self._eliminate(stats)

    def _eliminate(self, stats):
        counts, sums, active = stats["counts"], stats["sums"], stats["active"]
        sampled = active & (counts > 0)
        if sampled.sum() < 2:
            return
        means = np.full(counts.shape, -np.inf)
        means[sampled] = sums[sampled] / counts[sampled]
        leader = means[sampled].max()
        # log(B*M) can only be <= 0 for degenerate tiny budgets; floor at 0.
        log_term = max(np.log(self.budget * counts.size), 0.0)
        for arm in np.flatnonzero(sampled):
            if active.sum() <= 1:
                break
            radius = self.threshold_scale * np.sqrt(2.0 * log_term / counts[arm])
            if leader - means[arm] > radius:
                active[arm] = False


# -- budget loop ---------------------------------------------------------------


def run_budget_loop(
    policy,
    problem,
    budget: float,
    rng: np.random.Generator,
    saa_batch: int | None = None,
    checkpoints=(),
    oc_evaluator=None,
    noise_view=None,
    noise_grad_view=None,
    cost_view=None,
    cost_grad_view=None,
    initial_state: BeliefState | None = None,
    record_timing: bool = False,
    seed=None,
) -> RunRecord:
    """Run one policy against one problem until the budget is exhausted.

    Parameters
    ----------
    policy : object
        Needs ``decide(state, ctx) -> (SamplingDecision, diagnostics)``,
        ``observe(decision, y)`` and a ``name``.
    problem : ikg.experiments.Problem
        Supplies truth, noise, cost, density, domain, prior, and M.
    budget : float
        Total sampling budget B. Decision n is taken iff spent < B.
    rng : numpy Generator
        Split once into a decision stream and an observation stream.
    saa_batch : int, optional
        Shared comparison-batch size J; defaults to 500 * d**2.
    checkpoints : sequence of float, optional
        Budget levels at which to snapshot progress (and evaluate
        ``oc_evaluator`` when given). A checkpoint fires the first time
        cumulative spend reaches it.
    oc_evaluator : callable, optional
        ``oc_evaluator(state, budget_point) -> float``.
    noise_view, cost_view : list of callables, optional
        What the policy and the belief update believe about noise and
        cost; defaults to the truth. Observations are always drawn with
        the true noise and the ledger always charges the true cost.
    noise_grad_view, cost_grad_view : list, optional
        Matching gradient callables (``None`` entries for constants).
    initial_state : BeliefState, optional
        Defaults to the problem's fresh prior state.
    record_timing : bool, optional
        Accumulate wall-clock milliseconds spent inside ``decide``.

    Returns
    -------
    RunRecord
    """
    if not (np.isfinite(budget) and budget > 0):
        raise ValueError("budget must be positive")
    d = problem.d
    decision_rng, obs_rng = rng.spawn(2)
    state = initial_state if initial_state is not None else problem.fresh_state()
    ctx = PolicyContext(
        domain=problem.domain,
        density=problem.density,
        noise_fns=noise_view if noise_view is not None else problem.noise_fns(),
        cost_fns=cost_view if cost_view is not None else problem.cost_fns(),
        noise_grad_fns=(
            noise_grad_view if noise_grad_view is not None else problem.noise_grad_fns()
        ),
        cost_grad_fns=(
            cost_grad_view if cost_grad_view is not None else problem.cost_grad_fns()
        ),
        rng=decision_rng,
        saa_batch=int(saa_batch) if saa_batch is not None else 500 * d * d,
    )
    ledger = BudgetLedger(budget=float(budget))
    record = RunRecord(policy_id=policy.name, problem_id=problem.name, seed=seed,
                       ledger=ledger)
    pending = sorted(set(float(c) for c in checkpoints))
    if any(c <= 0 for c in pending):
        raise ValueError("checkpoints must be positive budget levels")
    next_cp = 0
    wall_ms = 0.0
    while ledger.spent < budget:
        tic = time.perf_counter() if record_timing else 0.0
        decision, _ = policy.decide(state, ctx)
        if record_timing:
            wall_ms += (time.perf_counter() - tic) * 1000.0
        i = decision.alternative
        location = decision.location
        y = problem.sample_observation(i, location, obs_rng)
        if not np.isfinite(y):
            raise NumericalError(f"non-finite observation {y!r} drawn at step "
                                 f"{ledger.n_samples}")
        policy.observe(decision, y)
        cost = problem.cost(i, location)
        model_noise = ctx.noise_fns[i](location)
        state = state.update_with(i, Observation(location, y, model_noise), cost)
        ledger.charge(cost)
        record.decisions.append((decision, float(y), float(cost)))
        while next_cp < len(pending) and ledger.spent >= pending[next_cp]:
            point = pending[next_cp]
            if oc_evaluator is not None:
                record.oc_evals.append((point, float(oc_evaluator(state, point))))
            record.checkpoints.append(
                (
                    point,
                    {
                        "n_samples": ledger.n_samples,
                        "spent": ledger.spent,
                        "wall_ms": wall_ms,
                        "sample_counts": state.sample_counts.tolist(),
                    },
                )
            )
            next_cp += 1
    record.final_state = state
    record.wall_ms = wall_ms
    return record
