"""Scoring of learned maps and the experiment protocols around them.

Implements the abstraction error, leave-one-pair-out evaluation with
repetitions, grid search over convex weight combinations, the three
single-pair baselines, and the downstream regression protocol for the
battery-manufacturing scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import DivergenceKind, bregman_div
from .costs import CostMatrix, hamming_cost, omega_cost
from .domain import DomainIndex
from .errors import DomainMismatch, EmptyClass, InsufficientPairs, SchemaMismatch
from .interventions import maximal_chains
from .maps import AggregationMode, StochasticMap, aggregate, plan_to_map, pushforward_weights
from .measures import PairSet
from .model import exact_distribution, make_rng
from .scenarios import (
    EBM_BASE_CLASSES,
    EBM_CLASS_MAP,
    Scenario,
    ebm_pairs,
    ebm_state_index,
)
from .solver import (
    CotaWeights,
    SolverConfig,
    build_links,
    lp_ot_oracle,
    sinkhorn,
    solve_cota,
    wasserstein_barycenter,
)

LP_METRIC_CAP = 400


@dataclass(frozen=True)
class ErrorMetric:
    """JSD, or Wasserstein with an explicit ground cost on the abs domain."""

    kind: str  # "jsd" | "wass"
    ground: CostMatrix | None = None

    def __post_init__(self):
        if self.kind not in ("jsd", "wass"):
            raise SchemaMismatch(f"unknown metric {self.kind!r}")
        if self.kind == "wass" and self.ground is None:
            raise SchemaMismatch("wass metric needs a ground cost")


def intervention_weights(n: int, point_mass: int | None = None) -> np.ndarray:
    """Uniform weights over the intervention set, or a point mass."""
    if point_mass is None:
        return np.full(n, 1.0 / n)
    w = np.zeros(n)
    w[point_mass] = 1.0
    return w


def identity_alignment(domain: DomainIndex) -> dict:
    return {name: [name] for name in domain.names}


def ground_cost_for(scenario: Scenario) -> CostMatrix:
    """Ground metric on the abstracted domain for the Wasserstein error."""
    domain = scenario.abs_domain
    if scenario.wass_ground == "bin_index":
        total = np.zeros((domain.size, domain.size))
        for name in domain.names:
            col = domain.value_column(name).astype(float)
            total += np.abs(col[:, None] - col[None, :])
        return CostMatrix(total)
    return hamming_cost(domain, domain, identity_alignment(domain))


def wasserstein_distance(u, v, ground: CostMatrix, epsilon: float = 1e-3) -> float:
    """Transport cost between two measures on one domain (exact LP when small)."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if ground.shape[0] * ground.shape[1] <= LP_METRIC_CAP:
        plan = lp_ot_oracle(ground, u, v)
    else:
        plan = sinkhorn(ground, u, v, epsilon, tol=1e-9, max_iter=20000)
    return float(np.sum(ground.entries * plan.matrix))


def divergence_between(metric: ErrorMetric, pushed: np.ndarray, target: np.ndarray) -> float:
    if metric.kind == "jsd":
        return bregman_div(DivergenceKind.JSD, pushed, target)
    return wasserstein_distance(pushed, target, metric.ground)


def abstraction_error(
    tau: StochasticMap, pairs: PairSet, metric: ErrorMetric, q=None
) -> float:
    """Expected divergence between pushed base measures and abstracted ones."""
    weights = intervention_weights(len(pairs)) if q is None else np.asarray(q, float)
    if len(weights) != len(pairs):
        raise DomainMismatch(f"{len(weights)} weights for {len(pairs)} pairs")
    if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < 0):
        raise DomainMismatch("q must lie on the simplex")
    total = 0.0
    for w, pair in zip(weights, pairs):
        if w == 0:
            continue
        pushed = pushforward_weights(tau, pair.base.weights)
        total += w * divergence_between(metric, pushed, pair.abstracted.weights)
    return float(total)


# ---------------------------------------------------------------------------
# Map learners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """One row of the results table: a learner and its settings."""

    kind: str  # cota | pwise | map | bary
    weights: CotaWeights | None = None
    divergence: DivergenceKind = DivergenceKind.FRO
    aggregation: AggregationMode = AggregationMode.PLAN_AVERAGE
    mode: str = "exact"

    def label(self) -> str:
        if self.kind == "cota":
            agg = "plan" if self.aggregation is AggregationMode.PLAN_AVERAGE else "map"
            return f"cota_{agg}_{self.divergence.value}_{self.mode}"
        return self.kind


@dataclass(frozen=True)
class ExperimentContext:
    """Precomputed per-(pairs, cost) data reused across solves."""

    scenario: Scenario
    cost: CostMatrix
    solver: SolverConfig
    exact_base: dict | None = None
    exact_abs: dict | None = None


def build_cost(scenario: Scenario, cost_kind: str, poset=None, omega=None) -> CostMatrix:
    poset = poset if poset is not None else scenario.poset
    omega = omega if omega is not None else scenario.omega
    if cost_kind == "omega":
        return omega_cost(scenario.base_domain, scenario.abs_domain, poset, omega)
    if cost_kind == "hamming":
        return hamming_cost(
            scenario.base_domain, scenario.abs_domain, scenario.hamming_alignment
        )
    raise SchemaMismatch(f"unknown cost kind {cost_kind!r}")


def make_context(
    scenario: Scenario, cost_kind: str, solver: SolverConfig
) -> ExperimentContext:
    exact_base = exact_abs = None
    if solver.z_source == "analytic":
        exact_base = {
            iota: exact_distribution(scenario.base, iota).probs for iota in scenario.poset
        }
        exact_abs = {
            iota: exact_distribution(scenario.abstracted, iota).probs
            for iota in scenario.abs_poset
        }
    return ExperimentContext(
        scenario=scenario,
        cost=build_cost(scenario, cost_kind),
        solver=solver,
        exact_base=exact_base,
        exact_abs=exact_abs,
    )


def chain_problems(ctx: ExperimentContext, pairs: PairSet):
    """(measures, links) per maximal chain of the pair set's poset."""
    problems = []
    for chain in maximal_chains(pairs.poset):
        measures = [
            (pairs.get(i).base.weights, pairs.get(i).abstracted.weights) for i in chain
        ]
        links = build_links(
            chain,
            ctx.scenario.base_domain,
            ctx.scenario.abs_domain,
            ctx.scenario.base,
            ctx.scenario.abstracted,
            pairs.omega,
            z_source=ctx.solver.z_source,
            smoothing=ctx.solver.smoothing,
            exact_base=ctx.exact_base,
            exact_abs=ctx.exact_abs,
        )
        problems.append((measures, links))
    return problems


def learn_cota(
    ctx: ExperimentContext,
    pairs: PairSet,
    weights: CotaWeights,
    divergence: DivergenceKind,
    aggregation: AggregationMode,
    mode: str | None = None,
    problems=None,
):
    """Solve every maximal chain and aggregate all resulting plans."""
    cfg = ctx.solver if mode is None else replace(ctx.solver, mode=mode)
    problems = problems if problems is not None else chain_problems(ctx, pairs)
    all_plans = []
    reports = []
    for measures, links in problems:
        plans, report = solve_cota(measures, ctx.cost, weights, cfg, links, divergence)
        all_plans.extend(p.matrix for p in plans)
        reports.append(report)
    return aggregate(all_plans, aggregation), reports


def learn_baseline(ctx: ExperimentContext, pairs: PairSet, kind: str) -> StochasticMap:
    """Single-pair baselines: independent plans or barycentric reduction."""
    cfg = ctx.solver
    if kind in ("pwise", "map"):
        plans = [
            sinkhorn(
                ctx.cost,
                pair.base.weights,
                pair.abstracted.weights,
                cfg.epsilon,
                tol=cfg.marginal_tol,
                max_iter=max(cfg.max_sinkhorn_iters, 5000),
            ).matrix
            for pair in pairs
        ]
        mode = AggregationMode.PLAN_AVERAGE if kind == "pwise" else AggregationMode.MAP_AVERAGE
        return aggregate(plans, mode)
    if kind == "bary":
        base_domain = ctx.scenario.base_domain
        abs_domain = ctx.scenario.abs_domain
        base_ground = hamming_cost(base_domain, base_domain, identity_alignment(base_domain))
        abs_ground = hamming_cost(abs_domain, abs_domain, identity_alignment(abs_domain))
        bary_eps = max(cfg.epsilon, 0.05)  # barycenter needs a workable kernel
        base_bary = wasserstein_barycenter(
            [p.base.weights for p in pairs], base_ground, bary_eps, tol=1e-7, max_iter=5000
        )
        abs_bary = wasserstein_barycenter(
            [p.abstracted.weights for p in pairs], abs_ground, bary_eps, tol=1e-7, max_iter=5000
        )
        # the barycenters are dense with very small entries; the final
        # coupling keeps the barycentric kernel scale for tractability
        plan = sinkhorn(
            ctx.cost, base_bary, abs_bary, bary_eps,
            tol=cfg.marginal_tol, max_iter=max(cfg.max_sinkhorn_iters, 5000),
        )
        return plan_to_map(plan)
    raise SchemaMismatch(f"unknown baseline {kind!r}")


def learn(ctx: ExperimentContext, pairs: PairSet, spec: MethodSpec, problems=None) -> StochasticMap:
    if spec.kind == "cota":
        if spec.weights is None:
            raise SchemaMismatch("cota method needs weights")
        tau, _ = learn_cota(
            ctx, pairs, spec.weights, spec.divergence, spec.aggregation, spec.mode, problems
        )
        return tau
    return learn_baseline(ctx, pairs, spec.kind)


# ---------------------------------------------------------------------------
# Leave-one-pair-out evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    method: str
    metric: str
    per_holdout: dict
    per_rep: list
    mean: float
    std: float
    repetitions: int
    ci_half_width: float
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "metric": self.metric,
            "per_holdout": {str(k): v for k, v in self.per_holdout.items()},
            "per_rep": self.per_rep,
            "mean": self.mean,
            "std": self.std,
            "repetitions": self.repetitions,
            "ci_half_width": self.ci_half_width,
            "config": self.config_echo,
        }


def _summarize(method, metric_kind, per_rep, per_holdout_acc, reps, echo):
    per_rep = [float(x) for x in per_rep]
    mean = float(np.mean(per_rep))
    std = float(np.std(per_rep, ddof=0)) if len(per_rep) > 1 else 0.0
    ci = 1.96 * std / np.sqrt(len(per_rep)) if len(per_rep) > 1 else 0.0
    per_holdout = {k: float(np.mean(v)) for k, v in per_holdout_acc.items()}
    return EvalReport(
        method=method,
        metric=metric_kind,
        per_holdout=per_holdout,
        per_rep=per_rep,
        mean=mean,
        std=std,
        repetitions=reps,
        ci_half_width=float(ci),
        config_echo=echo,
    )


@dataclass(frozen=True)
class Experiment:
    """A full evaluation recipe for one scenario."""

    scenario: Scenario
    cost_kind: str = "omega"
    n_base: int = 1000
    n_abs: int = 1000
    repetitions: int = 10
    seed: int = 0
    solver: SolverConfig = SolverConfig()
    metric_kind: str = "jsd"
    data_backed: bool = False  # EBM: pairs come from the scenario tables

    def metric(self) -> ErrorMetric:
        if self.metric_kind == "wass":
            return ErrorMetric("wass", ground_cost_for(self.scenario))
        return ErrorMetric("jsd")

    def pairs_for_rep(self, rep: int) -> PairSet:
        if self.data_backed:
            return ebm_pairs(self.scenario)
        return self.scenario.sample_pairs(
            n_base=self.n_base, n_abs=self.n_abs, seed=(self.seed, rep)
        )

    def context(self) -> ExperimentContext:
        return make_context(self.scenario, self.cost_kind, self.solver)


def holdout_error(
    ctx: ExperimentContext, pairs: PairSet, spec: MethodSpec, held, metric: ErrorMetric
) -> float:
    reduced = pairs.without(held)
    tau = learn(ctx, reduced, spec)
    pair = pairs.get(held)
    pushed = pushforward_weights(tau, pair.base.weights)
    return divergence_between(metric, pushed, pair.abstracted.weights)


def loo_evaluate(experiment: Experiment, spec: MethodSpec) -> EvalReport:
    """Hold out each pair in turn, learn on the rest, score the held pair."""
    poset = experiment.scenario.poset
    if len(poset) < 2:
        raise InsufficientPairs(len(poset))
    ctx = experiment.context()
    metric = experiment.metric()
    per_rep = []
    per_holdout_acc: dict = {i: [] for i in poset}
    for rep in range(experiment.repetitions):
        pairs = experiment.pairs_for_rep(rep)
        errs = []
        for held in poset:
            e = holdout_error(ctx, pairs, spec, held, metric)
            errs.append(e)
            per_holdout_acc[held].append(e)
        per_rep.append(float(np.mean(errs)))
    echo = {
        "scenario": experiment.scenario.name,
        "cost": experiment.cost_kind,
        "n_base": experiment.n_base,
        "n_abs": experiment.n_abs,
        "seed": experiment.seed,
        "mode": spec.mode,
    }
    return _summarize(spec.label(), metric.kind, per_rep, per_holdout_acc, experiment.repetitions, echo)


# ---------------------------------------------------------------------------
# Grid search over convex weight combinations
# ---------------------------------------------------------------------------


def weight_grid(step: float = 0.1) -> list:
    """All convex (transport, constraint, entropy) lattice combinations.

    The constraint weight is split evenly between the base and abstracted
    terms, mirroring the three-parameter search.
    """
    n = round(1.0 / step)
    grid = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            grid.append(CotaWeights.fold(i / n, j / n, k / n))
    return grid


@dataclass
class GridResult:
    best_weights: CotaWeights
    best_error: float
    surface: list  # (CotaWeights, mean error) rows
    reports: dict = field(default_factory=dict)

    def lambda_zero_best(self) -> float:
        errs = [e for w, e in self.surface if w.lam + w.lam_prime == 0]
        return min(errs) if errs else float("nan")


def grid_search(
    experiment: Experiment,
    grid=None,
    divergence: DivergenceKind = DivergenceKind.FRO,
    aggregation: AggregationMode = AggregationMode.PLAN_AVERAGE,
    mode: str = "exact",
) -> GridResult:
    """Leave-one-pair-out error per grid point; samples shared across points.

    Every grid point is evaluated on the same per-repetition pair sets and
    the same held-out splits, so surface differences reflect the weights.
    """
    grid = grid if grid is not None else weight_grid(experiment.scenario.grid_step)
    if not grid:
        raise SchemaMismatch("empty weight grid")
    poset = experiment.scenario.poset
    if len(poset) < 2:
        raise InsufficientPairs(len(poset))
    ctx = experiment.context()
    metric = experiment.metric()
    errors = np.zeros((len(grid), experiment.repetitions))
    for rep in range(experiment.repetitions):
        pairs = experiment.pairs_for_rep(rep)
        holdout_problems = [
            (held, chain_problems(ctx, pairs.without(held))) for held in poset
        ]
        for g, w in enumerate(grid):
            errs = []
            for held, problems in holdout_problems:
                reduced = pairs.without(held)
                tau, _ = learn_cota(
                    ctx, reduced, w, divergence, aggregation, mode, problems
                )
                pair = pairs.get(held)
                pushed = pushforward_weights(tau, pair.base.weights)
                errs.append(divergence_between(metric, pushed, pair.abstracted.weights))
            errors[g, rep] = float(np.mean(errs))
    means = errors.mean(axis=1)
    best = int(np.argmin(means))
    surface = [(w, float(means[g])) for g, w in enumerate(grid)]
    return GridResult(
        best_weights=grid[best],
        best_error=float(means[best]),
        surface=surface,
        reports={"per_rep": errors.tolist()},
    )


# ---------------------------------------------------------------------------
# Downstream regression protocol
# ---------------------------------------------------------------------------


def _ols_fit(points):
    xs = np.array([p[0] for p in points], float)
    ys = np.array([p[1] for p in points], float)
    design = np.stack([np.ones_like(xs), xs], axis=1)
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    return coef


def _ols_mse(coef, points) -> float:
    xs = np.array([p[0] for p in points], float)
    ys = np.array([p[1] for p in points], float)
    pred = coef[0] + coef[1] * xs
    return float(np.mean((ys - pred) ** 2))


def abstract_wmg_rows(
    scenario: Scenario, tau: StochasticMap, rows, how: str = "expectation", seed=0
):
    """Map raw base-lab rows through the learned map onto (control, outcome).

    Expectation mode returns the mean abstracted control value and the mean
    outcome-bin midpoint; sampling mode draws one abstracted state per row.
    """
    abs_domain = scenario.abs_domain
    cg_values = np.array(
        [a["CG'"] for a in abs_domain.assignments()], dtype=float
    )
    mid = scenario.binning["ML"]["mids"]
    ml_values = np.array([mid[a["ML'"]] for a in abs_domain.assignments()])
    rng = make_rng(("abstract-rows", seed)) if how == "sample" else None
    out = []
    for row in rows:
        j = ebm_state_index(scenario, row, "base")
        col = tau.matrix[:, j]
        if how == "expectation":
            out.append((float(cg_values @ col), float(ml_values @ col)))
        else:
            pick = rng.choice(len(col), p=col / col.sum())
            out.append((float(cg_values[pick]), float(ml_values[pick])))
    return out


def downstream_regression(
    scenario: Scenario,
    tau: StochasticMap,
    how: str = "expectation",
    seed=0,
) -> dict:
    """Three extrapolation tasks per held-out control class; MSE for each.

    Task 1 trains on the high-level rows without class k and tests on class
    k.  Task 2 adds all abstracted base-lab rows to the training set.  Task
    3 adds only abstracted rows outside class k and tests on both labs'
    class-k rows (base-lab rows abstracted).
    """
    lrcs = scenario.tables.get("lrcs")
    wmg = scenario.tables.get("wmg")
    if not lrcs or not wmg:
        raise SchemaMismatch("scenario carries no regression tables")
    abstracted = abstract_wmg_rows(scenario, tau, wmg, how=how, seed=seed)
    wmg_class = [int(r["CG"]) for r in wmg]
    lrcs_pts = [(float(r["CG"]), float(r["ML"])) for r in lrcs]
    lrcs_class = [int(r["CG"]) for r in lrcs]
    results = {1: [], 2: [], 3: []}
    for k in sorted(set(lrcs_class)):
        inv = [c for c in EBM_BASE_CLASSES if EBM_CLASS_MAP[c] == k]
        train_lrcs = [p for p, c in zip(lrcs_pts, lrcs_class) if c != k]
        test_lrcs = [p for p, c in zip(lrcs_pts, lrcs_class) if c == k]
        if not test_lrcs:
            raise EmptyClass(k)
        abs_all = abstracted
        abs_not_k = [p for p, c in zip(abstracted, wmg_class) if c not in inv]
        abs_k = [p for p, c in zip(abstracted, wmg_class) if c in inv]
        coef1 = _ols_fit(train_lrcs)
        results[1].append(_ols_mse(coef1, test_lrcs))
        coef2 = _ols_fit(train_lrcs + abs_all)
        results[2].append(_ols_mse(coef2, test_lrcs))
        coef3 = _ols_fit(train_lrcs + abs_not_k)
        results[3].append(_ols_mse(coef3, test_lrcs + abs_k))
    return {
        task: {
            "per_class": vals,
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals, ddof=0)),
        }
        for task, vals in results.items()
    }
