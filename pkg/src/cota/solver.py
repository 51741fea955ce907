"""Entropic OT, exact LP oracle, fixed-support barycenters, and the joint
chain solver for do-calculus-coupled transport plans.

Plans are (abs-domain x base-domain) matrices: row sums must match the
abstracted marginal, column sums the base marginal.  The joint solver runs
exponentiated-gradient (mirror descent in the entropic geometry) steps on
all plans of a chain, followed by an alternating-scaling projection of each
plan back onto its transport polytope.  Everything is kept in the log
domain so tiny entries and empty marginal support are handled exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .constraints import (
    DivergenceKind,
    IndexSets,
    NormalizingVectors,
    analytic_normalizing_vectors,
    delta_abs,
    delta_abs_elementwise,
    delta_abs_elementwise_grads,
    delta_abs_grads,
    delta_approx,
    delta_approx_grads,
    delta_base,
    delta_base_elementwise,
    delta_base_elementwise_grads,
    delta_base_grads,
    normalizing_vectors,
)
from .errors import (
    EmptyList,
    NoConvergence,
    ShapeMismatch,
    SizeExceeded,
    ZeroMassMarginal,
)

LP_CELL_CAP = 400
_NEG_INF = -np.inf


def _weights_of(measure) -> np.ndarray:
    return measure.weights if hasattr(measure, "weights") else np.asarray(measure, float)


@dataclass(frozen=True)
class TransportPlan:
    """A coupling with references to the marginals it must match."""

    matrix: np.ndarray  # (D', D)
    row_marginal: np.ndarray  # abstracted side, length D'
    col_marginal: np.ndarray  # base side, length D

    def marginal_violation(self) -> float:
        """Max of the two one-sided L1 marginal violations."""
        row = float(np.abs(self.matrix.sum(axis=1) - self.row_marginal).sum())
        col = float(np.abs(self.matrix.sum(axis=0) - self.col_marginal).sum())
        return max(row, col)


@dataclass(frozen=True)
class CotaWeights:
    """Convex combination weighting transport cost, constraints and entropy."""

    kappa: float
    lam: float
    lam_prime: float
    mu: float

    def __post_init__(self):
        vals = (self.kappa, self.lam, self.lam_prime, self.mu)
        if any(v < 0 for v in vals):
            raise ShapeMismatch("nonnegative weights", vals)
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ShapeMismatch("weights summing to 1", sum(vals))

    @staticmethod
    def fold(kappa: float, lam: float, mu: float) -> "CotaWeights":
        """Three-parameter grid form: the constraint weight splits evenly."""
        return CotaWeights(kappa, lam / 2.0, lam / 2.0, mu)

    def as_tuple(self):
        return (self.kappa, self.lam, self.lam_prime, self.mu)


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 500
    max_sinkhorn_iters: int = 1000
    step_size: float | None = None  # None: 0.5 over a gradient-scale estimate
    marginal_tol: float = 1e-6
    objective_tol: float = 1e-8
    epsilon: float = 5e-3  # entropic scale for the single-pair baselines
    mode: str = "exact"  # exact | approx
    z_source: str = "plan"  # plan | analytic
    smoothing: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.marginal_tol <= 0 or self.objective_tol <= 0:
            raise ShapeMismatch("positive tolerances", (self.marginal_tol, self.objective_tol))
        if self.max_outer_iters < 1 or self.max_sinkhorn_iters < 1:
            raise ShapeMismatch("iters >= 1", (self.max_outer_iters, self.max_sinkhorn_iters))
        if self.mode not in ("exact", "approx"):
            raise ShapeMismatch("mode exact|approx", self.mode)
        if self.z_source not in ("plan", "analytic"):
            raise ShapeMismatch("z_source plan|analytic", self.z_source)


@dataclass
class SolveReport:
    final_objective: float
    breakdown: dict
    trace: list = field(default_factory=list)
    max_marginal_violation: float = 0.0
    converged: bool = False
    n_outer: int = 0


def entropy(plan: np.ndarray) -> float:
    """Discrete plan entropy -sum P (log P - 1), with 0 log 0 = 0."""
    p = np.asarray(plan, dtype=float)
    mask = p > 0
    return float(-(p[mask] * (np.log(p[mask]) - 1.0)).sum())


# ---------------------------------------------------------------------------
# Single-pair entropic OT
# ---------------------------------------------------------------------------


def _log_projection_sweeps(log_p, log_row, log_col, pos_r, pos_c, tol, max_iter):
    """Alternating row/col scalings in the log domain until L1 violation <= tol."""
    for it in range(max_iter):
        row_lse = logsumexp(log_p[pos_r][:, pos_c], axis=1)
        log_p[pos_r] += (log_row[pos_r] - row_lse)[:, None]
        col_lse = logsumexp(log_p[pos_r][:, pos_c], axis=0)
        log_p[:, pos_c] += (log_col[pos_c] - col_lse)[None, :]
        # after the column fix, columns are exact; only rows can violate
        row_mass = np.exp(logsumexp(log_p[pos_r][:, pos_c], axis=1))
        violation = float(np.abs(row_mass - np.exp(log_row[pos_r])).sum())
        if violation <= tol:
            return it + 1, violation
    return max_iter, violation


def sinkhorn(
    cost,
    alpha,
    beta,
    eps: float,
    tol: float = 1e-9,
    max_iter: int = 1000,
) -> TransportPlan:
    """Entropic OT between base marginal ``alpha`` and abstracted ``beta``.

    Log-domain scaling iterations; raises NoConvergence if the L1 marginal
    violation is still above ``tol`` after ``max_iter`` sweeps.
    """
    c = cost.entries if hasattr(cost, "entries") else np.asarray(cost, float)
    a = _weights_of(alpha)
    b = _weights_of(beta)
    if c.shape != (len(b), len(a)):
        raise ShapeMismatch((len(b), len(a)), c.shape)
    if a.sum() <= 0:
        raise ZeroMassMarginal("base")
    if b.sum() <= 0:
        raise ZeroMassMarginal("abstracted")
    if eps <= 0:
        raise ShapeMismatch("eps > 0", eps)
    pos_c = a > 0
    pos_r = b > 0
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    log_p = np.where(np.outer(pos_r, pos_c), -c / eps, _NEG_INF)
    iters, violation = _log_projection_sweeps(
        log_p, log_b, log_a, pos_r, pos_c, tol, max_iter
    )
    if violation > tol:
        raise NoConvergence("sinkhorn", iters, violation)
    return TransportPlan(np.exp(log_p), b, a)


def lp_ot_oracle(cost, alpha, beta) -> TransportPlan:
    """Exact minimizer of <C, P> over the transport polytope (test oracle).

    Solved as a linear program over the flattened plan; capped at
    LP_CELL_CAP cells.
    """
    c = cost.entries if hasattr(cost, "entries") else np.asarray(cost, float)
    a = _weights_of(alpha)
    b = _weights_of(beta)
    n_rows, n_cols = c.shape
    if n_rows * n_cols > LP_CELL_CAP:
        raise SizeExceeded(n_rows * n_cols, LP_CELL_CAP)
    if c.shape != (len(b), len(a)):
        raise ShapeMismatch((len(b), len(a)), c.shape)
    a = a / a.sum()
    b = b / b.sum()
    n_cells = n_rows * n_cols
    eq_rows = np.zeros((n_rows + n_cols - 1, n_cells))
    rhs = np.zeros(n_rows + n_cols - 1)
    for i in range(n_rows):
        eq_rows[i, i * n_cols : (i + 1) * n_cols] = 1.0
        rhs[i] = b[i]
    for j in range(n_cols - 1):  # last column constraint is redundant
        eq_rows[n_rows + j, j::n_cols] = 1.0
        rhs[n_rows + j] = a[j]
    res = linprog(c.ravel(), A_eq=eq_rows, b_eq=rhs, bounds=(0, None), method="highs")
    if not res.success:
        raise NoConvergence("lp oracle", 0, float("nan"))
    return TransportPlan(res.x.reshape(n_rows, n_cols), b, a)


def wasserstein_barycenter(
    measures,
    ground_cost,
    eps: float,
    weights=None,
    tol: float = 1e-9,
    max_iter: int = 1000,
):
    """Fixed-support entropic barycenter by iterative Bregman projections.

    All measures share one domain; ``ground_cost`` is the square cost on it.
    Returns the barycenter weight vector (callers wrap it into a measure).
    """
    if not measures:
        raise EmptyList("measures")
    vs = [_weights_of(m) for m in measures]
    n = len(vs[0])
    c = ground_cost.entries if hasattr(ground_cost, "entries") else np.asarray(ground_cost, float)
    if c.shape != (n, n):
        raise ShapeMismatch((n, n), c.shape)
    k = len(vs)
    w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, float)
    if len(w) != k or abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
        raise ShapeMismatch("simplex weights", w)
    log_k = -c / eps
    with np.errstate(divide="ignore"):
        log_ms = [np.log(v) for v in vs]
    log_v = [np.zeros(n) for _ in range(k)]
    log_b = np.full(n, -np.log(n))
    for it in range(max_iter):
        new_log_b = np.zeros(n)
        log_ktu = []
        for s in range(k):
            log_u = log_ms[s] - logsumexp(log_k + log_v[s][None, :], axis=1)
            t = logsumexp(log_k.T + log_u[None, :], axis=1)
            log_ktu.append(t)
            new_log_b += w[s] * (log_v[s] + t)
        new_log_b -= logsumexp(new_log_b)
        for s in range(k):
            log_v[s] = new_log_b - log_ktu[s]
        delta = float(np.abs(np.exp(new_log_b) - np.exp(log_b)).sum())
        log_b = new_log_b
        if delta <= tol:
            return np.exp(log_b)
    raise NoConvergence("barycenter", max_iter, delta)


# ---------------------------------------------------------------------------
# The joint chain objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainLink:
    """Constraint data for one consecutive pair (lo, hi) of a chain."""

    lo: int  # plan index within the chain
    hi: int
    sets: IndexSets
    analytic_z: NormalizingVectors | None = None


def link_normalizers(
    plans, link: ChainLink, z_source: str, smoothing: float
) -> NormalizingVectors:
    if z_source == "analytic":
        if link.analytic_z is None:
            raise ShapeMismatch("analytic z present", None)
        return link.analytic_z
    return normalizing_vectors(plans[link.lo], link.sets, smoothing)


_FORMS = {
    # mode -> (value functions, gradient functions) applied per link
    "exact": (
        (delta_base, delta_abs),
        (delta_base_grads, delta_abs_grads),
    ),
    "approx": (
        (delta_approx,),
        (delta_approx_grads,),
    ),
    "elementwise": (
        (delta_base_elementwise, delta_abs_elementwise),
        (delta_base_elementwise_grads, delta_abs_elementwise_grads),
    ),
}


def _link_weights(w: CotaWeights, form: str):
    if form == "approx":
        return (w.lam + w.lam_prime,)
    return (w.lam, w.lam_prime)


def cota_objective(
    plans,
    links,
    cost,
    w: CotaWeights,
    kind: DivergenceKind = DivergenceKind.FRO,
    mode: str = "exact",
    zs=None,
    form: str | None = None,
):
    """Objective value and per-term breakdown for a chain's plans.

    ``plans`` are raw matrices in chain order; ``links`` tie consecutive
    plans (the last element has no outgoing constraint).  ``zs`` holds one
    NormalizingVectors per link.  ``form`` overrides the constraint
    realization; by default exact mode evaluates the marginal-level terms
    and approx mode the merged entry-wise term.
    """
    c = cost.entries if hasattr(cost, "entries") else np.asarray(cost, float)
    for p in plans:
        if p.shape != c.shape:
            raise ShapeMismatch(c.shape, p.shape)
    form = form or ("approx" if mode == "approx" else "exact")
    value_fns, _ = _FORMS[form]
    lws = _link_weights(w, form)
    transport = float(sum(np.sum(c * p) for p in plans))
    ent = float(sum(entropy(p) for p in plans))
    constraint_terms = []
    for link, z in zip(links, zs or []):
        terms = tuple(
            fn(plans[link.lo], plans[link.hi], z, kind, link.sets) for fn in value_fns
        )
        constraint_terms.append(terms)
    constraint_total = float(
        sum(sum(lw * t for lw, t in zip(lws, terms)) for terms in constraint_terms)
    )
    total = w.kappa * transport + constraint_total - w.mu * ent
    breakdown = {
        "transport": transport,
        "constraints": constraint_total,
        "constraint_terms": constraint_terms,
        "entropy": ent,
    }
    return total, breakdown


def cota_gradient(
    plans,
    links,
    cost,
    w: CotaWeights,
    kind: DivergenceKind = DivergenceKind.FRO,
    mode: str = "exact",
    zs=None,
    form: str | None = None,
):
    """Analytic gradient of the objective w.r.t. every plan entry, Z frozen.

    The negative-entropy part contributes mu * log P; entries that are
    exactly zero get gradient 0 there (they stay on the boundary).
    """
    c = cost.entries if hasattr(cost, "entries") else np.asarray(cost, float)
    form = form or ("approx" if mode == "approx" else "exact")
    _, grad_fns = _FORMS[form]
    lws = _link_weights(w, form)
    grads = []
    for p in plans:
        if p.shape != c.shape:
            raise ShapeMismatch(c.shape, p.shape)
        g = w.kappa * c.copy()
        if w.mu > 0:
            with np.errstate(divide="ignore"):
                logs = np.where(p > 0, np.log(np.maximum(p, 1e-300)), 0.0)
            g += w.mu * logs
        grads.append(g)
    for link, z in zip(links, zs or []):
        for lw, fn in zip(lws, grad_fns):
            if lw == 0:
                continue
            g_lo, g_hi = fn(plans[link.lo], plans[link.hi], z, kind, link.sets)
            grads[link.lo] += lw * g_lo
            grads[link.hi] += lw * g_hi
    return grads


# ---------------------------------------------------------------------------
# The joint chain solver
# ---------------------------------------------------------------------------


def _step_scale(cost_entries, w: CotaWeights, zs, form: str) -> float:
    """Crude gradient-scale estimate; the line search handles the rest."""
    scale = w.kappa * float(np.max(cost_entries)) + w.mu
    z_min = 1.0
    for z in zs:
        z_min = min(z_min, float(z.z_base.min()), float(z.z_abs.min()))
    lam_total = w.lam + w.lam_prime
    if lam_total > 0:
        scale += 2.0 * lam_total / max(z_min, 1e-3)
    return max(scale, 1e-12)


def solve_cota(
    pair_measures,
    cost,
    w: CotaWeights,
    cfg: SolverConfig,
    links=(),
    kind: DivergenceKind = DivergenceKind.FRO,
):
    """Jointly solve all plans of one chain.

    ``pair_measures`` is the chain-ordered list of (base weights, abstracted
    weights).  Plans start at the product coupling, then repeat: refresh the
    normalizers (plan-sourced unless configured analytic), take one
    exponentiated-gradient step on every plan, and project each plan back
    onto its polytope with alternating scalings.  A step is accepted only if
    the objective does not increase; otherwise it is halved, which keeps the
    recorded trace monotone.

    Exact mode descends the entry-wise realization of the two constraint
    terms: on the polytope the marginal-level terms of the reported
    objective are constants of the data, so only the entry-wise coupling
    can steer the interiors.  Approx mode descends the merged single-term
    form directly.
    """
    c = cost.entries if hasattr(cost, "entries") else np.asarray(cost, float)
    n_plans = len(pair_measures)
    if n_plans == 0:
        raise EmptyList("pairs")
    alphas, betas = [], []
    for base_m, abs_m in pair_measures:
        a = _weights_of(base_m)
        b = _weights_of(abs_m)
        if c.shape != (len(b), len(a)):
            raise ShapeMismatch((len(b), len(a)), c.shape)
        if a.sum() <= 0 or b.sum() <= 0:
            raise ZeroMassMarginal("base" if a.sum() <= 0 else "abstracted")
        alphas.append(a)
        betas.append(b)

    operative_form = "approx" if cfg.mode == "approx" else "elementwise"
    supports = [np.outer(b > 0, a > 0) for a, b in zip(alphas, betas)]
    with np.errstate(divide="ignore"):
        log_alphas = [np.log(a) for a in alphas]
        log_betas = [np.log(b) for b in betas]
        log_plans = [
            np.where(sup, log_betas[k][:, None] + log_alphas[k][None, :], _NEG_INF)
            for k, sup in enumerate(supports)
        ]

    def project_all():
        for k in range(n_plans):
            _log_projection_sweeps(
                log_plans[k],
                log_betas[k],
                log_alphas[k],
                betas[k] > 0,
                alphas[k] > 0,
                cfg.marginal_tol,
                cfg.max_sinkhorn_iters,
            )

    def plans_now():
        return [np.exp(lp) for lp in log_plans]

    def operative_value(plans, zs):
        val, _ = cota_objective(plans, links, c, w, kind, cfg.mode, zs, form=operative_form)
        return val

    plans = plans_now()
    # Plan-sourced normalizers are ratios of marginal masses, so on the
    # polytope they are pinned by the pair's measures; the feasible product
    # coupling already carries the final values and recomputation between
    # outer steps would only echo projection noise.
    zs = [link_normalizers(plans, link, cfg.z_source, cfg.smoothing) for link in links]
    current = operative_value(plans, zs)
    trace = [current]
    step = 0.5 / _step_scale(c, w, zs, operative_form)
    converged = False
    n_outer = 0

    for n_outer in range(1, cfg.max_outer_iters + 1):
        grads = cota_gradient(plans, links, c, w, kind, cfg.mode, zs, form=operative_form)
        # replace the entropic log-term with the tracked log plans: exact on
        # the support even when exp underflows
        if w.mu > 0:
            for k in range(n_plans):
                with np.errstate(divide="ignore"):
                    raw_logs = np.where(plans[k] > 0, np.log(np.maximum(plans[k], 1e-300)), 0.0)
                grads[k] += w.mu * (np.where(supports[k], log_plans[k], 0.0) - raw_logs)
        saved = [lp.copy() for lp in log_plans]
        accepted = False
        trial_step = step
        for _ in range(40):
            for k in range(n_plans):
                log_plans[k][supports[k]] = saved[k][supports[k]] - trial_step * grads[k][supports[k]]
            project_all()
            trial_plans = plans_now()
            trial_val = operative_value(trial_plans, zs)
            if trial_val <= current + 1e-12:
                accepted = True
                break
            for k in range(n_plans):
                log_plans[k][:] = saved[k]
            trial_step *= 0.5
            if trial_step < 1e-14:
                break
        if not accepted:
            trace.append(current)
            converged = True  # no descent direction at numerical resolution
            break
        plans = trial_plans
        decrease = current - trial_val
        current = trial_val
        trace.append(current)
        step = min(trial_step * 1.25, 0.5 / _step_scale(c, w, zs, operative_form) * 8)
        if decrease < cfg.objective_tol:
            converged = True
            break

    out_plans = [
        TransportPlan(p, betas[k], alphas[k]) for k, p in enumerate(plans)
    ]
    violation = max(p.marginal_violation() for p in out_plans)
    reported, breakdown = cota_objective(
        plans, links, c, w, kind, cfg.mode, zs, form=None
    )
    breakdown["operative_objective"] = current
    breakdown["weights"] = w.as_tuple()
    report = SolveReport(
        final_objective=float(reported),
        breakdown=breakdown,
        trace=trace,
        max_marginal_violation=violation,
        converged=converged,
        n_outer=n_outer,
    )
    return out_plans, report


def build_links(
    chain,
    base_domain,
    abs_domain,
    base_scm,
    abs_scm,
    omega,
    z_source: str = "plan",
    smoothing: float = 1e-8,
    exact_base=None,
    exact_abs=None,
):
    """ChainLink list for consecutive chain elements.

    With analytic z, ``exact_base``/``exact_abs`` map each intervention to
    its exact distribution vector (computed once by the caller).
    """
    from .constraints import compatibility_index_sets

    links = []
    for k in range(len(chain) - 1):
        lo, hi = chain[k], chain[k + 1]
        sets = compatibility_index_sets(
            base_domain, abs_domain, base_scm, abs_scm, lo, hi, omega
        )
        analytic = None
        if z_source == "analytic":
            analytic = analytic_normalizing_vectors(
                exact_base[lo], exact_abs[omega(lo)], sets, smoothing
            )
        links.append(ChainLink(lo=k, hi=k + 1, sets=sets, analytic_z=analytic))
    return links
