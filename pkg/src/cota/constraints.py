"""Do-calculus constraint machinery for coupled transport plans.

For a comparable pair of interventions lo <= hi on one chain, the truncated
factorization relates their distributions through normalizing vectors Z: the
hi-distribution equals the lo-distribution divided by a product of
conditional probabilities of the newly intervened variables given their
parents.  Z is recovered from a transport plan as ratios of plan mass over
compatibility index sets, with a dedicated constant-vector path when the
intervened variables have no parents.

The constraint between two plans comes in three realizations:

* marginal: a divergence between the hi-plan's marginal and the Z-rescaled
  lo-plan's marginal, restricted to states compatible with hi (the reported
  objective form).  On exactly feasible plans this value is determined by
  the empirical marginals alone.
* elementwise: the same relation spread entry-wise over the plans (each
  entry inherits its column's or row's normalizer), which couples plan
  interiors and is what the joint solver actually descends.
* merged: the elementwise form with a single normalizer per entry obtained
  by aggregating the base and abstracted normalizers with min; this halves
  the number of constraint terms (the approximate variant).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import DomainIndex
from .errors import LengthMismatch, EmptyVector, NotComparable, ShapeMismatch
from .interventions import Intervention, OmegaMap, poset_leq
from .model import DiscreteScm

DEFAULT_SMOOTHING = 1e-8
_LOG_FLOOR = 1e-300


class DivergenceKind(Enum):
    FRO = "fro"
    JSD = "jsd"


def bregman_div(kind: DivergenceKind, u, v) -> float:
    """FRO: squared Euclidean on raw vectors.  JSD: base-2, on the simplex."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LengthMismatch(u.size, v.size)
    if u.size == 0:
        raise EmptyVector()
    if kind is DivergenceKind.FRO:
        return float(np.sum((u - v) ** 2))
    return _jsd(u / u.sum(), v / v.sum())


def _jsd(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    pm = np.where(p > 0, p / np.maximum(m, _LOG_FLOOR), 1.0)
    qm = np.where(q > 0, q / np.maximum(m, _LOG_FLOOR), 1.0)
    val = 0.5 * np.sum(p * np.log(np.maximum(pm, _LOG_FLOOR))) + 0.5 * np.sum(
        q * np.log(np.maximum(qm, _LOG_FLOOR))
    )
    return float(val / np.log(2.0))


@dataclass(frozen=True)
class IndexSets:
    """Compatibility index sets for one comparable intervention pair.

    Column structures describe the base side, row structures the abstracted
    side.  Each state belongs to exactly one parent configuration, so the
    per-configuration sets are carried as a group id per state plus the
    compatible mask; the intersection sets follow from those.
    """

    c_cols: np.ndarray  # bool mask, x_j compatible with hi
    c_rows: np.ndarray  # bool mask, x'_i compatible with omega(hi)
    base_group: np.ndarray  # int per column: parent-configuration id
    abs_group: np.ndarray  # int per row
    n_base_groups: int
    n_abs_groups: int
    base_no_parents: bool
    abs_no_parents: bool

    def o_cols(self, rho: int) -> np.ndarray:
        return self.base_group == rho

    def omega_cols(self, rho: int) -> np.ndarray:
        return self.c_cols & self.o_cols(rho)

    def o_rows(self, rho: int) -> np.ndarray:
        return self.abs_group == rho

    def omega_rows(self, rho: int) -> np.ndarray:
        return self.c_rows & self.o_rows(rho)


@dataclass(frozen=True)
class NormalizingVectors:
    """Per-column and per-row positive normalizers in (0, 1]."""

    z_base: np.ndarray  # length D, one entry per base column
    z_abs: np.ndarray  # length D', one entry per abstracted row


def _parent_grouping(domain: DomainIndex, scm: DiscreteScm, targets) -> tuple:
    """Group states of a domain by the joint value of the targets' parents.

    Parents are collected over all intervened variables, deduplicated in the
    model's declaration order so the configuration enumeration is stable.
    """
    union = set()
    for t in targets:
        union.update(scm.dag.parents_of(t))
    parents = [n for n in scm.dag.names if n in union]
    if not parents:
        return np.zeros(domain.size, dtype=np.int64), 1, True
    group = np.zeros(domain.size, dtype=np.int64)
    stride = 1
    for p in reversed(parents):
        group += domain.value_column(p) * stride
        stride *= domain.cardinalities[domain.position(p)]
    return group, int(stride), False


def compatibility_index_sets(
    base_domain: DomainIndex,
    abs_domain: DomainIndex,
    base_scm: DiscreteScm,
    abs_scm: DiscreteScm,
    lo: Intervention,
    hi: Intervention,
    omega: OmegaMap,
) -> IndexSets:
    if not poset_leq(lo, hi):
        raise NotComparable(lo, hi)
    hi_abs = omega(hi)
    base_group, n_base_groups, base_np = _parent_grouping(base_domain, base_scm, hi.targets)
    abs_group, n_abs_groups, abs_np = _parent_grouping(abs_domain, abs_scm, hi_abs.targets)
    return IndexSets(
        c_cols=base_domain.compatibility_mask(hi),
        c_rows=abs_domain.compatibility_mask(hi_abs),
        base_group=base_group,
        abs_group=abs_group,
        n_base_groups=n_base_groups,
        n_abs_groups=n_abs_groups,
        base_no_parents=base_np,
        abs_no_parents=abs_np,
    )


def _grouped_ratio(mass, group, n_groups, c_mask, smoothing):
    num = np.bincount(group, weights=mass * c_mask, minlength=n_groups)
    den = np.bincount(group, weights=mass, minlength=n_groups)
    ratio = np.maximum(num, smoothing) / np.maximum(den, smoothing)
    return ratio[group]


def normalizing_vectors(
    plan: np.ndarray, sets: IndexSets, smoothing: float = DEFAULT_SMOOTHING
) -> NormalizingVectors:
    """Z per base column and abstracted row, from the lo-plan's mass.

    Entry j uses the parent configuration matching state j.  Numerator and
    denominator are floored at the smoothing constant, so a zero-mass
    configuration yields the neutral value 1.  With no parents both vectors
    collapse to the constant compatible-mass sum.
    """
    if plan.shape != (len(sets.c_rows), len(sets.c_cols)):
        raise ShapeMismatch((len(sets.c_rows), len(sets.c_cols)), plan.shape)
    col_mass = plan.sum(axis=0)
    row_mass = plan.sum(axis=1)
    z_base = _grouped_ratio(col_mass, sets.base_group, sets.n_base_groups, sets.c_cols, smoothing)
    z_abs = _grouped_ratio(row_mass, sets.abs_group, sets.n_abs_groups, sets.c_rows, smoothing)
    return NormalizingVectors(z_base=z_base, z_abs=z_abs)


def analytic_normalizing_vectors(
    base_probs: np.ndarray,
    abs_probs: np.ndarray,
    sets: IndexSets,
    smoothing: float = DEFAULT_SMOOTHING,
) -> NormalizingVectors:
    """Z from exact lo-intervention distributions instead of a plan."""
    z_base = _grouped_ratio(base_probs, sets.base_group, sets.n_base_groups, sets.c_cols, smoothing)
    z_abs = _grouped_ratio(abs_probs, sets.abs_group, sets.n_abs_groups, sets.c_rows, smoothing)
    return NormalizingVectors(z_base=z_base, z_abs=z_abs)


# ---------------------------------------------------------------------------
# Marginal-level constraint terms (the reported objective form)
# ---------------------------------------------------------------------------


def _check_shapes(p_lo: np.ndarray, p_hi: np.ndarray) -> None:
    if p_lo.shape != p_hi.shape:
        raise ShapeMismatch(p_lo.shape, p_hi.shape)


def delta_base(
    p_lo: np.ndarray,
    p_hi: np.ndarray,
    z: NormalizingVectors,
    kind: DivergenceKind,
    sets: IndexSets,
) -> float:
    """Divergence between hi's base marginal and the rescaled lo marginal.

    Restricted to columns compatible with hi; incompatible coordinates are
    dropped, not zeroed.  JSD renormalizes the restrictions; FRO consumes
    them raw.
    """
    _check_shapes(p_lo, p_hi)
    cols = sets.c_cols
    m_hi = p_hi.sum(axis=0)[cols]
    m_lo = (p_lo.sum(axis=0) / z.z_base)[cols]
    return bregman_div(kind, m_hi, m_lo)


def delta_abs(
    p_lo: np.ndarray,
    p_hi: np.ndarray,
    z: NormalizingVectors,
    kind: DivergenceKind,
    sets: IndexSets,
) -> float:
    """Mirror of delta_base on row marginals and omega(hi)-compatible rows."""
    _check_shapes(p_lo, p_hi)
    rows = sets.c_rows
    m_hi = p_hi.sum(axis=1)[rows]
    m_lo = (p_lo.sum(axis=1) / z.z_abs)[rows]
    return bregman_div(kind, m_hi, m_lo)


def delta_approx(
    p_lo: np.ndarray,
    p_hi: np.ndarray,
    z: NormalizingVectors,
    kind: DivergenceKind,
    sets: IndexSets,
) -> float:
    """Entry-wise constraint with the min-aggregated normalizer (approx mode)."""
    _check_shapes(p_lo, p_hi)
    phi = np.minimum.outer(z.z_abs, z.z_base)
    sel = np.outer(sets.c_rows, sets.c_cols)
    u = (p_lo / phi)[sel]
    v = p_hi[sel]
    return bregman_div(kind, u, v)


def delta_base_elementwise(p_lo, p_hi, z: NormalizingVectors, kind, sets: IndexSets) -> float:
    """Entry-wise base constraint: each column inherits its own normalizer."""
    _check_shapes(p_lo, p_hi)
    cols = sets.c_cols
    u = (p_lo / z.z_base[None, :])[:, cols]
    v = p_hi[:, cols]
    return bregman_div(kind, u.ravel(), v.ravel())


def delta_abs_elementwise(p_lo, p_hi, z: NormalizingVectors, kind, sets: IndexSets) -> float:
    """Entry-wise abstracted constraint: each row inherits its own normalizer."""
    _check_shapes(p_lo, p_hi)
    rows = sets.c_rows
    u = (p_lo / z.z_abs[:, None])[rows, :]
    v = p_hi[rows, :]
    return bregman_div(kind, u.ravel(), v.ravel())


# ---------------------------------------------------------------------------
# Gradients (Z held fixed; the block scheme recomputes Z between steps)
# ---------------------------------------------------------------------------


def _div_grads(kind: DivergenceKind, u: np.ndarray, v: np.ndarray):
    """d(divergence)/du and /dv for the raw (pre-normalization) vectors."""
    if kind is DivergenceKind.FRO:
        r = 2.0 * (u - v)
        return r, -r
    su, sv = u.sum(), v.sum()
    p, q = u / su, v / sv
    m = np.maximum(0.5 * (p + q), _LOG_FLOOR)
    half_ln2 = 0.5 / np.log(2.0)
    g_p = half_ln2 * np.log(np.maximum(p, _LOG_FLOOR) / m)
    g_q = half_ln2 * np.log(np.maximum(q, _LOG_FLOOR) / m)
    du = (g_p - np.dot(g_p, p)) / su
    dv = (g_q - np.dot(g_q, q)) / sv
    return du, dv


def delta_base_grads(p_lo, p_hi, z, kind, sets):
    """(d/d p_lo, d/d p_hi) of the marginal-level base term."""
    cols = sets.c_cols
    m_hi = p_hi.sum(axis=0)[cols]
    m_lo = (p_lo.sum(axis=0) / z.z_base)[cols]
    d_hi_r, d_lo_r = _div_grads(kind, m_hi, m_lo)
    g_lo = np.zeros_like(p_lo)
    g_hi = np.zeros_like(p_hi)
    g_hi[:, cols] = d_hi_r[None, :]
    g_lo[:, cols] = (d_lo_r / z.z_base[cols])[None, :]
    return g_lo, g_hi


def delta_abs_grads(p_lo, p_hi, z, kind, sets):
    rows = sets.c_rows
    m_hi = p_hi.sum(axis=1)[rows]
    m_lo = (p_lo.sum(axis=1) / z.z_abs)[rows]
    d_hi_r, d_lo_r = _div_grads(kind, m_hi, m_lo)
    g_lo = np.zeros_like(p_lo)
    g_hi = np.zeros_like(p_hi)
    g_hi[rows, :] = d_hi_r[:, None]
    g_lo[rows, :] = (d_lo_r / z.z_abs[rows])[:, None]
    return g_lo, g_hi


def delta_approx_grads(p_lo, p_hi, z, kind, sets):
    phi = np.minimum.outer(z.z_abs, z.z_base)
    sel = np.outer(sets.c_rows, sets.c_cols)
    u = (p_lo / phi)[sel]
    v = p_hi[sel]
    du, dv = _div_grads(kind, u, v)
    g_lo = np.zeros_like(p_lo)
    g_hi = np.zeros_like(p_hi)
    g_lo[sel] = du / phi[sel]
    g_hi[sel] = dv
    return g_lo, g_hi


def delta_base_elementwise_grads(p_lo, p_hi, z, kind, sets):
    cols = sets.c_cols
    scale = z.z_base[None, :]
    u = (p_lo / scale)[:, cols]
    v = p_hi[:, cols]
    du, dv = _div_grads(kind, u.ravel(), v.ravel())
    g_lo = np.zeros_like(p_lo)
    g_hi = np.zeros_like(p_hi)
    g_lo[:, cols] = du.reshape(u.shape) / scale[:, cols]
    g_hi[:, cols] = dv.reshape(v.shape)
    return g_lo, g_hi


def delta_abs_elementwise_grads(p_lo, p_hi, z, kind, sets):
    rows = sets.c_rows
    scale = z.z_abs[:, None]
    u = (p_lo / scale)[rows, :]
    v = p_hi[rows, :]
    du, dv = _div_grads(kind, u.ravel(), v.ravel())
    g_lo = np.zeros_like(p_lo)
    g_hi = np.zeros_like(p_hi)
    g_lo[rows, :] = du.reshape(u.shape) / scale[rows, :]
    g_hi[rows, :] = dv.reshape(v.shape)
    return g_lo, g_hi


def dump_diagnostics(sets: IndexSets, z: NormalizingVectors) -> dict:
    """JSON-ready dump of the index sets and normalizers for debugging."""
    return {
        "compatible_columns": np.flatnonzero(sets.c_cols).tolist(),
        "compatible_rows": np.flatnonzero(sets.c_rows).tolist(),
        "base_groups": sets.base_group.tolist(),
        "abs_groups": sets.abs_group.tolist(),
        "z_base": z.z_base.tolist(),
        "z_abs": z.z_abs.tolist(),
    }
