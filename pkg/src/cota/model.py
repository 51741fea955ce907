"""Discrete structural causal models: DAG + conditional probability tables.

Exogenous noise is not materialized; each variable carries a CPT row per
parent-value combination, which encodes the induced distribution over the
endogenous variables directly.  Interventions mutilate the model by cutting
parents and replacing the CPT with a point mass.

Randomness policy: all sampling uses numpy's PCG64 stream seeded through
``SeedSequence``, which is documented to be bit-exact across platforms and
numpy releases.  Seeds are plain integers or tuples of integers.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import DEFAULT_ENUMERATION_CAP, DomainIndex, VariableSpec
from .errors import (
    CycleDetected,
    SchemaMismatch,
    UnknownParent,
    UnknownVariable,
    ValueOutOfDomain,
)
from .interventions import Intervention

CPT_ROW_TOL = 1e-9


def _entropy_words(seed):
    if isinstance(seed, (tuple, list)):
        return [w for part in seed for w in _entropy_words(part)]
    if isinstance(seed, str):
        return [int.from_bytes(seed.encode(), "little")]
    return [int(seed)]


def make_rng(seed) -> np.random.Generator:
    """The library-wide generator: PCG64 behind a SeedSequence.

    Seeds are ints, strings, or nested tuples of those; everything reduces
    to a deterministic entropy list, so streams are bit-exact across runs
    and platforms.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_entropy_words(seed))))


@dataclass(frozen=True)
class CausalDag:
    """Variables plus per-variable ordered parent lists."""

    variables: tuple  # tuple[VariableSpec]
    parents: tuple  # tuple[tuple[str, ...]] aligned with variables

    @staticmethod
    def of(variables: Sequence[VariableSpec], parents: Mapping) -> "CausalDag":
        par = tuple(tuple(parents.get(v.name, ())) for v in variables)
        return CausalDag(tuple(variables), par)

    @property
    def names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    def spec(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariable(name)

    def parents_of(self, name: str) -> tuple:
        for v, p in zip(self.variables, self.parents):
            if v.name == name:
                return p
        raise UnknownVariable(name)


def validate_dag(dag: CausalDag) -> None:
    """Raise UnknownParent or CycleDetected if the graph is malformed."""
    names = set(dag.names)
    if len(names) != len(dag.names):
        raise SchemaMismatch("duplicate variable names")
    for var, parents in zip(dag.variables, dag.parents):
        if len(set(parents)) != len(parents):
            raise UnknownParent(var.name, "<duplicate parent>")
        for p in parents:
            if p not in names:
                raise UnknownParent(var.name, p)
    # Kahn's algorithm; on failure walk the leftover graph to report a cycle.
    order = topological_order(dag)
    if order is None:
        remaining = {
            v.name: set(p) for v, p in zip(dag.variables, dag.parents)
        }
        done = set()
        changed = True
        while changed:
            changed = False
            for name, ps in list(remaining.items()):
                if ps <= done:
                    done.add(name)
                    del remaining[name]
                    changed = True
        start = next(iter(remaining))
        cycle = [start]
        seen = {start}
        node = start
        while True:
            node = next(p for p in remaining[node] if p in remaining)
            if node in seen:
                cycle.append(node)
                break
            cycle.append(node)
            seen.add(node)
        raise CycleDetected(reversed(cycle))


def topological_order(dag: CausalDag):
    """Deterministic topological order (declaration order among ready nodes)."""
    pending = {v.name: set(p) for v, p in zip(dag.variables, dag.parents)}
    order = []
    placed = set()
    while pending:
        ready = [n for n in dag.names if n in pending and pending[n] <= placed]
        if not ready:
            return None
        nxt = ready[0]
        order.append(nxt)
        placed.add(nxt)
        del pending[nxt]
    return order


@dataclass(frozen=True)
class DiscreteScm:
    """A validated DAG plus one CPT per variable.

    ``cpts[name]`` has shape (n_parent_rows, cardinality); parent rows
    enumerate the parents' joint domain lexicographically with the last
    parent varying fastest, matching the joint-domain enumeration.
    """

    dag: CausalDag
    cpts: tuple  # tuple of (name, np.ndarray) pairs, aligned with dag.variables
    topo: tuple

    @staticmethod
    def of(dag: CausalDag, cpts: Mapping) -> "DiscreteScm":
        validate_dag(dag)
        rows = []
        for var, parents in zip(dag.variables, dag.parents):
            if var.name not in cpts:
                raise UnknownVariable(var.name)
            table = np.asarray(cpts[var.name], dtype=float)
            if table.ndim == 1:
                table = table[None, :]
            n_rows = int(np.prod([dag.spec(p).cardinality for p in parents])) if parents else 1
            if table.shape != (n_rows, var.cardinality):
                raise SchemaMismatch(
                    f"CPT for {var.name!r} has shape {table.shape}, expected {(n_rows, var.cardinality)}"
                )
            if np.any(table < 0):
                raise SchemaMismatch(f"CPT for {var.name!r} has negative entries")
            if np.any(np.abs(table.sum(axis=1) - 1.0) > CPT_ROW_TOL):
                raise SchemaMismatch(f"CPT rows for {var.name!r} do not sum to 1")
            table = table.copy()
            table.setflags(write=False)
            rows.append((var.name, table))
        topo = topological_order(dag)
        return DiscreteScm(dag, tuple(rows), tuple(topo))

    def cpt(self, name: str) -> np.ndarray:
        for n, t in self.cpts:
            if n == name:
                return t
        raise UnknownVariable(name)

    @property
    def variables(self) -> tuple:
        return self.dag.variables

    def domain_index(self, cap: int = DEFAULT_ENUMERATION_CAP) -> DomainIndex:
        return DomainIndex(self.dag.variables, cap=cap)

    def parent_row_strides(self, name: str) -> tuple:
        """(parent names, mixed-radix strides) indexing the CPT rows."""
        parents = self.dag.parents_of(name)
        cards = [self.dag.spec(p).cardinality for p in parents]
        strides = []
        acc = 1
        for c in reversed(cards):
            strides.append(acc)
            acc *= c
        return parents, tuple(reversed(strides))


def check_assignments(scm: DiscreteScm, iota: Intervention) -> None:
    names = set(scm.dag.names)
    for name, value in iota.items:
        if name not in names:
            raise UnknownVariable(name)
        scm.dag.spec(name).value_index(value)  # raises ValueOutOfDomain


def apply_do(scm: DiscreteScm, iota: Intervention) -> DiscreteScm:
    """Return the mutilated model: intervened variables become point masses."""
    check_assignments(scm, iota)
    if iota.is_null():
        return scm
    assigned = iota.assignments
    new_parents = {}
    new_cpts = {}
    for var, parents in zip(scm.dag.variables, scm.dag.parents):
        if var.name in assigned:
            new_parents[var.name] = ()
            row = np.zeros((1, var.cardinality))
            row[0, var.value_index(assigned[var.name])] = 1.0
            new_cpts[var.name] = row
        else:
            new_parents[var.name] = parents
            new_cpts[var.name] = scm.cpt(var.name)
    dag = CausalDag.of(scm.dag.variables, new_parents)
    return DiscreteScm.of(dag, new_cpts)


@dataclass(frozen=True)
class Distribution:
    """A probability vector aligned with a joint-domain enumeration."""

    domain: DomainIndex
    probs: np.ndarray

    def __post_init__(self):
        if len(self.probs) != self.domain.size:
            raise SchemaMismatch(
                f"distribution has {len(self.probs)} entries for a domain of {self.domain.size}"
            )

    def prob_of(self, assignment: Mapping) -> float:
        return float(self.probs[self.domain.index_of(assignment)])


def _state_factor_columns(scm: DiscreteScm, domain: DomainIndex):
    """Per-variable probability factors across all joint states."""
    factors = []
    for var in scm.dag.names:
        parents, strides = scm.parent_row_strides(var)
        row_idx = np.zeros(domain.size, dtype=np.int64)
        for p, s in zip(parents, strides):
            row_idx += domain.value_column(p) * s
        val_idx = domain.value_column(var)
        factors.append(scm.cpt(var)[row_idx, val_idx])
    return factors


def exact_distribution(
    scm: DiscreteScm,
    iota: Intervention = Intervention(),
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Distribution:
    """Post-intervention joint by full enumeration of the mutilated model.

    States incompatible with the intervention get probability exactly 0
    because the intervened variables' point-mass CPT factors vanish there.
    """
    mutilated = apply_do(scm, iota)
    domain = DomainIndex(scm.dag.variables, cap=cap)
    probs = np.ones(domain.size)
    for factor in _state_factor_columns(mutilated, domain):
        probs *= factor
    return Distribution(domain, probs)


def sample_value_matrix(
    scm: DiscreteScm, iota: Intervention, n: int, seed
) -> np.ndarray:
    """Ancestral samples as an (n, n_vars) matrix of per-variable value indices.

    Columns follow the model's variable declaration order; sampling follows
    the topological order fixed at model construction.  Deterministic given
    the seed.
    """
    if n < 1:
        raise ValueOutOfDomain("n", n)
    mutilated = apply_do(scm, iota)
    rng = make_rng(seed)
    n_vars = len(scm.dag.variables)
    pos = {name: i for i, name in enumerate(scm.dag.names)}
    out = np.zeros((n, n_vars), dtype=np.int64)
    for name in mutilated.topo:
        parents, strides = mutilated.parent_row_strides(name)
        row_idx = np.zeros(n, dtype=np.int64)
        for p, s in zip(parents, strides):
            row_idx += out[:, pos[p]] * s
        rows = mutilated.cpt(name)[row_idx]
        u = rng.random(n)
        out[:, pos[name]] = (rows.cumsum(axis=1) > u[:, None]).argmax(axis=1)
    return out


def sample(scm: DiscreteScm, iota: Intervention, n: int, seed) -> list:
    """Ancestral samples as a list of full assignments (dicts)."""
    matrix = sample_value_matrix(scm, iota, n, seed)
    domains = [v.domain for v in scm.dag.variables]
    names = scm.dag.names
    return [
        {name: domains[i][int(row[i])] for i, name in enumerate(names)}
        for row in matrix
    ]


# ---------------------------------------------------------------------------
# JSON model files
# ---------------------------------------------------------------------------


def _parse_variables(doc, where):
    specs = []
    for k, entry in enumerate(doc):
        if "name" not in entry or "domain" not in entry:
            raise SchemaMismatch(f"{where}.variables[{k}] needs 'name' and 'domain'")
        specs.append(VariableSpec(entry["name"], tuple(entry["domain"])))
    return specs


def scm_from_dict(doc: Mapping, where: str = "model") -> DiscreteScm:
    for key in ("variables", "cpts"):
        if key not in doc:
            raise SchemaMismatch(f"{where} is missing the {key!r} section")
    specs = _parse_variables(doc["variables"], where)
    by_name = {s.name: s for s in specs}
    parents: dict = {s.name: [] for s in specs}
    for k, edge in enumerate(doc.get("edges", [])):
        parent, child = edge
        if parent not in by_name:
            raise SchemaMismatch(f"{where}.edges[{k}]: unknown parent {parent!r}")
        if child not in by_name:
            raise SchemaMismatch(f"{where}.edges[{k}]: unknown child {child!r}")
        parents[child].append(parent)
    dag = CausalDag.of(specs, {k: tuple(v) for k, v in parents.items()})
    cpts = {}
    for name, rows in doc["cpts"].items():
        if name not in by_name:
            raise SchemaMismatch(f"{where}.cpts: unknown variable {name!r}")
        par = dag.parents_of(name)
        combos = list(itertools.product(*(by_name[p].domain for p in par)))
        table = np.full((len(combos), by_name[name].cardinality), np.nan)
        for k, row in enumerate(rows):
            if "parents" not in row or "probs" not in row:
                raise SchemaMismatch(f"{where}.cpts.{name}[{k}] needs 'parents' and 'probs'")
            try:
                combo = tuple(row["parents"][p] for p in par)
            except KeyError as exc:
                raise SchemaMismatch(
                    f"{where}.cpts.{name}[{k}]: missing parent value for {exc.args[0]!r}"
                ) from None
            if combo not in combos:
                raise SchemaMismatch(
                    f"{where}.cpts.{name}[{k}]: parent combination {combo} out of domain"
                )
            table[combos.index(combo)] = row["probs"]
        if np.any(np.isnan(table)):
            missing = combos[int(np.argwhere(np.isnan(table).any(axis=1))[0][0])]
            raise SchemaMismatch(
                f"{where}.cpts.{name}: no row for parent combination {dict(zip(par, missing))}"
            )
        cpts[name] = table
    return DiscreteScm.of(dag, cpts)


def scm_to_dict(scm: DiscreteScm) -> dict:
    edges = []
    for var, parents in zip(scm.dag.variables, scm.dag.parents):
        edges.extend([p, var.name] for p in parents)
    cpts = {}
    for var, parents in zip(scm.dag.variables, scm.dag.parents):
        par_domains = [scm.dag.spec(p).domain for p in parents]
        rows = []
        for k, combo in enumerate(itertools.product(*par_domains)):
            rows.append(
                {
                    "parents": dict(zip(parents, combo)),
                    "probs": [float(x) for x in scm.cpt(var.name)[k]],
                }
            )
        cpts[var.name] = rows
    return {
        "variables": [{"name": v.name, "domain": list(v.domain)} for v in scm.dag.variables],
        "edges": edges,
        "cpts": cpts,
    }


def load_model(path) -> dict:
    """Load a model file; returns dict with scm and optional poset/omega parts.

    The file either describes a single model, or a scenario with ``base``
    and ``abs`` models plus intervention lists and an ``omega`` index map.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}:{exc.lineno}: {exc.msg}") from None
    out: dict = {}
    if "base" in doc and "abs" in doc:
        out["base"] = scm_from_dict(doc["base"], where="base")
        out["abs"] = scm_from_dict(doc["abs"], where="abs")
    else:
        out["base"] = scm_from_dict(doc, where="model")
    for key, target in (("interventions", "interventions"), ("abs_interventions", "abs_interventions")):
        if key in doc:
            model = out["abs"] if key == "abs_interventions" and "abs" in out else out["base"]
            ivs = []
            for k, entry in enumerate(doc[key]):
                iota = Intervention.of(entry)
                try:
                    check_assignments(model, iota)
                except (UnknownVariable, ValueOutOfDomain) as exc:
                    raise SchemaMismatch(f"{key}[{k}]: {exc}") from None
                ivs.append(iota)
            out[target] = ivs
    if "omega" in doc:
        if "interventions" not in out or "abs_interventions" not in out:
            raise SchemaMismatch("omega requires 'interventions' and 'abs_interventions'")
        pairs = []
        for k, entry in enumerate(doc["omega"]):
            try:
                b, a = entry["base"], entry["abs"]
                pairs.append((out["interventions"][b], out["abs_interventions"][a]))
            except (KeyError, IndexError):
                raise SchemaMismatch(f"omega[{k}]: invalid base/abs index") from None
        out["omega"] = pairs
    return out
