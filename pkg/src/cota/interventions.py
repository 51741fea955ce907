"""Interventions, their containment order, and maps between intervention sets.

An intervention is a finite assignment of values to variables; the empty
assignment is the null intervention (pure observation).  Finite sets of
interventions carry a partial order by assignment containment, and pairs of
such sets are related by a surjective, order-preserving map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    NotOrderPreserving,
    NotSurjective,
    NotTotal,
    PosetTooLarge,
    UnknownVariable,
)

DEFAULT_POSET_CAP = 64


@dataclass(frozen=True, order=True)
class Intervention:
    """A do-assignment: variable names bound to fixed values.

    The empty assignment is the null intervention.  Stored as a sorted tuple
    of (name, value) pairs so instances are hashable and order-insensitive.
    """

    items: tuple = field(default=())

    @staticmethod
    def of(assignments: Mapping | None = None, **kwargs) -> "Intervention":
        merged = dict(assignments or {})
        merged.update(kwargs)
        return Intervention(tuple(sorted(merged.items(), key=lambda kv: kv[0])))

    @property
    def assignments(self) -> dict:
        return dict(self.items)

    @property
    def targets(self) -> tuple:
        return tuple(name for name, _ in self.items)

    def is_null(self) -> bool:
        return not self.items

    def __str__(self) -> str:
        if not self.items:
            return "null"
        body = ",".join(f"{k}={v}" for k, v in self.items)
        return f"do({body})"


NULL_INTERVENTION = Intervention()


def poset_leq(lo: Intervention, hi: Intervention) -> bool:
    """Containment order: ``lo <= hi`` iff hi assigns every (var, value) of lo."""
    hi_map = hi.assignments
    return all(hi_map.get(k, _MISSING) == v for k, v in lo.items)


_MISSING = object()


def poset_lt(lo: Intervention, hi: Intervention) -> bool:
    return lo != hi and poset_leq(lo, hi)


@dataclass(frozen=True)
class InterventionPoset:
    """A duplicate-free list of interventions, always containing the null one.

    The listed order is preserved; it fixes pair indexing everywhere else.
    """

    interventions: tuple

    @staticmethod
    def of(interventions: Iterable[Intervention]) -> "InterventionPoset":
        seen: dict = {}
        for iota in interventions:
            seen.setdefault(iota, None)
        if NULL_INTERVENTION not in seen:
            ordered = (NULL_INTERVENTION, *seen)
        else:
            ordered = tuple(seen)
        return InterventionPoset(ordered)

    def __len__(self) -> int:
        return len(self.interventions)

    def __iter__(self):
        return iter(self.interventions)

    def __contains__(self, iota: Intervention) -> bool:
        return iota in self.interventions

    def index(self, iota: Intervention) -> int:
        return self.interventions.index(iota)

    def without(self, iota: Intervention) -> "InterventionPoset":
        kept = tuple(x for x in self.interventions if x != iota)
        return InterventionPoset(kept)

    def comparable(self, a: Intervention, b: Intervention) -> bool:
        return poset_leq(a, b) or poset_leq(b, a)


def maximal_chains(poset: InterventionPoset, cap: int = DEFAULT_POSET_CAP) -> list:
    """Enumerate the maximal totally ordered subsets of the poset.

    Returns each chain as a list sorted ascending under the containment
    order.  A chain is maximal when no other intervention of the poset can
    be inserted anywhere in it; equivalently, it is a maximal path in the
    covering-relation graph.
    """
    elems = list(poset.interventions)
    n = len(elems)
    if n > cap:
        raise PosetTooLarge(n, cap)

    below = [[poset_lt(a, b) for b in elems] for a in elems]

    def covers(i: int, j: int) -> bool:
        # j covers i: i < j with nothing strictly between.
        if not below[i][j]:
            return False
        return not any(below[i][k] and below[k][j] for k in range(n))

    succ = {i: [j for j in range(n) if covers(i, j)] for i in range(n)}
    minimal = [i for i in range(n) if not any(below[j][i] for j in range(n))]

    chains = []

    def extend(path):
        tail = path[-1]
        if not succ[tail]:
            chains.append([elems[i] for i in path])
            return
        for nxt in succ[tail]:
            extend(path + [nxt])

    for start in minimal:
        extend([start])
    return chains


@dataclass(frozen=True)
class OmegaMap:
    """Map from base interventions to abstracted interventions."""

    mapping: tuple  # tuple of (base Intervention, abstracted Intervention)

    @staticmethod
    def of(pairs: Mapping | Iterable) -> "OmegaMap":
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        return OmegaMap(tuple((b, a) for b, a in pairs))

    def __call__(self, iota: Intervention) -> Intervention:
        for base, abstracted in self.mapping:
            if base == iota:
                return abstracted
        raise UnknownVariable(str(iota))

    def as_dict(self) -> dict:
        return dict(self.mapping)


def validate_omega(
    omega: OmegaMap, base_set: InterventionPoset, abs_set: InterventionPoset
) -> None:
    """Check totality, surjectivity and order preservation; raise on failure."""
    table = omega.as_dict()
    for iota in base_set:
        if iota not in table:
            raise NotTotal(iota)
    images = {table[iota] for iota in base_set}
    for target in abs_set:
        if target not in images:
            raise NotSurjective(target)
    for lo in base_set:
        for hi in base_set:
            if poset_leq(lo, hi) and not poset_leq(table[lo], table[hi]):
                raise NotOrderPreserving(lo, hi)


def is_valid_omega(
    omega: OmegaMap, base_set: InterventionPoset, abs_set: InterventionPoset
) -> bool:
    try:
        validate_omega(omega, base_set, abs_set)
    except (NotTotal, NotSurjective, NotOrderPreserving):
        return False
    return True
