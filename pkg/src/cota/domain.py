"""Finite variable domains and the enumeration of full joint assignments.

The joint domain of a model is enumerated lexicographically: variables in
declaration order, values in domain order, with the last variable varying
fastest.  Index 0 is therefore the assignment taking every variable's first
domain value.  All measures, plans and cost matrices downstream index into
this enumeration, so it must be stable across runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainTooLarge, SampleOutOfDomain, UnknownVariable, ValueOutOfDomain
from .interventions import Intervention

DEFAULT_ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class VariableSpec:
    """A named variable with an ordered finite domain."""

    name: str
    domain: tuple

    def __post_init__(self):
        if not self.domain:
            raise ValueOutOfDomain(self.name, "<empty domain>")
        if len(set(self.domain)) != len(self.domain):
            raise ValueOutOfDomain(self.name, "<duplicate domain values>")

    @property
    def cardinality(self) -> int:
        return len(self.domain)

    def value_index(self, value) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise ValueOutOfDomain(self.name, value) from None


class DomainIndex:
    """Bijection between joint assignments and indices ``0..D-1``."""

    def __init__(self, variables: Sequence[VariableSpec], cap: int = DEFAULT_ENUMERATION_CAP):
        self.variables = tuple(variables)
        self.names = tuple(v.name for v in self.variables)
        cards = np.array([v.cardinality for v in self.variables], dtype=np.int64)
        size = int(np.prod(cards)) if len(cards) else 1
        if size > cap:
            raise DomainTooLarge(size, cap)
        self.cardinalities = cards
        self.size = size
        # strides[i] = product of cardinalities of variables after i
        strides = np.ones(len(cards), dtype=np.int64)
        for i in range(len(cards) - 2, -1, -1):
            strides[i] = strides[i + 1] * cards[i + 1]
        self.strides = strides
        self._positions = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return self.size

    def position(self, name: str) -> int:
        try:
            return self._positions[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def value_column(self, name: str) -> np.ndarray:
        """Value indices of the named variable across all joint states."""
        pos = self.position(name)
        idx = np.arange(self.size, dtype=np.int64)
        return (idx // self.strides[pos]) % self.cardinalities[pos]

    def assignment(self, index: int) -> dict:
        if not 0 <= index < self.size:
            raise IndexError(index)
        out = {}
        for var, stride, card in zip(self.variables, self.strides, self.cardinalities):
            out[var.name] = var.domain[(index // int(stride)) % int(card)]
        return out

    def assignments(self) -> Iterable[dict]:
        for values in itertools.product(*(v.domain for v in self.variables)):
            yield dict(zip(self.names, values))

    def index_of(self, assignment: Mapping) -> int:
        index = 0
        for var, stride in zip(self.variables, self.strides):
            if var.name not in assignment:
                raise SampleOutOfDomain(f"missing variable {var.name!r}")
            index += var.value_index(assignment[var.name]) * int(stride)
        return index

    def indices_from_value_matrix(self, values: np.ndarray) -> np.ndarray:
        """Map an (n, n_vars) matrix of per-variable value indices to state indices."""
        if values.ndim != 2 or values.shape[1] != len(self.variables):
            raise SampleOutOfDomain(
                f"value matrix of shape {values.shape} does not match {len(self.variables)} variables"
            )
        return values @ self.strides

    def compatibility_mask(self, iota: Intervention) -> np.ndarray:
        """Boolean mask over joint states agreeing with the intervention."""
        mask = np.ones(self.size, dtype=bool)
        for name, value in iota.items:
            pos = self.position(name)
            want = self.variables[pos].value_index(value)
            mask &= self.value_column(name) == want
        return mask

    def labels(self) -> list:
        """Human-readable per-state labels, used in CSV headers."""
        return [
            "|".join(f"{k}={v}" for k, v in a.items()) for a in self.assignments()
        ]


def is_compatible(assignment: Mapping, iota: Intervention) -> bool:
    """True iff the full assignment agrees with every value set by ``iota``."""
    for name, value in iota.items:
        if name not in assignment:
            raise SampleOutOfDomain(f"missing variable {name!r}")
        if assignment[name] != value:
            return False
    return True
