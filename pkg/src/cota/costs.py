"""Transport cost matrices between the base and abstracted domains.

Two builders: a causally informed cost that discounts transport between
values compatible with matched interventions, and a Hamming baseline that
compares tuples coordinate-wise through an explicit variable alignment.
Costs are deliberately not normalized; the entropic scale and the transport
weight absorb magnitude.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import DomainIndex, is_compatible
from .errors import InvalidAlignment, ShapeMismatch
from .interventions import InterventionPoset, OmegaMap


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative (abs-domain x base-domain) cost entries."""

    entries: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2:
            raise ShapeMismatch("2-d matrix", self.entries.shape)
        if not np.all(np.isfinite(self.entries)) or np.any(self.entries < 0):
            raise ShapeMismatch("finite nonnegative entries", "invalid values")

    @property
    def shape(self):
        return self.entries.shape


def _compat_masks(domain, iota) -> np.ndarray:
    if isinstance(domain, DomainIndex):
        return domain.compatibility_mask(iota)
    return np.array([is_compatible(a, iota) for a in domain], dtype=bool)


def omega_cost(base_domain, abs_domain, poset: InterventionPoset, omega: OmegaMap) -> CostMatrix:
    """Cost |I| minus the number of (intervention, image) pairs both values match.

    Domains are DomainIndex instances or explicit lists of assignments; the
    result is equivariant under re-enumeration of either domain.
    """
    n_base = base_domain.size if isinstance(base_domain, DomainIndex) else len(base_domain)
    n_abs = abs_domain.size if isinstance(abs_domain, DomainIndex) else len(abs_domain)
    discount = np.zeros((n_abs, n_base))
    for iota in poset:
        base_mask = _compat_masks(base_domain, iota)
        abs_mask = _compat_masks(abs_domain, omega(iota))
        discount += np.outer(abs_mask, base_mask)
    return CostMatrix(float(len(poset)) - discount)


def hamming_cost(
    base_domain,
    abs_domain,
    alignment: dict,
    rule: str = "designated",
) -> CostMatrix:
    """Coordinate-wise mismatch count through an abs-to-base variable alignment.

    Each abstracted variable is compared against a representative of its
    aligned base variables: the first aligned variable's value under the
    default "designated" rule, or the most frequent value under "majority"
    (ties resolved toward the first aligned variable's value).
    """
    if rule not in ("designated", "majority"):
        raise InvalidAlignment(f"unknown comparison rule {rule!r}")
    base_assignments = (
        list(base_domain.assignments()) if isinstance(base_domain, DomainIndex) else list(base_domain)
    )
    abs_assignments = (
        list(abs_domain.assignments()) if isinstance(abs_domain, DomainIndex) else list(abs_domain)
    )
    abs_names = set(abs_assignments[0])
    base_names = set(base_assignments[0])
    for name in abs_names:
        if name not in alignment:
            raise InvalidAlignment(f"abstracted variable {name!r} has no aligned base variables")
    for name, aligned in alignment.items():
        if name not in abs_names:
            raise InvalidAlignment(f"{name!r} is not an abstracted variable")
        if not aligned:
            raise InvalidAlignment(f"empty alignment for {name!r}")
        for b in aligned:
            if b not in base_names:
                raise InvalidAlignment(f"aligned base variable {b!r} does not exist")

    def representative(x, aligned):
        values = [x[b] for b in aligned]
        if rule == "designated" or len(values) == 1:
            return values[0]
        counts: dict = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        best = max(counts.values())
        if counts[values[0]] == best:
            return values[0]
        return next(v for v in values if counts[v] == best)

    entries = np.zeros((len(abs_assignments), len(base_assignments)))
    abs_vars = sorted(abs_names)
    for j, x in enumerate(base_assignments):
        reps = {v: representative(x, alignment[v]) for v in abs_vars}
        for i, xp in enumerate(abs_assignments):
            entries[i, j] = sum(xp[v] != reps[v] for v in abs_vars)
    return CostMatrix(entries)


def write_cost_csv(path, cost: CostMatrix) -> None:
    """Dense CSV with a header row of base-domain column indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(cost.shape[1])])
        for row in cost.entries:
            writer.writerow([repr(float(v)) for v in row])


def read_cost_csv(path) -> CostMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return CostMatrix(np.array(rows))
