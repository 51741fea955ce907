"""Empirical measures on enumerated domains and the per-intervention pair set.

Measures always live on the full enumerated domain, never just the observed
support: the constraint terms downstream compare marginals of different
interventions index-by-index, which requires every plan to share one shape.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import DEFAULT_ENUMERATION_CAP, DomainIndex
from .errors import DomainMismatch, SampleOutOfDomain
from .interventions import Intervention, InterventionPoset, OmegaMap, validate_omega
from .model import DiscreteScm, sample_value_matrix

MEASURE_TOL = 1e-9
DEFAULT_SAMPLES_PER_INTERVENTION = 1000


def enumerate_domain(scm: DiscreteScm, cap: int = DEFAULT_ENUMERATION_CAP) -> DomainIndex:
    """Enumerate the model's joint domain; stable across runs."""
    return DomainIndex(scm.dag.variables, cap=cap)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Nonnegative weights over a DomainIndex, summing to 1."""

    domain: DomainIndex
    weights: np.ndarray

    def __post_init__(self):
        if len(self.weights) != self.domain.size:
            raise DomainMismatch(
                f"{len(self.weights)} weights on a domain of size {self.domain.size}"
            )
        if np.any(self.weights < 0):
            raise DomainMismatch("negative weights")
        if abs(float(self.weights.sum()) - 1.0) > MEASURE_TOL:
            raise DomainMismatch(f"weights sum to {self.weights.sum()}, not 1")

    @staticmethod
    def from_weights(domain: DomainIndex, weights) -> "EmpiricalMeasure":
        w = np.asarray(weights, dtype=float)
        return EmpiricalMeasure(domain, w / w.sum())


def empirical_from_samples(samples, domain: DomainIndex) -> EmpiricalMeasure:
    """Relative frequencies over the full domain; unobserved states get 0.

    ``samples`` is either a list of full assignments or an (n, n_vars) matrix
    of per-variable value indices in the domain's variable order.
    """
    if isinstance(samples, np.ndarray):
        idx = domain.indices_from_value_matrix(samples)
    else:
        idx = np.fromiter(
            (domain.index_of(s) for s in samples), dtype=np.int64, count=len(samples)
        )
    if len(idx) == 0:
        raise SampleOutOfDomain("empty sample list")
    if idx.min() < 0 or idx.max() >= domain.size:
        raise SampleOutOfDomain(f"state index {idx.max()} out of range")
    counts = np.bincount(idx, minlength=domain.size).astype(float)
    return EmpiricalMeasure(domain, counts / counts.sum())


@dataclass(frozen=True)
class DistributionPair:
    """Base and abstracted empirical measures for one base intervention."""

    iota: Intervention
    base: EmpiricalMeasure
    abstracted: EmpiricalMeasure


@dataclass(frozen=True)
class PairSet:
    """One DistributionPair per base intervention, plus the poset and map."""

    pairs: tuple  # tuple of DistributionPair, ordered like the poset
    poset: InterventionPoset
    omega: OmegaMap

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def get(self, iota: Intervention) -> DistributionPair:
        for p in self.pairs:
            if p.iota == iota:
                return p
        raise DomainMismatch(f"no pair for {iota}")

    def without(self, iota: Intervention) -> "PairSet":
        kept = tuple(p for p in self.pairs if p.iota != iota)
        return PairSet(kept, self.poset.without(iota), self.omega)

    @property
    def base_domain(self) -> DomainIndex:
        return self.pairs[0].base.domain

    @property
    def abs_domain(self) -> DomainIndex:
        return self.pairs[0].abstracted.domain


def derive_seed(seed, pair_index: int, side: str):
    """Deterministic per-(intervention, side) seed for pair construction."""
    head = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    return (*head, int(pair_index), 0 if side == "base" else 1)


def build_pairs(
    base: DiscreteScm,
    abstracted: DiscreteScm,
    poset: InterventionPoset,
    omega: OmegaMap,
    abs_poset: InterventionPoset | None = None,
    n_base: int = DEFAULT_SAMPLES_PER_INTERVENTION,
    n_abs: int = DEFAULT_SAMPLES_PER_INTERVENTION,
    seed=0,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> PairSet:
    """Sample each (intervention, image) pair into a PairSet."""
    if abs_poset is not None:
        validate_omega(omega, poset, abs_poset)
    base_domain = enumerate_domain(base, cap=cap)
    abs_domain = enumerate_domain(abstracted, cap=cap)
    pairs = []
    for k, iota in enumerate(poset):
        bm = sample_value_matrix(base, iota, n_base, derive_seed(seed, k, "base"))
        am = sample_value_matrix(abstracted, omega(iota), n_abs, derive_seed(seed, k, "abs"))
        pairs.append(
            DistributionPair(
                iota,
                empirical_from_samples(bm, base_domain),
                empirical_from_samples(am, abs_domain),
            )
        )
    return PairSet(tuple(pairs), poset, omega)


def pairs_from_state_indices(
    poset: InterventionPoset,
    omega: OmegaMap,
    base_domain: DomainIndex,
    abs_domain: DomainIndex,
    base_states: dict,
    abs_states: dict,
) -> PairSet:
    """Build a PairSet from precollected state indices per intervention.

    Used for data-backed scenarios where samples come from files rather
    than from model sampling.
    """
    pairs = []
    for iota in poset:
        b_idx = np.asarray(base_states[iota], dtype=np.int64)
        a_idx = np.asarray(abs_states[omega(iota)], dtype=np.int64)
        b = np.bincount(b_idx, minlength=base_domain.size).astype(float)
        a = np.bincount(a_idx, minlength=abs_domain.size).astype(float)
        pairs.append(
            DistributionPair(
                iota,
                EmpiricalMeasure.from_weights(base_domain, b),
                EmpiricalMeasure.from_weights(abs_domain, a),
            )
        )
    return PairSet(tuple(pairs), poset, omega)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def write_samples_csv(path, samples, names) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for s in samples:
            writer.writerow([s[n] for n in names])


def read_samples_csv(path, domain: DomainIndex) -> list:
    """Samples CSV: header of variable names, one row per sample."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SampleOutOfDomain(f"{path} has no header")
        missing = [n for n in domain.names if n not in header]
        if missing:
            raise SampleOutOfDomain(f"{path} lacks columns {missing}")
        cols = [header.index(n) for n in domain.names]
        out = []
        for row in reader:
            assignment = {}
            for name, c in zip(domain.names, cols):
                var = domain.variables[domain.position(name)]
                raw = row[c]
                # values are matched against the declared domain, trying the
                # domain value's own type first, then plain string
                value = None
                for v in var.domain:
                    if str(v) == raw:
                        value = v
                        break
                if value is None:
                    raise SampleOutOfDomain(f"{path}: {raw!r} not in domain of {name!r}")
                assignment[name] = value
            out.append(assignment)
    return out


def export_pairset(pairs: PairSet, out_dir) -> None:
    """Write pair_<k>_<base|abs>.csv weight files plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"pairs": []}
    for k, pair in enumerate(pairs):
        for side, measure in (("base", pair.base), ("abs", pair.abstracted)):
            name = f"pair_{k}_{side}.csv"
            with open(out / name, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["state", "weight"])
                for label, w in zip(measure.domain.labels(), measure.weights):
                    writer.writerow([label, repr(float(w))])
        manifest["pairs"].append(
            {
                "index": k,
                "intervention": str(pair.iota),
                "image": str(pairs.omega(pair.iota)),
                "base_file": f"pair_{k}_base.csv",
                "abs_file": f"pair_{k}_abs.csv",
            }
        )
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
