"""Stochastic abstraction maps extracted from transport plans.

A map assigns every base-domain value a probability vector over the
abstracted domain; it is read off a plan by normalizing columns.  Plans
from several chains are aggregated either by averaging the plans first or
by averaging the per-plan maps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import DomainIndex
from .errors import DomainMismatch, EmptyList, ShapeMismatch
from .measures import EmpiricalMeasure

COLUMN_TOL = 1e-9


@dataclass(frozen=True)
class StochasticMap:
    """Column-stochastic (abs-domain x base-domain) matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ShapeMismatch("2-d matrix", self.matrix.shape)
        if np.any(self.matrix < 0):
            raise ShapeMismatch("nonnegative entries", "negative entry")
        col_sums = self.matrix.sum(axis=0)
        if np.any(np.abs(col_sums - 1.0) > 1e-6):
            raise ShapeMismatch("column sums 1", float(np.max(np.abs(col_sums - 1.0))))

    @property
    def shape(self):
        return self.matrix.shape


class AggregationMode(Enum):
    PLAN_AVERAGE = "plan"
    MAP_AVERAGE = "map"


def _normalized_columns(matrix: np.ndarray):
    """Column-normalized copy plus the mask of zero-mass columns."""
    mass = matrix.sum(axis=0)
    dead = mass <= COLUMN_TOL
    safe = np.where(dead, 1.0, mass)
    return matrix / safe[None, :], dead


def plan_to_map(plan) -> StochasticMap:
    """Column-normalize a plan; zero-mass columns become uniform columns."""
    matrix = plan.matrix if hasattr(plan, "matrix") else np.asarray(plan, float)
    cols, dead = _normalized_columns(matrix)
    if dead.any():
        cols = cols.copy()
        cols[:, dead] = 1.0 / matrix.shape[0]
    return StochasticMap(cols)


def aggregate(plans, mode: AggregationMode) -> StochasticMap:
    """Combine plans into a single map.

    PLAN_AVERAGE extracts the map from the mean plan.  MAP_AVERAGE averages
    per-plan maps column-wise; a plan that transports no mass to a value
    contributes nothing to that value's column (a zero-support plan knows
    nothing about it), and a value untouched by every plan falls back to
    the uniform column.
    """
    mats = [p.matrix if hasattr(p, "matrix") else np.asarray(p, float) for p in plans]
    if not mats:
        raise EmptyList("plans")
    shape = mats[0].shape
    for m in mats:
        if m.shape != shape:
            raise ShapeMismatch(shape, m.shape)
    if mode is AggregationMode.PLAN_AVERAGE:
        return plan_to_map(np.mean(mats, axis=0))
    acc = np.zeros(shape)
    contributors = np.zeros(shape[1])
    for m in mats:
        cols, dead = _normalized_columns(m)
        live = ~dead
        acc[:, live] += cols[:, live]
        contributors += live
    dead = contributors == 0
    live_scale = np.where(dead, 1.0, contributors)
    acc /= live_scale[None, :]
    acc[:, dead] = 1.0 / shape[0]
    return StochasticMap(acc)


def pushforward_weights(tau: StochasticMap, weights) -> np.ndarray:
    w = np.asarray(weights, float)
    if tau.shape[1] != len(w):
        raise DomainMismatch(
            f"map expects {tau.shape[1]} base values, got {len(w)} weights"
        )
    return tau.matrix @ w


def pushforward(
    tau: StochasticMap, measure: EmpiricalMeasure, abs_domain: DomainIndex
) -> EmpiricalMeasure:
    """Push a base measure through the map: matrix times weight vector."""
    if abs_domain.size != tau.shape[0]:
        raise DomainMismatch(
            f"map yields {tau.shape[0]} abstracted values, domain has {abs_domain.size}"
        )
    out = pushforward_weights(tau, measure.weights)
    return EmpiricalMeasure.from_weights(abs_domain, out)


def export_map_csv(path, tau: StochasticMap, base_labels, abs_labels) -> None:
    """Transposed view: one row per base value, columns are abstracted values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["base_value", *abs_labels])
        for j, label in enumerate(base_labels):
            writer.writerow([label, *[repr(float(v)) for v in tau.matrix[:, j]]])
