"""Dev bench: lambda effect on STC_np loo error (not part of the package)."""
import time

import numpy as np

from cota.constraints import DivergenceKind
from cota.evaluation import (
    Experiment,
    MethodSpec,
    divergence_between,
    ErrorMetric,
    chain_problems,
    learn_cota,
    learn_baseline,
    make_context,
)
from cota.maps import AggregationMode, pushforward_weights
from cota.scenarios import build_stc
from cota.solver import CotaWeights, SolverConfig

s = build_stc("np")
reps = 6
exp = Experiment(scenario=s, cost_kind="omega", repetitions=reps, seed=11)
ctx = exp.context()
metric = ErrorMetric("jsd")

grid = {
    "k1.0 l0 m0": CotaWeights.fold(1.0, 0.0, 0.0),
    "k.9 l0 m.1": CotaWeights.fold(0.9, 0.0, 0.1),
    "k.8 l0 m.2": CotaWeights.fold(0.8, 0.0, 0.2),
    "k.99 l0 m.01": CotaWeights.fold(0.99, 0.0, 0.01),
    "k.8 l.1 m.1": CotaWeights.fold(0.8, 0.1, 0.1),
    "k.7 l.2 m.1": CotaWeights.fold(0.7, 0.2, 0.1),
    "k.8 l.17 m.03": CotaWeights.fold(0.8, 0.17, 0.03),
    "k.5 l.4 m.1": CotaWeights.fold(0.5, 0.4, 0.1),
    "k.3 l.6 m.1": CotaWeights.fold(0.3, 0.6, 0.1),
    "k.2 l.7 m.1": CotaWeights.fold(0.2, 0.7, 0.1),
    "k.89 l.1 m.01": CotaWeights.fold(0.89, 0.1, 0.01),
    "k.69 l.3 m.01": CotaWeights.fold(0.69, 0.3, 0.01),
    "k.49 l.5 m.01": CotaWeights.fold(0.49, 0.5, 0.01),
}

t0 = time.time()
errors = {name: [] for name in grid}
base_errors = {"pwise": [], "bary": [], "map": []}
for rep in range(reps):
    pairs = exp.pairs_for_rep(rep)
    holdouts = [(h, chain_problems(ctx, pairs.without(h))) for h in s.poset]
    for name, w in grid.items():
        errs = []
        for held, problems in holdouts:
            reduced = pairs.without(held)
            tau, _ = learn_cota(ctx, reduced, w, DivergenceKind.FRO,
                                AggregationMode.PLAN_AVERAGE, "exact", problems)
            pair = pairs.get(held)
            pushed = pushforward_weights(tau, pair.base.weights)
            errs.append(divergence_between(metric, pushed, pair.abstracted.weights))
        errors[name].append(np.mean(errs))
    for kind in base_errors:
        errs = []
        for held, _ in holdouts:
            reduced = pairs.without(held)
            tau = learn_baseline(ctx, reduced, kind)
            pair = pairs.get(held)
            pushed = pushforward_weights(tau, pair.base.weights)
            errs.append(divergence_between(metric, pushed, pair.abstracted.weights))
        base_errors[kind].append(np.mean(errs))

print(f"bench time {time.time()-t0:.1f}s  ({reps} reps x 5 holdouts)")
for name, vals in errors.items():
    print(f"  {name:18s} mean {np.mean(vals):.4f} +- {np.std(vals):.4f}")
for kind, vals in base_errors.items():
    print(f"  {kind:18s} mean {np.mean(vals):.4f} +- {np.std(vals):.4f}")
