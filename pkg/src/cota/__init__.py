"""Causal abstraction learning via constrained entropic optimal transport."""

from .constraints import (
    DivergenceKind,
    IndexSets,
    NormalizingVectors,
    bregman_div,
    compatibility_index_sets,
    delta_abs,
    delta_approx,
    delta_base,
    normalizing_vectors,
)
from .costs import CostMatrix, hamming_cost, omega_cost
from .domain import DomainIndex, VariableSpec, is_compatible
from .errors import CotaError
from .evaluation import (
    ErrorMetric,
    EvalReport,
    Experiment,
    MethodSpec,
    abstraction_error,
    downstream_regression,
    grid_search,
    learn_baseline,
    learn_cota,
    loo_evaluate,
    weight_grid,
)
from .interventions import (
    Intervention,
    InterventionPoset,
    OmegaMap,
    maximal_chains,
    poset_leq,
    validate_omega,
)
from .maps import AggregationMode, StochasticMap, aggregate, plan_to_map, pushforward
from .measures import (
    DistributionPair,
    EmpiricalMeasure,
    PairSet,
    build_pairs,
    empirical_from_samples,
    enumerate_domain,
)
from .model import (
    CausalDag,
    DiscreteScm,
    Distribution,
    apply_do,
    exact_distribution,
    sample,
    validate_dag,
)
from .scenarios import Scenario, build_lucas, build_stc, get_scenario, load_ebm
from .solver import (
    CotaWeights,
    SolveReport,
    SolverConfig,
    TransportPlan,
    cota_gradient,
    cota_objective,
    entropy,
    lp_ot_oracle,
    sinkhorn,
    solve_cota,
    wasserstein_barycenter,
)

__version__ = "0.1.0"
