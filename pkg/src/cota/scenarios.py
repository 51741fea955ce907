"""Shipped scenarios: model pairs, intervention sets, maps and alignments.

CPT values are not dictated by any external source; the constants below are
the documented defaults, chosen so every interventional marginal stays well
inside (0, 1) and the shipped map between the models is close to exact on
the shipped intervention sets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import DomainIndex, VariableSpec
from .errors import EmptyFile, MissingColumn, SchemaMismatch
from .interventions import (
    Intervention,
    InterventionPoset,
    OmegaMap,
    maximal_chains,
    validate_omega,
)
from .measures import PairSet, build_pairs, pairs_from_state_indices
from .model import CausalDag, DiscreteScm, make_rng, validate_dag


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs: models, posets, map, cost alignment, metric."""

    name: str
    base: DiscreteScm
    abstracted: DiscreteScm
    poset: InterventionPoset
    abs_poset: InterventionPoset
    omega: OmegaMap
    hamming_alignment: dict
    wass_ground: str = "hamming"  # hamming | bin_index
    grid_step: float = 0.1
    binning: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # EBM regression tables

    def __post_init__(self):
        validate_dag(self.base.dag)
        validate_dag(self.abstracted.dag)
        validate_omega(self.omega, self.poset, self.abs_poset)

    @property
    def base_domain(self) -> DomainIndex:
        return self.base.domain_index()

    @property
    def abs_domain(self) -> DomainIndex:
        return self.abstracted.domain_index()

    def chains(self):
        return maximal_chains(self.poset)

    def sample_pairs(self, n_base=1000, n_abs=1000, seed=0) -> PairSet:
        return build_pairs(
            self.base,
            self.abstracted,
            self.poset,
            self.omega,
            abs_poset=None,
            n_base=n_base,
            n_abs=n_abs,
            seed=seed,
        )


# ---------------------------------------------------------------------------
# Smoking -> Tar -> Cancer and its two-variable abstraction
# ---------------------------------------------------------------------------

# Shipped chain CPTs.  Tar tracks smoking strongly and cancer tracks tar
# moderately; the abstracted conditional is the tar-marginalized mixture, so
# the shipped abstraction is near-exact on both intervention sets.
STC_P_S1 = 0.5
STC_P_T1_GIVEN_S = (0.80, 0.95)  # indexed by S
STC_P_C1_GIVEN_T = (0.60, 0.75)  # indexed by T


def _stc_base() -> DiscreteScm:
    s, t, c = (VariableSpec(n, (0, 1)) for n in ("S", "T", "C"))
    dag = CausalDag.of([s, t, c], {"T": ("S",), "C": ("T",)})
    a0, a1 = STC_P_T1_GIVEN_S
    b0, b1 = STC_P_C1_GIVEN_T
    return DiscreteScm.of(
        dag,
        {
            "S": [[1 - STC_P_S1, STC_P_S1]],
            "T": [[1 - a0, a0], [1 - a1, a1]],
            "C": [[1 - b0, b0], [1 - b1, b1]],
        },
    )


def _stc_abstracted() -> DiscreteScm:
    sp = VariableSpec("S'", (0, 1))
    cp = VariableSpec("C'", (0, 1))
    dag = CausalDag.of([sp, cp], {"C'": ("S'",)})
    a0, a1 = STC_P_T1_GIVEN_S
    b0, b1 = STC_P_C1_GIVEN_T
    mix0 = (1 - a0) * b0 + a0 * b1
    mix1 = (1 - a1) * b0 + a1 * b1
    return DiscreteScm.of(
        dag,
        {
            "S'": [[1 - STC_P_S1, STC_P_S1]],
            "C'": [[1 - mix0, mix0], [1 - mix1, mix1]],
        },
    )


def build_stc(variant: str = "np") -> Scenario:
    """The chain scenario; interventions hit parentless or mediated nodes.

    The Hamming alignment compares tuples position-wise (the abstracted
    second coordinate against the dropped mediator), which is what makes it
    a non-causal baseline rather than an oracle pairing.
    """
    base = _stc_base()
    abstracted = _stc_abstracted()
    null = Intervention()
    if variant == "np":
        i_s0 = Intervention.of(S=0)
        i_s1 = Intervention.of(S=1)
        i_s0t1 = Intervention.of(S=0, T=1)
        i_s1t1 = Intervention.of(S=1, T=1)
        poset = InterventionPoset.of([null, i_s0, i_s1, i_s0t1, i_s1t1])
        a_null = Intervention()
        a_s0 = Intervention.of(**{"S'": 0})
        a_s1 = Intervention.of(**{"S'": 1})
        abs_poset = InterventionPoset.of([a_null, a_s0, a_s1])
        omega = OmegaMap.of(
            {null: a_null, i_s0: a_s0, i_s1: a_s1, i_s0t1: a_s0, i_s1t1: a_s1}
        )
    elif variant == "p":
        i_t0 = Intervention.of(T=0)
        i_t1 = Intervention.of(T=1)
        poset = InterventionPoset.of([null, i_t0, i_t1])
        a_null = Intervention()
        a_c0 = Intervention.of(**{"C'": 0})
        a_c1 = Intervention.of(**{"C'": 1})
        abs_poset = InterventionPoset.of([a_null, a_c0, a_c1])
        omega = OmegaMap.of({null: a_null, i_t0: a_c0, i_t1: a_c1})
    else:
        raise SchemaMismatch(f"unknown stc variant {variant!r}")
    return Scenario(
        name=f"stc_{variant}",
        base=base,
        abstracted=abstracted,
        poset=poset,
        abs_poset=abs_poset,
        omega=omega,
        hamming_alignment={"S'": ["S"], "C'": ["T", "C"]},
    )


def build_identity(interventions: str = "s") -> Scenario:
    """Base equals abstracted model, identity map; used as a pipeline check."""
    base = _stc_base()
    null = Intervention()
    if interventions == "null":
        ivs = [null]
    else:
        ivs = [null, Intervention.of(S=0), Intervention.of(S=1)]
    poset = InterventionPoset.of(ivs)
    omega = OmegaMap.of({i: i for i in ivs})
    return Scenario(
        name="identity",
        base=base,
        abstracted=base,
        poset=poset,
        abs_poset=poset,
        omega=omega,
        hamming_alignment={"S": ["S"], "T": ["T"], "C": ["C"]},
    )


# ---------------------------------------------------------------------------
# Eight-variable lung-cancer network and its three-variable abstraction
# ---------------------------------------------------------------------------

LUCAS_PRIORS = {"AN": 0.35, "PP": 0.45, "GE": 0.30, "AL": 0.25}
LUCAS_SM = {(0, 0): 0.15, (0, 1): 0.45, (1, 0): 0.50, (1, 1): 0.80}  # (AN, PP)
LUCAS_LC = {(0, 0): 0.10, (0, 1): 0.35, (1, 0): 0.40, (1, 1): 0.75}  # (SM, GE)
LUCAS_FA = {0: 0.20, 1: 0.65}  # LC
LUCAS_CO = {(0, 0): 0.10, (0, 1): 0.50, (1, 0): 0.60, (1, 1): 0.85}  # (LC, AL)


def _binary_rows(table, order):
    rows = []
    for combo in order:
        p1 = table[combo]
        rows.append([1 - p1, p1])
    return rows


def build_lucas() -> Scenario:
    names = ["AN", "SM", "GE", "PP", "LC", "FA", "CO", "AL"]
    specs = [VariableSpec(n, (0, 1)) for n in names]
    parents = {
        "SM": ("AN", "PP"),
        "LC": ("SM", "GE"),
        "FA": ("LC",),
        "CO": ("LC", "AL"),
    }
    dag = CausalDag.of(specs, parents)
    combos2 = [(0, 0), (0, 1), (1, 0), (1, 1)]
    cpts = {
        "AN": [[1 - LUCAS_PRIORS["AN"], LUCAS_PRIORS["AN"]]],
        "PP": [[1 - LUCAS_PRIORS["PP"], LUCAS_PRIORS["PP"]]],
        "GE": [[1 - LUCAS_PRIORS["GE"], LUCAS_PRIORS["GE"]]],
        "AL": [[1 - LUCAS_PRIORS["AL"], LUCAS_PRIORS["AL"]]],
        "SM": _binary_rows(LUCAS_SM, combos2),
        "LC": _binary_rows(LUCAS_LC, combos2),
        "FA": _binary_rows(LUCAS_FA, [0, 1]),
        "CO": _binary_rows(LUCAS_CO, combos2),
    }
    base = DiscreteScm.of(dag, cpts)

    abs_specs = [VariableSpec(n, (0, 1)) for n in ("EN'", "GE'", "LC'")]
    abs_dag = CausalDag.of(abs_specs, {"LC'": ("EN'", "GE'")})
    abstracted = DiscreteScm.of(
        abs_dag,
        {
            "EN'": [[0.60, 0.40]],
            "GE'": [[0.70, 0.30]],
            "LC'": _binary_rows(
                {(0, 0): 0.12, (0, 1): 0.40, (1, 0): 0.45, (1, 1): 0.78}, combos2
            ),
        },
    )

    null = Intervention()
    i_an = Intervention.of(AN=0)
    i_ge = Intervention.of(GE=1)
    i_al = Intervention.of(AL=0)
    i_anpp = Intervention.of(AN=0, PP=0)
    i_anppsm0 = Intervention.of(AN=0, PP=0, SM=0)
    i_anppsm1 = Intervention.of(AN=0, PP=0, SM=1)
    poset = InterventionPoset.of([null, i_an, i_ge, i_al, i_anpp, i_anppsm0, i_anppsm1])

    a_null = Intervention()
    a_en0 = Intervention.of(**{"EN'": 0})
    a_ge0 = Intervention.of(**{"GE'": 0})
    a_ge1 = Intervention.of(**{"GE'": 1})
    abs_poset = InterventionPoset.of([a_null, a_en0, a_ge0, a_ge1])
    omega = OmegaMap.of(
        {
            null: a_null,
            i_an: a_en0,
            i_anpp: a_en0,
            i_anppsm0: a_en0,
            i_anppsm1: a_en0,
            i_ge: a_ge1,
            i_al: a_ge0,
        }
    )
    return Scenario(
        name="lucas",
        base=base,
        abstracted=abstracted,
        poset=poset,
        abs_poset=abs_poset,
        omega=omega,
        hamming_alignment={
            "EN'": ["AN", "PP", "SM"],
            "LC'": ["LC", "FA", "CO"],
            "GE'": ["GE", "AL"],
        },
    )


# ---------------------------------------------------------------------------
# Battery-manufacturing scenario: two labs, CSV-backed
# ---------------------------------------------------------------------------

EBM_BASE_CLASSES = (75, 110, 180, 200)
EBM_ABS_CLASSES = (75, 100, 200)
EBM_CLASS_MAP = {75: 75, 110: 100, 180: 200, 200: 200}
DEFAULT_BINS = 5

# Synthetic stand-in: linear control-to-loading responses for the two labs.
SYN_WMG_SLOPES = (0.050, 0.055)
SYN_WMG_INTERCEPTS = (2.0, 1.0)
SYN_WMG_NOISE = 0.6
SYN_LRCS_SLOPE = 0.052
SYN_LRCS_INTERCEPT = 1.6
SYN_LRCS_NOISE = 0.9


def generate_ebm_tables(seed=0, n_wmg_per_class=60, n_lrcs_per_class=10):
    """Synthetic stand-in rows mimicking the two labs' schemas."""
    rng = make_rng(("ebm", int(seed)))
    wmg = []
    for cg in EBM_BASE_CLASSES:
        for _ in range(n_wmg_per_class):
            ml1 = SYN_WMG_SLOPES[0] * cg + SYN_WMG_INTERCEPTS[0] + SYN_WMG_NOISE * rng.standard_normal()
            ml2 = SYN_WMG_SLOPES[1] * cg + SYN_WMG_INTERCEPTS[1] + SYN_WMG_NOISE * rng.standard_normal()
            wmg.append({"CG": cg, "ML1": ml1, "ML2": ml2})
    lrcs = []
    for cg in EBM_ABS_CLASSES:
        for _ in range(n_lrcs_per_class):
            ml = SYN_LRCS_SLOPE * cg + SYN_LRCS_INTERCEPT + SYN_LRCS_NOISE * rng.standard_normal()
            lrcs.append({"CG": cg, "ML": ml})
    return lrcs, wmg


def write_ebm_csvs(out_dir, seed=0, **kwargs):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lrcs, wmg = generate_ebm_tables(seed=seed, **kwargs)
    lrcs_path = out / "lrcs.csv"
    wmg_path = out / "wmg.csv"
    with open(lrcs_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["CG", "ML"])
        w.writeheader()
        w.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in lrcs)
    with open(wmg_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["CG", "ML1", "ML2"])
        w.writeheader()
        w.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in wmg)
    return lrcs_path, wmg_path


def _read_table(path, required):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise MissingColumn(col, str(path))
        for row in reader:
            rows.append({k: float(row[k]) for k in required})
    if not rows:
        raise EmptyFile(str(path))
    return rows


def _bin_edges(values, n_bins):
    lo, hi = float(min(values)), float(max(values))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return edges, mids


def bin_value(value, edges) -> int:
    idx = int(np.searchsorted(edges, value, side="right") - 1)
    return min(max(idx, 0), len(edges) - 2)


def _fit_conditional(rows, classes, key, edges, n_bins):
    """Empirical P(bin | class) with a light floor so rows stay valid."""
    table = np.full((len(classes), n_bins), 1e-6)
    for r in rows:
        i = classes.index(r["CG"])
        table[i, bin_value(r[key], edges)] += 1.0
    return table / table.sum(axis=1, keepdims=True)


def load_ebm(lrcs_csv, wmg_csv, n_bins: int = DEFAULT_BINS) -> Scenario:
    """CSV-backed scenario: models fitted from rows, pairs drawn from rows.

    The base model is CG -> {ML1, ML2} on the first lab's rows; the
    abstracted model is CG -> ML on the second lab's.  Loading columns are
    discretized into equal-width bins over each column's observed range.
    """
    lrcs = _read_table(lrcs_csv, ["CG", "ML"])
    wmg = _read_table(wmg_csv, ["CG", "ML1", "ML2"])
    for r in wmg:
        if int(r["CG"]) not in EBM_BASE_CLASSES:
            raise SchemaMismatch(f"WMG comma gap {r['CG']} not in {EBM_BASE_CLASSES}")
    for r in lrcs:
        if int(r["CG"]) not in EBM_ABS_CLASSES:
            raise SchemaMismatch(f"LRCS comma gap {r['CG']} not in {EBM_ABS_CLASSES}")

    binning = {}
    for key, rows in (("ML1", wmg), ("ML2", wmg)):
        edges, mids = _bin_edges([r[key] for r in rows], n_bins)
        binning[key] = {"edges": edges, "mids": mids}
    edges, mids = _bin_edges([r["ML"] for r in lrcs], n_bins)
    binning["ML"] = {"edges": edges, "mids": mids}

    base_classes = list(EBM_BASE_CLASSES)
    abs_classes = list(EBM_ABS_CLASSES)
    bins = tuple(range(n_bins))
    base_specs = [
        VariableSpec("CG", tuple(base_classes)),
        VariableSpec("ML1", bins),
        VariableSpec("ML2", bins),
    ]
    base_dag = CausalDag.of(base_specs, {"ML1": ("CG",), "ML2": ("CG",)})
    cg_counts = np.array(
        [sum(1 for r in wmg if r["CG"] == c) for c in base_classes], dtype=float
    )
    base = DiscreteScm.of(
        base_dag,
        {
            "CG": [list(cg_counts / cg_counts.sum())],
            "ML1": _fit_conditional(wmg, base_classes, "ML1", binning["ML1"]["edges"], n_bins),
            "ML2": _fit_conditional(wmg, base_classes, "ML2", binning["ML2"]["edges"], n_bins),
        },
    )
    abs_specs = [VariableSpec("CG'", tuple(abs_classes)), VariableSpec("ML'", bins)]
    abs_dag = CausalDag.of(abs_specs, {"ML'": ("CG'",)})
    cgp_counts = np.array(
        [sum(1 for r in lrcs if r["CG"] == c) for c in abs_classes], dtype=float
    )
    lrcs_renamed = [{"CG": r["CG"], "ML": r["ML"]} for r in lrcs]
    abstracted = DiscreteScm.of(
        abs_dag,
        {
            "CG'": [list(cgp_counts / cgp_counts.sum())],
            "ML'": _fit_conditional(lrcs_renamed, abs_classes, "ML", binning["ML"]["edges"], n_bins),
        },
    )

    null = Intervention()
    base_ivs = {c: Intervention.of(CG=c) for c in base_classes}
    abs_ivs = {c: Intervention.of(**{"CG'": c}) for c in abs_classes}
    poset = InterventionPoset.of([null, *base_ivs.values()])
    abs_poset = InterventionPoset.of([null, *abs_ivs.values()])
    omega = OmegaMap.of(
        {null: null, **{base_ivs[c]: abs_ivs[EBM_CLASS_MAP[c]] for c in base_classes}}
    )
    return Scenario(
        name="ebm",
        base=base,
        abstracted=abstracted,
        poset=poset,
        abs_poset=abs_poset,
        omega=omega,
        hamming_alignment={"CG'": ["CG"], "ML'": ["ML1", "ML2"]},
        wass_ground="bin_index",
        binning=binning,
        tables={"lrcs": lrcs, "wmg": wmg},
    )


def ebm_state_index(scenario: Scenario, row, side: str) -> int:
    """Discretize a raw row into a joint-domain state index."""
    binning = scenario.binning
    if side == "base":
        domain = scenario.base_domain
        assignment = {
            "CG": int(row["CG"]),
            "ML1": bin_value(row["ML1"], binning["ML1"]["edges"]),
            "ML2": bin_value(row["ML2"], binning["ML2"]["edges"]),
        }
    else:
        domain = scenario.abs_domain
        assignment = {
            "CG'": int(row["CG"]),
            "ML'": bin_value(row["ML"], binning["ML"]["edges"]),
        }
    return domain.index_of(assignment)


def ebm_pairs(scenario: Scenario) -> PairSet:
    """Pair set built from the data rows themselves (one class per pair)."""
    wmg = scenario.tables["wmg"]
    lrcs = scenario.tables["lrcs"]
    base_states: dict = {}
    abs_states: dict = {}
    all_base = [ebm_state_index(scenario, r, "base") for r in wmg]
    all_abs = [ebm_state_index(scenario, r, "abs") for r in lrcs]
    null = Intervention()
    base_states[null] = all_base
    abs_states[null] = all_abs
    for c in EBM_BASE_CLASSES:
        base_states[Intervention.of(CG=c)] = [
            s for s, r in zip(all_base, wmg) if r["CG"] == c
        ]
    for c in EBM_ABS_CLASSES:
        abs_states[Intervention.of(**{"CG'": c})] = [
            s for s, r in zip(all_abs, lrcs) if r["CG"] == c
        ]
    return pairs_from_state_indices(
        scenario.poset,
        scenario.omega,
        scenario.base_domain,
        scenario.abs_domain,
        base_states,
        abs_states,
    )


SCENARIO_BUILDERS = {
    "stc_np": lambda: build_stc("np"),
    "stc_p": lambda: build_stc("p"),
    "lucas": build_lucas,
    "identity": build_identity,
}


def get_scenario(name: str, **kwargs) -> Scenario:
    if name == "ebm":
        if "lrcs_csv" in kwargs and kwargs["lrcs_csv"]:
            return load_ebm(kwargs["lrcs_csv"], kwargs["wmg_csv"], kwargs.get("n_bins", DEFAULT_BINS))
        raise SchemaMismatch("ebm scenario needs CSV paths (or use --synthetic)")
    if name not in SCENARIO_BUILDERS:
        raise SchemaMismatch(f"unknown scenario {name!r}")
    return SCENARIO_BUILDERS[name]()
