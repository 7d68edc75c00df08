"""Synthetic benchmark: ground-truth causal models, samplers, and scoring.

Provides layered structural causal models over option/metric/objective
variables, deterministic observational and interventional sampling, fault
curation (extreme-percentile rows for continuous objectives, false rows for
boolean ones), and prediction scoring against the known root causes. Also
hosts the curated multi-fault benchmark and the distribution-shift series
used by the acceptance suite.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .cbi import cbi_root_causes
from .dataset import Dataset, Kind, Role, VariableMeta
from .effects import Diagnosis, ModelParams, ace_edge, diagnose, learn_model
from .errors import (
    EngineError,
    InputError,
    NoFaultyRows,
    NoPathsFound,
    ObjectiveMismatch,
    UnknownVertex,
)
from .resolve import Admg

logger = logging.getLogger(__name__)

EFFECT_EPS = 1e-6  # smallest total linear effect that counts as causal


# --------------------------------------------------------------------------
# model definition


@dataclass(frozen=True)
class Mechanism:
    """Generating equation for one variable.

    Kinds:
      ``uniform_levels``     root drawn uniformly from {0..levels-1};
      ``linear``             intercept + weights . parents + noise;
      ``threshold_levels``   the linear score cut at ``thresholds`` into codes;
      ``boolean_threshold``  1 when the linear score exceeds thresholds[0];
      ``cpt``                row lookup of parent codes in a conditional table.
    Hidden parents model latent confounding and enter the linear score with
    their own weights.
    """

    kind: str
    parents: tuple[str, ...] = ()
    weights: tuple[float, ...] = ()
    intercept: float = 0.0
    noise_scale: float = 1.0
    levels: int = 0
    thresholds: tuple[float, ...] = ()
    hidden_parents: tuple[str, ...] = ()
    hidden_weights: tuple[float, ...] = ()
    cpt: tuple[tuple[tuple[int, ...], tuple[float, ...]], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parents": list(self.parents),
            "weights": list(self.weights),
            "intercept": self.intercept,
            "noise_scale": self.noise_scale,
            "levels": self.levels,
            "thresholds": list(self.thresholds),
            "hidden_parents": list(self.hidden_parents),
            "hidden_weights": list(self.hidden_weights),
            "cpt": [[list(k), list(v)] for k, v in self.cpt],
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "Mechanism":
        return cls(
            kind=payload["kind"],
            parents=tuple(payload.get("parents", ())),
            weights=tuple(payload.get("weights", ())),
            intercept=float(payload.get("intercept", 0.0)),
            noise_scale=float(payload.get("noise_scale", 1.0)),
            levels=int(payload.get("levels", 0)),
            thresholds=tuple(payload.get("thresholds", ())),
            hidden_parents=tuple(payload.get("hidden_parents", ())),
            hidden_weights=tuple(payload.get("hidden_weights", ())),
            cpt=tuple(
                (tuple(int(x) for x in k), tuple(float(x) for x in v))
                for k, v in payload.get("cpt", ())
            ),
        )


@dataclass(frozen=True)
class Scm:
    """A ground-truth structural causal model with its mixed graph."""

    variables: tuple[VariableMeta, ...]
    graph: Admg
    mechanisms: Mapping[str, Mechanism]
    hidden: tuple[str, ...] = ()
    hidden_scale: float = 1.0
    seed: int = 0

    @property
    def options(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.role == Role.OPTION)

    @property
    def objectives(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.role == Role.OBJECTIVE)

    def to_json_dict(self) -> dict:
        return {
            "variables": [
                {"name": v.name, "role": v.role.value, "kind": v.kind.value}
                for v in self.variables
            ],
            "mechanisms": {
                name: mech.to_json_dict()
                for name, mech in sorted(self.mechanisms.items())
            },
            "hidden": list(self.hidden),
            "hidden_scale": self.hidden_scale,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "Scm":
        variables = tuple(
            VariableMeta(e["name"], Role(e["role"]), Kind(e["kind"]))
            for e in payload["variables"]
        )
        mechanisms = {
            name: Mechanism.from_json_dict(m)
            for name, m in payload["mechanisms"].items()
        }
        return scm_from_mechanisms(
            variables,
            mechanisms,
            hidden=tuple(payload.get("hidden", ())),
            hidden_scale=float(payload.get("hidden_scale", 1.0)),
            seed=int(payload.get("seed", 0)),
        )


def scm_from_mechanisms(
    variables: Sequence[VariableMeta],
    mechanisms: Mapping[str, Mechanism],
    hidden: Sequence[str] = (),
    hidden_scale: float = 1.0,
    seed: int = 0,
) -> Scm:
    """Assemble an Scm, deriving the mixed graph from the mechanisms: directed
    edges from listed parents, bidirected edges between variables sharing a
    hidden parent."""
    names = {v.name for v in variables}
    directed: set[tuple[str, str]] = set()
    users_of_hidden: dict[str, set[str]] = {h: set() for h in hidden}
    for name, mech in mechanisms.items():
        if name not in names:
            raise UnknownVertex(f"mechanism for unknown variable {name!r}", vertex=name)
        for p in mech.parents:
            if p not in names:
                raise UnknownVertex(f"parent {p!r} of {name!r} is unknown", vertex=p)
            directed.add((p, name))
        for h in mech.hidden_parents:
            if h not in users_of_hidden:
                raise UnknownVertex(f"hidden parent {h!r} of {name!r} is undeclared", vertex=h)
            users_of_hidden[h].add(name)
    for name in names:
        if name not in mechanisms:
            raise InputError(f"no mechanism for variable {name!r}", variable=name)
    bidirected: set[frozenset[str]] = set()
    for h, users in users_of_hidden.items():
        for a, b in itertools.combinations(sorted(users), 2):
            bidirected.add(frozenset((a, b)))
    graph = Admg(tuple(variables), frozenset(directed), frozenset(bidirected))
    return Scm(tuple(variables), graph, dict(mechanisms), tuple(hidden), hidden_scale, seed)


def with_seed(scm: Scm, seed: int) -> Scm:
    return replace(scm, seed=int(seed))


def scale_edge(scm: Scm, edge: tuple[str, str], factor: float) -> Scm:
    """A copy of the model with the weight of one directed edge scaled."""
    u, v = edge
    mech = scm.mechanisms.get(v)
    if mech is None or u not in mech.parents:
        raise UnknownVertex(f"no mechanism edge {u}->{v}", vertex=v)
    idx = mech.parents.index(u)
    weights = tuple(
        w * factor if i == idx else w for i, w in enumerate(mech.weights)
    )
    mechanisms = dict(scm.mechanisms)
    mechanisms[v] = replace(mech, weights=weights)
    return replace(scm, mechanisms=mechanisms)


# --------------------------------------------------------------------------
# sampling


def _linear_score(
    mech: Mechanism, values: Mapping[str, np.ndarray], noise: np.ndarray
) -> np.ndarray:
    score = np.full(noise.shape[0], mech.intercept, dtype=np.float64)
    for w, p in zip(mech.weights, mech.parents):
        score += w * values[p].astype(np.float64)
    for w, h in zip(mech.hidden_weights, mech.hidden_parents):
        score += w * values[h]
    return score + mech.noise_scale * noise


def _materialize(
    name: str,
    mech: Mechanism,
    values: Mapping[str, np.ndarray],
    rng: np.random.Generator,
    n: int,
    forced: float | None,
) -> np.ndarray:
    """Draw one variable. The noise stream is always consumed so that an
    intervention leaves the draws of every other variable untouched."""
    if mech.kind == "uniform_levels":
        draw = rng.integers(0, mech.levels, size=n)
        if forced is not None:
            return np.full(n, int(forced), dtype=np.int64)
        return draw.astype(np.int64)
    if mech.kind == "cpt":
        u = rng.random(n)
        if forced is not None:
            return np.full(n, int(forced), dtype=np.int64)
        table = {k: np.cumsum(v) for k, v in mech.cpt}
        if mech.parents:
            parent_codes = np.column_stack(
                [values[p].astype(np.int64) for p in mech.parents]
            )
        else:
            parent_codes = np.zeros((n, 0), dtype=np.int64)
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            key = tuple(int(c) for c in parent_codes[i])
            if key not in table:
                raise EngineError(
                    f"cpt for {name!r} lacks a row for parents {key}", variable=name
                )
            out[i] = int(np.searchsorted(table[key], u[i], side="right"))
        return out
    noise = rng.standard_normal(n)
    if mech.kind == "linear":
        if forced is not None:
            return np.full(n, float(forced), dtype=np.float64)
        return _linear_score(mech, values, noise)
    if mech.kind == "threshold_levels":
        if forced is not None:
            return np.full(n, int(forced), dtype=np.int64)
        score = _linear_score(mech, values, noise)
        codes = np.zeros(n, dtype=np.int64)
        for thr in mech.thresholds:
            codes += (score > thr).astype(np.int64)
        return codes
    if mech.kind == "boolean_threshold":
        if forced is not None:
            return np.full(n, int(forced), dtype=np.int64)
        score = _linear_score(mech, values, noise)
        return (score > mech.thresholds[0]).astype(np.int64)
    raise EngineError(f"unknown mechanism kind {mech.kind!r}", variable=name)


def intervene(scm: Scm, assignments: Mapping[str, float], n: int) -> Dataset:
    """Sample n rows from the model mutilated by fixing ``assignments``.

    Deterministic in (scm.seed, n): the same call returns an identical
    dataset, and an empty assignment map reproduces :func:`sample` exactly
    (all noise streams are consumed whether or not a variable is forced).
    """
    if n <= 0:
        raise InputError(f"sample size must be positive, got {n}", n=n)
    known = set(scm.graph.vertex_names)
    for name in assignments:
        if name not in known:
            raise UnknownVertex(f"cannot intervene on unknown vertex {name!r}", vertex=name)
    rng = np.random.default_rng(scm.seed)
    values: dict[str, np.ndarray] = {}
    for h in sorted(scm.hidden):
        values[h] = scm.hidden_scale * rng.standard_normal(n)
    for name in scm.graph.topological_order():
        forced = assignments.get(name)
        values[name] = _materialize(
            name, scm.mechanisms[name], values, rng, n, forced
        )
    columns = {v.name: values[v.name] for v in scm.variables}
    return Dataset(scm.variables, columns, n)


def sample(scm: Scm, n: int) -> Dataset:
    """Observational sample of n rows; deterministic in (scm.seed, n)."""
    return intervene(scm, {}, n)


def interventional_ace(
    scm: Scm, treatment: str, outcome: str, n: int = 20000
) -> float:
    """Oracle average causal effect by simulation: intervene at every level
    of a discrete treatment and average the pairwise absolute differences of
    the outcome means. Paired noise streams make level contrasts tight."""
    mech = scm.mechanisms.get(treatment)
    if mech is None:
        raise UnknownVertex(f"no such vertex: {treatment!r}", vertex=treatment)
    if mech.kind in ("uniform_levels", "cpt"):
        n_levels = mech.levels
    elif mech.kind == "threshold_levels":
        n_levels = len(mech.thresholds) + 1
    elif mech.kind == "boolean_threshold":
        n_levels = 2
    else:
        raise InputError(
            f"oracle effects need a discrete treatment; {treatment!r} is {mech.kind}",
            variable=treatment,
        )
    mus = []
    for level in range(n_levels):
        data = intervene(scm, {treatment: level}, n)
        mus.append(float(data.column(outcome).astype(np.float64).mean()))
    pairs = list(itertools.combinations(range(n_levels), 2))
    return float(np.mean([abs(mus[i] - mus[j]) for i, j in pairs]))


# --------------------------------------------------------------------------
# random layered models


def generate_scm(
    n_options: int,
    n_metrics: int,
    n_objectives: int,
    density: float,
    noise_scale: float = 1.0,
    seed: int = 0,
    *,
    n_latents: int = 0,
    boolean_objectives: int = 0,
    option_levels: int = 3,
    fail_rate: float = 0.1,
    weight_range: tuple[float, float] = (0.6, 1.4),
) -> Scm:
    """Random layered model: edges option->metric, metric->metric (lower to
    higher index), metric->objective, each present with probability
    ``density``; weights uniform in +-``weight_range``. Optional latent
    confounders add hidden parents to sampled non-option pairs. Boolean
    objectives are thresholded at the empirical ``fail_rate`` quantile of
    their score."""
    if not 0.0 <= density <= 1.0:
        raise InputError(f"density must be in [0, 1], got {density}", density=density)
    rng = np.random.default_rng(seed)
    opts = [f"o{i + 1:02d}" for i in range(n_options)]
    mets = [f"m{i + 1:02d}" for i in range(n_metrics)]
    objs = [f"y{i + 1:02d}" for i in range(n_objectives)]

    def weight() -> float:
        return float(rng.choice([-1.0, 1.0]) * rng.uniform(*weight_range))

    parents: dict[str, list[tuple[str, float]]] = {m: [] for m in mets}
    parents.update({y: [] for y in objs})
    for o in opts:
        for m in mets:
            if rng.random() < density:
                parents[m].append((o, weight()))
    for i, mi in enumerate(mets):
        for mj in mets[i + 1:]:
            if rng.random() < density:
                parents[mj].append((mi, weight()))
    for m in mets:
        for y in objs:
            if rng.random() < density:
                parents[y].append((m, weight()))

    hidden: list[str] = []
    hidden_of: dict[str, list[tuple[str, float]]] = {v: [] for v in mets + objs}
    non_options = mets + objs
    if n_latents:
        pairs = list(itertools.combinations(non_options, 2))
        take = min(n_latents, len(pairs))
        chosen = rng.choice(len(pairs), size=take, replace=False)
        for k, pi in enumerate(sorted(int(c) for c in chosen)):
            a, b = pairs[pi]
            h = f"h{k + 1:02d}"
            hidden.append(h)
            hidden_of[a].append((h, float(rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.2))))
            hidden_of[b].append((h, float(rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.2))))

    variables = (
        [VariableMeta(o, Role.OPTION, Kind.DISCRETE) for o in opts]
        + [VariableMeta(m, Role.METRIC, Kind.CONTINUOUS) for m in mets]
        + [
            VariableMeta(
                y,
                Role.OBJECTIVE,
                Kind.BOOLEAN if i < boolean_objectives else Kind.CONTINUOUS,
            )
            for i, y in enumerate(objs)
        ]
    )

    def linear_mech(name: str, kind: str, thresholds: tuple[float, ...] = ()) -> Mechanism:
        ps = parents[name]
        hs = hidden_of[name]
        return Mechanism(
            kind=kind,
            parents=tuple(p for p, _ in ps),
            weights=tuple(w for _, w in ps),
            noise_scale=noise_scale,
            thresholds=thresholds,
            hidden_parents=tuple(h for h, _ in hs),
            hidden_weights=tuple(w for _, w in hs),
        )

    mechanisms: dict[str, Mechanism] = {
        o: Mechanism(kind="uniform_levels", levels=option_levels) for o in opts
    }
    for m in mets:
        mechanisms[m] = linear_mech(m, "linear")

    # boolean objectives need a calibrated cut: sample the raw score first
    pilot: Scm | None = None
    for i, y in enumerate(objs):
        if i < boolean_objectives:
            if pilot is None:
                pilot_vars = tuple(
                    v if v.kind != Kind.BOOLEAN else replace(v, kind=Kind.CONTINUOUS)
                    for v in variables
                )
                pilot_mechs = dict(mechanisms)
                for j, yy in enumerate(objs):
                    pilot_mechs[yy] = linear_mech(yy, "linear")
                pilot = scm_from_mechanisms(
                    pilot_vars, pilot_mechs, hidden, 1.0, seed=int(seed) + 1
                )
                pilot_data = sample(pilot, 3000)
            cut = float(np.quantile(pilot_data.column(y), fail_rate))
            mechanisms[y] = linear_mech(y, "boolean_threshold", thresholds=(cut,))
        else:
            mechanisms[y] = linear_mech(y, "linear")

    return scm_from_mechanisms(tuple(variables), mechanisms, hidden, 1.0, seed=int(seed))


# --------------------------------------------------------------------------
# ground truth and scoring


@dataclass(frozen=True)
class FaultEntry:
    objective: str
    rule: str
    fault_row_indices: tuple[int, ...]
    true_root_causes: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "objective": self.objective,
            "rule": self.rule,
            "fault_row_indices": list(self.fault_row_indices),
            "true_root_causes": list(self.true_root_causes),
        }


@dataclass(frozen=True)
class GroundTruth:
    faults: tuple[FaultEntry, ...]

    def entry_for(self, objective: str) -> FaultEntry:
        for entry in self.faults:
            if entry.objective == objective:
                return entry
        raise ObjectiveMismatch(
            f"no ground-truth fault for objective {objective!r}", objective=objective
        )

    def to_json_dict(self) -> dict:
        return {"faults": [e.to_json_dict() for e in self.faults]}

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "GroundTruth":
        return cls(
            tuple(
                FaultEntry(
                    e["objective"],
                    e["rule"],
                    tuple(int(i) for i in e["fault_row_indices"]),
                    tuple(e["true_root_causes"]),
                )
                for e in payload["faults"]
            )
        )


def total_linear_effect(scm: Scm, source: str, target: str) -> float:
    """Sum over directed paths of the products of linear weights (threshold
    and boolean mechanisms contribute their score weights: the link is
    monotone, so zero/nonzero is preserved)."""
    order = scm.graph.topological_order()
    if source not in order or target not in order:
        raise UnknownVertex(f"unknown vertex in ({source!r}, {target!r})")
    effect: dict[str, float] = {source: 1.0}
    for name in order:
        if name == source:
            continue
        mech = scm.mechanisms[name]
        acc = 0.0
        for w, p in zip(mech.weights, mech.parents):
            acc += w * effect.get(p, 0.0)
        if acc != 0.0:
            effect[name] = acc
    return effect.get(target, 0.0)


def curate_ground_truth(
    scm: Scm, ds: Dataset, n_faults: int | None = None
) -> GroundTruth:
    """Label faulty rows per objective and list the options that truly cause
    it (ancestors with a nonzero total effect). Continuous objectives fail
    beyond their 99th percentile; boolean objectives fail when false."""
    entries: list[FaultEntry] = []
    objectives = list(ds.objectives)
    if n_faults is not None:
        objectives = objectives[:n_faults]
    for objective in objectives:
        meta = ds.meta(objective)
        col = ds.column(objective)
        if meta.kind == Kind.BOOLEAN:
            mask = col == 0
            rule = "boolean_false"
        else:
            cutoff = float(np.quantile(col.astype(np.float64), 0.99))
            mask = col.astype(np.float64) > cutoff
            rule = "quantile_0.99"
        rows = tuple(int(i) for i in np.flatnonzero(mask))
        if not rows:
            raise NoFaultyRows(
                f"no faulty rows for objective {objective!r}", objective=objective
            )
        causes = tuple(
            o for o in scm.options
            if abs(total_linear_effect(scm, o, objective)) > EFFECT_EPS
        )
        entries.append(FaultEntry(objective, rule, rows, causes))
    return GroundTruth(tuple(entries))


@dataclass(frozen=True)
class EvalReport:
    objective: str
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    rmse: float

    def to_json_dict(self) -> dict:
        return {
            "objective": self.objective,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1, "rmse": self.rmse,
        }


def evaluate(
    pred: Diagnosis,
    truth: GroundTruth,
    options: Sequence[str],
    ace_values: Mapping[str, float] | None = None,
) -> EvalReport:
    """Score predicted root causes against ground truth over the option
    universe. RMSE pairs the prediction ranking with the true causes ranked
    by effect magnitude (``ace_values``; missing entries count as 0) and
    compares effect values positionally; a perfect prediction scores 0."""
    entry = truth.entry_for(pred.fault_objective)
    universe = list(dict.fromkeys(options))
    predicted = [p for p in pred.root_causes]
    true_set = set(entry.true_root_causes)
    pred_set = set(predicted)
    unknown = pred_set - set(universe)
    if unknown:
        raise InputError(
            f"prediction names options outside the universe: {sorted(unknown)}",
            options=sorted(unknown),
        )
    tp = len(pred_set & true_set)
    fp = len(pred_set - true_set)
    fn = len(true_set - pred_set)
    tn = len(set(universe) - pred_set - true_set)
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0.0
        else 0.0
    )
    av = dict(ace_values or {})
    true_ranked = sorted(true_set, key=lambda o: (-av.get(o, 0.0), o))
    pairs = list(zip(true_ranked, predicted))
    if pairs:
        rmse = math.sqrt(
            sum((av.get(t, 0.0) - av.get(p, 0.0)) ** 2 for t, p in pairs) / len(pairs)
        )
    else:
        rmse = 0.0
    return EvalReport(
        objective=pred.fault_objective,
        tp=tp, fp=fp, tn=tn, fn=fn,
        accuracy=float(accuracy), precision=float(precision),
        recall=float(recall), f1=float(f1), rmse=float(rmse),
    )


# --------------------------------------------------------------------------
# curated fault benchmark


@dataclass(frozen=True)
class BenchCase:
    index: int
    scm: Scm
    dataset: Dataset
    truth: GroundTruth


def _child_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(count)]


def make_fault_benchmark(
    seed: int = 0, n_scms: int = 10, n_rows: int = 1600
) -> list[BenchCase]:
    """Ten seeded systems, each with one continuous (resource-style) and one
    boolean (success-style) objective: twenty faults total, every objective
    caused by two to four options routed through dedicated metrics. One cause
    per objective is deliberately faint. Non-causal options either feed
    dead-end metrics or mirror a causal option's setting without any effect
    of their own — the trap that correlation scoring falls into."""
    cases: list[BenchCase] = []
    for index, child in enumerate(_child_seeds(seed, n_scms)):
        rng = np.random.default_rng(child)
        opts = [f"o{i + 1:02d}" for i in range(8)]
        causal: dict[str, list[str]] = {}
        for objective in ("y_energy", "y_success"):
            k = int(rng.integers(2, 5))
            causal[objective] = sorted(
                opts[i] for i in rng.choice(8, size=k, replace=False)
            )

        variables = [VariableMeta(o, Role.OPTION, Kind.DISCRETE) for o in opts]
        mechanisms: dict[str, Mechanism] = {
            o: Mechanism(kind="uniform_levels", levels=3) for o in opts
        }
        obj_parents: dict[str, list[tuple[str, float]]] = {
            "y_energy": [], "y_success": []
        }

        def add_metric(name: str, parent: str, w_in: float, fan_out: list[tuple[str, float]]) -> None:
            variables.append(VariableMeta(name, Role.METRIC, Kind.CONTINUOUS))
            mechanisms[name] = Mechanism(
                kind="linear", parents=(parent,), weights=(w_in,), noise_scale=1.0
            )
            for objective, w_out in fan_out:
                obj_parents[objective].append((name, w_out))

        def signed(lo: float, hi: float) -> float:
            return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))

        for objective in ("y_energy", "y_success"):
            tag = objective.split("_")[1][0]
            weak = causal[objective][-1]  # one deliberately faint cause
            # two routes per cause when only two causes exist, so genuine
            # paths always fill the whole candidate budget
            routes = 2 if len(causal[objective]) == 2 else 1
            for o in causal[objective]:
                scale = 0.45 if o == weak else 1.0
                for r in range(routes):
                    add_metric(
                        f"m_{tag}_{o}" + ("x" * r), o,
                        signed(1.0, 1.6) * scale,
                        [(objective, signed(0.8, 1.4))],
                    )
            # nuisance driver unrelated to any option
            noise_name = f"m_{tag}_drift"
            variables.append(VariableMeta(noise_name, Role.METRIC, Kind.CONTINUOUS))
            mechanisms[noise_name] = Mechanism(kind="linear", noise_scale=1.0)
            obj_parents[objective].append((noise_name, 0.7))

        decoys = [o for o in opts if o not in set(causal["y_energy"]) | set(causal["y_success"])]
        # up to two decoys track a causal option (co-set in deployment,
        # causally inert); the rest drive metrics nobody consumes
        shadow_sources = [o for o in causal["y_success"] if o != causal["y_success"][-1]]
        if not shadow_sources:
            shadow_sources = causal["y_success"][:1]
        for i, o in enumerate(decoys[:2]):
            source = shadow_sources[i % len(shadow_sources)]
            mechanisms[o] = Mechanism(
                kind="threshold_levels", parents=(source,), weights=(1.5,),
                noise_scale=0.6, thresholds=(0.75, 2.25),
            )
        for o in decoys[2:]:
            add_metric(f"m_dead_{o}", o, signed(1.0, 1.6), [])

        variables.append(VariableMeta("y_energy", Role.OBJECTIVE, Kind.CONTINUOUS))
        mechanisms["y_energy"] = Mechanism(
            kind="linear",
            parents=tuple(p for p, _ in obj_parents["y_energy"]),
            weights=tuple(w for _, w in obj_parents["y_energy"]),
            noise_scale=1.0,
        )
        variables.append(VariableMeta("y_success", Role.OBJECTIVE, Kind.BOOLEAN))
        # calibrate the success cut on a pilot of the raw score
        pilot_vars = [
            v if v.name != "y_success" else replace(v, kind=Kind.CONTINUOUS)
            for v in variables
        ]
        score_mech = Mechanism(
            kind="linear",
            parents=tuple(p for p, _ in obj_parents["y_success"]),
            weights=tuple(w for _, w in obj_parents["y_success"]),
            noise_scale=1.0,
        )
        pilot_mechs = dict(mechanisms)
        pilot_mechs["y_success"] = score_mech
        pilot = scm_from_mechanisms(pilot_vars, pilot_mechs, seed=child + 1)
        cut = float(np.quantile(sample(pilot, 3000).column("y_success"), 0.10))
        mechanisms["y_success"] = replace(
            score_mech, kind="boolean_threshold", thresholds=(cut,)
        )

        scm = scm_from_mechanisms(tuple(variables), mechanisms, seed=child)
        data = sample(scm, n_rows)
        truth = curate_ground_truth(scm, data)
        for entry in truth.faults:
            if not 2 <= len(entry.true_root_causes) <= 4:
                raise EngineError(
                    f"benchmark invariant broken: {entry.objective} has "
                    f"{len(entry.true_root_causes)} causes"
                )
        cases.append(BenchCase(index, scm, data, truth))
    return cases


@dataclass(frozen=True)
class FaultOutcome:
    scm_index: int
    objective: str
    care: EvalReport
    cbi: EvalReport

    def to_json_dict(self) -> dict:
        return {
            "scm_index": self.scm_index,
            "objective": self.objective,
            "care": self.care.to_json_dict(),
            "cbi": self.cbi.to_json_dict(),
        }


@dataclass(frozen=True)
class BenchmarkReport:
    outcomes: tuple[FaultOutcome, ...]

    def totals(self, method: str) -> dict[str, float]:
        reports = [getattr(o, method) for o in self.outcomes]
        tp = sum(r.tp for r in reports)
        fp = sum(r.fp for r in reports)
        fn = sum(r.fn for r in reports)
        tn = sum(r.tn for r in reports)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return {
            "tp": tp, "fp": fp, "fn": fn, "tn": tn,
            "precision": float(precision), "recall": float(recall),
            "f1": float(f1),
            "mean_f1": float(np.mean([r.f1 for r in reports])),
            "mean_rmse": float(np.mean([r.rmse for r in reports])),
        }

    def to_json_dict(self) -> dict:
        return {
            "outcomes": [o.to_json_dict() for o in self.outcomes],
            "care": self.totals("care"),
            "cbi": self.totals("cbi"),
        }


def run_benchmark(
    seed: int = 0,
    n_scms: int = 10,
    n_rows: int = 1600,
    params: ModelParams = ModelParams(),
    top_k: int = 4,
) -> BenchmarkReport:
    """Learn a model per system, diagnose both faults with the causal method
    and the correlation baseline, and score each against the ground truth."""
    outcomes: list[FaultOutcome] = []
    for case in make_fault_benchmark(seed, n_scms, n_rows):
        ds = case.dataset
        _, admg = learn_model(ds, params)
        options = list(ds.options)
        for entry in case.truth.faults:
            try:
                care_diag = diagnose(ds, admg, entry.objective, top_k=top_k)
            except NoPathsFound:
                care_diag = Diagnosis(entry.objective, (), ())
            ace_vals = {}
            for o in options:
                try:
                    ace_vals[o] = ace_edge(ds, admg, o, entry.objective).value
                except EngineError:
                    ace_vals[o] = 0.0
            labels = np.zeros(ds.sample_count, dtype=bool)
            labels[list(entry.fault_row_indices)] = True
            cbi_diag = Diagnosis(
                entry.objective, (), tuple(cbi_root_causes(ds, labels, top_k=top_k))
            )
            outcomes.append(
                FaultOutcome(
                    case.index,
                    entry.objective,
                    care=evaluate(care_diag, case.truth, options, ace_vals),
                    cbi=evaluate(cbi_diag, case.truth, options, ace_vals),
                )
            )
    return BenchmarkReport(tuple(outcomes))


# --------------------------------------------------------------------------
# shift adaptation and sensitivity probes


def transfer_scm(seed: int) -> tuple[Scm, Scm]:
    """A small three-option system and a copy whose dominant metric weight is
    quadrupled — the shifted environment for update studies."""
    opts = ["o1", "o2", "o3"]
    variables = (
        [VariableMeta(o, Role.OPTION, Kind.DISCRETE) for o in opts]
        + [
            VariableMeta("m1", Role.METRIC, Kind.CONTINUOUS),
            VariableMeta("m2", Role.METRIC, Kind.CONTINUOUS),
            VariableMeta("y", Role.OBJECTIVE, Kind.CONTINUOUS),
        ]
    )
    mechanisms = {
        "o1": Mechanism(kind="uniform_levels", levels=3),
        "o2": Mechanism(kind="uniform_levels", levels=3),
        "o3": Mechanism(kind="uniform_levels", levels=3),
        "m1": Mechanism(kind="linear", parents=("o1", "o2"), weights=(1.1, 0.9)),
        "m2": Mechanism(kind="linear", parents=("o3",), weights=(1.2,)),
        "y": Mechanism(kind="linear", parents=("m1", "m2"), weights=(1.0, 0.8)),
    }
    base = scm_from_mechanisms(tuple(variables), mechanisms, seed=seed)
    shifted = scale_edge(base, ("m1", "y"), 4.0)
    return base, shifted


def transfer_series(
    seed: int = 0,
    params: ModelParams = ModelParams(),
    n_initial: int = 1200,
    n_batch: int = 1200,
    n_batches: int = 3,
) -> list[float]:
    """RMSE of per-option effect estimates against the shifted environment's
    oracle, before updating and after each incremental batch of shifted data."""
    from .effects import update_model  # local import keeps module edges one-way

    seeds = _child_seeds(seed, n_batches + 2)
    base, shifted = transfer_scm(seeds[0])
    oracle_scm = with_seed(shifted, seeds[1])
    old = sample(with_seed(base, seeds[0]), n_initial)
    pag, admg = learn_model(old, params)
    objective = "y"
    oracle = {
        o: interventional_ace(oracle_scm, o, objective) for o in base.options
    }

    def current_rmse(data: Dataset, model: Admg) -> float:
        err = 0.0
        for o in base.options:
            est = ace_edge(data, model, o, objective).value
            err += (est - oracle[o]) ** 2
        return math.sqrt(err / len(base.options))

    series = [current_rmse(old, admg)]
    sepsets = pag.sepsets
    for k in range(n_batches):
        batch = sample(with_seed(shifted, seeds[k + 2]), n_batch)
        admg = update_model(admg, old, batch, params, prev_sepsets=sepsets)
        sepsets = None  # stale after the first refresh
        old = old.concat(batch)
        series.append(current_rmse(old, admg))
    return series


def tiered_scm(
    seed: int, weights: Sequence[float] = (2.0, 2.0, 1.0, 1.0, 0.4, 0.4)
) -> Scm:
    """One option per weight, each through its own metric into a single
    continuous objective — a system with strong, middling, and faint levers
    for rank-sensitivity studies."""
    variables: list[VariableMeta] = []
    mechanisms: dict[str, Mechanism] = {}
    metric_names: list[str] = []
    for i, w in enumerate(weights):
        o, m = f"o{i + 1:02d}", f"m{i + 1:02d}"
        variables.append(VariableMeta(o, Role.OPTION, Kind.DISCRETE))
        mechanisms[o] = Mechanism(kind="uniform_levels", levels=3)
        variables.append(VariableMeta(m, Role.METRIC, Kind.CONTINUOUS))
        mechanisms[m] = Mechanism(
            kind="linear", parents=(o,), weights=(float(w),), noise_scale=1.0
        )
        metric_names.append(m)
    variables.append(VariableMeta("y", Role.OBJECTIVE, Kind.CONTINUOUS))
    mechanisms["y"] = Mechanism(
        kind="linear",
        parents=tuple(metric_names),
        weights=tuple(1.0 for _ in metric_names),
        noise_scale=1.0,
    )
    variables.sort(key=lambda v: (v.role != Role.OPTION, v.name))
    return scm_from_mechanisms(tuple(variables), mechanisms, seed=seed)


def objective_variance_under(
    scm: Scm, objective: str, varied: Sequence[str], n: int = 4000
) -> float:
    """Variance of the objective when only ``varied`` options move and every
    other option is pinned at its middle level."""
    varied_set = set(varied)
    assignments: dict[str, float] = {}
    for o in scm.options:
        if o in varied_set:
            continue
        levels = scm.mechanisms[o].levels or 2
        assignments[o] = (levels - 1) // 2
    data = intervene(scm, assignments, n)
    return float(np.var(data.column(objective).astype(np.float64)))
