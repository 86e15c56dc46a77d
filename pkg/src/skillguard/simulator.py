"""Invocation-routing model, the enable/disable experiments and FAR/FRR evaluation.

The router is deliberately simple. Every skill that is not disabled and lies
within ``confusion_radius`` of the spoken phrase is a candidate. An enabled
candidate always wins over default-state ones; within a pool the closest
skill wins, and ties go to the more-reviewed skill, then to the smaller id.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .counterpart import (
    DEFAULT_PRECEDE_WINDOW_MS,
    DEFAULT_SESSION_GAP_MS,
    AppRecord,
    HistoryRecord,
    collect_evidence,
    match_skills,
)
from .exceptions import UnknownSkillError
from .graph import PhoneticGraph, Skill, build_graph, catalog_distances
from .identity import CorpusFetcher, MapperTable, PageRecord, build_mapper_table
from .phonetics import CostMatrix
from .planner import SkillState, apply_plan, plan_actions
from .validation import check_probability, check_threshold

MALICIOUS_RADIUS = 400.0


@dataclass(frozen=True)
class ConfusionModel:
    """Parameters of the routing model.

    ``mishear_prob`` is the chance that the recognizer hears another skill's
    phrase from within the confusion radius instead of the target's. It is 0
    by default, which makes routing fully deterministic apart from
    ``fail_prob``.
    """

    confusion_radius: float = 400.0
    fail_prob: float = 0.0
    rng_seed: int = 0
    mishear_prob: float = 0.0

    def __post_init__(self):
        check_threshold(self.confusion_radius)
        check_probability(self.fail_prob, "fail_prob")
        check_probability(self.mishear_prob, "mishear_prob")

    def rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed ^ trial)


class Outcome(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    NONE = "none"


@dataclass(frozen=True)
class InvocationOutcome:
    kind: Outcome
    winner: str | None = None

    @property
    def value(self) -> str:
        return self.kind.value


def _catalog_index(catalog) -> dict[str, Skill]:
    if isinstance(catalog, Mapping):
        return dict(catalog)
    return {s.id: s for s in catalog}


def simulate_invocation(
    target: str,
    catalog: Sequence[Skill] | Mapping[str, Skill],
    graph: PhoneticGraph,
    states: Mapping[str, SkillState],
    model: ConfusionModel = ConfusionModel(),
    trial: int = 0,
) -> InvocationOutcome:
    """Route one spoken invocation of *target* under the given skill states."""
    skills = _catalog_index(catalog)
    if target not in skills or target not in graph:
        raise UnknownSkillError(target)
    rng = model.rng(trial)
    fail_draw, mishear_draw, pick_draw = rng.random(3)

    dist = graph.distances
    row = dist[graph.index(target)]
    in_range = [graph.skills[j] for j in np.nonzero(row <= model.confusion_radius)[0]]
    in_range = [s for s in in_range if s in skills]
    candidates = [s for s in in_range if states.get(s, SkillState.DEFAULT) != SkillState.DISABLED]

    if fail_draw < model.fail_prob or not candidates:
        return InvocationOutcome(Outcome.NONE)

    heard = target
    others = sorted(s for s in in_range if s != target)
    if others and mishear_draw < model.mishear_prob:
        heard = others[int(pick_draw * len(others))]
    ref = dist[graph.index(heard)]

    enabled = [s for s in candidates if states.get(s) == SkillState.ENABLED]
    pool = enabled or candidates
    winner = min(pool, key=lambda s: (ref[graph.index(s)], -skills[s].reviews, s))
    kind = Outcome.CORRECT if winner == target else Outcome.INCORRECT
    return InvocationOutcome(kind, winner)


def identical_sets(catalog: Sequence[Skill]) -> list[list[str]]:
    """Group skills sharing a normalized invocation phrase, in catalog order."""
    groups: dict[str, list[str]] = {}
    for skill in catalog:
        groups.setdefault(" ".join(skill.invocation.lower().split()), []).append(skill.id)
    return [ids for ids in groups.values() if len(ids) > 1]


def most_reviewed(ids: Sequence[str], skills: Mapping[str, Skill]) -> str:
    """Intended target of a baseline trial; ties go to the first listed skill."""
    best = max(skills[s].reviews for s in ids)
    return next(s for s in ids if skills[s].reviews == best)


@dataclass
class ExperimentResult:
    baseline: Counter = field(default_factory=Counter)
    defended: Counter = field(default_factory=Counter)
    trials: list = field(default_factory=list)

    def counts(self, config: str) -> dict[str, int]:
        c = getattr(self, config)
        return {o.value: c.get(o.value, 0) for o in Outcome}

    def incorrect_distances(self, graph: PhoneticGraph, config="baseline") -> list[float]:
        return [
            graph.distance(t, w)
            for cfg, t, out in self.trials
            if cfg == config and out.kind == Outcome.INCORRECT
            for w in [out.winner]
        ]


def run_q1_experiment(
    scenario: str,
    catalog: Sequence[Skill],
    graph: PhoneticGraph,
    model: ConfusionModel = ConfusionModel(),
    threshold: float | None = None,
    groups: Sequence[Sequence[str]] | None = None,
) -> ExperimentResult:
    """Replay the enable/disable experiment over a fixture catalog.

    ``identical``: one baseline trial per set of identically-invoked skills,
    aimed at its most-reviewed member, then one defended trial per member.
    ``similar``: one baseline and one defended trial per skill in the
    cluster. The defended configuration enables the target and disables its
    neighbors at ``threshold`` (default: the model's confusion radius) on a
    fresh all-default account.
    """
    skills = _catalog_index(catalog)
    planner_graph = graph.with_threshold(model.confusion_radius if threshold is None else threshold)
    result = ExperimentResult()
    trial = 0

    def run(config, target, states):
        nonlocal trial
        out = simulate_invocation(target, skills, graph, states, model, trial)
        trial += 1
        getattr(result, config)[out.value] += 1
        result.trials.append((config, target, out))

    if scenario == "identical":
        sets = list(groups) if groups is not None else identical_sets(catalog)
        for ids in sets:
            run("baseline", most_reviewed(ids, skills), {})
        targets = [s for ids in sets for s in ids]
    elif scenario == "similar":
        targets = list(groups[0]) if groups else [s.id for s in catalog]
        for target in targets:
            run("baseline", target, {})
    else:
        raise ValueError(f"unknown scenario {scenario!r}; expected 'identical' or 'similar'")

    for target in targets:
        plan = plan_actions({target}, planner_graph, {})
        run("defended", target, apply_plan(plan))
    return result


@dataclass(frozen=True)
class UserTrace:
    user_id: str
    history: tuple[HistoryRecord, ...] = ()
    apps: tuple[AppRecord, ...] = ()
    used_skills: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "history": [{"timestamp_ms": r.timestamp, "url": r.url} for r in self.history],
            "apps": [{"package": a.package, "cert_sha256": a.cert_sha256} for a in self.apps],
            "used_skills": sorted(self.used_skills),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "UserTrace":
        return cls(
            user_id=str(data["user_id"]),
            history=tuple(HistoryRecord(int(r["timestamp_ms"]), r["url"]) for r in data["history"]),
            apps=tuple(AppRecord(a["package"], a["cert_sha256"]) for a in data.get("apps", ())),
            used_skills=frozenset(data.get("used_skills", ())),
        )


@dataclass(frozen=True)
class ErrorRates:
    threshold: float
    frr: float
    far: float
    setup_seconds: float = 0.0

    def __post_init__(self):
        for name in ("frr", "far"):
            check_probability(getattr(self, name), name)


def matched_for_trace(
    trace: UserTrace,
    table: MapperTable,
    domain_certs: Mapping[str, str],
    gap_ms: int = DEFAULT_SESSION_GAP_MS,
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
) -> set[str]:
    evidence = collect_evidence(trace.history, trace.apps, gap_ms, precede_window_ms)
    return match_skills(evidence, table, domain_certs)


def malicious_skills(
    used: Iterable[str], graph: PhoneticGraph, radius: float = MALICIOUS_RADIUS
) -> set[str]:
    """Unused skills strictly closer than *radius* to some used skill."""
    used = [s for s in used if s in graph]
    if not used:
        return set()
    rows = graph.distances[[graph.index(s) for s in used]]
    close = np.nonzero((rows < radius).any(axis=0))[0]
    return {graph.skills[j] for j in close.tolist()} - set(used)


def rates_for_plan(
    used: set[str], malicious: set[str], disable: Iterable[str], threshold: float,
    setup_seconds: float = 0.0,
) -> ErrorRates:
    disable = set(disable)
    frr = len(used & disable) / len(used) if used else 0.0
    far = len(malicious - disable) / len(malicious) if malicious else 0.0
    return ErrorRates(threshold, frr, far, setup_seconds)


def evaluate_user(
    trace: UserTrace,
    table: MapperTable,
    graph: PhoneticGraph,
    threshold: float,
    domain_certs: Mapping[str, str],
    gap_ms: int = DEFAULT_SESSION_GAP_MS,
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
    malicious_radius: float = MALICIOUS_RADIUS,
) -> ErrorRates:
    """FRR and FAR for one user on a fresh (all-default) account."""
    matched = matched_for_trace(trace, table, domain_certs, gap_ms, precede_window_ms)
    g = graph.with_threshold(threshold)
    plan = plan_actions(matched, g, {})
    used = set(trace.used_skills)
    return rates_for_plan(used, malicious_skills(used, graph, malicious_radius), plan.disable,
                          threshold, plan.est_setup_seconds)


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    far: float
    frr: float
    setup_seconds: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    eer_threshold: float
    eer: float

    @property
    def eer_row(self) -> SweepRow:
        return next(r for r in self.rows if r.threshold == self.eer_threshold)

    def to_csv(self) -> str:
        lines = ["threshold,far,frr,setup_seconds"]
        lines += [f"{r.threshold!r},{r.far!r},{r.frr!r},{r.setup_seconds!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        row = self.eer_row
        return {"eer": self.eer, "threshold": self.eer_threshold, "far": row.far, "frr": row.frr}


def equal_error_point(rows: Sequence[SweepRow]) -> tuple[float, float]:
    """Grid point minimizing |FAR - FRR|; the first such point on ties."""
    if not rows:
        raise ValueError("no sweep rows")
    best = min(rows, key=lambda r: abs(r.far - r.frr))
    return best.threshold, (best.far + best.frr) / 2


def sweep_thresholds(
    traces: Sequence[UserTrace],
    catalog: Sequence[Skill],
    costs: CostMatrix,
    corpus: CorpusFetcher | Iterable[PageRecord],
    grid: Sequence[float],
    gap_ms: int = DEFAULT_SESSION_GAP_MS,
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
    malicious_radius: float = MALICIOUS_RADIUS,
    distances: np.ndarray | None = None,
) -> SweepResult:
    """Mean FAR, FRR and setup time across users for each planner threshold.

    Pairwise distances, identities and matches do not depend on the
    threshold, so they are computed once; only the pruning and planning are
    redone per grid point.
    """
    grid = [check_threshold(t) for t in grid]
    if not grid:
        raise ValueError("empty threshold grid")
    if grid != sorted(grid):
        raise ValueError("threshold grid must be sorted ascending")
    fetcher = corpus if isinstance(corpus, CorpusFetcher) else CorpusFetcher(corpus)
    if distances is None:
        distances = catalog_distances(catalog, costs)
    graph = build_graph(catalog, costs, grid[0], distances)
    table = build_mapper_table(catalog, costs, grid[0], fetcher, graph)
    certs = fetcher.domain_certs()

    per_user = []
    for trace in traces:
        used = set(trace.used_skills)
        per_user.append(
            (
                used,
                malicious_skills(used, graph, malicious_radius),
                matched_for_trace(trace, table, certs, gap_ms, precede_window_ms),
            )
        )

    rows = []
    for t in grid:
        g = graph.with_threshold(t)
        rates = []
        for used, malicious, matched in per_user:
            plan = plan_actions(matched, g, {})
            rates.append(rates_for_plan(used, malicious, plan.disable, t, plan.est_setup_seconds))
        n = max(len(rates), 1)
        rows.append(
            SweepRow(
                t,
                sum(r.far for r in rates) / n,
                sum(r.frr for r in rates) / n,
                sum(r.setup_seconds for r in rates) / n,
            )
        )
    eer_t, eer = equal_error_point(rows)
    return SweepResult(tuple(rows), eer_t, eer)
