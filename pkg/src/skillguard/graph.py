"""Skill catalog and the pruned phonetic graph over invocation phrases."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DuplicateSkillError, UnknownSkillError
from .phonetics import (
    DISTANCE_SCALE,
    CostMatrix,
    PhonemeSeq,
    PronunciationDict,
    pairwise_distances,
    phrase_to_phonemes,
)
from .validation import check_threshold, check_unique_ids


@dataclass(frozen=True)
class Skill:
    id: str
    name: str
    invocation: str
    amazon_url: str = ""
    metadata_urls: tuple[str, ...] = ()
    reviews: int = 0
    account_linking: bool = False
    phonemes: PhonemeSeq | None = None
    pronunciation_override: PhonemeSeq | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("skill id must be non-empty")
        if not self.invocation.strip():
            raise ValueError(f"skill {self.id!r} has an empty invocation")
        if self.reviews < 0:
            raise ValueError(f"skill {self.id!r} has negative reviews")
        object.__setattr__(self, "metadata_urls", tuple(self.metadata_urls))
        for name in ("phonemes", "pronunciation_override"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, PhonemeSeq):
                object.__setattr__(self, name, PhonemeSeq(tuple(value), self.invocation))

    @classmethod
    def from_dict(cls, data: Mapping) -> "Skill":
        return cls(
            id=str(data["id"]),
            name=data.get("name", data["invocation"]),
            invocation=data["invocation"],
            amazon_url=data.get("amazon_url", ""),
            metadata_urls=tuple(data.get("metadata_urls", ())),
            reviews=int(data.get("reviews", 0)),
            account_linking=bool(data.get("account_linking", False)),
            phonemes=data.get("phonemes"),
            pronunciation_override=data.get("pronunciation_override"),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["metadata_urls"] = list(self.metadata_urls)
        for name in ("phonemes", "pronunciation_override"):
            value = getattr(self, name)
            out[name] = None if value is None else list(value.phonemes)
        if out["pronunciation_override"] is None:
            del out["pronunciation_override"]
        return out


def load_catalog(path: str | Path) -> list[Skill]:
    skills = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                skills.append(Skill.from_dict(json.loads(line)))
    check_unique_ids(s.id for s in skills)
    return skills


def dump_catalog(catalog: Iterable[Skill], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for skill in catalog:
            fh.write(json.dumps(skill.to_dict(), sort_keys=True) + "\n")


def resolve_phonemes(
    catalog: Iterable[Skill],
    pdict: PronunciationDict,
    overrides: Mapping[str, Sequence[str]] | None = None,
) -> list[Skill]:
    """Fill in ``phonemes`` for every skill; a skill's own override wins."""
    out = []
    for skill in catalog:
        if skill.pronunciation_override is not None:
            seq = PhonemeSeq(skill.pronunciation_override.phonemes, skill.invocation)
        else:
            seq = phrase_to_phonemes(skill.invocation, pdict, overrides)
        out.append(replace(skill, phonemes=seq))
    return out


class PhoneticGraph:
    """Skills as vertices, phonetic distance as edge weight, pruned at ``threshold``.

    Distances are kept in a dense matrix (``inf`` where unknown); an edge
    exists when the distance is ``<= threshold``. Instances are immutable and
    :meth:`with_threshold` shares the underlying matrix.
    """

    def __init__(self, skills: Sequence[str], distances: np.ndarray, threshold: float):
        self.skills = tuple(skills)
        self.threshold = check_threshold(threshold)
        dist = np.asarray(distances, dtype=float)
        if dist.shape != (len(self.skills), len(self.skills)):
            raise ValueError("distance matrix does not match the skill list")
        if dist.flags.writeable:
            dist = dist.copy()
            dist.setflags(write=False)
        self._dist = dist
        self._index = {s: k for k, s in enumerate(self.skills)}
        if len(self._index) != len(self.skills):
            check_unique_ids(self.skills)

    def __contains__(self, skill_id):
        return skill_id in self._index

    def __len__(self):
        return len(self.skills)

    def __repr__(self):
        return f"PhoneticGraph(n_skills={len(self.skills)}, threshold={self.threshold})"

    def index(self, skill_id: str) -> int:
        try:
            return self._index[skill_id]
        except KeyError:
            raise UnknownSkillError(skill_id) from None

    @property
    def distances(self) -> np.ndarray:
        return self._dist

    def distance(self, a: str, b: str) -> float:
        return float(self._dist[self.index(a), self.index(b)])

    def with_threshold(self, threshold: float) -> "PhoneticGraph":
        g = PhoneticGraph.__new__(PhoneticGraph)
        g.skills, g._dist, g._index = self.skills, self._dist, self._index
        g.threshold = check_threshold(threshold)
        return g

    def _adjacency(self) -> np.ndarray:
        adj = self._dist <= self.threshold
        np.fill_diagonal(adj, False)
        return adj

    @property
    def edges(self) -> dict[tuple[str, str], float]:
        """Surviving edges keyed by the lexicographically ordered id pair."""
        ii, jj = np.nonzero(np.triu(self._adjacency(), k=1))
        out = {}
        for i, j in zip(ii.tolist(), jj.tolist()):
            a, b = sorted((self.skills[i], self.skills[j]))
            out[a, b] = float(self._dist[i, j])
        return out

    @property
    def n_edges(self) -> int:
        return int(np.triu(self._adjacency(), k=1).sum())

    def neighbors(self, skill_id: str) -> list[tuple[str, float]]:
        """Neighbors within the threshold, ascending by distance then id."""
        k = self.index(skill_id)
        row = self._dist[k]
        hits = np.nonzero(row <= self.threshold)[0]
        out = [(self.skills[j], float(row[j])) for j in hits.tolist() if j != k]
        out.sort(key=lambda t: (t[1], t[0]))
        return out

    def neighbor_ids(self, skill_id: str) -> set[str]:
        k = self.index(skill_id)
        hits = np.nonzero(self._dist[k] <= self.threshold)[0]
        return {self.skills[j] for j in hits.tolist() if j != k}

    def to_dict(self) -> dict:
        edges = [{"a": a, "b": b, "d": d} for (a, b), d in sorted(self.edges.items())]
        return {"threshold": self.threshold, "skills": list(self.skills), "edges": edges}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PhoneticGraph":
        skills = list(data.get("skills") or [])
        seen = set(skills)
        for e in data["edges"]:
            for key in ("a", "b"):
                if e[key] not in seen:
                    seen.add(e[key])
                    skills.append(e[key])
        index = {s: k for k, s in enumerate(skills)}
        dist = np.full((len(skills), len(skills)), np.inf)
        np.fill_diagonal(dist, 0.0)
        for e in data["edges"]:
            i, j = index[e["a"]], index[e["b"]]
            dist[i, j] = dist[j, i] = float(e["d"])
        return cls(skills, dist, float(data["threshold"]))


def catalog_distances(
    catalog: Sequence[Skill], costs: CostMatrix, scale: float = DISTANCE_SCALE
) -> np.ndarray:
    seqs = []
    for skill in catalog:
        if skill.phonemes is None:
            raise ValueError(f"skill {skill.id!r} has no phonemes; call resolve_phonemes first")
        seqs.append(skill.phonemes)
    return pairwise_distances(seqs, costs, scale)


def build_graph(
    catalog: Sequence[Skill],
    costs: CostMatrix,
    threshold: float,
    distances: np.ndarray | None = None,
) -> PhoneticGraph:
    """Compute all pairwise distances and keep edges with distance <= threshold.

    A precomputed ``distances`` matrix (aligned with ``catalog``) skips the
    O(n^2) distance pass, which is how threshold sweeps reuse work.
    """
    check_threshold(threshold)
    ids = [s.id for s in catalog]
    check_unique_ids(ids)
    if distances is None:
        distances = catalog_distances(catalog, costs)
    return PhoneticGraph(ids, distances, threshold)


def neighbors(graph: PhoneticGraph, skill_id: str) -> list[tuple[str, float]]:
    return graph.neighbors(skill_id)


class PhoneticNeighbors(BaseEstimator):
    """Radius-neighbors over skill invocations under the learned phonetic metric.

    Parameters
    ----------
    costs : CostMatrix
        Learned substitution costs.
    threshold : float, default=400.0
        Pruning radius on the 0-1000 distance axis (inclusive).

    Attributes
    ----------
    graph_ : PhoneticGraph
    skill_ids_ : tuple of str
    """

    def __init__(self, costs=None, threshold=400.0):
        self.costs = costs
        self.threshold = threshold

    def fit(self, X, y=None):
        """X is a sequence of phoneme-resolved :class:`Skill` objects."""
        if self.costs is None:
            raise ValueError("PhoneticNeighbors needs a CostMatrix")
        catalog = list(X)
        self.graph_ = build_graph(catalog, self.costs, self.threshold)
        self.skill_ids_ = self.graph_.skills
        return self

    def radius_neighbors(self, skill_ids=None):
        check_is_fitted(self, "graph_")
        ids = self.skill_ids_ if skill_ids is None else skill_ids
        return [self.graph_.neighbors(s) for s in ids]

    def pairwise(self):
        check_is_fitted(self, "graph_")
        return self.graph_.distances
