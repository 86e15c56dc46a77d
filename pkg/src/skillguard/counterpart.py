"""Counterpart activity: browsing-history sessions, the poisoning filter, skill matching.

A website counts as evidence of genuine use only when it was visited in at
least two valid sessions. A session is valid when it covers three or more
distinct pages and none of its visits closely follows a visit to a skill
marketplace page (the signature of a lure that sends the user from an
attacker's site to a squatting skill).
"""

from __future__ import annotations

import bisect
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .identity import MapperTable
from .io import read_json
from .urls import canonicalize_url, is_skill_page, root_domain

log = logging.getLogger(__name__)

MINUTE_MS = 60_000
DEFAULT_SESSION_GAP_MS = 30 * MINUTE_MS
DEFAULT_PRECEDE_WINDOW_MS = 5 * MINUTE_MS
MIN_VALID_SESSIONS = 2
MIN_DISTINCT_PAGES = 3


@dataclass(frozen=True, order=True)
class HistoryRecord:
    timestamp: int
    url: str
    domain: str = field(default="", compare=False)
    is_skill_page: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError(f"history timestamp must be positive, got {self.timestamp}")
        if not self.domain:
            object.__setattr__(self, "domain", root_domain(self.url))
        if not self.is_skill_page:
            object.__setattr__(self, "is_skill_page", is_skill_page(self.url))

    @property
    def page(self) -> str:
        try:
            return canonicalize_url(self.url)
        except ValueError:
            return self.url


@dataclass(frozen=True)
class Session:
    domain: str
    visits: tuple[HistoryRecord, ...]

    @property
    def distinct_pages(self) -> int:
        return len({v.page for v in self.visits})

    @property
    def start(self) -> int:
        return self.visits[0].timestamp

    @property
    def end(self) -> int:
        return self.visits[-1].timestamp


@dataclass(frozen=True)
class AppRecord:
    package: str
    cert_sha256: str

    def __post_init__(self):
        if not self.package:
            raise ValueError("app package must be non-empty")


@dataclass(frozen=True)
class Evidence:
    qualified_domains: frozenset[str] = frozenset()
    app_certs: frozenset[str] = frozenset()


def load_history(path: str | Path) -> list[HistoryRecord]:
    """Read a ``timestamp_ms,url`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"timestamp_ms", "url"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"history file is missing columns: {sorted(missing)}")
        return [HistoryRecord(int(row["timestamp_ms"]), row["url"]) for row in reader]


def dump_history(history: Iterable[HistoryRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_ms", "url"])
        for rec in history:
            writer.writerow([rec.timestamp, rec.url])


def load_apps(path: str | Path) -> list[AppRecord]:
    return [AppRecord(a["package"], a["cert_sha256"]) for a in read_json(path)]


def _dedupe_sorted(history: Iterable[HistoryRecord]) -> list[HistoryRecord]:
    return sorted(set(history))


def segment_sessions(
    history: Iterable[HistoryRecord], gap_ms: int = DEFAULT_SESSION_GAP_MS
) -> list[Session]:
    """Group visits per root domain, splitting whenever consecutive visits are > gap_ms apart.

    Identical (timestamp, url) records collapse to one visit.
    """
    by_domain: dict[str, list[HistoryRecord]] = {}
    for rec in _dedupe_sorted(history):
        if rec.domain:
            by_domain.setdefault(rec.domain, []).append(rec)

    sessions = []
    for domain in sorted(by_domain):
        current = []
        for rec in by_domain[domain]:
            if current and rec.timestamp - current[-1].timestamp > gap_ms:
                sessions.append(Session(domain, tuple(current)))
                current = []
            current.append(rec)
        sessions.append(Session(domain, tuple(current)))
    return sessions


def _skill_page_times(history: Iterable[HistoryRecord]) -> list[int]:
    return sorted({r.timestamp for r in history if r.is_skill_page})


def _is_preceded(rec: HistoryRecord, skill_times: Sequence[int], window_ms: int) -> bool:
    lo = bisect.bisect_left(skill_times, rec.timestamp - window_ms)
    hi = bisect.bisect_right(skill_times, rec.timestamp)
    hits = hi - lo
    if rec.is_skill_page:
        # a skill page does not precede itself
        hits -= 1
    return hits > 0


def valid_sessions(
    sessions: Iterable[Session],
    history: Iterable[HistoryRecord],
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
    min_pages: int = MIN_DISTINCT_PAGES,
) -> list[Session]:
    skill_times = _skill_page_times(history)
    return [
        s
        for s in sessions
        if s.distinct_pages >= min_pages
        and not any(_is_preceded(v, skill_times, precede_window_ms) for v in s.visits)
    ]


def filter_history(
    sessions: Iterable[Session],
    history: Iterable[HistoryRecord],
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
    min_sessions: int = MIN_VALID_SESSIONS,
    min_pages: int = MIN_DISTINCT_PAGES,
) -> set[str]:
    """Domains visited in at least ``min_sessions`` valid sessions."""
    counts: dict[str, int] = {}
    for s in valid_sessions(sessions, history, precede_window_ms, min_pages):
        counts[s.domain] = counts.get(s.domain, 0) + 1
    return {d for d, n in counts.items() if n >= min_sessions}


def collect_evidence(
    history: Sequence[HistoryRecord],
    apps: Iterable[AppRecord] = (),
    gap_ms: int = DEFAULT_SESSION_GAP_MS,
    precede_window_ms: int = DEFAULT_PRECEDE_WINDOW_MS,
) -> Evidence:
    history = list(history)
    qualified = filter_history(segment_sessions(history, gap_ms), history, precede_window_ms)
    return Evidence(frozenset(qualified), frozenset(a.cert_sha256 for a in apps))


def match_skills(
    evidence: Evidence, table: MapperTable, domain_certs: Mapping[str, str]
) -> set[str]:
    """Skill ids whose mapper-table certificate matches a qualified site or an installed app."""
    certs = set(evidence.app_certs)
    for domain in sorted(evidence.qualified_domains):
        cert = domain_certs.get(domain)
        if cert is None:
            log.warning("no certificate known for qualified domain %s; skipped", domain)
            continue
        certs.add(cert)
    return {e.skill_id for e in table.entries if e.cert_sha256 in certs}


class HistoryFilter(TransformerMixin, BaseEstimator):
    """Transformer from per-user browsing histories to sets of qualified domains.

    Stateless: ``fit`` only validates the parameters.

    Parameters
    ----------
    session_gap_ms : int, default=30 minutes
    precede_window_ms : int, default=5 minutes
    min_sessions : int, default=2
    min_pages : int, default=3
    """

    def __init__(
        self,
        session_gap_ms=DEFAULT_SESSION_GAP_MS,
        precede_window_ms=DEFAULT_PRECEDE_WINDOW_MS,
        min_sessions=MIN_VALID_SESSIONS,
        min_pages=MIN_DISTINCT_PAGES,
    ):
        self.session_gap_ms = session_gap_ms
        self.precede_window_ms = precede_window_ms
        self.min_sessions = min_sessions
        self.min_pages = min_pages

    def fit(self, X=None, y=None):
        for name in ("session_gap_ms", "precede_window_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.min_sessions < 1 or self.min_pages < 1:
            raise ValueError("min_sessions and min_pages must be >= 1")
        return self

    def transform(self, X):
        out = []
        for history in X:
            history = list(history)
            sessions = segment_sessions(history, self.session_gap_ms)
            out.append(
                filter_history(
                    sessions, history, self.precede_window_ms, self.min_sessions, self.min_pages
                )
            )
        return out
