"""Secure skill identity from developer-site backlinks, and the versioned mapper table.

A skill earns an identity when one of the domains named in its metadata
hosts a (non user-generated) page that links back to the skill's marketplace
listing. The identity is that domain plus the fingerprint of its certificate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence
from urllib.parse import urljoin

from .exceptions import VersionMismatchError
from .graph import PhoneticGraph, Skill, build_graph
from .io import canonical_dumps, read_json
from .phonetics import CostMatrix
from .urls import DEFAULT_DOMAIN_DENYLIST, canonicalize_url, root_domain
from .validation import check_threshold, check_unique_ids

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PageRecord:
    url: str
    domain: str = ""
    body: str = field(default="", repr=False)
    user_generated: bool = False
    cert_sha256: str = ""

    def __post_init__(self):
        root = root_domain(self.url)
        if not self.domain:
            object.__setattr__(self, "domain", root)
        elif self.domain.lower() != root:
            raise ValueError(f"page {self.url!r} is not on domain {self.domain!r}")
        else:
            object.__setattr__(self, "domain", root)


class PageFetcher(Protocol):
    def pages_for(self, domain: str) -> Sequence[PageRecord]: ...


class CorpusFetcher:
    """Serves pages from an in-memory corpus, grouped by root domain."""

    def __init__(self, pages: Iterable[PageRecord] = ()):
        self.pages = tuple(pages)
        self._by_domain: dict[str, list[PageRecord]] = {}
        for page in self.pages:
            self._by_domain.setdefault(page.domain, []).append(page)

    def pages_for(self, domain: str) -> Sequence[PageRecord]:
        return tuple(sorted(self._by_domain.get(domain, ()), key=lambda p: p.url))

    def domain_certs(self) -> dict[str, str]:
        """First certificate seen per domain, in url order."""
        out = {}
        for page in sorted(self.pages, key=lambda p: p.url):
            if page.cert_sha256:
                out.setdefault(page.domain, page.cert_sha256)
        return out

    @classmethod
    def from_manifest(cls, path: str | Path) -> "CorpusFetcher":
        return cls(load_corpus(path))


def load_corpus(manifest_path: str | Path) -> list[PageRecord]:
    """Read a corpus manifest; each entry's ``path`` is relative to the manifest."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    pages = []
    for item in read_json(manifest_path):
        body_path = base / item["path"]
        pages.append(
            PageRecord(
                url=item["url"],
                domain=item.get("domain", ""),
                body=body_path.read_text(encoding="utf-8", errors="replace"),
                user_generated=bool(item.get("user_generated", False)),
                cert_sha256=item.get("cert_sha256", ""),
            )
        )
    return pages


def domain_certs_from_manifest(manifest_path: str | Path) -> dict[str, str]:
    out = {}
    for item in read_json(manifest_path):
        domain = item.get("domain") or root_domain(item["url"])
        if item.get("cert_sha256"):
            out.setdefault(domain, item["cert_sha256"])
    return out


def extract_domains(skill: Skill, denylist=DEFAULT_DOMAIN_DENYLIST) -> list[str]:
    """Registrable roots of the skill's metadata URLs, first-seen order, denylist removed."""
    out: list[str] = []
    for url in skill.metadata_urls:
        try:
            domain = root_domain(url)
        except ValueError:
            domain = ""
        if not domain:
            log.warning("skill %s: skipping unparseable metadata URL %r", skill.id, url)
            continue
        if domain in denylist or domain in out:
            continue
        out.append(domain)
    return out


class _LinkCollector(HTMLParser):
    def __init__(self, base_url):
        super().__init__(convert_charrefs=True)
        self.base_url = base_url
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "a":
            return
        for name, value in attrs:
            if name == "href" and value:
                self.hrefs.append(urljoin(self.base_url, value.strip()))


def extract_links(page: PageRecord) -> set[str]:
    """Canonicalized targets of every ``<a href>`` on the page."""
    parser = _LinkCollector(page.url)
    parser.feed(page.body)
    parser.close()
    out = set()
    for href in parser.hrefs:
        try:
            out.add(canonicalize_url(href))
        except ValueError:
            continue
    return out


def find_backlink(
    skill: Skill,
    pages: Iterable[PageRecord],
    domains: Sequence[str] | None = None,
) -> tuple[str, str] | None:
    """Return ``(domain, cert_sha256)`` of the first page linking to the skill listing.

    Pages are scanned in ``domains`` order (default: :func:`extract_domains`)
    and then by url. User-generated pages never count.
    """
    if not skill.amazon_url:
        return None
    target = canonicalize_url(skill.amazon_url)
    order = {d: k for k, d in enumerate(domains if domains is not None else extract_domains(skill))}
    candidates = sorted(
        (p for p in pages if p.domain in order and not p.user_generated),
        key=lambda p: (order[p.domain], p.url),
    )
    for page in candidates:
        if target in extract_links(page):
            return page.domain, page.cert_sha256
    return None


@dataclass(frozen=True)
class MapperEntry:
    skill_id: str
    amazon_url: str
    domain: str
    cert_sha256: str
    neighbors: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "neighbors", tuple((str(s), float(d)) for s, d in self.neighbors)
        )

    def to_dict(self) -> dict:
        return {
            "skill_id": self.skill_id,
            "amazon_url": self.amazon_url,
            "domain": self.domain,
            "cert_sha256": self.cert_sha256,
            "neighbors": [[s, d] for s, d in self.neighbors],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MapperEntry":
        return cls(
            skill_id=data["skill_id"],
            amazon_url=data["amazon_url"],
            domain=data["domain"],
            cert_sha256=data["cert_sha256"],
            neighbors=tuple((s, d) for s, d in data["neighbors"]),
        )


@dataclass(frozen=True)
class MapperTable:
    version: int
    threshold: float
    entries: tuple[MapperEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "threshold", check_threshold(self.threshold))
        entries = tuple(sorted(self.entries, key=lambda e: e.skill_id))
        check_unique_ids(e.skill_id for e in entries)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, skill_id) -> MapperEntry:
        for entry in self.entries:
            if entry.skill_id == skill_id:
                return entry
        raise KeyError(skill_id)

    @property
    def skill_ids(self) -> set[str]:
        return {e.skill_id for e in self.entries}

    def by_cert(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for e in self.entries:
            out.setdefault(e.cert_sha256, set()).add(e.skill_id)
        return out

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "threshold": self.threshold,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "MapperTable":
        return cls(
            version=int(data["version"]),
            threshold=float(data["threshold"]),
            entries=tuple(MapperEntry.from_dict(e) for e in data["entries"]),
        )


def build_mapper_table(
    catalog: Sequence[Skill],
    costs: CostMatrix,
    threshold: float,
    corpus: PageFetcher | Iterable[PageRecord],
    graph: PhoneticGraph | None = None,
    denylist=DEFAULT_DOMAIN_DENYLIST,
    version: int = 1,
) -> MapperTable:
    """One entry per skill with a verified backlink, neighbors from the phonetic graph."""
    check_unique_ids(s.id for s in catalog)
    fetcher = corpus if hasattr(corpus, "pages_for") else CorpusFetcher(corpus)
    if graph is None:
        graph = build_graph(catalog, costs, threshold)
    elif graph.threshold != threshold:
        graph = graph.with_threshold(threshold)

    entries = []
    for skill in sorted(catalog, key=lambda s: s.id):
        domains = extract_domains(skill, denylist)
        pages = [p for d in domains for p in fetcher.pages_for(d)]
        identity = find_backlink(skill, pages, domains)
        if identity is None:
            continue
        domain, cert = identity
        entries.append(
            MapperEntry(skill.id, skill.amazon_url, domain, cert, tuple(graph.neighbors(skill.id)))
        )
    return MapperTable(version, threshold, tuple(entries))


def with_neighbors(table: MapperTable, graph: PhoneticGraph) -> MapperTable:
    """Same identities, neighbor lists recomputed at ``graph.threshold``."""
    entries = tuple(
        MapperEntry(e.skill_id, e.amazon_url, e.domain, e.cert_sha256,
                    tuple(graph.neighbors(e.skill_id)))
        for e in table.entries
    )
    return MapperTable(table.version, graph.threshold, entries)


@dataclass(frozen=True)
class Delta:
    base_version: int
    threshold: float
    added: tuple[MapperEntry, ...] = ()
    changed: tuple[MapperEntry, ...] = ()
    removed: tuple[str, ...] = ()

    def __bool__(self):
        return bool(self.added or self.changed or self.removed)

    def to_dict(self) -> dict:
        return {
            "base_version": self.base_version,
            "threshold": self.threshold,
            "added": [e.to_dict() for e in self.added],
            "changed": [e.to_dict() for e in self.changed],
            "removed": list(self.removed),
        }

    def to_json(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "Delta":
        return cls(
            base_version=int(data["base_version"]),
            threshold=float(data["threshold"]),
            added=tuple(MapperEntry.from_dict(e) for e in data["added"]),
            changed=tuple(MapperEntry.from_dict(e) for e in data["changed"]),
            removed=tuple(data["removed"]),
        )

    def entry_payload_sizes(self) -> dict[str, int]:
        """Bytes of canonical JSON per added or changed skill."""
        return {
            e.skill_id: len(canonical_dumps(e.to_dict()).encode())
            for e in self.added + self.changed
        }


def diff_tables(old: MapperTable, new: MapperTable) -> Delta:
    if new.version != old.version + 1:
        raise VersionMismatchError(
            f"diff needs consecutive versions, got {old.version} -> {new.version}"
        )
    before = {e.skill_id: e for e in old.entries}
    after = {e.skill_id: e for e in new.entries}
    added = tuple(after[k] for k in sorted(after.keys() - before.keys()))
    removed = tuple(sorted(before.keys() - after.keys()))
    changed = tuple(
        after[k]
        for k in sorted(after.keys() & before.keys())
        if after[k].to_dict() != before[k].to_dict()
    )
    return Delta(old.version, new.threshold, added, changed, removed)


def apply_delta(old: MapperTable, delta: Delta) -> MapperTable:
    if delta.base_version != old.version:
        raise VersionMismatchError(
            f"delta is based on version {delta.base_version}, table is version {old.version}"
        )
    entries = {e.skill_id: e for e in old.entries}
    for skill_id in delta.removed:
        if entries.pop(skill_id, None) is None:
            raise KeyError(f"delta removes unknown skill {skill_id!r}")
    for entry in delta.added:
        if entry.skill_id in entries:
            raise KeyError(f"delta adds existing skill {entry.skill_id!r}")
        entries[entry.skill_id] = entry
    for entry in delta.changed:
        if entry.skill_id not in entries:
            raise KeyError(f"delta changes unknown skill {entry.skill_id!r}")
        entries[entry.skill_id] = entry
    return MapperTable(old.version + 1, delta.threshold, tuple(entries.values()))
