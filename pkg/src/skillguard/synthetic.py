"""Seeded generator of synthetic catalogs, page corpora and user traces.

Used for threshold sweeps when real user traces are unavailable. Nothing it
produces is measured data. Knobs:

* ``squat_fraction``: share of legitimate skills that get a squatter whose
  pronunciation differs by one or two cheap phoneme substitutions.
* ``account_linking_prob``: share of legitimate skills with a developer domain.
* ``backlink_prob``: chance such a domain links back to the listing.
* ``evidence_prob``: chance a used skill with an identity leaves counterpart
  activity (an installed app or repeated multi-page browsing).
* ``lure_prob``: chance a user's history contains an attacker lure.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counterpart import AppRecord, HistoryRecord
from .graph import Skill, dump_catalog
from .identity import PageRecord
from .io import write_canonical
from .phonetics import CostMatrix, PhonemeSeq, PronunciationDict
from .simulator import UserTrace

DAY_MS = 86_400_000
MINUTE_MS = 60_000
EPOCH_MS = 1_700_000_000_000
_ASIN_ALPHABET = np.array(list("ABCDEFGHJKLMNPQRSTUVWXYZ0123456789"))


@dataclass
class SyntheticWorld:
    catalog: list[Skill]
    pages: list[PageRecord]
    traces: list[UserTrace]

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Write catalog.jsonl, corpus/manifest.json (+ HTML) and traces.json."""
        directory = Path(directory)
        pages_dir = directory / "corpus" / "pages"
        pages_dir.mkdir(parents=True, exist_ok=True)
        dump_catalog(self.catalog, directory / "catalog.jsonl")
        manifest = []
        for k, page in enumerate(self.pages):
            rel = f"pages/{k:05d}.html"
            (directory / "corpus" / rel).write_text(page.body, encoding="utf-8")
            manifest.append(
                {
                    "url": page.url,
                    "domain": page.domain,
                    "path": rel,
                    "user_generated": page.user_generated,
                    "cert_sha256": page.cert_sha256,
                }
            )
        write_canonical(manifest, directory / "corpus" / "manifest.json")
        write_canonical([t.to_dict() for t in self.traces], directory / "traces.json")
        return {
            "catalog": directory / "catalog.jsonl",
            "corpus": directory / "corpus" / "manifest.json",
            "traces": directory / "traces.json",
        }


def load_traces(path: str | Path) -> list[UserTrace]:
    with open(path, encoding="utf-8") as fh:
        return [UserTrace.from_dict(t) for t in json.load(fh)]


def _cert(domain: str, seed: int) -> str:
    return hashlib.sha256(f"{domain}:{seed}".encode()).hexdigest()


def _word_pool(pdict: PronunciationDict) -> list[str]:
    pattern = re.compile(r"[a-z]{3,8}")
    return sorted(
        w for w, variants in pdict.entries.items()
        if pattern.fullmatch(w) and len(variants) == 1 and 2 <= len(variants[0]) <= 6
    )


def _squat_phonemes(seq: PhonemeSeq, costs: CostMatrix, rng) -> tuple[str, ...]:
    phones = list(seq)
    n_subs = 1 if rng.random() < 0.7 else 2
    for pos in rng.choice(len(phones), size=min(n_subs, len(phones)), replace=False):
        row = costs.sub_cost[costs.index(phones[pos])].copy()
        row[costs.index(phones[pos])] = np.inf
        phones[pos] = costs.inventory[int(np.argmin(row))]
    return tuple(phones)


def _page(url, body, cert, user_generated=False):
    return PageRecord(url=url, body=body, user_generated=user_generated, cert_sha256=cert)


def _session(rng, start_ms, domain, n_pages):
    paths = rng.choice(40, size=n_pages, replace=False)
    return [
        HistoryRecord(int(start_ms + k * rng.integers(20, 240) * 1000 + k),
                      f"https://www.{domain}/page/{int(p)}")
        for k, p in enumerate(paths)
    ]


def generate_world(
    pdict: PronunciationDict,
    costs: CostMatrix,
    n_skills: int = 1000,
    n_users: int = 50,
    seed: int = 0,
    squat_fraction: float = 0.15,
    account_linking_prob: float = 0.6,
    backlink_prob: float = 0.7,
    evidence_prob: float = 0.8,
    lure_prob: float = 0.3,
) -> SyntheticWorld:
    rng = np.random.default_rng(seed)
    words = _word_pool(pdict)

    ids: set[str] = set()

    def new_id():
        while True:
            candidate = "B0" + "".join(rng.choice(_ASIN_ALPHABET, size=8))
            if candidate not in ids:
                ids.add(candidate)
                return candidate

    n_squat = int(round(n_skills * squat_fraction / (1 + squat_fraction)))
    n_legit = n_skills - n_squat

    catalog: list[Skill] = []
    pages: list[PageRecord] = []
    domain_of: dict[str, str] = {}
    identity: set[str] = set()
    for k in range(n_legit):
        n_words = int(rng.choice([1, 2, 3], p=[0.3, 0.5, 0.2]))
        phrase_words = [words[int(i)] for i in rng.integers(len(words), size=n_words)]
        phrase = " ".join(phrase_words)
        sid = new_id()
        url = f"https://www.amazon.com/dp/{sid}"
        linking = bool(rng.random() < account_linking_prob)
        metadata = []
        if linking:
            domain = f"{phrase_words[0]}{k}.com"
            domain_of[sid] = domain
            metadata = [f"https://www.{domain}/privacy", f"https://help.{domain}/terms"]
            cert = _cert(domain, seed)
            pages.append(_page(f"https://www.{domain}/", "<html><body>Welcome</body></html>", cert))
            if rng.random() < backlink_prob:
                identity.add(sid)
                body = (f'<html><body><p>Try our voice app:</p>'
                        f'<a href="{url}/?ref=site&utm_source=home">Enable on Alexa</a>'
                        f"</body></html>")
                pages.append(_page(f"https://www.{domain}/alexa", body, cert))
        else:
            metadata = [f"https://s3.amazonaws.com/skill-assets/{sid.lower()}/privacy.html"]
        catalog.append(
            Skill(sid, phrase.title(), phrase, url, tuple(metadata),
                  int(rng.integers(0, 500)), linking, PhonemeSeq(
                      tuple(p for w in phrase_words for p in pdict.entries[w][0]), phrase))
        )

    legit = list(catalog)
    squat_targets = rng.choice(len(legit), size=n_squat, replace=False)
    squatters_of: dict[str, list[str]] = {}
    for t in squat_targets:
        target = legit[int(t)]
        phones = _squat_phonemes(target.phonemes, costs, rng)
        sid = new_id()
        url = f"https://www.amazon.com/dp/{sid}"
        invocation = target.invocation + "s"
        mirror = target.id in domain_of and rng.random() < 0.5
        # a mirroring squatter copies the target's metadata and plants a
        # link to itself on the target's user-generated forum
        metadata = target.metadata_urls if mirror else (
            f"https://s3.amazonaws.com/skill-assets/{sid.lower()}/privacy.html",)
        if mirror:
            domain = domain_of[target.id]
            body = f'<html><body>Great skill! <a href="{url}">get it</a></body></html>'
            pages.append(_page(f"https://forum.{domain}/t/{sid.lower()}", body,
                               _cert(domain, seed), user_generated=True))
        catalog.append(
            Skill(sid, invocation.title(), invocation, url, tuple(metadata),
                  int(rng.integers(0, 50)), False, PhonemeSeq(phones, invocation),
                  PhonemeSeq(phones, invocation))
        )
        squatters_of.setdefault(target.id, []).append(sid)

    traces = []
    squatted = [s.id for s in legit if s.id in squatters_of]
    for u in range(n_users):
        n_used = int(rng.integers(3, 9))
        pool_a = rng.choice(squatted, size=min(n_used // 2, len(squatted)), replace=False)
        rest = [s.id for s in legit if s.id not in set(pool_a)]
        pool_b = rng.choice(rest, size=n_used - len(pool_a), replace=False)
        used = [str(s) for s in pool_a] + [str(s) for s in pool_b]

        history: list[HistoryRecord] = []
        apps: list[AppRecord] = []
        for sid in used:
            domain = domain_of.get(sid)
            if domain is None or rng.random() >= evidence_prob:
                continue
            if rng.random() < 0.3:
                apps.append(AppRecord(f"com.{domain.split('.')[0]}.app", _cert(domain, seed)))
                continue
            for _ in range(int(rng.integers(2, 5))):
                day = int(rng.integers(0, 60))
                start = EPOCH_MS + day * DAY_MS + int(rng.integers(8, 22)) * 3_600_000
                history.extend(_session(rng, start, domain, int(rng.integers(3, 7))))
        for _ in range(5):
            domain = f"{words[int(rng.integers(len(words)))]}-news.com"
            start = EPOCH_MS + int(rng.integers(0, 60)) * DAY_MS + int(rng.integers(1, 7)) * 3_600_000
            history.extend(_session(rng, start, domain, int(rng.integers(1, 5))))
        if rng.random() < lure_prob and squatters_of:
            target = squatted[int(rng.integers(len(squatted)))]
            bait = squatters_of[target][0]
            for _ in range(int(rng.integers(1, 4))):
                start = EPOCH_MS + int(rng.integers(0, 60)) * DAY_MS + 3 * 3_600_000 + 17
                history.append(HistoryRecord(start, f"https://www.amazon.com/dp/{bait}"))
                history.extend(_session(rng, start + MINUTE_MS, f"lure{u}.com", 4))
        traces.append(UserTrace(f"user{u:03d}", tuple(sorted(history)), tuple(apps),
                                frozenset(used)))

    return SyntheticWorld(catalog, pages, traces)
