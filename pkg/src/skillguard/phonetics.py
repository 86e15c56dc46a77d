"""Pronunciation dictionary parsing, phoneme cost learning and phonetic distance.

Invocation phrases are compared as ARPABET phoneme sequences with the stress
digits removed. Substitution costs are learned from the alternate
pronunciations listed in the CMU dictionary: two variants of the same word are
globally aligned and every mismatched column counts as evidence that the two
phonemes are interchangeable. The distance between two phrases is a weighted
Levenshtein distance normalized by the longer sequence and reported on a
0-1000 scale.
"""

from __future__ import annotations

import gc
import itertools
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DictionaryParseError, EmptyCorpusError, OutOfVocabularyError

DISTANCE_SCALE = 1000.0

MATCH_SCORE = 1
MISMATCH_SCORE = -1
GAP_SCORE = -1

_PHONE_RE = re.compile(r"[A-Za-z]+[0-9]?")
_PHONES_RE = re.compile(r"[A-Za-z]+[0-9]?(?: [A-Za-z]+[0-9]?)*")
_NO_DIGITS = str.maketrans("", "", "0123456789")
_VARIANT_RE = re.compile(r"(.+)\((\d+)\)")
_WORD_STRIP = ".,:;!?\"()"


def strip_stress(token: str) -> str:
    return token.rstrip("0123456789").upper()


@dataclass(frozen=True)
class PhonemeSeq:
    """An invocation phrase rendered as stress-free phonemes."""

    phonemes: tuple[str, ...]
    source_phrase: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phonemes", tuple(self.phonemes))

    def __len__(self):
        return len(self.phonemes)

    def __iter__(self):
        return iter(self.phonemes)

    def __getitem__(self, item):
        return self.phonemes[item]

    def __add__(self, other):
        return PhonemeSeq(self.phonemes + tuple(other), self.source_phrase)

    def __str__(self):
        return " ".join(self.phonemes)


@dataclass(frozen=True)
class PronunciationDict:
    entries: Mapping[str, tuple[PhonemeSeq, ...]]
    inventory: frozenset[str]
    alt_pairs: tuple[tuple[PhonemeSeq, PhonemeSeq], ...] = field(repr=False)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        return word.lower() in self.entries

    def lookup(self, word: str) -> tuple[PhonemeSeq, ...]:
        return self.entries[word.lower()]


def parse_dict(dict_text: str) -> PronunciationDict:
    """Parse text in CMU pronouncing dictionary format.

    Accepts both the classic ``cmudict-0.7b`` layout (``;;;`` comments,
    upper-case words, two-space separator) and the maintained ``cmudict.dict``
    layout (lower-case words, trailing ``# ...`` annotations).
    """
    # the parse allocates ~10^5 small objects and no cycles; pausing the
    # cyclic collector roughly halves the run time
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return _parse_dict(dict_text)
    finally:
        if was_enabled:
            gc.enable()


def _parse_dict(dict_text: str) -> PronunciationDict:
    entries: dict[str, list[PhonemeSeq]] = {}
    inventory: set[str] = set()
    for lineno, raw in enumerate(dict_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;;"):
            continue
        head, *tokens = line.split()
        for k, tok in enumerate(tokens):
            if tok.startswith("#"):
                tokens = tokens[:k]
                break
        if not tokens:
            raise DictionaryParseError(lineno, f"no phonemes for {head!r}")

        m = _VARIANT_RE.fullmatch(head)
        if m:
            word = m.group(1)
        elif "(" in head[1:] or (len(head) > 1 and head.endswith(")")):
            raise DictionaryParseError(lineno, f"unbalanced variant suffix in {head!r}")
        else:
            word = head

        joined = " ".join(tokens)
        if not _PHONES_RE.fullmatch(joined):
            bad = next(t for t in tokens if not _PHONE_RE.fullmatch(t))
            raise DictionaryParseError(lineno, f"bad phoneme {bad!r}")
        phones = joined.translate(_NO_DIGITS).upper().split()
        inventory.update(phones)
        word = word.lower()
        entries.setdefault(word, []).append(PhonemeSeq(tuple(phones), word))

    frozen = {w: tuple(v) for w, v in entries.items()}
    pairs = tuple(
        pair for variants in frozen.values() for pair in itertools.combinations(variants, 2)
    )
    return PronunciationDict(frozen, frozenset(inventory), pairs)


def load_dict(path: str | Path | None = None) -> PronunciationDict:
    """Load a dictionary file, or the bundled CMU dictionary when *path* is None."""
    if path is None:
        import cmudict

        return parse_dict(cmudict.dict_string())
    return parse_dict(Path(path).read_text(encoding="latin-1"))


def _normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


def load_overrides(path: str | Path) -> dict[str, PhonemeSeq]:
    """Read a JSON object mapping a word or phrase to a list of phonemes."""
    raw = json.loads(Path(path).read_text())
    return {
        _normalize_phrase(k): PhonemeSeq(tuple(strip_stress(p) for p in v), k)
        for k, v in raw.items()
    }


def _as_seq(value, source="") -> PhonemeSeq:
    if isinstance(value, PhonemeSeq):
        return value
    return PhonemeSeq(tuple(strip_stress(p) for p in value), source)


def phrase_to_phonemes(
    phrase: str,
    pdict: PronunciationDict,
    overrides: Mapping[str, Sequence[str] | PhonemeSeq] | None = None,
) -> PhonemeSeq:
    """Convert a phrase to phonemes using the first pronunciation of each word.

    Overrides are consulted first for the whole phrase, then word by word.
    Raises OutOfVocabularyError listing every word that could not be resolved.
    """
    norm = _normalize_phrase(phrase)
    if not norm:
        raise ValueError("empty phrase")
    overrides = {_normalize_phrase(k): v for k, v in (overrides or {}).items()}

    if norm in overrides:
        seq = _as_seq(overrides[norm], norm)
        _check_inventory(seq, pdict)
        return PhonemeSeq(seq.phonemes, norm)

    phones: list[str] = []
    missing = []
    for word in norm.split():
        word = word.strip(_WORD_STRIP) or word
        if word in overrides:
            seq = _as_seq(overrides[word], word)
            _check_inventory(seq, pdict)
            phones.extend(seq)
        elif word in pdict.entries:
            phones.extend(pdict.entries[word][0])
        else:
            missing.append(word)
    if missing:
        raise OutOfVocabularyError(missing)
    if not phones:
        raise ValueError(f"phrase {phrase!r} has no phonemes")
    return PhonemeSeq(tuple(phones), norm)


def _check_inventory(seq: PhonemeSeq, pdict: PronunciationDict):
    unknown = sorted(set(seq) - pdict.inventory)
    if unknown:
        raise ValueError(f"override uses phonemes outside the inventory: {unknown}")


def needleman_wunsch(
    a: Sequence[str],
    b: Sequence[str],
    match: int = MATCH_SCORE,
    mismatch: int = MISMATCH_SCORE,
    gap: int = GAP_SCORE,
) -> list[tuple[str | None, str | None]]:
    """Globally align *a* and *b*; return the aligned columns.

    ``None`` marks a gap. Traceback ties prefer the diagonal, then a gap in
    *b* (consuming ``a``), then a gap in *a*.
    """
    n, m = len(a), len(b)
    score = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        score[i][0] = i * gap
    for j in range(1, m + 1):
        score[0][j] = j * gap
    for i in range(1, n + 1):
        ai = a[i - 1]
        row, prev = score[i], score[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (match if ai == b[j - 1] else mismatch)
            row[j] = max(diag, prev[j] + gap, row[j - 1] + gap)

    columns = []
    i, j = n, m
    while i > 0 or j > 0:
        s = score[i][j]
        if i > 0 and j > 0:
            step = match if a[i - 1] == b[j - 1] else mismatch
            if s == score[i - 1][j - 1] + step:
                columns.append((a[i - 1], b[j - 1]))
                i, j = i - 1, j - 1
                continue
        if i > 0 and s == score[i - 1][j] + gap:
            columns.append((a[i - 1], None))
            i -= 1
        else:
            columns.append((None, b[j - 1]))
            j -= 1
    columns.reverse()
    return columns


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Phoneme substitution costs plus a flat insertion/deletion cost.

    ``occurrences`` holds F (per-phoneme counts across both sides of all
    alternate pairs) and ``substitutions`` holds SF, stored once per direction
    so that ``SF[a, b] == SF[b, a]``.
    """

    inventory: tuple[str, ...]
    sub_cost: np.ndarray = field(repr=False)
    indel_cost: float = 1.0
    occurrences: Mapping[str, int] = field(default_factory=dict, repr=False)
    substitutions: Mapping[tuple[str, str], int] = field(default_factory=dict, repr=False)
    n_pairs: int = 0

    def __post_init__(self):
        sub = np.array(self.sub_cost, dtype=float)
        sub.setflags(write=False)
        object.__setattr__(self, "sub_cost", sub)
        object.__setattr__(self, "inventory", tuple(self.inventory))
        object.__setattr__(self, "_index", {p: k for k, p in enumerate(self.inventory)})

    def index(self, phoneme: str) -> int:
        try:
            return self._index[phoneme]
        except KeyError:
            raise ValueError(f"phoneme {phoneme!r} not in cost inventory") from None

    def sub(self, a: str, b: str) -> float:
        return float(self.sub_cost[self.index(a), self.index(b)])

    def encode(self, seq: Iterable[str]) -> np.ndarray:
        return np.array([self.index(p) for p in seq], dtype=np.intp)

    @classmethod
    def uniform(cls, inventory: Iterable[str], sub: float = 1.0, indel: float = 1.0):
        inv = tuple(sorted(set(inventory)))
        m = np.full((len(inv), len(inv)), float(sub))
        np.fill_diagonal(m, 0.0)
        return cls(inv, m, indel)

    def to_dict(self) -> dict:
        return {
            "inventory": list(self.inventory),
            "sub_cost": self.sub_cost.tolist(),
            "indel_cost": self.indel_cost,
            "F": dict(self.occurrences),
            "SF": [[a, b, n] for (a, b), n in sorted(self.substitutions.items())],
            "pairs": self.n_pairs,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CostMatrix":
        return cls(
            inventory=tuple(data["inventory"]),
            sub_cost=np.asarray(data["sub_cost"], dtype=float),
            indel_cost=float(data["indel_cost"]),
            occurrences=dict(data.get("F", {})),
            substitutions={(a, b): n for a, b, n in data.get("SF", [])},
            n_pairs=int(data.get("pairs", 0)),
        )


def learn_cost_matrix(
    pdict: PronunciationDict,
    indel_cost: float = 1.0,
    match: int = MATCH_SCORE,
    mismatch: int = MISMATCH_SCORE,
    gap: int = GAP_SCORE,
) -> CostMatrix:
    """Learn substitution costs from the dictionary's alternate pronunciations.

    cost(a, b) = 1 - (SF(a, b) + SF(b, a)) / (F(a) + F(b)), clamped to [0, 1].
    Every mismatched column of an alignment is counted in both directions, so
    a phoneme pair that always substitutes for each other costs 0 and a pair
    never seen substituting costs 1.
    """
    if not pdict.alt_pairs:
        raise EmptyCorpusError("no alternate pronunciations")

    occurrences: Counter[str] = Counter()
    substitutions: Counter[tuple[str, str]] = Counter()
    for first, second in pdict.alt_pairs:
        occurrences.update(first)
        occurrences.update(second)
        for x, y in needleman_wunsch(first, second, match, mismatch, gap):
            if x is not None and y is not None and x != y:
                substitutions[x, y] += 1
                substitutions[y, x] += 1

    inventory = tuple(sorted(pdict.inventory))
    n = len(inventory)
    freq = np.array([occurrences.get(p, 0) for p in inventory], dtype=float)
    sf = np.zeros((n, n))
    index = {p: k for k, p in enumerate(inventory)}
    for (x, y), count in substitutions.items():
        sf[index[x], index[y]] = count

    denom = freq[:, None] + freq[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        cost = 1.0 - (sf + sf.T) / denom
    cost = np.where(denom > 0, np.clip(cost, 0.0, 1.0), 1.0)
    np.fill_diagonal(cost, 0.0)
    return CostMatrix(
        inventory=inventory,
        sub_cost=cost,
        indel_cost=float(indel_cost),
        occurrences=dict(occurrences),
        substitutions=dict(substitutions),
        n_pairs=len(pdict.alt_pairs),
    )


def weighted_levenshtein(a: Sequence[str], b: Sequence[str], costs: CostMatrix) -> float:
    """Minimum total cost of substitutions, insertions and deletions turning a into b."""
    ia = costs.encode(a)
    ib = costs.encode(b)
    sub = costs.sub_cost
    indel = costs.indel_cost
    prev = [j * indel for j in range(len(ib) + 1)]
    for i, x in enumerate(ia, start=1):
        row = sub[x]
        cur = [i * indel]
        for j, y in enumerate(ib, start=1):
            cur.append(min(prev[j - 1] + row[y], prev[j] + indel, cur[j - 1] + indel))
        prev = cur
    return float(prev[-1])


def phonetic_distance(
    a: Sequence[str], b: Sequence[str], costs: CostMatrix, scale: float = DISTANCE_SCALE
) -> float:
    """Length-normalized weighted edit distance, scaled to 0..``scale``."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("phonetic distance needs non-empty phoneme sequences")
    return scale * weighted_levenshtein(a, b, costs) / max(len(a), len(b))


def _pad(encoded: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(e) for e in encoded], dtype=np.intp)
    out = np.zeros((len(encoded), max(lengths.max(initial=1), 1)), dtype=np.intp)
    for k, e in enumerate(encoded):
        out[k, : len(e)] = e
    return out, lengths


def _batch_levenshtein(A, la, B, lb, sub, indel) -> np.ndarray:
    # Row-by-row DP vectorized over pairs; padded cells past a pair's length
    # never feed back into cells inside it.
    n_pairs, width_a = A.shape
    width_b = B.shape[1]
    result = np.empty(n_pairs)
    prev = np.tile(np.arange(width_b + 1) * indel, (n_pairs, 1))
    rows = np.arange(n_pairs)
    for i in range(1, width_a + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i * indel
        best = np.minimum(prev[:, :-1] + sub[A[:, i - 1, None], B], prev[:, 1:] + indel)
        for j in range(1, width_b + 1):
            cur[:, j] = np.minimum(best[:, j - 1], cur[:, j - 1] + indel)
        prev = cur
        done = la == i
        result[done] = prev[rows[done], lb[done]]
    return result


def paired_distances(
    left: Sequence[Sequence[str]],
    right: Sequence[Sequence[str]],
    costs: CostMatrix,
    scale: float = DISTANCE_SCALE,
    chunk: int = 65536,
) -> np.ndarray:
    """Distances between ``left[k]`` and ``right[k]`` for every k, vectorized."""
    if len(left) != len(right):
        raise ValueError("left and right must have equal length")
    if not len(left):
        return np.empty(0)
    A, la = _pad([costs.encode(s) for s in left])
    B, lb = _pad([costs.encode(s) for s in right])
    if (la == 0).any() or (lb == 0).any():
        raise ValueError("phonetic distance needs non-empty phoneme sequences")
    return _distances_from_codes(A, la, B, lb, costs, scale, chunk)


def _distances_from_codes(A, la, B, lb, costs, scale, chunk):
    out = np.empty(len(A))
    for start in range(0, len(A), chunk):
        s = slice(start, start + chunk)
        wa, wb = la[s].max(), lb[s].max()
        raw = _batch_levenshtein(
            A[s, :wa], la[s], B[s, :wb], lb[s], costs.sub_cost, costs.indel_cost
        )
        out[s] = scale * raw / np.maximum(la[s], lb[s])
    return out


def pairwise_distances(
    seqs: Sequence[Sequence[str]],
    costs: CostMatrix,
    scale: float = DISTANCE_SCALE,
    chunk: int = 65536,
) -> np.ndarray:
    """Symmetric (n, n) matrix of phonetic distances between all sequences."""
    n = len(seqs)
    dist = np.zeros((n, n))
    if n < 2:
        return dist
    codes, lengths = _pad([costs.encode(s) for s in seqs])
    if (lengths == 0).any():
        raise ValueError("phonetic distance needs non-empty phoneme sequences")
    ii, jj = np.triu_indices(n, k=1)
    d = _distances_from_codes(codes[ii], lengths[ii], codes[jj], lengths[jj], costs, scale, chunk)
    dist[ii, jj] = d
    dist[jj, ii] = d
    return dist


class CostMatrixLearner(BaseEstimator):
    """Estimator wrapper around :func:`learn_cost_matrix`.

    Parameters
    ----------
    indel_cost : float, default=1.0
        Flat cost of inserting or deleting a phoneme.
    match_score, mismatch_score, gap_score : int
        Needleman-Wunsch scoring used to align alternate pronunciations.
    scale : float, default=1000.0
        Upper end of the distance axis reported by :meth:`transform`.

    Attributes
    ----------
    costs_ : CostMatrix
    n_pairs_ : int
        Number of alternate-pronunciation pairs seen during fit.
    """

    def __init__(
        self,
        indel_cost=1.0,
        match_score=MATCH_SCORE,
        mismatch_score=MISMATCH_SCORE,
        gap_score=GAP_SCORE,
        scale=DISTANCE_SCALE,
    ):
        self.indel_cost = indel_cost
        self.match_score = match_score
        self.mismatch_score = mismatch_score
        self.gap_score = gap_score
        self.scale = scale

    def fit(self, X, y=None):
        """Learn costs from a PronunciationDict or from dictionary text."""
        pdict = parse_dict(X) if isinstance(X, str) else X
        self.costs_ = learn_cost_matrix(
            pdict, self.indel_cost, self.match_score, self.mismatch_score, self.gap_score
        )
        self.n_pairs_ = self.costs_.n_pairs
        return self

    def transform(self, X):
        """Distances for an iterable of ``(seq_a, seq_b)`` pairs."""
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "costs_")
        pairs = list(X)
        return paired_distances(
            [p[0] for p in pairs], [p[1] for p in pairs], self.costs_, self.scale
        )
