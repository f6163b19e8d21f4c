"""Recall sequences to regressor-ready feature vectors.

A recall is an ordered list of emotional words. Features are a lexicon
bag-of-words (optionally weighted by recall position), the walk coverage and
distance entropy of the recall over the semantic network, and summed
distances to six fixed target concepts. The assembled vector is
L2-normalized before it reaches the regressor.
"""

from __future__ import annotations

import csv
import math
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InputDataError
from .semnet import SemanticNetwork

#: Target concepts for the distance features, in feature-vector order.
DIST_TARGETS = ("depression", "anxiety", "stress", "happy", "sad", "fear")

SCORE_MIN = 0.0
SCORE_MAX = 21.0

ERT_HEADER = ["id"] + [f"w{i}" for i in range(1, 11)] + [
    "depression",
    "anxiety",
    "stress",
]


@dataclass(frozen=True)
class RecallRecord:
    """One participant's ordered emotional recall plus DAS scores."""

    id: str
    words: tuple[str, ...]
    depression: float
    anxiety: float
    stress: float

    def score(self, construct: str) -> float:
        try:
            return float(getattr(self, construct))
        except AttributeError:
            raise ConfigurationError(f"unknown construct {construct!r}") from None


@dataclass(frozen=True)
class Lexicon:
    """Ordered lemma list with its index and the word-form -> lemma table."""

    lemmas: tuple[str, ...]
    lemma_index: dict[str, int]
    lemma_map: dict[str, str]

    @classmethod
    def from_lemmas(
        cls, lemmas: Iterable[str], lemma_map: Mapping[str, str] | None = None
    ) -> "Lexicon":
        ordered = tuple(sorted(set(lemmas)))
        return cls(
            lemmas=ordered,
            lemma_index={w: i for i, w in enumerate(ordered)},
            lemma_map=dict(lemma_map or {}),
        )

    @property
    def size(self) -> int:
        return len(self.lemmas)


def normalize_lemma(word: str, lexicon: Lexicon) -> str:
    """Case-fold ``word`` and map it through the lemma table.

    Total function: words without a table entry fall back to themselves.
    """
    folded = word.strip().casefold()
    return lexicon.lemma_map.get(folded, folded)


def build_lexicon(
    records: Sequence[RecallRecord], lemma_map: Mapping[str, str] | None = None
) -> Lexicon:
    """Collect the distinct lemmas over all recall words, in sorted order."""
    if not records:
        raise InputDataError("cannot build a lexicon from an empty record list")
    lookup = {k.strip().casefold(): v for k, v in (lemma_map or {}).items()}
    lemmas = set()
    for rec in records:
        for w in rec.words:
            folded = w.strip().casefold()
            lemmas.add(lookup.get(folded, folded))
    return Lexicon.from_lemmas(lemmas, lookup)


def normalize_records(
    records: Sequence[RecallRecord], lexicon: Lexicon
) -> list[RecallRecord]:
    """Copies of ``records`` with every word lemma-normalized."""
    return [
        replace(rec, words=tuple(normalize_lemma(w, lexicon) for w in rec.words))
        for rec in records
    ]


@dataclass(frozen=True)
class PositionWeights:
    """Per-position recall weights, normalized to sum to 1."""

    w: tuple[float, ...]

    def __post_init__(self):
        if not self.w or any(v <= 0 for v in self.w):
            raise InputDataError("position weights must all be positive")
        if abs(sum(self.w) - 1.0) > 1e-12:
            raise InputDataError("position weights must sum to 1")

    def at(self, position: int) -> float:
        """Weight for a 0-based position; positions past the end reuse the last."""
        return self.w[min(position, len(self.w) - 1)]

    @classmethod
    def uniform(cls, n: int = 10) -> "PositionWeights":
        return cls(tuple(1.0 / n for _ in range(n)))


def _median(values: Sequence[float], mode: str = "low") -> float:
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        raise InputDataError("median of an empty sample")
    if mode == "low":
        return float(ordered[(n - 1) // 2])
    if mode == "mean":
        mid = n // 2
        if n % 2:
            return float(ordered[mid])
        return (ordered[mid - 1] + ordered[mid]) / 2.0
    raise ConfigurationError(f"unknown median mode {mode!r}")


def compute_position_weights(
    records: Sequence[RecallRecord],
    net: SemanticNetwork,
    median_mode: str = "low",
) -> PositionWeights:
    """Position weights from median network degree at each recall position.

    Records must already be lemma-normalized and every lemma present in the
    network. Medians use the lower-middle convention for even counts (pass
    ``median_mode="mean"`` for the mean-of-middle-two alternative).
    """
    if not records:
        raise InputDataError("cannot compute position weights without records")
    lengths = {len(r.words) for r in records}
    if len(lengths) != 1:
        raise InputDataError(f"records have mixed lengths: {sorted(lengths)}")
    missing = sorted(
        {w for r in records for w in r.words if w not in net}
    )
    if missing:
        raise InputDataError(
            f"recall lemmas missing from the network: {', '.join(missing)}"
        )
    n_positions = lengths.pop()
    medians = []
    for j in range(n_positions):
        degrees = [len(net.neighbors(r.words[j])) for r in records]
        medians.append(_median(degrees, median_mode))
    total = sum(medians)
    return PositionWeights(tuple(m / total for m in medians))


def bow(
    recall: Sequence[str], lexicon: Lexicon
) -> tuple[np.ndarray, list[str]]:
    """Occurrence counts of each lexicon lemma in the recall.

    Tokens outside the lexicon contribute nothing and are returned in the
    skip list, so ``counts.sum() + len(skipped) == len(recall)``.
    """
    counts = np.zeros(lexicon.size, dtype=np.float64)
    skipped = []
    for token in recall:
        idx = lexicon.lemma_index.get(token)
        if idx is None:
            skipped.append(token)
        else:
            counts[idx] += 1.0
    return counts, skipped


def weighted_bow(
    recall: Sequence[str], lexicon: Lexicon, weights: PositionWeights
) -> tuple[np.ndarray, list[str]]:
    """Bag-of-words where each occurrence adds its position weight."""
    vec = np.zeros(lexicon.size, dtype=np.float64)
    skipped = []
    for pos, token in enumerate(recall):
        idx = lexicon.lemma_index.get(token)
        if idx is None:
            skipped.append(token)
        else:
            vec[idx] += weights.at(pos)
    return vec, skipped


@dataclass
class WalkStats:
    """Pair distances of a recall walk plus what had to be skipped."""

    lengths: list[int]
    missing_tokens: list[str]
    unreachable_pairs: int


def _resolve_walk(net: SemanticNetwork, tokens: Sequence[str]) -> tuple[list[int], list[str]]:
    resolved = []
    missing = []
    for t in tokens:
        idx = net.node_index.get(t)
        if idx is None:
            missing.append(t)
        else:
            resolved.append(idx)
    return resolved, missing


def walk_stats(
    net: SemanticNetwork, tokens: Sequence[str], pair_mode: str = "consecutive"
) -> WalkStats:
    """Shortest-path lengths over a recall walk.

    ``pair_mode="consecutive"`` uses adjacent token pairs (the walk
    definition); ``"all_pairs"`` uses every unordered pair of resolved
    tokens. Unknown tokens are dropped first; unreachable pairs are skipped
    and counted.
    """
    if pair_mode not in ("consecutive", "all_pairs"):
        raise ConfigurationError(f"unknown pair mode {pair_mode!r}")
    resolved, missing = _resolve_walk(net, tokens)
    pairs: list[tuple[int, int]] = []
    if pair_mode == "consecutive":
        pairs = list(zip(resolved, resolved[1:]))
    else:
        for i in range(len(resolved)):
            for j in range(i + 1, len(resolved)):
                pairs.append((resolved[i], resolved[j]))
    lengths = []
    unreachable = 0
    dist_cache: dict[int, np.ndarray] = {}
    for a, b in pairs:
        if a == b:
            lengths.append(0)
            continue
        if a not in dist_cache:
            dist_cache[a] = net.distances_from(net.nodes[a])
        d = int(dist_cache[a][b])
        if d < 0:
            unreachable += 1
        else:
            lengths.append(d)
    return WalkStats(lengths, missing, unreachable)


def coverage(net: SemanticNetwork, recall: Sequence[str]) -> float:
    """Total network distance traversed between consecutive recall words."""
    return float(sum(walk_stats(net, recall).lengths))


def distance_entropy(
    net: SemanticNetwork, recall: Sequence[str], pair_mode: str = "consecutive"
) -> float:
    """Shannon entropy (natural log) of the walk's path-length distribution."""
    return _entropy_of(walk_stats(net, recall, pair_mode).lengths)


@dataclass(frozen=True)
class FeatureMask:
    """Which feature blocks a named model configuration uses."""

    name: str
    bow_kind: str  # "count" or "weighted"
    use_coverage: bool
    use_entropy: bool
    distances: tuple[str, ...]


MASKS: dict[str, FeatureMask] = {
    m.name: m
    for m in (
        FeatureMask("BINARY_BOW", "count", False, False, ()),
        FeatureMask("WEIGHTED_BOW", "weighted", False, False, ()),
        FeatureMask("ALL_DISTANCES", "weighted", True, True, DIST_TARGETS),
        FeatureMask(
            "DAS_DISTANCES_ONLY",
            "weighted",
            True,
            True,
            ("depression", "anxiety", "stress"),
        ),
        FeatureMask("HAPPYSAD_ONLY", "weighted", True, True, ("happy", "sad")),
        FeatureMask("COVER_ENTROPY_ONLY", "weighted", True, True, ()),
        FeatureMask(
            "ALL_EXCEPT_FEAR",
            "weighted",
            True,
            True,
            ("depression", "anxiety", "stress", "happy", "sad"),
        ),
        FeatureMask("FEAR_ONLY", "weighted", False, False, ("fear",)),
    )
}


def get_mask(name: str) -> FeatureMask:
    try:
        return MASKS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown feature mask {name!r}; valid masks: {', '.join(sorted(MASKS))}"
        ) from None


def feature_columns(lexicon: Lexicon, mask: FeatureMask) -> list[str]:
    """Column names of the assembled vector, in assembly order."""
    cols = [f"bow_{lemma}" for lemma in lexicon.lemmas]
    if mask.use_coverage:
        cols.append("coverage")
    if mask.use_entropy:
        cols.append("entropy")
    cols.extend(f"dist_{t}" for t in mask.distances)
    return cols


@dataclass
class FeatureVector:
    """Assembled features for one recall or parsed document."""

    bow: np.ndarray
    coverage: float
    entropy: float
    dist_depression: float
    dist_anxiety: float
    dist_stress: float
    dist_happy: float
    dist_sad: float
    dist_fear: float
    feature_mask: str
    vector: np.ndarray
    all_zero: bool
    skipped: tuple[str, ...] = field(default_factory=tuple)

    def distance(self, target: str) -> float:
        return float(getattr(self, f"dist_{target}"))


class FeatureBuilder:
    """Computes feature vectors against one network/lexicon/weights triple.

    Distance maps from each target and each seen source word are cached, so
    batch extraction over a corpus touches each BFS once. Instances are
    immutable apart from the caches and safe to reuse across records.
    """

    def __init__(
        self,
        net: SemanticNetwork,
        lexicon: Lexicon,
        weights: PositionWeights,
        entropy_mode: str = "consecutive",
    ):
        self.net = net
        self.lexicon = lexicon
        self.weights = weights
        self.entropy_mode = entropy_mode
        self._source_dist: dict[int, np.ndarray] = {}
        self._target_dist: dict[str, np.ndarray | None] = {}

    def _distances_to_target(self, target: str) -> np.ndarray | None:
        if target not in self._target_dist:
            self._target_dist[target] = (
                self.net.distances_from(target) if target in self.net else None
            )
        return self._target_dist[target]

    def warm(self) -> None:
        """Precompute all six target distance maps.

        Call before fanning feature extraction out over threads so the
        cache is only written from one thread.
        """
        for target in DIST_TARGETS:
            self._distances_to_target(target)

    def _sum_distance(self, indices: Sequence[int], target: str) -> float:
        dist = self._distances_to_target(target)
        if dist is None:
            return 0.0
        total = 0
        for idx in indices:
            d = int(dist[idx])
            if d >= 0:
                total += d
        return float(total)

    def _walk_lengths(self, indices: Sequence[int], pair_mode: str) -> list[int]:
        if pair_mode == "all_pairs":
            pairs = [
                (indices[i], indices[j])
                for i in range(len(indices))
                for j in range(i + 1, len(indices))
            ]
        else:
            pairs = list(zip(indices, indices[1:]))
        lengths = []
        for a, b in pairs:
            if a == b:
                lengths.append(0)
                continue
            if a not in self._source_dist:
                self._source_dist[a] = self.net.distances_from(self.net.nodes[a])
            d = int(self._source_dist[a][b])
            if d >= 0:
                lengths.append(d)
        return lengths

    def feature_vector(
        self, recall: Sequence[str] | RecallRecord, mask: FeatureMask | str
    ) -> FeatureVector:
        if isinstance(mask, str):
            mask = get_mask(mask)
        tokens = recall.words if isinstance(recall, RecallRecord) else tuple(recall)

        if mask.bow_kind == "count":
            bow_vec, skipped_lex = bow(tokens, self.lexicon)
        else:
            bow_vec, skipped_lex = weighted_bow(tokens, self.lexicon, self.weights)

        indices, missing = _resolve_walk(self.net, tokens)

        consecutive = self._walk_lengths(indices, "consecutive")
        cov = float(sum(consecutive))
        ent_lengths = (
            self._walk_lengths(indices, "all_pairs")
            if self.entropy_mode == "all_pairs"
            else consecutive
        )
        ent = _entropy_of(ent_lengths)

        dists = {t: self._sum_distance(indices, t) for t in DIST_TARGETS}

        blocks = [bow_vec]
        if mask.use_coverage:
            blocks.append(np.array([cov]))
        if mask.use_entropy:
            blocks.append(np.array([ent]))
        for t in mask.distances:
            blocks.append(np.array([dists[t]]))
        assembled = np.concatenate(blocks)
        norm = float(np.linalg.norm(assembled))
        all_zero = norm == 0.0
        vector = assembled if all_zero else assembled / norm

        return FeatureVector(
            bow=bow_vec,
            coverage=cov,
            entropy=ent,
            dist_depression=dists["depression"],
            dist_anxiety=dists["anxiety"],
            dist_stress=dists["stress"],
            dist_happy=dists["happy"],
            dist_sad=dists["sad"],
            dist_fear=dists["fear"],
            feature_mask=mask.name,
            vector=vector,
            all_zero=all_zero,
            skipped=tuple(dict.fromkeys(skipped_lex + missing)),
        )

    def matrix(
        self, recalls: Iterable[Sequence[str] | RecallRecord], mask: FeatureMask | str
    ) -> np.ndarray:
        rows = [self.feature_vector(r, mask).vector for r in recalls]
        return np.vstack(rows) if rows else np.empty((0, 0))


def _entropy_of(lengths: Sequence[int]) -> float:
    if not lengths:
        return 0.0
    n = len(lengths)
    ent = 0.0
    for count in Counter(lengths).values():
        p = count / n
        ent -= p * math.log(p)
    return ent


def feature_vector(
    recall: Sequence[str] | RecallRecord,
    net: SemanticNetwork,
    lexicon: Lexicon,
    weights: PositionWeights,
    mask: FeatureMask | str,
    entropy_mode: str = "consecutive",
) -> FeatureVector:
    """One-shot feature extraction; use FeatureBuilder for batches."""
    return FeatureBuilder(net, lexicon, weights, entropy_mode).feature_vector(
        recall, mask
    )


def read_ert_csv(path: str) -> list[RecallRecord]:
    """Load recall records from ``id,w1..w10,depression,anxiety,stress`` CSV."""
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputDataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ERT_HEADER:
            raise InputDataError(
                f"{path}: bad header, expected {','.join(ERT_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ERT_HEADER):
                raise InputDataError(
                    f"{path}:{lineno}: expected {len(ERT_HEADER)} fields, got {len(row)}"
                )
            rec_id = row[0].strip()
            words = tuple(w.strip().casefold() for w in row[1:11])
            if any(not w for w in words):
                raise InputDataError(f"{path}:{lineno}: record {rec_id!r} has an empty word")
            try:
                scores = [float(v) for v in row[11:14]]
            except ValueError:
                raise InputDataError(
                    f"{path}:{lineno}: record {rec_id!r} has a non-numeric score"
                ) from None
            for name, value in zip(("depression", "anxiety", "stress"), scores):
                if not (SCORE_MIN <= value <= SCORE_MAX):
                    raise InputDataError(
                        f"{path}:{lineno}: record {rec_id!r} {name} score {value} "
                        f"outside [{SCORE_MIN:g}, {SCORE_MAX:g}]"
                    )
            records.append(RecallRecord(rec_id, words, *scores))
    return records


def read_lemma_map(path: str) -> dict[str, str]:
    """Load a two-column ``form<TAB>lemma`` table; both sides case-folded."""
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputDataError(
                    f"{path}:{lineno}: expected form<TAB>lemma, got {line!r}"
                )
            form, lemma = (p.strip().casefold() for p in parts)
            if not form or not lemma:
                raise InputDataError(f"{path}:{lineno}: empty form or lemma")
            table[form] = lemma
    return table


def dump_features_csv(fh, ids: Sequence[str], fvs: Sequence[FeatureVector], lexicon: Lexicon) -> None:
    """Write the full (unmasked, un-normalized) feature table as CSV."""
    writer = csv.writer(fh, lineterminator="\n")
    header = ["id"] + [f"bow_{lemma}" for lemma in lexicon.lemmas]
    header += ["coverage", "entropy"] + [f"dist_{t}" for t in DIST_TARGETS]
    writer.writerow(header)
    for rec_id, fv in zip(ids, fvs):
        row = [rec_id]
        row.extend(f"{v:.12g}" for v in fv.bow)
        row.append(f"{fv.coverage:.12g}")
        row.append(f"{fv.entropy:.12g}")
        row.extend(f"{fv.distance(t):.12g}" for t in DIST_TARGETS)
        writer.writerow(row)
