"""Statistics for score validation: correlation, rank tests, VAD profiles.

Pearson and Kruskal-Wallis are computed from their definitions; only the
tail probabilities come from scipy. The Kruskal-Wallis test offers an exact
permutation p-value for the tiny samples where the chi-square approximation
is unreliable.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
import math
import os
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2, t as t_dist

from .errors import InputDataError, UndefinedValueError

# A construct score strictly above its tipping point marks the high group.
TIPPING_POINTS = {"depression": 6.0, "anxiety": 2.0, "stress": 4.0}

SCORE_BIN_EDGES = list(range(0, 23))

#: Largest pooled sample the exact permutation test will enumerate.
EXACT_PERMUTATION_MAX_N = 14


@dataclass(frozen=True)
class StatResult:
    statistic: float
    p_value: float
    n: tuple[int, ...]
    method: str = ""


def pearson(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Pearson correlation with a two-sided t-test p-value (n-2 df).

    Raises UndefinedValueError when either sample is constant or n < 3.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise InputDataError("pearson expects one-dimensional samples")
    if xa.shape[0] != ya.shape[0]:
        raise InputDataError(
            f"pearson sample lengths differ: {xa.shape[0]} vs {ya.shape[0]}"
        )
    n = xa.shape[0]
    if n < 3:
        raise UndefinedValueError(f"pearson needs at least 3 pairs, got {n}")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    sx = float(np.sqrt(np.dot(xd, xd)))
    sy = float(np.sqrt(np.dot(yd, yd)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedValueError("pearson is undefined for a constant sample")
    r = float(np.dot(xd, yd) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if 1.0 - r * r <= 0.0:
        return StatResult(r, 0.0, (n,), "t-dist")
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(t_dist.sf(abs(t_stat), n - 2))
    return StatResult(r, min(p, 1.0), (n,), "t-dist")


def _average_ranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled), dtype=np.float64)
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        # ties share the average of the 1-based ranks they span
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _h_statistic(pooled: np.ndarray, n_a: int) -> float:
    """Tie-corrected H for the two-group split pooled[:n_a] / pooled[n_a:]."""
    n = len(pooled)
    ranks = _average_ranks(pooled)
    r_a = float(ranks[:n_a].sum())
    r_b = float(ranks[n_a:].sum())
    h = 12.0 / (n * (n + 1)) * (r_a * r_a / n_a + r_b * r_b / (n - n_a))
    h -= 3.0 * (n + 1)
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(((counts**3) - counts).sum())
    denom = 1.0 - tie_term / (n**3 - n)
    if denom == 0.0:
        # every pooled value identical: no evidence of any difference
        return 0.0
    # rank-sum rounding can leave a tiny negative residue
    return max(h / denom, 0.0)


def kruskal_wallis(
    group_a: Sequence[float], group_b: Sequence[float], exact: bool = False
) -> StatResult:
    """Tie-corrected two-group Kruskal-Wallis H test.

    The p-value uses the chi-square approximation with 1 df. For tiny
    samples (combined n up to 14) pass ``exact=True`` to enumerate every
    assignment of the pooled values instead; all-identical input yields
    H = 0, p = 1 by definition.
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise InputDataError("kruskal_wallis groups must be one-dimensional")
    if len(a) < 1 or len(b) < 1:
        raise InputDataError("kruskal_wallis groups must be non-empty")
    if len(a) + len(b) < 3:
        raise InputDataError("kruskal_wallis needs a combined n of at least 3")
    pooled = np.concatenate([a, b])
    sizes = (len(a), len(b))
    h_obs = _h_statistic(pooled, len(a))
    if len(np.unique(pooled)) == 1:
        return StatResult(0.0, 1.0, sizes, "degenerate")
    if not exact:
        p = float(chi2.sf(h_obs, 1))
        return StatResult(h_obs, min(p, 1.0), sizes, "chi2")
    p = _exact_permutation_p(pooled, len(a), h_obs)
    return StatResult(h_obs, p, sizes, "permutation")


def _exact_permutation_p(pooled: np.ndarray, n_a: int, h_obs: float) -> float:
    n = len(pooled)
    if n > EXACT_PERMUTATION_MAX_N:
        raise InputDataError(
            f"exact permutation test limited to pooled n <= "
            f"{EXACT_PERMUTATION_MAX_N}, got {n}"
        )
    indices = set(range(n))
    count_ge = 0
    total = 0
    for combo in combinations(sorted(indices), n_a):
        rest = sorted(indices - set(combo))
        arrangement = np.concatenate([pooled[list(combo)], pooled[rest]])
        h = _h_statistic(arrangement, n_a)
        total += 1
        if h >= h_obs - 1e-12:
            count_ge += 1
    return count_ge / total


@dataclass(frozen=True)
class VadProfile:
    """Median affect of a token list; medians are None when nothing matched."""

    median_valence: float | None
    median_arousal: float | None
    coverage: float
    n_words: int
    n_matched: int

    @property
    def defined(self) -> bool:
        return self.n_matched > 0


def _mid_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def vad_profile(
    words: Sequence[str], vad: Mapping[str, tuple[float, float]]
) -> VadProfile:
    """Median valence/arousal of the words found in the VAD table.

    Zero matches (including an empty word list) is not an error: the result
    comes back with undefined medians and coverage 0.
    """
    valences = []
    arousals = []
    for w in words:
        entry = vad.get(w.strip().casefold())
        if entry is not None:
            valences.append(entry[0])
            arousals.append(entry[1])
    if not valences:
        return VadProfile(None, None, 0.0, len(words), 0)
    return VadProfile(
        median_valence=_mid_median(valences),
        median_arousal=_mid_median(arousals),
        coverage=len(valences) / len(words),
        n_words=len(words),
        n_matched=len(valences),
    )


def read_vad_tsv(path: str) -> dict[str, tuple[float, float]]:
    """Load ``word<TAB>valence<TAB>arousal`` rows; a header line is allowed."""
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    table: dict[str, tuple[float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InputDataError(
                    f"{path}:{lineno}: expected word<TAB>valence<TAB>arousal"
                )
            word = parts[0].strip().casefold()
            try:
                valence, arousal = float(parts[1]), float(parts[2])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise InputDataError(
                    f"{path}:{lineno}: non-numeric valence/arousal"
                ) from None
            if not word:
                raise InputDataError(f"{path}:{lineno}: empty word")
            table[word] = (valence, arousal)
    return table


def _score_of(item, construct: str) -> float:
    """Score accessor for RecallRecord-likes and scored-document dicts."""
    if isinstance(item, Mapping):
        scores = item.get("scores", item)
        return float(scores[construct])
    return float(item.score(construct))


def _id_of(item) -> str:
    if isinstance(item, Mapping):
        return str(item["id"])
    return str(item.id)


def partition_by_tipping(
    scored: Sequence, tipping: Mapping[str, float], construct: str
) -> tuple[list[str], list[str]]:
    """Ids of the high (strictly above tipping) and low documents.

    Accepts recall records or scored-document mappings; a score exactly at
    the tipping point lands in the low group.
    """
    if construct not in tipping:
        raise InputDataError(f"no tipping point for construct {construct!r}")
    cut = float(tipping[construct])
    high = [_id_of(it) for it in scored if _score_of(it, construct) > cut]
    low = [_id_of(it) for it in scored if _score_of(it, construct) <= cut]
    return high, low


def score_histogram(scores: Sequence[float]) -> dict:
    counts, edges = np.histogram(
        np.asarray(scores, dtype=np.float64), bins=SCORE_BIN_EDGES
    )
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def validate_corpus(
    records: Sequence,
    vad: Mapping[str, tuple[float, float]],
    tipping: Mapping[str, float] | None = None,
) -> dict:
    """Construct-validity report over a corpus of recalls or scored documents.

    Contains pairwise correlations between the three construct score series,
    Kruskal-Wallis comparisons of pooled word valence (depression, stress)
    or arousal (anxiety) between high and low scorer groups, and
    per-construct score histograms. Degenerate comparisons are reported with
    a skip reason instead of failing the whole report.
    """
    tipping = dict(TIPPING_POINTS if tipping is None else tipping)
    constructs = ("depression", "anxiety", "stress")
    report: dict = {
        "n_records": len(records),
        "correlations": {},
        "group_tests": {},
        "histograms": {},
    }
    series = {c: [_score_of(rec, c) for rec in records] for c in constructs}

    for a, b in combinations(constructs, 2):
        key = f"{a}_{b}"
        try:
            result = pearson(series[a], series[b])
            report["correlations"][key] = {
                "r": result.statistic,
                "p": result.p_value,
            }
        except UndefinedValueError as exc:
            report["correlations"][key] = {"skipped": str(exc)}

    dimension_for = {"depression": "valence", "anxiety": "arousal", "stress": "valence"}
    dim_index = {"valence": 0, "arousal": 1}
    for construct, dimension in dimension_for.items():
        entry: dict = {"dimension": dimension, "tipping": tipping[construct]}
        cut = float(tipping[construct])
        high_words: list[float] = []
        low_words: list[float] = []
        n_high_docs = 0
        n_low_docs = 0
        for rec in records:
            is_high = _score_of(rec, construct) > cut
            pool = high_words if is_high else low_words
            if is_high:
                n_high_docs += 1
            else:
                n_low_docs += 1
            for word in _words_of(rec):
                hit = vad.get(word.strip().casefold())
                if hit is not None:
                    pool.append(hit[dim_index[dimension]])
        entry["n_high_docs"] = n_high_docs
        entry["n_low_docs"] = n_low_docs
        entry["n_high_words"] = len(high_words)
        entry["n_low_words"] = len(low_words)
        if n_high_docs < 2 or n_low_docs < 2:
            entry["skipped"] = "fewer than 2 documents in a partition"
        elif not high_words or not low_words:
            entry["skipped"] = "no VAD-matched words in a partition"
        else:
            result = kruskal_wallis(high_words, low_words)
            entry["h"] = result.statistic
            entry["p"] = result.p_value
            entry["median_high"] = _mid_median(high_words)
            entry["median_low"] = _mid_median(low_words)
        report["group_tests"][construct] = entry

    for construct in constructs:
        report["histograms"][construct] = score_histogram(series[construct])

    return report


def _words_of(item) -> Sequence[str]:
    if isinstance(item, Mapping):
        if "words" in item:
            return item["words"]
        return [m["lemma"] for m in item.get("mapped", [])]
    return item.words
