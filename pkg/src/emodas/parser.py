"""Mapping raw text onto the emotion lexicon.

The parser walks each sentence token by token: negation cues raise a flag,
non-content tokens are filtered out, and each content token is mapped to
its closest lexicon lemma by cosine similarity over word embeddings
(identity matches count as similarity 1). A flagged token is replaced by
its antonym before matching, which is how "not happy" ends up at "sad".

Part-of-speech tags come from a lookup table in the resource bundle, which
keeps the whole parse deterministic and dependency-free.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, InputDataError, UndefinedValueError
from .features import FeatureBuilder, FeatureVector, Lexicon

#: POS tags treated as content words; everything else is filtered.
CONTENT_POS = frozenset({"NOUN", "ADJ", "ADV", "VERB"})

DEFAULT_THRESHOLD = 0.5

SKIP_FILTERED = "filtered"
SKIP_NO_EMBEDDING = "no-embedding"
SKIP_BELOW_THRESHOLD = "below-threshold"
SKIP_NO_ANTONYM = "no-antonym"

_SENTENCE_SPLIT = re.compile(r"[.!?]+(?:\s+|$)")
_CONTRACTION = re.compile(r"(\w)n't\b")
_TOKEN = re.compile(r"n't|\w+")

RESOURCE_FILES = {
    "embeddings": "embeddings.txt",
    "lexicon": "lexicon.txt",
    "stopwords": "stopwords.txt",
    "negations": "negations.txt",
    "antonyms": "antonyms.tsv",
    "pos": "pos.tsv",
}
OPTIONAL_RESOURCE_FILES = {"lemma_map": "lemma_map.tsv"}


def segment_and_tokenize(text: str) -> list[list[str]]:
    """Sentences of case-folded tokens; ``n't`` is split off as its own token."""
    sentences = []
    for raw in _SENTENCE_SPLIT.split(text):
        if not raw.strip():
            continue
        expanded = _CONTRACTION.sub(r"\1 n't", raw)
        tokens = [t.casefold() for t in _TOKEN.findall(expanded)]
        if tokens:
            sentences.append(tokens)
    return sentences


class EmbeddingTable:
    """Word vectors from a text file: ``count dim`` header, then one word
    plus ``dim`` floats per line. Zero-norm vectors are dropped (counted in
    ``n_dropped``) so every stored vector has a unit version."""

    def __init__(self, vectors: dict[str, np.ndarray], n_dropped: int = 0):
        if not vectors:
            raise InputDataError("embedding table is empty")
        dims = {v.shape[0] for v in vectors.values()}
        if len(dims) != 1:
            raise InputDataError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self.n_dropped = n_dropped
        self._vectors = dict(vectors)
        self._units = {w: v / np.linalg.norm(v) for w, v in self._vectors.items()}

    @classmethod
    def load(cls, path: str) -> "EmbeddingTable":
        if not Path(path).is_file():
            raise InputDataError(f"{path}: no such file")
        vectors: dict[str, np.ndarray] = {}
        n_dropped = 0
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise InputDataError(
                    f"{path}: first line must be '<count> <dim>', got {header!r}"
                )
            try:
                count, dim = int(header[0]), int(header[1])
            except ValueError:
                raise InputDataError(f"{path}: non-integer header {header!r}") from None
            for lineno, line in enumerate(fh, start=2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != dim + 1:
                    raise InputDataError(
                        f"{path}:{lineno}: expected {dim} values for "
                        f"{parts[0]!r}, got {len(parts) - 1}"
                    )
                try:
                    vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
                except ValueError:
                    raise InputDataError(
                        f"{path}:{lineno}: non-numeric vector component"
                    ) from None
                if float(np.linalg.norm(vec)) == 0.0:
                    n_dropped += 1
                    continue
                vectors[parts[0].casefold()] = vec
        if len(vectors) + n_dropped != count:
            raise InputDataError(
                f"{path}: header promised {count} vectors, found "
                f"{len(vectors) + n_dropped}"
            )
        return cls(vectors, n_dropped)

    def __contains__(self, word: str) -> bool:
        return word in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word)

    def unit(self, word: str) -> np.ndarray | None:
        return self._units.get(word)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; undefined for zero vectors."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise UndefinedValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


class LexiconMatcher:
    """Nearest lexicon lemma by cosine. Identity matches score 1 by
    definition (no embedding needed); similarity ties break to the
    lexicographically smaller lemma."""

    def __init__(self, lexicon: Lexicon, embeddings: EmbeddingTable):
        self.lexicon = lexicon
        self.embeddings = embeddings
        embedded = [w for w in lexicon.lemmas if w in embeddings]
        self._lemmas = tuple(embedded)  # sorted, as lexicon.lemmas is sorted
        if embedded:
            self._matrix = np.vstack([embeddings.unit(w) for w in embedded])
        else:
            self._matrix = np.empty((0, embeddings.dim))

    def best_match(self, word: str) -> tuple[str, float] | None:
        """(lemma, similarity) for the closest lemma, or None when the word
        has no embedding to compare with."""
        if word in self.lexicon.lemma_index:
            return word, 1.0
        vec = self.embeddings.unit(word)
        if vec is None or not self._lemmas:
            return None
        sims = self._matrix @ vec
        best = int(np.argmax(sims))  # first max = lexicographically smallest
        return self._lemmas[best], float(sims[best])


@dataclass
class ResourceBundle:
    """Everything the parser needs, loaded from one directory."""

    embeddings: EmbeddingTable
    lexicon: Lexicon
    stopwords: frozenset[str]
    negations: frozenset[str]
    antonyms: dict[str, str]
    pos: dict[str, str]
    matcher: LexiconMatcher = field(init=False, repr=False)

    def __post_init__(self):
        self.matcher = LexiconMatcher(self.lexicon, self.embeddings)


def _read_word_list(path: Path) -> frozenset[str]:
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.casefold())
    return frozenset(words)


def _read_two_column(path: Path, upper_second: bool = False) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputDataError(f"{path}:{lineno}: expected two tab-separated fields")
        key = parts[0].strip().casefold()
        value = parts[1].strip()
        value = value.upper() if upper_second else value.casefold()
        if not key or not value:
            raise InputDataError(f"{path}:{lineno}: empty field")
        table[key] = value
    return table


def default_resource_dir() -> Path:
    """The bundled toy resources (a tiny, self-consistent fixture set)."""
    return Path(str(importlib_resources.files("emodas") / "data" / "toy"))


def load_resources(directory: str | Path) -> ResourceBundle:
    """Load a parser resource bundle from ``directory``.

    Expected files: embeddings.txt, lexicon.txt, stopwords.txt,
    negations.txt, antonyms.tsv, pos.tsv, and optionally lemma_map.tsv.
    """
    root = Path(directory)
    missing = [
        name for name in RESOURCE_FILES.values() if not (root / name).is_file()
    ]
    if missing:
        raise ConfigurationError(
            f"resource directory {root} is missing: {', '.join(sorted(missing))}"
        )
    lemma_map = {}
    lemma_map_path = root / OPTIONAL_RESOURCE_FILES["lemma_map"]
    if lemma_map_path.is_file():
        lemma_map = _read_two_column(lemma_map_path)
    lemmas = _read_word_list(root / RESOURCE_FILES["lexicon"])
    if not lemmas:
        raise InputDataError(f"{root / RESOURCE_FILES['lexicon']}: no lemmas")
    return ResourceBundle(
        embeddings=EmbeddingTable.load(str(root / RESOURCE_FILES["embeddings"])),
        lexicon=Lexicon.from_lemmas(lemmas, lemma_map),
        stopwords=_read_word_list(root / RESOURCE_FILES["stopwords"]),
        negations=_read_word_list(root / RESOURCE_FILES["negations"]),
        antonyms=_read_two_column(root / RESOURCE_FILES["antonyms"]),
        pos=_read_two_column(root / RESOURCE_FILES["pos"], upper_second=True),
    )


@dataclass(frozen=True)
class MappedToken:
    token: str
    lemma: str
    similarity: float
    negated: bool
    sentence: int
    position: int


@dataclass(frozen=True)
class SkippedToken:
    token: str
    reason: str
    sentence: int
    position: int


@dataclass
class ParseResult:
    mapped: list[MappedToken]
    skipped: list[SkippedToken]
    n_sentences: int

    def sequence(self) -> list[str]:
        """Mapped lemmas in reading order, ready for feature extraction."""
        return [m.lemma for m in self.mapped]


def map_document(
    text: str, res: ResourceBundle, threshold: float = DEFAULT_THRESHOLD
) -> ParseResult:
    """Map a document's content words onto lexicon lemmas.

    Negation works per sentence: a cue token sets a flag; the next content
    word is looked up in the antonym table and its antonym is matched
    instead. The flag survives failed lookups (only a successful mapping or
    the end of the sentence clears it). Every discarded token is recorded
    with one of the skip reasons: filtered, no-embedding, below-threshold,
    no-antonym.

    Raising the threshold can only shrink the mapped set: each token's
    candidate similarity does not depend on the threshold.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigurationError(f"threshold must be in (0, 1], got {threshold}")
    mapped: list[MappedToken] = []
    skipped: list[SkippedToken] = []
    sentences = segment_and_tokenize(text)
    for s_idx, tokens in enumerate(sentences):
        negation_pending = False
        for t_idx, token in enumerate(tokens):
            if token in res.negations:
                negation_pending = True
                continue
            if token in res.stopwords or res.pos.get(token) not in CONTENT_POS:
                skipped.append(SkippedToken(token, SKIP_FILTERED, s_idx, t_idx))
                continue
            candidate = token
            negated = False
            if negation_pending:
                antonym = res.antonyms.get(token)
                if antonym is None:
                    skipped.append(SkippedToken(token, SKIP_NO_ANTONYM, s_idx, t_idx))
                    continue  # flag stays set for the next content word
                candidate = antonym
                negated = True
            match = res.matcher.best_match(candidate)
            if match is None:
                skipped.append(SkippedToken(token, SKIP_NO_EMBEDDING, s_idx, t_idx))
                continue
            lemma, similarity = match
            if similarity < threshold:
                skipped.append(SkippedToken(token, SKIP_BELOW_THRESHOLD, s_idx, t_idx))
                continue
            mapped.append(MappedToken(token, lemma, similarity, negated, s_idx, t_idx))
            if negated:
                negation_pending = False
    return ParseResult(mapped, skipped, len(sentences))


def document_to_features(
    text: str,
    res: ResourceBundle,
    builder: FeatureBuilder,
    mask,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[FeatureVector, ParseResult]:
    """Parse a document and build its feature vector in one step.

    The builder's lexicon must be the same one the resources were loaded
    with, otherwise bag-of-words positions would not line up.
    """
    if builder.lexicon.lemmas != res.lexicon.lemmas:
        raise ConfigurationError(
            "feature builder and resource bundle use different lexicons"
        )
    parse = map_document(text, res, threshold)
    return builder.feature_vector(parse.sequence(), mask), parse
