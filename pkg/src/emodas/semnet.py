"""Free-association semantic network: construction and distance metrics.

The network is an undirected, unweighted graph over word tokens. An edge is
kept when enough respondents produced one word in response to the other.
All recall-based features elsewhere in the package are derived from
shortest-path hop counts on this graph.
"""

from __future__ import annotations

import json
import math
import os
from collections import deque
from dataclasses import dataclass
from typing import Final, Iterable, Sequence

import numpy as np

from .errors import InputDataError, TokenLookupError, UndefinedValueError

#: Marker returned for node pairs in different components. A value, not an
#: error: callers decide whether to skip, count, or fail.
UNREACHABLE: Final = math.inf

_CACHE_FORMAT = "emodas.semnet"
_CACHE_VERSION = 1


def normalize_token(token: str) -> str:
    """Case-fold and trim a token; internal whitespace is kept verbatim."""
    return token.strip().casefold()


@dataclass(frozen=True)
class AssociationTriple:
    """One directed cue->response association with its respondent count."""

    cue: str
    response: str
    count: int


class SemanticNetwork:
    """Immutable undirected graph with a stable lexicographic node index.

    Queries are read-only and safe for concurrent callers. Adjacency is
    stored as sorted integer neighbor lists keyed by ``node_index``.
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[tuple[str, str]]):
        self.nodes: tuple[str, ...] = tuple(sorted(set(nodes)))
        self.node_index: dict[str, int] = {w: i for i, w in enumerate(self.nodes)}
        adj: list[set[int]] = [set() for _ in self.nodes]
        n_edges = 0
        for a, b in edges:
            ia, ib = self.node_index[a], self.node_index[b]
            if ia == ib or ib in adj[ia]:
                continue
            adj[ia].add(ib)
            adj[ib].add(ia)
            n_edges += 1
        self._adj: list[tuple[int, ...]] = [tuple(sorted(s)) for s in adj]
        self._edge_count = n_edges

    def __contains__(self, word: str) -> bool:
        return word in self.node_index

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def neighbors(self, word: str) -> tuple[str, ...]:
        idx = self._require(word)
        return tuple(self.nodes[j] for j in self._adj[idx])

    def edges(self) -> list[tuple[str, str]]:
        """All edges as (a, b) pairs with a < b, lexicographically sorted."""
        out = []
        for i, neigh in enumerate(self._adj):
            for j in neigh:
                if i < j:
                    out.append((self.nodes[i], self.nodes[j]))
        out.sort()
        return out

    def distances_from(self, word: str) -> np.ndarray:
        """Hop counts from ``word`` to every node (-1 where unreachable)."""
        src = self._require(word)
        dist = np.full(len(self.nodes), -1, dtype=np.int32)
        dist[src] = 0
        queue = deque([src])
        adj = self._adj
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        return dist

    def _require(self, word: str) -> int:
        idx = self.node_index.get(word)
        if idx is None:
            raise TokenLookupError(word)
        return idx


def build_network(
    triples: Iterable[AssociationTriple], min_count: int = 2
) -> SemanticNetwork:
    """Build the undirected network from directed association triples.

    An undirected edge {a, b} is kept iff the aggregated count of a->b or of
    b->a (each direction on its own) reaches ``min_count``. Nodes are exactly
    the endpoints of kept edges; isolated cue words are dropped.
    """
    if min_count < 1:
        raise InputDataError(f"min_count must be >= 1, got {min_count}")
    directed: dict[tuple[str, str], int] = {}
    for i, t in enumerate(triples):
        cue = normalize_token(t.cue)
        response = normalize_token(t.response)
        if not cue or not response:
            raise InputDataError(f"triple #{i} has an empty token: {t!r}")
        if t.count < 0:
            raise InputDataError(f"triple #{i} has a negative count: {t!r}")
        if cue == response:
            continue  # self-loop after normalization
        key = (cue, response)
        directed[key] = directed.get(key, 0) + t.count
    edges = set()
    for (cue, response), count in directed.items():
        if count >= min_count:
            edges.add((min(cue, response), max(cue, response)))
    nodes = {w for edge in edges for w in edge}
    return SemanticNetwork(nodes, edges)


def degree(net: SemanticNetwork, word: str) -> int:
    """Number of free associations providing access to ``word``."""
    return len(net.neighbors(word))


def closeness(net: SemanticNetwork, word: str) -> float:
    """Closeness centrality of ``word`` within its connected component.

    Computed as (n_c - 1) / sum of distances, with both restricted to the
    component, so values lie in (0, 1] and are comparable across nodes.
    """
    dist = net.distances_from(word)
    reachable = dist >= 0
    n_c = int(reachable.sum())
    if n_c < 2:
        raise UndefinedValueError(
            f"closeness undefined for {word!r}: component has a single node"
        )
    return (n_c - 1) / float(dist[reachable].sum())


def shortest_path_length(net: SemanticNetwork, a: str, b: str) -> int | float:
    """Minimal hop count between two nodes, or UNREACHABLE across components."""
    src = net._require(a)
    dst = net._require(b)
    if src == dst:
        return 0
    dist = {src: 0}
    queue = deque([src])
    adj = net._adj
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in adj[u]:
            if v not in dist:
                if v == dst:
                    return du
                dist[v] = du
                queue.append(v)
    return UNREACHABLE


def sum_distance_to_target(
    net: SemanticNetwork,
    words: Sequence[str],
    target: str,
    skip_missing: bool = True,
) -> tuple[int, int]:
    """Total hop distance from each word to ``target``.

    Words absent from the network are skipped when ``skip_missing`` (else a
    lookup error is raised); unreachable words are always skipped. Returns
    ``(total, skipped)`` where ``skipped`` counts both kinds.
    """
    dist = net.distances_from(target)  # raises for an absent target
    total = 0
    skipped = 0
    for w in words:
        idx = net.node_index.get(w)
        if idx is None:
            if not skip_missing:
                raise TokenLookupError(w)
            skipped += 1
            continue
        d = int(dist[idx])
        if d < 0:
            skipped += 1
        else:
            total += d
    return total, skipped


def largest_component(net: SemanticNetwork) -> SemanticNetwork:
    """Induced subgraph on the largest connected component.

    Ties are broken by the component containing the lexicographically
    smallest member. An empty network maps to an empty network.
    """
    if len(net) == 0:
        return SemanticNetwork((), ())
    seen = [False] * len(net)
    best: list[int] = []
    # net.nodes is sorted, so the first unvisited seed of each component is
    # its smallest member; with strict > the earliest max-size component wins.
    for start in range(len(net)):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in net._adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        if len(comp) > len(best):
            best = comp
    keep = {net.nodes[i] for i in best}
    edges = [(a, b) for a, b in net.edges() if a in keep and b in keep]
    return SemanticNetwork(keep, edges)


def read_edge_list(path: str) -> list[AssociationTriple]:
    """Parse a tab-separated ``cue<TAB>response<TAB>count`` edge-list file.

    Lines starting with ``#`` and blank lines are ignored; a non-numeric
    count on the first data row is taken for a column-header row and
    skipped.
    """
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    triples = []
    first_row = True
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InputDataError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, "
                    f"got {len(parts)}"
                )
            cue, response, raw_count = parts
            try:
                count = int(raw_count)
            except ValueError:
                if first_row:
                    first_row = False
                    continue
                raise InputDataError(
                    f"{path}:{lineno}: count {raw_count!r} is not an integer"
                ) from None
            first_row = False
            triples.append(AssociationTriple(cue, response, count))
    return triples


def save_network(net: SemanticNetwork, path: str) -> None:
    """Write the network as a versioned JSON cache (round-trip exact)."""
    payload = {
        "format": _CACHE_FORMAT,
        "version": _CACHE_VERSION,
        "nodes": list(net.nodes),
        "edges": [list(e) for e in net.edges()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, separators=(",", ":"))


def load_network(path: str) -> SemanticNetwork:
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _CACHE_FORMAT:
        raise InputDataError(f"{path}: not a network cache file")
    if payload.get("version") != _CACHE_VERSION:
        raise InputDataError(
            f"{path}: unsupported cache version {payload.get('version')!r}"
        )
    return SemanticNetwork(payload["nodes"], [tuple(e) for e in payload["edges"]])
