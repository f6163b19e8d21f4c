"""Quick self-contained diagnostics behind the `selftest` command.

Each check compares a fast re-derivation (brute force or closed form)
against the package implementation. The full acceptance suite in the test
tree runs bigger versions of the same oracles; this set is sized to finish
in a few seconds so it can run inside the service.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .features import coverage, distance_entropy
from .mlp import gradient_check, make_gradient_check_case
from .parser import default_resource_dir, load_resources, map_document
from .semnet import SemanticNetwork, shortest_path_length
from .stats import kruskal_wallis, pearson

GRADIENT_TOLERANCE = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_network(rng: np.random.Generator, max_nodes: int = 12) -> SemanticNetwork:
    n = int(rng.integers(2, max_nodes + 1))
    p = float(rng.uniform(0.1, 0.4))
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = [
        (nodes[i], nodes[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    ]
    return SemanticNetwork(nodes, edges)


def floyd_warshall(net: SemanticNetwork) -> np.ndarray:
    n = len(net)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for a, b in net.edges():
        i, j = net.node_index[a], net.node_index[b]
        dist[i, j] = dist[j, i] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def check_bfs_against_floyd_warshall(n_graphs: int = 40, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    for g in range(n_graphs):
        net = random_network(rng)
        oracle = floyd_warshall(net)
        for i, a in enumerate(net.nodes):
            row = net.distances_from(a)
            for j in range(len(net)):
                expected = oracle[i, j]
                got = float(row[j]) if row[j] >= 0 else math.inf
                if got != expected:
                    return CheckResult(
                        "bfs-distances",
                        False,
                        f"graph {g}: d({a}, {net.nodes[j]}) = {got}, "
                        f"oracle says {expected}",
                    )
    return CheckResult(
        "bfs-distances", True, f"{n_graphs} random graphs match Floyd-Warshall"
    )


def check_gradients(n_seeds: int = 3) -> CheckResult:
    worst = 0.0
    for seed in range(n_seeds):
        model, x, y = make_gradient_check_case(12, hidden=(6, 5), seed=seed)
        worst = max(worst, gradient_check(model, x, y))
    passed = worst <= GRADIENT_TOLERANCE
    return CheckResult(
        "gradient-check",
        passed,
        f"max relative error {worst:.3g} over {n_seeds} seeds "
        f"(tolerance {GRADIENT_TOLERANCE:g})",
    )


def check_walk_metrics(n_walks: int = 10, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    for w in range(n_walks):
        net = random_network(rng)
        walk = [net.nodes[int(rng.integers(len(net)))] for _ in range(10)]
        lengths = []
        for a, b in zip(walk, walk[1:]):
            d = shortest_path_length(net, a, b)
            if d != math.inf:
                lengths.append(int(d))
        expected_cov = float(sum(lengths))
        expected_ent = 0.0
        for count in Counter(lengths).values():
            p = count / len(lengths)
            expected_ent -= p * math.log(p)
        got_cov = coverage(net, walk)
        got_ent = distance_entropy(net, walk)
        if abs(got_cov - expected_cov) > 1e-12 or abs(got_ent - expected_ent) > 1e-12:
            return CheckResult(
                "walk-metrics",
                False,
                f"walk {w}: coverage {got_cov} vs {expected_cov}, "
                f"entropy {got_ent} vs {expected_ent}",
            )
    return CheckResult(
        "walk-metrics", True, f"{n_walks} random walks match pairwise recomputation"
    )


def check_statistics() -> CheckResult:
    r = pearson([1, 2, 3], [1, 2, 4]).statistic
    if abs(r - 0.98198) > 1e-4:
        return CheckResult("statistics", False, f"pearson reference off: {r:.6f}")
    kw = kruskal_wallis([1, 2, 3], [4, 5, 6])
    if abs(kw.statistic - 3.857) > 1e-3:
        return CheckResult("statistics", False, f"kw H reference off: {kw.statistic:.4f}")
    rng = np.random.default_rng(7)
    for case in range(5):
        a = rng.normal(size=int(rng.integers(2, 6)))
        b = rng.normal(size=int(rng.integers(2, 6)))
        result = kruskal_wallis(a, b, exact=True)
        if not 0.0 <= result.p_value <= 1.0:
            return CheckResult(
                "statistics", False, f"exact permutation p out of range: {result.p_value}"
            )
    return CheckResult("statistics", True, "reference values and permutation p in range")


def check_parser() -> CheckResult:
    res = load_resources(default_resource_dir())
    parse = map_document("I am not happy", res)
    if len(parse.mapped) != 1:
        return CheckResult(
            "parser-negation", False, f"expected 1 mapped token, got {len(parse.mapped)}"
        )
    tok = parse.mapped[0]
    if tok.lemma != "sad" or not tok.negated:
        return CheckResult(
            "parser-negation", False, f"got lemma {tok.lemma!r}, negated={tok.negated}"
        )
    fixture = default_resource_dir() / "sample_document.txt"
    text = fixture.read_text(encoding="utf-8")
    counts = [len(map_document(text, res, th).mapped) for th in (0.3, 0.5, 0.7)]
    if not counts[0] > counts[1] > counts[2]:
        return CheckResult(
            "parser-negation", False, f"threshold counts not decreasing: {counts}"
        )
    return CheckResult(
        "parser-negation", True, f"negation trace ok; threshold counts {counts}"
    )


CHECKS: list[Callable[[], CheckResult]] = [
    check_bfs_against_floyd_warshall,
    check_gradients,
    check_walk_metrics,
    check_statistics,
    check_parser,
]


def run_selftest() -> list[CheckResult]:
    """Run every diagnostic; failures are collected, not raised."""
    results = []
    for check in CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # a crashed check is a failed check
            results.append(CheckResult(check.__name__, False, f"raised {exc!r}"))
    return results
