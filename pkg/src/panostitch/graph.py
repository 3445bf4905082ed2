"""All-pairs match graph, subset selection and DOT export."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from itertools import combinations

import numpy as np

from .matching import MatchParams, PairMatchResult, match_pair, pair_seed


class NothingToStitchError(RuntimeError):
    pass


@dataclass
class MatchGraph:
    n: int
    names: list[str]
    pairs: dict[tuple[int, int], PairMatchResult]
    conf: np.ndarray

    def pair(self, i: int, j: int) -> PairMatchResult:
        return self.pairs[(min(i, j), max(i, j))]


@dataclass(frozen=True)
class Subset:
    kept: list[int]
    reference: int


def build_match_graph(features, params: MatchParams = MatchParams(),
                      names: list[str] | None = None, workers: int = 1) -> MatchGraph:
    """Match every unordered pair of images and fill the confidence matrix.

    Each pair gets its own RANSAC seed derived from ``params.seed`` so the
    result does not depend on ``workers``.
    """
    n = len(features)
    if n < 2:
        raise ValueError("need at least 2 images to build a match graph")
    names = list(names) if names is not None else [str(k) for k in range(n)]
    todo = list(combinations(range(n), 2))

    def run(ij):
        i, j = ij
        p = replace(params, seed=pair_seed(params.seed, i, j))
        return match_pair(features[i], features[j], p, i, j)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(ij) for ij in todo]

    conf = np.zeros((n, n))
    pairs = {}
    for ij, res in zip(todo, results):
        pairs[ij] = res
        conf[ij[0], ij[1]] = conf[ij[1], ij[0]] = res.confidence
    return MatchGraph(n, names, pairs, conf)


def _components(n: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return sorted(groups.values(), key=lambda g: g[0])


def select_subset(graph: MatchGraph, conf_threshold: float = 1.0) -> Subset:
    """Largest component of the graph restricted to edges with conf >= threshold.

    Ties between equally large components go to the one holding the
    smallest image index.
    """
    edges = [(i, j) for (i, j) in graph.pairs if graph.conf[i, j] >= conf_threshold]
    comps = _components(graph.n, edges)
    best = max(comps, key=lambda g: (len(g), -g[0]))
    if len(best) < 2:
        raise NothingToStitchError("nothing to stitch")
    return Subset(best, choose_reference(graph, best))


def choose_reference(graph: MatchGraph, subset: list[int]) -> int:
    members = sorted(subset)
    sums = [sum(graph.conf[a, b] for b in members if b != a) for a in members]
    best = max(range(len(members)), key=lambda k: (sums[k], -members[k]))
    return members[best]


def format_confidence(c: float) -> str:
    return str(Decimal(repr(float(c))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dot_source(graph: MatchGraph, conf_threshold: float) -> str:
    lines = ["graph matches {"]
    for k in range(graph.n):
        lines.append(f'"{k}" [label={_quote(graph.names[k])}];')
    for i, j in sorted(graph.pairs):
        res = graph.pairs[(i, j)]
        if graph.conf[i, j] >= conf_threshold:
            label = f"Nm={len(res.matches)} Ni={res.num_inliers} C={format_confidence(res.confidence)}"
            lines.append(f'"{i}" -- "{j}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: MatchGraph, conf_threshold: float, path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dot_source(graph, conf_threshold))
