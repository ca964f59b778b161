"""HDBSCAN* on a precomputed dissimilarity matrix.

The O(n^2) pipeline: core distances, mutual-reachability graph, minimum
spanning tree (Prim), single-linkage dendrogram, condensed tree with a
minimum cluster size, and excess-of-mass cluster extraction. Points not
absorbed by any selected cluster are labeled -1.

Core distance follows the include-self convention (the min_samples-th
smallest entry of a point's distance row, counting the zero self
distance), which matches the reference implementations this module is
cross-validated against.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError


def _validate_matrix(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InputError("dissimilarity matrix must be square")
    if not np.all(np.isfinite(d)):
        raise InputError("dissimilarity matrix must be finite")
    if np.any(np.abs(d - d.T) > 1e-9):
        raise InputError("dissimilarity matrix is asymmetric beyond 1e-9")
    if np.any(np.abs(np.diag(d)) > 1e-12):
        raise InputError("dissimilarity matrix must have a zero diagonal")
    if np.any(d < 0):
        raise InputError("dissimilarities must be >= 0")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def _mst_prim(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of a dense weighted graph; ties break on index."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = weights[0].copy()
    attach = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    best[0] = np.inf
    edges = []
    for _ in range(n - 1):
        v = int(np.argmin(best))
        edges.append((int(attach[v]), v, float(best[v])))
        in_tree[v] = True
        best[v] = np.inf
        row = weights[v]
        closer = ~in_tree & (row < best)
        best[closer] = row[closer]
        attach[closer] = v
    return edges


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(2 * n - 1))
        self.size = [1] * n + [0] * (n - 1)
        self.next_label = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        label = self.next_label
        self.next_label += 1
        self.parent[a] = label
        self.parent[b] = label
        self.size[label] = self.size[a] + self.size[b]
        return label


def _single_linkage(n: int, edges: list[tuple[int, int, float]]):
    """Dendrogram children/distances; internal node n+i merges at distances[i]."""
    edges = sorted(edges, key=lambda e: (e[2], e[0], e[1]))
    uf = _UnionFind(n)
    children = np.empty((n - 1, 2), dtype=np.int64)
    distances = np.empty(n - 1)
    for i, (a, b, w) in enumerate(edges):
        ra, rb = uf.find(a), uf.find(b)
        children[i, 0], children[i, 1] = ra, rb
        distances[i] = w
        uf.union(ra, rb)
    return children, distances


def _subtree_leaves(node: int, n: int, children: np.ndarray) -> list[int]:
    out = []
    stack = [node]
    while stack:
        v = stack.pop()
        if v < n:
            out.append(v)
        else:
            stack.extend(children[v - n])
    return out


def _condense(n: int, children: np.ndarray, distances: np.ndarray, min_cluster_size: int):
    """Condensed tree rows (parent, child, lambda, size); clusters get ids >= n."""
    sizes = np.ones(2 * n - 1, dtype=np.int64)
    for i in range(n - 1):
        sizes[n + i] = sizes[children[i, 0]] + sizes[children[i, 1]]

    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    rows: list[tuple[int, int, float, int]] = []  # (parent, child, lambda, size)
    stack = [root]
    while stack:
        node = stack.pop()
        cluster = relabel[node]
        left, right = children[node - n]
        dist = distances[node - n]
        lam = (1.0 / dist) if dist > 0.0 else math.inf
        big_l = sizes[left] >= min_cluster_size
        big_r = sizes[right] >= min_cluster_size
        if big_l and big_r:
            for child in (left, right):
                relabel[child] = next_label
                rows.append((cluster, next_label, lam, int(sizes[child])))
                next_label += 1
                if child >= n:
                    stack.append(child)
        elif not big_l and not big_r:
            for child in (left, right):
                for p in _subtree_leaves(int(child), n, children):
                    rows.append((cluster, p, lam, 1))
        else:
            big, small = (left, right) if big_l else (right, left)
            for p in _subtree_leaves(int(small), n, children):
                rows.append((cluster, p, lam, 1))
            relabel[big] = cluster
            if big >= n:
                stack.append(int(big))
            # a leaf cannot be the big side when min_cluster_size >= 2
    return rows


def _stability(rows, n: int) -> dict[int, float]:
    birth: dict[int, float] = {n: 0.0}
    for parent, child, lam, _size in rows:
        if child >= n:
            birth[child] = lam
    stab: dict[int, float] = {c: 0.0 for c in birth}
    for parent, _child, lam, size in rows:
        stab[parent] += (lam - birth[parent]) * size
    return stab


def _extract_eom(rows, stab: dict[int, float], n: int) -> set[int]:
    """Excess-of-mass selection; the root is never selected."""
    cluster_children: dict[int, list[int]] = {c: [] for c in stab}
    for parent, child, _lam, _size in rows:
        if child >= n:
            cluster_children[parent].append(child)

    selected = {c: True for c in stab if c != n}
    score = dict(stab)
    for node in sorted(selected, reverse=True):  # deepest ids first
        sub = sum(score[ch] for ch in cluster_children[node])
        if sub > score[node]:
            selected[node] = False
            score[node] = sub
        else:
            # node wins: unselect every cluster below it
            stack = list(cluster_children[node])
            while stack:
                ch = stack.pop()
                selected[ch] = False
                stack.extend(cluster_children[ch])
    return {c for c, keep in selected.items() if keep}


def hdbscan_labels(
    dissimilarity: np.ndarray, min_cluster_size: int = 10, min_samples: int = 5
) -> np.ndarray:
    """Cluster labels (0..k-1, noise -1) for a precomputed dissimilarity matrix."""
    if min_cluster_size < 2:
        raise InputError("min_cluster_size must be >= 2")
    if min_samples < 1:
        raise InputError("min_samples must be >= 1")
    d = _validate_matrix(dissimilarity)
    n = d.shape[0]
    if n < min_cluster_size or n < 2:
        return np.full(n, -1, dtype=np.int64)
    if min_samples > n:
        raise InputError("min_samples cannot exceed the number of points")

    core = np.partition(d, min_samples - 1, axis=1)[:, min_samples - 1]
    mreach = np.maximum(d, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)

    edges = _mst_prim(mreach)
    children, distances = _single_linkage(n, edges)
    rows = _condense(n, children, distances, min_cluster_size)
    stab = _stability(rows, n)
    chosen = _extract_eom(rows, stab, n)

    labels = np.full(n, -1, dtype=np.int64)
    if not chosen:
        return labels
    label_of = {c: i for i, c in enumerate(sorted(chosen))}
    cluster_parent: dict[int, int] = {}
    for parent, child, _lam, _size in rows:
        if child >= n:
            cluster_parent[child] = parent

    resolve_cache: dict[int, int] = {}

    def resolve(cluster: int) -> int:
        # nearest selected ancestor-or-self, else -1
        seen = []
        c = cluster
        while True:
            if c in resolve_cache:
                r = resolve_cache[c]
                break
            if c in chosen:
                r = c
                break
            if c not in cluster_parent:
                r = -1
                break
            seen.append(c)
            c = cluster_parent[c]
        for s in seen:
            resolve_cache[s] = r
        return r

    for parent, child, _lam, _size in rows:
        if child < n:
            r = resolve(parent)
            if r != -1:
                labels[child] = label_of[r]
    return labels
