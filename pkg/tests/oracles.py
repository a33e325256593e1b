"""Independent reference implementations used by property and acceptance tests.

Everything here recomputes results from first principles through a
different code path than the library: full joint enumeration instead of
tree message passing, exhaustive boundary scans instead of incremental
counts, exhaustive tree enumeration instead of greedy spanning-tree
construction, and a generic trust-region optimizer instead of reweighted
least squares.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy.optimize import minimize

from opresponse.bayes import BnModel, FeatureNode


# ---------------------------------------------------------------------------
# discrete-model inference by full joint enumeration


def joint_table(model: BnModel) -> np.ndarray:
    """The complete joint as an array indexed [class, s1, ..., sF]."""
    names = [nd.name for nd in model.nodes]
    cards = [nd.n_states for nd in model.nodes]
    grids = np.indices(cards)
    joint = np.empty([2] + cards)
    for c in (0, 1):
        p = np.full(cards, model.prior[c])
        for i, nd in enumerate(model.nodes):
            own = grids[i]
            if nd.parent is None:
                parent_idx = np.zeros_like(own)
            else:
                parent_idx = grids[names.index(nd.parent)]
            p = p * nd.cpt[c][parent_idx, own]
        joint[c] = p
    return joint


def brute_posterior(model: BnModel, evidence: dict, joint: np.ndarray | None = None) -> np.ndarray:
    if joint is None:
        joint = joint_table(model)
    names = [nd.name for nd in model.nodes]
    index = tuple([slice(None)] + [evidence.get(n, slice(None)) for n in names])
    sliced = joint[index]
    totals = sliced.reshape(2, -1).sum(axis=1)
    return totals / totals.sum()


def random_model(rng, max_features=6, max_states=4) -> BnModel:
    """Random structure (independence or random feature tree), random tables."""
    f = int(rng.integers(1, max_features + 1))
    names = [f"f{i}" for i in range(f)]
    cards = [int(rng.integers(2, max_states + 1)) for _ in range(f)]
    if f > 1 and rng.random() < 0.6:
        order = list(rng.permutation(f))
        parents = {names[order[0]]: None}
        for pos, j in enumerate(order[1:], start=1):
            parents[names[j]] = names[int(order[int(rng.integers(0, pos))])]
    else:
        parents = {n: None for n in names}
    nodes = []
    for name, card in zip(names, cards):
        parent = parents.get(name)
        pcard = cards[names.index(parent)] if parent else 1
        cpt = rng.dirichlet(np.ones(card), size=(2, pcard))
        nodes.append(FeatureNode(name, card, tuple(map(str, range(card))), parent, cpt))
    return BnModel("tan", ("Success", "Failure"), rng.dirichlet(np.ones(2)),
                   tuple(nodes), 1.0)


def random_evidence(rng, model: BnModel) -> dict:
    return {
        nd.name: int(rng.integers(0, nd.n_states))
        for nd in model.nodes
        if rng.random() < 0.5
    }


# ---------------------------------------------------------------------------
# exhaustive spanning-tree search


def prufer_trees(n: int):
    """Every labeled tree on n nodes via Prüfer sequences."""
    if n == 1:
        yield []
        return
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        edges = []
        heap = [i for i in range(n) if degree[i] == 1]
        heapq.heapify(heap)
        for v in seq:
            leaf = heapq.heappop(heap)
            edges.append((min(leaf, v), max(leaf, v)))
            degree[v] -= 1
            if degree[v] == 1:
                heapq.heappush(heap, v)
        u = heapq.heappop(heap)
        w = heapq.heappop(heap)
        edges.append((min(u, w), max(u, w)))
        yield edges


def max_tree_weight(weights: np.ndarray) -> float:
    """Maximum total weight over every spanning tree (exhaustive)."""
    n = weights.shape[0]
    return max(sum(weights[a, b] for a, b in edges) for edges in prufer_trees(n))


# ---------------------------------------------------------------------------
# discretizer reference: direct recursive boundary scan


def _entropy(labels) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    h = 0.0
    for c in (0, 1):
        k = sum(1 for y in labels if y == c)
        if k:
            h -= (k / n) * math.log2(k / n)
    return h


def oracle_cuts(values, labels) -> list[float]:
    """Reference splitter: scan every boundary, recompute entropy from scratch."""
    pairs = sorted(zip(values, labels), key=lambda p: p[0])

    def boundaries(pairs):
        out = []
        i = 0
        while i < len(pairs):
            j = i
            while j < len(pairs) and pairs[j][0] == pairs[i][0]:
                j += 1
            if j < len(pairs):
                left = {y for _, y in pairs[i:j]}
                k = j
                while k < len(pairs) and pairs[k][0] == pairs[j][0]:
                    k += 1
                right = {y for _, y in pairs[j:k]}
                if not (len(left) == 1 and left == right):
                    out.append(j)
            i = j
        return out

    def split(pairs, acc):
        n = len(pairs)
        if n < 2:
            return
        cands = boundaries(pairs)
        if not cands:
            return
        ys = [y for _, y in pairs]
        best = None
        for p in cands:
            gain = (
                _entropy(ys)
                - (p / n) * _entropy(ys[:p])
                - ((n - p) / n) * _entropy(ys[p:])
            )
            if best is None or gain > best[0]:
                best = (gain, p)
        gain, p = best
        k = len(set(ys))
        k1 = len(set(ys[:p]))
        k2 = len(set(ys[p:]))
        delta = math.log2(3**k - 2) - (
            k * _entropy(ys) - k1 * _entropy(ys[:p]) - k2 * _entropy(ys[p:])
        )
        if gain <= (math.log2(n - 1) + delta) / n:
            return
        acc.append((pairs[p - 1][0] + pairs[p][0]) / 2.0)
        split(pairs[:p], acc)
        split(pairs[p:], acc)

    acc: list[float] = []
    split(pairs, acc)
    return sorted(acc)


# ---------------------------------------------------------------------------
# logistic reference: generic trust-region second-order optimizer


def newton_logistic(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    def nll(b):
        eta = Z @ b
        return -(y @ eta - np.logaddexp(0.0, eta).sum())

    def grad(b):
        p = 1.0 / (1.0 + np.exp(-(Z @ b)))
        return -(Z.T @ (y - p))

    def hess(b):
        p = 1.0 / (1.0 + np.exp(-(Z @ b)))
        return Z.T @ (Z * (p * (1.0 - p))[:, None])

    res = minimize(
        nll, np.zeros(Z.shape[1]), jac=grad, hess=hess,
        method="trust-exact", options={"gtol": 1e-12},
    )
    return res.x
