"""Discrete Bayes-net classifiers over the error label.

Two structures: the independence model (every feature's sole parent is the
class) and its tree-augmented variant, where features additionally form a
maximum-weight spanning tree under conditional mutual information. Both
support exact posterior queries with any subset of features observed, which
is what makes them deployable against live, incomplete evidence.

All information quantities are in bits.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ContractError, InputError, NumericalError

CLASS_STATES = ("Success", "Failure")


@dataclass(frozen=True)
class DiscreteDataset:
    """Rows of small-int feature codes plus the binary class column."""

    feature_names: tuple[str, ...]
    X: np.ndarray  # (n_rows, n_features) int codes
    y: np.ndarray  # (n_rows,) 0 = Success, 1 = Failure
    cardinalities: tuple[int, ...]
    state_labels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise InputError("X shape does not match feature names")
        if self.X.shape[0] != self.y.shape[0]:
            raise InputError("X and y row counts differ")
        if len(self.cardinalities) != len(self.feature_names):
            raise InputError("cardinalities do not match feature names")
        for j, card in enumerate(self.cardinalities):
            col = self.X[:, j]
            if col.size and (col.min() < 0 or col.max() >= card):
                raise InputError(
                    f"feature {self.feature_names[j]!r} has codes outside 0..{card - 1}"
                )

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def cardinality(self, name: str) -> int:
        return self.cardinalities[self.feature_names.index(name)]

    def labels_for(self, name: str) -> tuple[str, ...]:
        labels = self.state_labels.get(name)
        if labels is None:
            labels = tuple(str(s) for s in range(self.cardinality(name)))
        return labels


def make_dataset(
    columns: Mapping[str, Sequence[int]],
    y: Sequence[int],
    cardinalities: Optional[Mapping[str, int]] = None,
    state_labels: Optional[Mapping[str, Sequence[str]]] = None,
) -> DiscreteDataset:
    """Assemble a DiscreteDataset; cardinalities default to max code + 1."""
    names = tuple(sorted(columns))
    yarr = np.asarray(y, dtype=int)
    X = np.column_stack([np.asarray(columns[n], dtype=int) for n in names]) if names else np.zeros((len(yarr), 0), dtype=int)
    cards = tuple(
        int(cardinalities[n]) if cardinalities and n in cardinalities else int(X[:, j].max()) + 1
        for j, n in enumerate(names)
    )
    labels = {n: tuple(state_labels[n]) for n in names if state_labels and n in state_labels}
    return DiscreteDataset(names, X, yarr, cards, labels)


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class FeatureNode:
    """One feature variable: its states, optional feature parent and CPT.

    The CPT is indexed [class, parent_state, own_state]; parentless nodes
    use a single dummy parent state.
    """

    name: str
    n_states: int
    state_labels: tuple[str, ...]
    parent: Optional[str]
    cpt: np.ndarray


@dataclass(frozen=True)
class BnModel:
    kind: str  # "nb" or "tan"
    class_states: tuple[str, str]
    prior: np.ndarray
    nodes: tuple[FeatureNode, ...]
    alpha: float
    root: Optional[str] = None
    cuts: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def node(self, name: str) -> FeatureNode:
        for nd in self.nodes:
            if nd.name == name:
                return nd
        raise ContractError(f"unknown feature {name!r}")

    def feature_names(self) -> list[str]:
        return [nd.name for nd in self.nodes]


def _smoothed_rows(counts: np.ndarray, alpha: float) -> np.ndarray:
    """Normalize the last axis of a count array with additive smoothing."""
    sm = counts + alpha
    totals = sm.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        probs = np.where(totals > 0, sm / np.where(totals == 0, 1, totals), 0.0)
    return probs


def _fit_cpts(
    dataset: DiscreteDataset, parents: Mapping[str, Optional[str]], alpha: float
) -> tuple[FeatureNode, ...]:
    nodes = []
    for name in dataset.feature_names:
        col = dataset.column(name)
        card = dataset.cardinality(name)
        parent = parents.get(name)
        if parent is None:
            counts = np.zeros((2, 1, card))
            for c in (0, 1):
                mask = dataset.y == c
                counts[c, 0] = np.bincount(col[mask], minlength=card)
        else:
            pcol = dataset.column(parent)
            pcard = dataset.cardinality(parent)
            counts = np.zeros((2, pcard, card))
            for c in (0, 1):
                mask = dataset.y == c
                np.add.at(counts[c], (pcol[mask], col[mask]), 1.0)
        nodes.append(
            FeatureNode(
                name=name,
                n_states=card,
                state_labels=dataset.labels_for(name),
                parent=parent,
                cpt=_smoothed_rows(counts, alpha),
            )
        )
    return tuple(nodes)


def _class_prior(y: np.ndarray, alpha: float) -> np.ndarray:
    if y.size == 0:
        raise InputError("empty dataset")
    if len(np.unique(y)) < 2:
        warnings.warn("single-class dataset: prior is degenerate", stacklevel=3)
    counts = np.bincount(y, minlength=2).astype(float)
    return (counts + alpha) / (counts.sum() + 2 * alpha)


def fit_nb(
    dataset: DiscreteDataset,
    alpha: float = 1.0,
    cuts: Optional[Mapping[str, tuple[float, ...]]] = None,
) -> BnModel:
    """Fit the conditional-independence classifier by smoothed frequencies."""
    prior = _class_prior(dataset.y, alpha)
    parents = {name: None for name in dataset.feature_names}
    nodes = _fit_cpts(dataset, parents, alpha)
    return BnModel("nb", CLASS_STATES, prior, nodes, alpha, None, dict(cuts or {}))


def class_entropy(y: np.ndarray) -> float:
    """Entropy of the class column, in bits."""
    n = y.size
    if n == 0:
        return 0.0
    h = 0.0
    for c in np.bincount(y, minlength=2):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return float(h)


def feature_class_mi(col: np.ndarray, card: int, y: np.ndarray) -> float:
    """Empirical mutual information between one feature and the class."""
    n = y.size
    joint = np.zeros((card, 2))
    np.add.at(joint, (col, y), 1.0)
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for a in range(card):
        for c in (0, 1):
            p = joint[a, c]
            if p > 0:
                mi += p * math.log2(p / (px[a] * py[c]))
    return float(max(0.0, mi))


def conditional_mi(
    col_i: np.ndarray, card_i: int, col_j: np.ndarray, card_j: int, y: np.ndarray
) -> float:
    """Empirical I(Xi; Xj | class), in bits."""
    n = y.size
    joint = np.zeros((card_i, card_j, 2))
    np.add.at(joint, (col_i, col_j, y), 1.0)
    joint /= n
    p_ic = joint.sum(axis=1)  # (card_i, 2)
    p_jc = joint.sum(axis=0)  # (card_j, 2)
    p_c = joint.sum(axis=(0, 1))  # (2,)
    mi = 0.0
    for c in (0, 1):
        if p_c[c] == 0:
            continue
        for a in range(card_i):
            for b in range(card_j):
                p = joint[a, b, c]
                if p > 0:
                    mi += p * math.log2(p * p_c[c] / (p_ic[a, c] * p_jc[b, c]))
    return float(max(0.0, mi))


def cmi_matrix(dataset: DiscreteDataset) -> np.ndarray:
    """Symmetric matrix of pairwise conditional mutual information."""
    f = len(dataset.feature_names)
    out = np.zeros((f, f))
    for i in range(f):
        for j in range(i + 1, f):
            w = conditional_mi(
                dataset.X[:, i],
                dataset.cardinalities[i],
                dataset.X[:, j],
                dataset.cardinalities[j],
                dataset.y,
            )
            out[i, j] = out[j, i] = w
    return out


def maximum_spanning_tree(
    names: Sequence[str], weights: np.ndarray
) -> list[tuple[str, str]]:
    """Kruskal maximum-weight spanning tree with deterministic tie-breaks.

    Edges of equal weight are taken in lexicographic name order, so the
    structure is reproducible across runs and platforms.
    """
    f = len(names)
    edges = []
    for i in range(f):
        for j in range(i + 1, f):
            a, b = sorted((names[i], names[j]))
            edges.append((-weights[i, j], a, b))
    edges.sort()

    parent = {n: n for n in names}

    def find(n: str) -> str:
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    tree = []
    for negw, a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            tree.append((a, b))
            if len(tree) == f - 1:
                break
    return tree


def fit_tan(
    dataset: DiscreteDataset,
    alpha: float = 1.0,
    root: Optional[str] = None,
    cuts: Optional[Mapping[str, tuple[float, ...]]] = None,
) -> BnModel:
    """Fit the tree-augmented classifier.

    Pairwise conditional mutual information weights a maximum spanning
    tree over the features; edges are directed away from the root (by
    default the feature most informative about the class) and the class is
    added as a parent of every feature.
    """
    names = dataset.feature_names
    if len(names) < 1:
        raise InputError("tree-augmented fit needs at least one feature")
    prior = _class_prior(dataset.y, alpha)

    if root is None:
        mis = [
            feature_class_mi(dataset.X[:, j], dataset.cardinalities[j], dataset.y)
            for j in range(len(names))
        ]
        best = max(mis)
        root = min(n for n, mi in zip(names, mis) if mi == best)
    elif root not in names:
        raise ContractError(f"root {root!r} is not a dataset feature")

    tree = maximum_spanning_tree(names, cmi_matrix(dataset))
    adjacency: dict[str, list[str]] = {n: [] for n in names}
    for a, b in tree:
        adjacency[a].append(b)
        adjacency[b].append(a)

    parents: dict[str, Optional[str]] = {root: None}
    queue = [root]
    while queue:
        current = queue.pop(0)
        for neighbour in sorted(adjacency[current]):
            if neighbour not in parents:
                parents[neighbour] = current
                queue.append(neighbour)

    nodes = _fit_cpts(dataset, parents, alpha)
    return BnModel("tan", CLASS_STATES, prior, nodes, alpha, root, dict(cuts or {}))


# ---------------------------------------------------------------------------
# inference


def posterior(model: BnModel, evidence: Mapping[str, int]) -> np.ndarray:
    """Exact class posterior given a partial feature assignment.

    Unobserved features are summed out of the factorized joint; with the
    tree structure this is a single leaf-to-root sweep per class. Returns
    probabilities over (Success, Failure) summing to one.
    """
    by_name = {nd.name: nd for nd in model.nodes}
    for name, state in evidence.items():
        nd = by_name.get(name)
        if nd is None:
            raise ContractError(f"evidence names unknown feature {name!r}")
        if not 0 <= int(state) < nd.n_states:
            raise ContractError(
                f"state {state} out of range for {name!r} (0..{nd.n_states - 1})"
            )

    children: dict[str, list[str]] = {nd.name: [] for nd in model.nodes}
    roots = []
    for nd in model.nodes:
        if nd.parent is None:
            roots.append(nd.name)
        else:
            children[nd.parent].append(nd.name)

    def message(name: str, c: int) -> np.ndarray:
        """Vector over parent states of the summed-out subtree at `name`."""
        nd = by_name[name]
        cpt = nd.cpt[c]  # (parent_states, n_states)
        if name in evidence:
            table = cpt[:, [int(evidence[name])]]
            own_states = [int(evidence[name])]
        else:
            table = cpt
            own_states = list(range(nd.n_states))
        # fold in children: each child contributes a factor per own state
        factor = np.ones(len(own_states))
        for child in children[name]:
            child_msg = message(child, c)  # over the child's parent states = own full range
            factor = factor * child_msg[own_states]
        return (table * factor[np.newaxis, :]).sum(axis=1)

    like = np.ones(2)
    for c in (0, 1):
        for r in roots:
            like[c] *= message(r, c)[0]

    joint = model.prior * like
    total = joint.sum()
    if total <= 0 or not np.isfinite(total):
        raise NumericalError("evidence has zero probability under the model")
    return joint / total


def p_error(model: BnModel, evidence: Mapping[str, int]) -> float:
    """Posterior probability of the failure class."""
    return float(posterior(model, evidence)[1])


# ---------------------------------------------------------------------------
# mutual-information report


@dataclass(frozen=True)
class MiReport:
    mi: Mapping[str, float]
    h_error: float

    def ranking(self) -> list[tuple[str, float]]:
        return sorted(self.mi.items(), key=lambda kv: (-kv[1], kv[0]))


def mutual_information(dataset: DiscreteDataset) -> MiReport:
    """Per-feature mutual information with the error label, plus its entropy."""
    mi = {
        name: feature_class_mi(dataset.X[:, j], dataset.cardinalities[j], dataset.y)
        for j, name in enumerate(dataset.feature_names)
    }
    return MiReport(mi=mi, h_error=class_entropy(dataset.y))


# ---------------------------------------------------------------------------
# serialization

FORMAT = "opresponse-bn"
FORMAT_VERSION = 1


def model_to_json(model: BnModel) -> str:
    payload = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "class_states": list(model.class_states),
        "alpha": model.alpha,
        "root": model.root,
        "prior": model.prior.tolist(),
        "nodes": [
            {
                "name": nd.name,
                "states": list(nd.state_labels),
                "parent": nd.parent,
                "cpt": nd.cpt.tolist(),
            }
            for nd in model.nodes
        ],
        "cuts": {n: list(c) for n, c in sorted(model.cuts.items())},
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def model_from_json(text: str) -> BnModel:
    payload = json.loads(text)
    if payload.get("format") != FORMAT:
        raise InputError(f"not a {FORMAT} document")
    if payload.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported model version {payload.get('version')}")
    nodes = tuple(
        FeatureNode(
            name=nd["name"],
            n_states=len(nd["states"]),
            state_labels=tuple(nd["states"]),
            parent=nd["parent"],
            cpt=np.asarray(nd["cpt"], dtype=float),
        )
        for nd in payload["nodes"]
    )
    return BnModel(
        kind=payload["kind"],
        class_states=tuple(payload["class_states"]),
        prior=np.asarray(payload["prior"], dtype=float),
        nodes=nodes,
        alpha=float(payload["alpha"]),
        root=payload.get("root"),
        cuts={n: tuple(c) for n, c in payload.get("cuts", {}).items()},
    )
