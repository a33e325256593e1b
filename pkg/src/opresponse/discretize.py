"""Class-informed discretization of continuous features.

Recursive binary splitting that maximizes information gain against the
binary class, with a minimum-description-length stopping rule: a split is
kept only when the gain pays for the extra partition it introduces. Fit on
training data only; features for which no split survives carry no class
information at any threshold and are dropped from discrete models.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ContractError, InputError


def _entropy_bits(n0: int, n1: int) -> float:
    """Entropy of a two-class count pair, in bits."""
    n = n0 + n1
    if n == 0:
        return 0.0
    h = 0.0
    for c in (n0, n1):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def _n_classes(n0: int, n1: int) -> int:
    return (1 if n0 else 0) + (1 if n1 else 0)


def fit_cuts(values: Sequence[float], labels: Sequence[int]) -> list[float]:
    """Find accepted cut points for one feature.

    Candidate boundaries are midpoints between adjacent distinct sorted
    values whose class labels differ (for tied values, a boundary is a
    candidate unless both neighbouring value blocks are pure in the same
    class). The best-gain candidate is tested against the description-
    length criterion; on acceptance both halves are split recursively.
    Ties on gain go to the leftmost boundary. Returns a sorted, possibly
    empty list of cuts strictly inside the observed value range.
    """
    x = np.asarray(values, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.size == 0:
        raise InputError("fit_cuts needs at least one value")
    if x.shape != y.shape:
        raise InputError("values and labels must have equal length")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite feature value")
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be binary 0/1")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    # prefix[i] = count of label-1 among the first i samples
    prefix1 = np.concatenate([[0], np.cumsum(ys)])

    cuts: list[float] = []
    _split(xs, prefix1, 0, xs.size, cuts)
    cuts.sort()
    return cuts


def _candidate_positions(xs: np.ndarray, prefix1: np.ndarray, lo: int, hi: int) -> list[int]:
    """Split positions p (lo < p < hi) at block boundaries with class change."""
    positions = []
    start = lo
    while start < hi:
        end = start
        while end < hi and xs[end] == xs[start]:
            end += 1
        if end < hi:
            left_ones = int(prefix1[end] - prefix1[start])
            left_n = end - start
            # peek at the next block
            nxt = end
            while nxt < hi and xs[nxt] == xs[end]:
                nxt += 1
            right_ones = int(prefix1[nxt] - prefix1[end])
            right_n = nxt - end
            same_pure_class = (
                (left_ones == 0 and right_ones == 0)
                or (left_ones == left_n and right_ones == right_n)
            )
            if not same_pure_class:
                positions.append(end)
        start = end
    return positions


def _split(xs: np.ndarray, prefix1: np.ndarray, lo: int, hi: int, cuts: list[float]) -> None:
    n = hi - lo
    if n < 2:
        return
    positions = _candidate_positions(xs, prefix1, lo, hi)
    if not positions:
        return

    ones = int(prefix1[hi] - prefix1[lo])
    zeros = n - ones
    ent_s = _entropy_bits(zeros, ones)

    best_gain = -1.0
    best_pos: Optional[int] = None
    for p in positions:
        l_ones = int(prefix1[p] - prefix1[lo])
        l_n = p - lo
        r_ones = ones - l_ones
        r_n = n - l_n
        gain = (
            ent_s
            - (l_n / n) * _entropy_bits(l_n - l_ones, l_ones)
            - (r_n / n) * _entropy_bits(r_n - r_ones, r_ones)
        )
        if gain > best_gain:
            best_gain = gain
            best_pos = p

    assert best_pos is not None
    l_ones = int(prefix1[best_pos] - prefix1[lo])
    l_n = best_pos - lo
    r_ones = ones - l_ones
    r_n = n - l_n
    ent_l = _entropy_bits(l_n - l_ones, l_ones)
    ent_r = _entropy_bits(r_n - r_ones, r_ones)
    k = _n_classes(zeros, ones)
    k1 = _n_classes(l_n - l_ones, l_ones)
    k2 = _n_classes(r_n - r_ones, r_ones)
    delta = math.log2(3**k - 2) - (k * ent_s - k1 * ent_l - k2 * ent_r)
    threshold = (math.log2(n - 1) + delta) / n
    if best_gain <= threshold:
        return

    cuts.append((xs[best_pos - 1] + xs[best_pos]) / 2.0)
    _split(xs, prefix1, lo, best_pos, cuts)
    _split(xs, prefix1, best_pos, hi, cuts)


@dataclass(frozen=True)
class DiscretizationMap:
    """Fitted cut points per feature.

    A feature with an empty cut list found no class-informative threshold;
    discrete models drop it. Cut points are inclusive upper bounds of
    their interval: with cuts (c1, c2) the intervals are (-inf, c1],
    (c1, c2], (c2, +inf).
    """

    cuts: Mapping[str, tuple[float, ...]]

    def feature_names(self) -> list[str]:
        return sorted(self.cuts)

    def informative_features(self) -> list[str]:
        return sorted(n for n, c in self.cuts.items() if c)

    def n_states(self, name: str) -> int:
        return len(self._get(name)) + 1

    def encode(self, name: str, value: float) -> int:
        """Interval index of a value; values equal to a cut go low."""
        if not math.isfinite(value):
            raise InputError(f"non-finite value for feature {name!r}")
        return bisect_left(self._get(name), value)

    def interval_label(self, name: str, index: int) -> str:
        cuts = self._get(name)
        if not 0 <= index <= len(cuts):
            raise ContractError(f"interval {index} out of range for {name!r}")
        if not cuts:
            return "all"
        if index == 0:
            return f"<= {cuts[0]:g}"
        if index == len(cuts):
            return f"> {cuts[-1]:g}"
        return f"({cuts[index - 1]:g}, {cuts[index]:g}]"

    def _get(self, name: str) -> tuple[float, ...]:
        if name not in self.cuts:
            raise ContractError(f"feature {name!r} was not fitted")
        return self.cuts[name]


def fit_map(
    values_by_feature: Mapping[str, Sequence[float]], labels: Sequence[int]
) -> DiscretizationMap:
    """Fit cut points independently for every feature."""
    return DiscretizationMap(
        cuts={
            name: tuple(fit_cuts(values, labels))
            for name, values in values_by_feature.items()
        }
    )


def apply_map(
    dmap: DiscretizationMap, values_by_feature: Mapping[str, Sequence[float]]
) -> dict[str, np.ndarray]:
    """Encode continuous columns to interval indices.

    Features without an informative cut are dropped from the output;
    a feature the map has never seen is a contract error.
    """
    out: dict[str, np.ndarray] = {}
    for name, values in values_by_feature.items():
        cuts = dmap._get(name)
        if not cuts:
            continue
        out[name] = np.array([dmap.encode(name, v) for v in values], dtype=int)
    return out


def map_to_json(dmap: DiscretizationMap) -> str:
    return json.dumps({n: list(c) for n, c in sorted(dmap.cuts.items())}, indent=2)


def map_from_json(text: str) -> DiscretizationMap:
    payload = json.loads(text)
    return DiscretizationMap(cuts={n: tuple(c) for n, c in payload.items()})
