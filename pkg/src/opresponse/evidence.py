"""Turning client-supplied observations into model evidence.

One resolution path shared by the command line and the HTTP service, so a
probability printed by either surface comes from byte-identical inputs to
the same inference routine. Accepts states as interval indices, state
labels, or raw continuous values discretized through the cut points stored
in the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

from .bayes import BnModel, posterior
from .discretize import DiscretizationMap
from .errors import ContractError, InputError


@dataclass(frozen=True)
class ResolvedEvidence:
    states: dict[str, int]
    used: dict[str, dict]
    missing: list[str]


def resolve_evidence(
    model: BnModel,
    evidence: Optional[Mapping[str, object]] = None,
    raw: Optional[Mapping[str, float]] = None,
) -> ResolvedEvidence:
    """Map observations onto model states.

    evidence carries discrete observations (index or state label); raw
    carries continuous values for features the model stores cut points
    for. A feature may be supplied through one channel only. Features in
    neither channel are reported as missing, never guessed.
    """
    evidence = dict(evidence or {})
    raw = dict(raw or {})
    overlap = set(evidence) & set(raw)
    if overlap:
        raise ContractError(
            f"features supplied both as state and raw value: {sorted(overlap)}"
        )
    by_name = {nd.name: nd for nd in model.nodes}

    states: dict[str, int] = {}
    used: dict[str, dict] = {}
    for name, value in evidence.items():
        node = by_name.get(name)
        if node is None:
            raise ContractError(f"unknown feature {name!r}")
        if isinstance(value, str):
            if value not in node.state_labels:
                raise ContractError(
                    f"unknown state {value!r} for {name!r}; "
                    f"expected one of {list(node.state_labels)}"
                )
            state = node.state_labels.index(value)
        elif isinstance(value, bool):
            raise ContractError(f"state for {name!r} must be an index or label")
        elif isinstance(value, int):
            state = value
        elif isinstance(value, float) and value.is_integer():
            state = int(value)
        else:
            raise ContractError(f"state for {name!r} must be an index or label")
        if not 0 <= state < node.n_states:
            raise ContractError(
                f"state {state} out of range for {name!r} (0..{node.n_states - 1})"
            )
        states[name] = state
        used[name] = {"state": state, "label": node.state_labels[state], "source": "state"}

    dmap = DiscretizationMap(cuts=dict(model.cuts))
    for name, value in raw.items():
        node = by_name.get(name)
        if node is None:
            raise ContractError(f"unknown feature {name!r}")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise InputError(f"raw value for {name!r} is not numeric")
        if not math.isfinite(value):
            raise InputError(f"raw value for {name!r} is not finite")
        if name not in model.cuts or not model.cuts[name]:
            raise ContractError(
                f"{name!r} has no stored cut points; supply a state instead"
            )
        state = dmap.encode(name, value)
        states[name] = state
        used[name] = {
            "state": state,
            "label": node.state_labels[state],
            "source": "raw",
            "value": value,
        }

    missing = sorted(set(by_name) - set(states))
    return ResolvedEvidence(states=states, used=used, missing=missing)


def predict_payload(
    model: BnModel,
    evidence: Optional[Mapping[str, object]] = None,
    raw: Optional[Mapping[str, float]] = None,
) -> dict:
    """The prediction body shared by every interface."""
    resolved = resolve_evidence(model, evidence, raw)
    post = posterior(model, resolved.states)
    return {
        "p_error": float(post[1]),
        "posterior": {
            model.class_states[0]: float(post[0]),
            model.class_states[1]: float(post[1]),
        },
        "evidence_used": resolved.used,
        "missing_features": resolved.missing,
    }


def whatif_payload(
    model: BnModel,
    base_evidence: Optional[Mapping[str, object]] = None,
    base_raw: Optional[Mapping[str, float]] = None,
    overrides: Optional[list] = None,
) -> dict:
    """Evaluate one-change variants of a base evidence pattern.

    Each override replaces (or adds) a single feature state on top of the
    base; deltas are relative to the base posterior.
    """
    base = resolve_evidence(model, base_evidence, base_raw)
    base_post = posterior(model, base.states)
    base_p = float(base_post[1])
    results = []
    for override in overrides or []:
        name = override["feature"]
        value = override["state"]
        variant = dict(base.states)
        resolved_single = resolve_evidence(model, {name: value})
        variant[name] = resolved_single.states[name]
        p = float(posterior(model, variant)[1])
        results.append(
            {
                "feature": name,
                "state": resolved_single.states[name],
                "label": resolved_single.used[name]["label"],
                "p_error": p,
                "delta_vs_base": p - base_p,
            }
        )
    return {"base_p_error": base_p, "results": results}
