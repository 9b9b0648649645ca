"""JSON/CSV documents for models, traces and posteriors.

Models
    ``{"global": {...}, "agents": [...]}``.  Tables are nested arrays indexed
    ``[conditioning...][outcome]`` in declared label order; probabilities may
    be JSON numbers or decimal strings.  See ``docs/schema.md``.
Traces
    ``{"horizon": t, "global_obs": [label|null, ...],
    "agent_obs": {"1": [...], ...}}`` with an optional ``truth`` section.
"""
from __future__ import annotations

import csv
import io
import json
from decimal import Decimal
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ModelValidationError, SchemaError, TraceMismatchError
from .model import AgentAwareModel, AgentChain, GlobalChain, StateSpace, validate_model
from .trace import MISSING, ObservationTrace, check_trace

_PROB = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\s*$"},
    ]
}
_LABELS = {"type": "array", "items": {"type": "string"}}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["global", "agents"],
    "$defs": {
        "prob": _PROB,
        "table": {"type": "array", "items": {"anyOf": [{"$ref": "#/$defs/prob"}, {"$ref": "#/$defs/table"}]}},
    },
    "properties": {
        "global": {
            "type": "object",
            "additionalProperties": False,
            "required": ["labels", "prior", "transition", "obs_labels", "obs"],
            "properties": {
                "labels": _LABELS,
                "prior": {"$ref": "#/$defs/table"},
                "transition": {"$ref": "#/$defs/table"},
                "obs_labels": _LABELS,
                "obs": {"$ref": "#/$defs/table"},
            },
        },
        "agents": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "labels", "actions", "prior", "policy", "transition", "obs_labels", "obs"],
                "properties": {
                    "id": {"type": "integer"},
                    "labels": _LABELS,
                    "actions": _LABELS,
                    "prior": {"$ref": "#/$defs/table"},
                    "policy": {"$ref": "#/$defs/table"},
                    "transition": {"$ref": "#/$defs/table"},
                    "obs_labels": _LABELS,
                    "obs": {"$ref": "#/$defs/table"},
                    "included": {"type": "boolean"},
                },
            },
        },
    },
}

_OBS_SEQ = {"type": "array", "items": {"type": ["string", "null"]}}
TRACE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["horizon", "global_obs", "agent_obs"],
    "properties": {
        "horizon": {"type": "integer", "minimum": 1},
        "global_obs": _OBS_SEQ,
        "agent_obs": {"type": "object", "patternProperties": {r"^\d+$": _OBS_SEQ}, "additionalProperties": False},
        "truth": {
            "type": "object",
            "additionalProperties": False,
            "required": ["global", "local"],
            "properties": {
                "global": {"type": "array", "items": {"type": "string"}},
                "local": {"type": "object", "additionalProperties": _OBS_SEQ},
                "actions": {"type": "object", "additionalProperties": _OBS_SEQ},
            },
        },
    },
}


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _validate_schema(doc, schema) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if not errors:
        return
    err = errors[0]
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            raise SchemaError(_json_path(path + [extra[0]]), "unknown field")
    if err.validator == "required":
        raise SchemaError(_json_path(path), err.message)
    raise SchemaError(_json_path(path), err.message)


def _table(value, path: str) -> np.ndarray:
    def conv(v):
        if isinstance(v, list):
            return [conv(x) for x in v]
        return float(Decimal(v.strip())) if isinstance(v, str) else float(v)

    try:
        return np.array(conv(value), dtype=float)
    except ValueError:
        raise SchemaError(path, "ragged table") from None


def _tolist(arr: np.ndarray):
    return np.asarray(arr, dtype=float).tolist()


def model_to_dict(model: AgentAwareModel) -> dict:
    g = model.global_chain
    return {
        "global": {
            "labels": list(g.space.labels),
            "prior": _tolist(g.prior),
            "transition": _tolist(g.transition),
            "obs_labels": list(g.obs_space.labels),
            "obs": _tolist(g.obs),
        },
        "agents": [
            {
                "id": a.id,
                "labels": list(a.space.labels),
                "actions": list(a.actions.labels),
                "prior": _tolist(a.prior),
                "policy": _tolist(a.policy),
                "transition": _tolist(a.transition),
                "obs_labels": list(a.obs_space.labels),
                "obs": _tolist(a.obs),
                "included": a.included,
            }
            for a in model.agents
        ],
    }


def model_from_dict(doc: dict, validate: bool = True) -> AgentAwareModel:
    """Build a model from a parsed document.

    Raises :class:`SchemaError` for structural problems and
    :class:`ModelValidationError` (carrying the report) for tables that fail
    :func:`validate_model`.
    """
    _validate_schema(doc, MODEL_SCHEMA)
    gd = doc["global"]
    g = GlobalChain(
        space=StateSpace(gd["labels"]),
        prior=_table(gd["prior"], "$.global.prior"),
        transition=_table(gd["transition"], "$.global.transition"),
        obs_space=StateSpace(gd["obs_labels"]),
        obs=_table(gd["obs"], "$.global.obs"),
    )
    agents = []
    for i, ad in enumerate(doc["agents"]):
        p = f"$.agents[{i}]"
        agents.append(
            AgentChain(
                id=ad["id"],
                space=StateSpace(ad["labels"]),
                actions=StateSpace(ad["actions"]),
                policy=_table(ad["policy"], f"{p}.policy"),
                transition=_table(ad["transition"], f"{p}.transition"),
                prior=_table(ad["prior"], f"{p}.prior"),
                obs_space=StateSpace(ad["obs_labels"]),
                obs=_table(ad["obs"], f"{p}.obs"),
                included=ad.get("included", True),
            )
        )
    model = AgentAwareModel(g, tuple(agents))
    if validate:
        report = validate_model(model)
        if not report.ok:
            raise ModelValidationError(report)
    return model


def _load_json(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


def save_model(model: AgentAwareModel, path=None) -> str:
    """Serialise ``model``; floats are written in shortest round-trip form."""
    text = json.dumps(model_to_dict(model), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_model(source, validate: bool = True) -> AgentAwareModel:
    """Load from a path, a JSON string or an already-parsed dict."""
    if isinstance(source, dict):
        return model_from_dict(source, validate)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        doc = _load_json(source)
        try:
            return model_from_dict(doc, validate)
        except ModelValidationError as exc:
            raise ModelValidationError(exc.report, source=str(source)) from None
        except SchemaError as exc:
            raise SchemaError(f"{source}: {exc.path}", str(exc).split(": ", 1)[1]) from None
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"<string>:{exc.lineno}:{exc.colno}", exc.msg) from None
    return model_from_dict(doc, validate)


# --------------------------------------------------------------------------
# traces


def _labels_to_index(seq, space: StateSpace, path: str) -> list[int]:
    out = []
    for j, lab in enumerate(seq):
        if lab is None:
            out.append(MISSING)
            continue
        try:
            out.append(space.index(lab))
        except KeyError:
            raise SchemaError(f"{path}[{j}]", f"unknown label {lab!r}") from None
    return out


def _index_to_labels(seq, space: StateSpace) -> list:
    return [None if int(v) == MISSING else space.labels[int(v)] for v in seq]


def trace_to_dict(trace: ObservationTrace, model: AgentAwareModel, truth=None) -> dict:
    doc = {
        "horizon": trace.horizon,
        "global_obs": _index_to_labels(trace.global_obs, model.global_chain.obs_space),
        "agent_obs": {
            str(aid): _index_to_labels(seq, model.agent(aid).obs_space) for aid, seq in trace.agent_obs.items()
        },
    }
    if truth is not None:
        doc["truth"] = truth_to_dict(truth, model)
    return doc


def trace_from_dict(doc: dict, model: AgentAwareModel) -> ObservationTrace:
    _validate_schema(doc, TRACE_SCHEMA)
    t = doc["horizon"]
    if len(doc["global_obs"]) != t:
        raise TraceMismatchError("global", f"horizon is {t} but {len(doc['global_obs'])} observations given")
    given = {int(k) for k in doc["agent_obs"]}
    for aid in sorted({a.id for a in model.agents} - given):
        raise TraceMismatchError(f"agent {aid}", "missing from trace")
    agent_obs = {}
    for key, seq in doc["agent_obs"].items():
        aid = int(key)
        try:
            space = model.agent(aid).obs_space
        except KeyError:
            raise TraceMismatchError(f"agent {aid}", "not an agent of the model") from None
        if len(seq) != t:
            raise TraceMismatchError(f"agent {aid}", f"horizon is {t} but {len(seq)} observations given")
        agent_obs[aid] = _labels_to_index(seq, space, f"$.agent_obs.{key}")
    g = _labels_to_index(doc["global_obs"], model.global_chain.obs_space, "$.global_obs")
    trace = ObservationTrace(np.array(g, dtype=np.int64), agent_obs)
    check_trace(model, trace)
    return trace


def truth_to_dict(truth, model: AgentAwareModel) -> dict:
    return {
        "global": [model.global_chain.space.labels[i] for i in truth.global_states],
        "local": {str(aid): _index_to_labels(seq, model.agent(aid).space) for aid, seq in truth.local_states.items()},
        "actions": {str(aid): _index_to_labels(seq, model.agent(aid).actions) for aid, seq in truth.actions.items()},
    }


def truth_from_dict(doc: dict, model: AgentAwareModel):
    from .simkit import GroundTruth

    space = model.global_chain.space
    return GroundTruth(
        global_states=np.array(_labels_to_index(doc["global"], space, "$.truth.global")),
        local_states={
            int(k): np.array(_labels_to_index(v, model.agent(int(k)).space, f"$.truth.local.{k}"))
            for k, v in doc["local"].items()
        },
        actions={
            int(k): np.array(_labels_to_index(v, model.agent(int(k)).actions, f"$.truth.actions.{k}"))
            for k, v in doc.get("actions", {}).items()
        },
    )


def save_trace(trace: ObservationTrace, model: AgentAwareModel, path=None, truth=None) -> str:
    text = json.dumps(trace_to_dict(trace, model, truth), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_trace(source, model: AgentAwareModel, with_truth: bool = False):
    if isinstance(source, dict):
        doc = source
        trace = trace_from_dict(doc, model)
    else:
        doc = _load_json(source)
        try:
            trace = trace_from_dict(doc, model)
        except SchemaError as exc:
            raise SchemaError(f"{source}: {exc.path}", str(exc).split(": ", 1)[1]) from None
        except TraceMismatchError as exc:
            raise TraceMismatchError(exc.channel, f"{source}: {str(exc).split(': ', 1)[1]}") from None
    if with_truth:
        truth = truth_from_dict(doc["truth"], model) if "truth" in doc else None
        return trace, truth
    return trace


# --------------------------------------------------------------------------
# posteriors


def posterior_to_dict(post, labels) -> dict:
    return {
        "labels": list(labels),
        "marginals": post.marginals.tolist(),
        "map": [labels[i] for i in post.map_indices],
        "loglik": post.loglik,
        "method": post.method,
    }


def posterior_to_csv(post, labels) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "map_label", *labels])
    for step, (row, m) in enumerate(zip(post.marginals, post.map_indices), start=1):
        w.writerow([step, labels[m], *(repr(float(x)) for x in row)])
    return buf.getvalue()
