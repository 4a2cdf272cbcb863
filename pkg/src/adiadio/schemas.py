"""JSON schemas for the machine-readable CLI outputs.

Draft-07, one schema per payload kind.  The CLI embeds a manifest in every
JSON payload; tests validate emitted documents against these.
"""
from __future__ import annotations

SCHEMA_VERSION = 1

_MANIFEST = {
    "type": "object",
    "required": ["command", "equation", "config", "versions", "schema"],
    "properties": {
        "command": {"type": "string"},
        "equation": {"type": "string"},
        "config": {"type": "object"},
        "versions": {
            "type": "object",
            "required": ["adiadio", "numpy", "scipy", "backend"],
        },
        "schema": {"const": SCHEMA_VERSION},
    },
}

_BASIS = {
    "type": "object",
    "required": ["num_modes", "cutoff", "scheme", "size"],
    "properties": {
        "num_modes": {"type": "integer", "minimum": 1},
        "cutoff": {"type": "integer", "minimum": 0},
        "scheme": {"enum": ["total", "per_mode"]},
        "size": {"type": "integer", "minimum": 1},
    },
}

_STATE = {"type": "array", "items": {"type": "integer", "minimum": 0}}

PARSE_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "num_vars", "var_names", "total_degree",
                 "canonical", "terms"],
    "properties": {
        "manifest": _MANIFEST,
        "num_vars": {"type": "integer", "minimum": 0},
        "var_names": {"type": "array", "items": {"type": "string"}},
        "total_degree": {"type": "integer", "minimum": 0},
        "canonical": {"type": "string"},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["exponents", "coefficient"],
                "properties": {
                    "exponents": _STATE,
                    "coefficient": {"type": "integer"},
                },
            },
        },
    },
}

DISTRIBUTION_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "basis", "source", "probabilities"],
    "properties": {
        "manifest": _MANIFEST,
        "basis": _BASIS,
        "source": {"enum": ["truncated_model", "sampled_histogram"]},
        "accuracy": {"type": ["number", "null"]},
        "probabilities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["state", "p"],
                "properties": {
                    "state": _STATE,
                    "p": {"type": "number", "minimum": 0},
                },
            },
        },
        "stats": {"type": "object"},
    },
}

HISTOGRAM_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["basis", "plan", "counts"],
    "properties": {
        "basis": _BASIS,
        "plan": {
            "type": "object",
            "required": ["epsilon", "confidence", "seed", "repetitions"],
        },
        "counts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["state", "count"],
                "properties": {
                    "state": _STATE,
                    "count": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}

FLOW_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "basis", "ramp", "s_grid", "curves",
                 "min_overlaps", "tracking_warnings"],
    "properties": {
        "manifest": _MANIFEST,
        "basis": _BASIS,
        "ramp": {"type": "string"},
        "s_grid": {"type": "array", "items": {"type": "number"}},
        "curves": {"type": "array",
                   "items": {"type": "array", "items": {"type": "number"}}},
        "min_overlaps": {"type": "array", "items": {"type": "number"}},
        "tracking_warnings": {"type": "array"},
        "gap_report": {
            "type": "object",
            "required": ["gap", "gap_location", "delta_h_norm", "t_min"],
        },
    },
}

DECISION_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "verdict", "equation", "witness", "e_candidate",
                 "e_ground_estimate", "delta", "confidence", "epsilon",
                 "iterations", "reason", "config", "trace"],
    "properties": {
        "manifest": _MANIFEST,
        "verdict": {"enum": ["has_solution", "no_solution_within_confidence",
                             "inconclusive"]},
        "equation": {"type": "string"},
        "witness": {"anyOf": [_STATE, {"type": "null"}]},
        "e_candidate": {"type": ["integer", "null"]},
        "e_ground_estimate": {"type": ["number", "null"]},
        "delta": {"type": ["number", "null"]},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
        "epsilon": {"type": "number"},
        "iterations": {"type": "integer", "minimum": 0},
        "reason": {"type": ["string", "null"]},
        "config": {"type": "object"},
        "trace": {"type": "array", "items": {"type": "object",
                                             "required": ["event"]}},
    },
}

ORACLE_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "box", "volume", "count", "solutions"],
    "properties": {
        "manifest": _MANIFEST,
        "box": _STATE,
        "volume": {"type": "integer", "minimum": 1},
        "count": {"type": "integer", "minimum": 0},
        "solutions": {"type": "array", "items": _STATE},
    },
}

ODEFLOW_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["manifest", "e0_extrapolated", "checkpoints",
                 "steps_accepted", "steps_rejected"],
    "properties": {
        "manifest": _MANIFEST,
        "e0_extrapolated": {"type": "number"},
        "checkpoints": {"type": "array"},
        "cross_checks": {"type": "array"},
        "steps_accepted": {"type": "integer", "minimum": 1},
        "steps_rejected": {"type": "integer", "minimum": 0},
    },
}
