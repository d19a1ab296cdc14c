"""JSON schemas for every artifact the library and CLI emit or accept."""

_NUM = {"type": "number"}
_ROWS = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2}, "minItems": 1}
_NUM_OR_NULL = {"type": ["number", "null"]}

ORDER = {
    "type": "object",
    "required": ["d", "basis"],
    "properties": {"d": {"type": "integer", "minimum": 2}, "basis": _ROWS},
}

POINT_SET = {"type": "object", "required": ["points"], "properties": {"points": _ROWS}}

OUTPUT_MATRIX = {"type": "object", "required": ["matrix"], "properties": {"matrix": _ROWS}}

ENCODER = {
    "type": "object",
    "required": ["kind", "d"],
    "properties": {
        "kind": {"enum": ["identity", "moments", "random_features"]},
        "d": {"type": "integer", "minimum": 2},
        "degree": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
}

METRIC = {
    "type": "object",
    "required": ["encoder", "p"],
    "properties": {"encoder": ENCODER, "p": {"anyOf": [{"enum": [1, 2, 1.0, 2.0]}, {"const": "inf"}]}},
}

CERTIFICATE = {
    "type": "object",
    "required": ["kind", "theta", "theta_prime", "delta", "epsilon", "achieved_gap", "anchor", "params"],
    "properties": {
        "kind": {"enum": ["SortingWitness", "NonSortingWitness"]},
        "theta": POINT_SET,
        "theta_prime": POINT_SET,
        "delta": {"type": "number", "minimum": 0},
        "epsilon": {"type": "number", "minimum": 0},
        "achieved_gap": {"type": "number", "minimum": 0},
        "anchor": {"type": "array", "items": _NUM, "minItems": 2},
        "params": {"type": "object", "properties": {"metric": METRIC}},
    },
}

SWEEP = {
    "type": "object",
    "required": ["summary", "certificates"],
    "properties": {
        "summary": {
            "type": "object",
            "required": ["count", "distinct_loci", "min_ratio", "median_ratio"],
            "properties": {
                "count": {"type": "integer"},
                "distinct_loci": {"type": "integer"},
                "min_ratio": _NUM,
                "median_ratio": _NUM,
            },
        },
        "certificates": {"type": "array", "items": CERTIFICATE},
    },
}

REPORT = {
    "type": "object",
    "required": ["map", "membership", "certificates", "ladder", "detected", "incomplete"],
    "properties": {
        "map": {"type": "string"},
        "seed": {"type": "integer"},
        "membership": {"type": "object", "required": ["in_f"]},
        "classification": {"type": ["object", "null"]},
        "certificates": {"type": "array", "items": CERTIFICATE},
        "ladder": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tau", "count", "median_ratio", "max_ratio"],
                "properties": {"tau": _NUM, "count": {"type": "integer"}, "median_ratio": _NUM_OR_NULL, "max_ratio": _NUM_OR_NULL},
            },
        },
        "max_ratio": _NUM_OR_NULL,
        "detected": {"type": "boolean"},
        "incomplete": {"type": "boolean"},
        "error": {"type": ["string", "null"]},
    },
}

HANDSHAKE = {
    "type": "object",
    "required": ["d", "n", "protocol"],
    "properties": {"d": {"type": "integer"}, "n": {"type": "integer"}, "protocol": {"const": 1}},
}

REQUEST = {"type": "object", "required": ["id", "points"], "properties": {"id": {"type": "integer"}, "points": _ROWS}}

RESPONSE = {
    "type": "object",
    "required": ["id"],
    "properties": {"id": {"type": ["integer", "null"]}, "matrix": _ROWS, "error": {"type": "string"}},
    "oneOf": [{"required": ["matrix"]}, {"required": ["error"]}],
}
