"""Scenario description and JSON config loading."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import jsonschema

from .errors import ConfigError
from .traffic import CBR, ArrivalProcess, Fixed, OnOff, Poisson, UniformInt
from .vdba import ReservePolicy, Tcont, TcontClass, TcontRegistry
from .wire import MAX_ALLOC_ID, MAX_WORD_FIELD


class Mode(str, Enum):
    STANDARD = "Standard"
    FAST_INTERCEPT = "FastIntercept"
    FIXED_ALLOCATION = "FixedAllocation"


@dataclass(frozen=True)
class DelayModel:
    prop_delay_ns: int = 25_000
    nic_parse_ns: int = 2_000
    fast_merge_ns: int = 1_000
    nic_to_host_ns: int = 20_000
    host_to_nic_ns: int = 20_000
    host_dba_compute_ns: int = 30_000
    onu_grant_apply_ns: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError("must be >= 0", f"delays.{f.name}")

    @property
    def host_path_ns(self):
        return self.nic_to_host_ns + self.host_dba_compute_ns + self.host_to_nic_ns


def capacity_from_rate(line_rate_bps, frame_period_ns):
    return int(line_rate_bps * frame_period_ns // (8 * 4 * 10**9))


@dataclass
class Scenario:
    registry: TcontRegistry
    traffic: dict
    mode: Mode = Mode.FAST_INTERCEPT
    frame_period_ns: int = 125_000
    line_rate_bps: float = 9.95328e9
    upstream_capacity_words: int | None = None
    reserve_policy: ReservePolicy = field(default_factory=ReservePolicy)
    delays: DelayModel = field(default_factory=DelayModel)
    duration_ns: int = 125_000_000
    seed: int = 1
    queue_capacity: int = 1024

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.upstream_capacity_words is None:
            self.upstream_capacity_words = capacity_from_rate(self.line_rate_bps,
                                                              self.frame_period_ns)
        self.validate()

    @property
    def capacity_words(self):
        return self.upstream_capacity_words

    @property
    def n_frames(self):
        return self.duration_ns // self.frame_period_ns

    def validate(self):
        if self.frame_period_ns <= 0:
            raise ConfigError("must be > 0", "frame_period_ns")
        if not 0 < self.upstream_capacity_words <= MAX_WORD_FIELD + 1:
            raise ConfigError(f"{self.upstream_capacity_words} words does not fit the "
                              "16-bit start_time field", "upstream_capacity_words")
        if self.duration_ns < 10 * self.frame_period_ns:
            raise ConfigError("must cover at least 10 frame periods", "duration_ns")
        if self.queue_capacity <= 0:
            raise ConfigError("must be > 0", "queue_capacity")
        self.reserve_policy.bounds(self.upstream_capacity_words)
        for a in self.traffic:
            if a not in self.registry:
                raise ConfigError(f"alloc_id {a} has traffic but is not registered", "traffic")
        if self.mode is Mode.FIXED_ALLOCATION and not self.registry:
            raise ConfigError("fixed allocation needs registered T-CONTs", "registry")

    def with_mode(self, mode):
        return replace(self, mode=Mode(mode))


_INT = {"type": "integer"}
_NUM = {"type": "number"}

_SIZE_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "words"],
         "properties": {"kind": {"const": "Fixed"}, "words": _INT}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "lo", "hi"],
         "properties": {"kind": {"const": "UniformInt"}, "lo": _INT, "hi": _INT}},
    ]
}

_PROC_SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["kind", "size"],
    "properties": {
        "kind": {"enum": ["Poisson", "CBR", "OnOff"]},
        "rate_per_s": _NUM, "interval_ns": _INT, "on_ns": _INT, "off_ns": _INT,
        "size": _SIZE_SCHEMA, "seed": _INT,
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "registry"],
    "properties": {
        "name": {"type": "string"},
        "mode": {"enum": [m.value for m in Mode]},
        "frame_period_ns": _INT,
        "line_rate_bps": _NUM,
        "upstream_capacity_words": _INT,
        "duration_ns": _INT,
        "seed": _INT,
        "queue_capacity": _INT,
        "reserve_policy": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["Fixed", "Adaptive"]},
                "fixed_fraction": _NUM, "ewma_alpha": _NUM,
                "min_words": _INT, "max_words": {"type": ["integer", "null"]},
            },
        },
        "delays": {
            "type": "object", "additionalProperties": False,
            "properties": {f.name: _INT for f in fields(DelayModel)},
        },
        "registry": {
            "type": "object",
            "propertyNames": {"pattern": "^[0-9]+$"},
            "additionalProperties": {
                "type": "object", "additionalProperties": False, "required": ["class"],
                "properties": {"class": {"enum": [c.value for c in TcontClass]},
                               "onu_id": _INT, "weight": _INT},
            },
        },
        "traffic": {
            "type": "object",
            "propertyNames": {"pattern": "^[0-9]+$"},
            "additionalProperties": _PROC_SCHEMA,
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": ["string", "null"]}
                           for k in ("csv_path", "json_path", "pcap_path", "samples_path")},
        },
    },
}

_validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)


def _field_path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(doc):
    errors = sorted(_validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = _field_path(e)
        if e.validator == "additionalProperties" and e.instance is not None:
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            if extra:
                path = ".".join(filter(None, [path if path != "<root>" else "", extra[0]]))
                raise ConfigError("unknown key", path)
        raise ConfigError(e.message, path)


def _build_process(spec, seed, where):
    size = spec["size"]
    try:
        dist = Fixed(size["words"]) if size["kind"] == "Fixed" else UniformInt(size["lo"], size["hi"])
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], f"{where}.size.{e.field}") from None
    except KeyError as e:
        raise ConfigError("missing", f"{where}.size.{e.args[0]}") from None
    kind = spec["kind"]
    try:
        if kind == "Poisson":
            k = Poisson(spec["rate_per_s"])
        elif kind == "CBR":
            k = CBR(spec["interval_ns"])
        else:
            k = OnOff(spec["on_ns"], spec["off_ns"], spec["interval_ns"])
    except KeyError as e:
        raise ConfigError(f"required for {kind}", f"{where}.{e.args[0]}") from None
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], f"{where}.{e.field}") from None
    return ArrivalProcess(k, dist, spec.get("seed", seed))


def scenario_from_config(doc):
    """Validate a config document and build its :class:`Scenario`."""
    validate_config(doc)
    seed = doc.get("seed", 1)
    registry = TcontRegistry()
    for key, e in doc["registry"].items():
        a = int(key)
        if a > MAX_ALLOC_ID:
            raise ConfigError("alloc_id exceeds 14 bits", f"registry.{key}")
        if e.get("weight", 1) <= 0:
            raise ConfigError("must be > 0", f"registry.{key}.weight")
        registry.register(a, Tcont(TcontClass(e["class"]), e.get("onu_id", 0), e.get("weight", 1)))
    traffic = {int(k): _build_process(v, seed, f"traffic.{k}")
               for k, v in doc.get("traffic", {}).items()}
    kw = {k: doc[k] for k in ("frame_period_ns", "line_rate_bps", "upstream_capacity_words",
                              "duration_ns", "queue_capacity") if k in doc}
    delays = DelayModel(**doc.get("delays", {}))
    policy = ReservePolicy(**doc.get("reserve_policy", {}))
    return Scenario(registry, traffic, mode=doc["mode"], reserve_policy=policy, delays=delays,
                    seed=seed, **kw)


def load_config(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    return doc


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    """Return a copy of ``doc`` with dotted ``key=value`` overrides applied."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.split(".")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError("cannot descend into a scalar", key)
        node[parts[-1]] = _parse_value(value)
    return doc
