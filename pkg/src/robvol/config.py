"""Run configuration: JSON schema validation, flag overrides and typed access."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .errors import ConfigError
from .pipeline import PredictorConfig, ProxyConfig
from .sim import DEFAULT_ALPHA_GRID, DEFAULT_Z_GRID, VolPathModel

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "input": None,
    "predictors": [
        {"method": "ewma", "half_life": 7},
        {"method": "ewma", "half_life": 14},
        {"method": "huber", "half_life": 7},
        {"method": "huber", "half_life": 14},
    ],
    "proxies": [{"method": "ewma", "half_life": 7}, {"method": "huber", "half_life": 7}],
    "T_policy": "full",
    "losses": ["mse", "ql"],
    "window": None,
    "scale": True,
    "ql_floor": None,
    "out_dir": "out",
    "seed": 0,
    "mc": {
        "dists": ["lognormal", "t"],
        "n": 100,
        "reps": 2000,
        "alpha_grid": list(DEFAULT_ALPHA_GRID),
        "z_grid": list(DEFAULT_Z_GRID),
        "trim_mode": "trim",
        "df": 3.0,
    },
}


def schema() -> dict:
    text = resources.files("robvol").joinpath("schemas/run_config.v1.json").read_text(encoding="utf-8")
    return json.loads(text)


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["$"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate(doc: dict) -> None:
    """Raise ConfigError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        msg = "; ".join(f"{_path(e)}: {e.message}" for e in errors)
        raise ConfigError(f"invalid configuration: {msg}")


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    validate(doc)
    return doc


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_PRED_KEYS = {"hl": "half_life", "half_life": "half_life", "m": "m", "z": "z", "M": "M", "name": "name"}
_PROXY_KEYS = {"hl": "half_life", "half_life": "half_life", "m": "m", "z": "z", "T": "T", "name": "name"}


def parse_method_spec(text: str, keys: dict[str, str], flag: str) -> dict:
    """Parse ``method:key=value,key=value`` (e.g. ``huber:hl=14,z=2``)."""
    method, _, rest = text.partition(":")
    out: dict = {"method": method.strip().lower()}
    if rest.strip():
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            k = k.strip()
            if not eq or k not in keys:
                raise ConfigError(f"{flag} {text!r}: unknown or malformed key {k!r}; allowed {sorted(keys)}")
            field_name = keys[k]
            if field_name == "name":
                out[field_name] = v.strip()
                continue
            try:
                num = float(v)
            except ValueError:
                raise ConfigError(f"{flag} {text!r}: {k} must be numeric, got {v!r}") from None
            out[field_name] = int(num) if field_name in ("m", "T") and num.is_integer() else num
    return out


def parse_predictor(text: str) -> dict:
    return parse_method_spec(text, _PRED_KEYS, "--predictor")


def parse_proxy(text: str) -> dict:
    out = parse_method_spec(text, _PROXY_KEYS, "--proxy")
    out.setdefault("half_life", 7)
    return out


@dataclass
class RunConfig:
    doc: dict
    predictors: list[PredictorConfig] = field(default_factory=list)
    proxies: list[ProxyConfig] = field(default_factory=list)

    @classmethod
    def from_doc(cls, doc: dict) -> "RunConfig":
        full = merge(DEFAULTS, doc)
        validate(full)
        try:
            preds = [PredictorConfig(**p) for p in full["predictors"]]
            proxs = [ProxyConfig(**p) for p in full["proxies"]]
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        labels = [p.label for p in preds]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"$.predictors: duplicate predictor names {labels}")
        if full["input"] is None and "simulation" not in full:
            full["simulation"] = {"T": 720, "model": {}}
        if "simulation" in full:
            cls._model(full)
        return cls(full, preds, proxs)

    @staticmethod
    def _model(full: dict) -> VolPathModel:
        try:
            return VolPathModel(**full["simulation"].get("model", {}))
        except ConfigError as exc:
            raise ConfigError(f"$.simulation.model: {exc}") from None

    @property
    def model(self) -> VolPathModel:
        return self._model(self.doc)

    @property
    def fixed_T(self) -> int | None:
        pol = self.doc["T_policy"]
        return None if pol == "full" else int(pol.split(":", 1)[1])

    def __getattr__(self, name):
        doc = self.__dict__.get("doc")
        if doc is not None and name in doc:
            return doc[name]
        raise AttributeError(name)

    def echo(self) -> dict:
        return copy.deepcopy(self.doc)
