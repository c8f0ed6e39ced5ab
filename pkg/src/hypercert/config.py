"""Experiment configuration: flat key=value files with dotted section keys.

Configs are declarative and hashable: ``canonical()`` prints every key in
sorted order with round-trip-exact value formatting, ``parse`` of that text
reproduces the config, and the sha256 of the canonical text is embedded in
every artifact a run emits so reports can refuse to mix mismatched files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional

from . import kvio
from .errors import ConfigError, MalformedFile
from .geometry import parse_variant
from .network import TrainConfig
from .robust import AttackConfig, AugmentConfig


@dataclass(frozen=True)
class _Field:
    kind: str                      # int | float | bool | str | str_list | int_list | float_list
    default: object
    check: Optional[Callable] = None
    choices: Optional[tuple] = None


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _fraction(v):
    return 0.0 < v <= 1.0


def _unit_interval(v):
    return 0.0 <= v < 1.0


def _variant_ok(v):
    parse_variant(v)  # raises MalformedFile on bad grammar
    return True


SCHEMA = {
    "seed": _Field("int", 0, _non_negative),
    "dataset.path": _Field("str", ""),
    # region construction
    "regions.variants": _Field("str_list", ["plain"], _variant_ok),
    "regions.shrink_negatives": _Field("str", "train", choices=("train", "train+test")),
    # synthetic data generation
    "synth.dim": _Field("int", 32, lambda v: v >= 1),
    "synth.n_positive": _Field("int", 1000, _non_negative),
    "synth.n_negative": _Field("int", 1000, _non_negative),
    "synth.n_ambiguous": _Field("int", 1000, _non_negative),
    "synth.test_fraction": _Field("float", 0.3, _unit_interval),
    "synth.separation": _Field("float", 8.0, _non_negative),
    "synth.scale": _Field("float", 1.0, _positive),
    "synth.anisotropy": _Field("float", 1.0, _fraction),
    "synth.noise": _Field("float", 0.0, _unit_interval),
    # network and training
    "network.hidden": _Field("int_list", [256, 128], _positive),
    "network.epochs": _Field("int", 10, _positive),
    "network.batch_size": _Field("int", 32, _positive),
    "network.learning_rate": _Field("float", 1e-3, _positive),
    "train.alpha": _Field("float", 1.0, _non_negative),
    "train.beta": _Field("float", 0.0, _non_negative),
    "train.region": _Field("str", "plain", _variant_ok),
    "augment.n_positive": _Field("int", 0, _non_negative),
    "augment.n_negative": _Field("int", 0, _non_negative),
    # attack shared by the training adversary
    "attack.steps": _Field("int", 10, _positive),
    "attack.mode": _Field("str", "adaptive", choices=("fixed", "adaptive", "clip")),
    "attack.epsilon": _Field("float", 1e-4, _positive),
    "attack.fraction": _Field("float", 0.05, _fraction),
    "attack.step_scale": _Field("float", 2.5, _positive),
    "adversary.samples": _Field("int", 0, _non_negative),
    # verification
    "verify.eps_grid": _Field("float_list", [1e-5], _positive),
    "verify.eps_max": _Field("float", 0.1, _positive),
    "verify.tolerance": _Field("float", 1e-6, _positive),
    "verify.points": _Field("int", 20, _non_negative),
    "verify.restarts": _Field("int", 10, _non_negative),
    "verify.presamples": _Field("int", 512, _non_negative),
    "verify.budget_s": _Field("float", 60.0, _positive),
    "verify.strict": _Field("bool", False),
}


def _parse_scalar(key: str, kind: str, text: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text in ("yes", "no"):
                return text == "yes"
            raise ValueError("expected yes or no")
        return text
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {text!r} as {kind} ({exc})") from None


def _format_scalar(kind: str, value) -> str:
    if kind == "bool":
        return "yes" if value else "no"
    if kind == "float":
        return repr(float(value))
    return str(value)


def _parse_value(key: str, field: _Field, text: str):
    if field.kind.endswith("_list"):
        item_kind = field.kind[:-5]
        items = [p.strip() for p in text.split(",") if p.strip()]
        return [_parse_scalar(key, item_kind, p) for p in items]
    return _parse_scalar(key, field.kind, text)


def _format_value(field: _Field, value) -> str:
    if field.kind.endswith("_list"):
        item_kind = field.kind[:-5]
        return ", ".join(_format_scalar(item_kind, v) for v in value)
    return _format_scalar(field.kind, value)


def _check_value(key: str, field: _Field, value) -> None:
    if field.choices is not None and value not in field.choices:
        raise ConfigError(key, f"must be one of {', '.join(field.choices)}, got {value!r}")
    if field.check is None:
        return
    items = value if isinstance(value, list) else [value]
    for item in items:
        try:
            ok = field.check(item)
        except MalformedFile as exc:
            raise ConfigError(key, str(exc)) from None
        if not ok:
            raise ConfigError(key, f"value {item!r} out of range")


@dataclass(eq=False)
class ExperimentConfig:
    values: dict

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.values == other.values

    def get(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(key, "unknown configuration key")
        return self.values[key]

    def with_overrides(self, overrides) -> "ExperimentConfig":
        """A new config with ``key=value`` override strings applied."""
        values = dict(self.values)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(item, "override must look like key=value")
            key, _, text = item.partition("=")
            key = key.strip()
            if key not in SCHEMA:
                raise ConfigError(key, "unknown configuration key")
            field = SCHEMA[key]
            value = _parse_value(key, field, text)
            _check_value(key, field, value)
            values[key] = value
        return ExperimentConfig(values)

    def canonical(self) -> str:
        lines = [f"{key} = {_format_value(SCHEMA[key], self.values[key])}"
                 for key in sorted(SCHEMA)]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # typed views consumed by the pipeline

    def train_config(self, seed: int) -> TrainConfig:
        alpha, beta = self.get("train.alpha"), self.get("train.beta")
        if alpha + beta == 0:
            raise ConfigError("train.alpha", "alpha + beta must be positive")
        return TrainConfig(
            epochs=self.get("network.epochs"),
            batch_size=self.get("network.batch_size"),
            learning_rate=self.get("network.learning_rate"),
            seed=seed,
            alpha=alpha,
            beta=beta,
        )

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            steps=self.get("attack.steps"),
            mode=self.get("attack.mode"),
            epsilon=self.get("attack.epsilon"),
            fraction=self.get("attack.fraction"),
            step_scale=self.get("attack.step_scale"),
        )

    def augment_config(self, seed: int) -> AugmentConfig:
        return AugmentConfig(
            n_positive=self.get("augment.n_positive"),
            n_negative=self.get("augment.n_negative"),
            seed=seed,
        )


def default_config() -> ExperimentConfig:
    return ExperimentConfig({key: field.default for key, field in SCHEMA.items()})


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    kv = kvio.parse_kv(text, source=source)
    values = {key: field.default for key, field in SCHEMA.items()}
    for key, raw in kv.items():
        if key not in SCHEMA:
            raise ConfigError(key, "unknown configuration key")
        field = SCHEMA[key]
        value = _parse_value(key, field, raw)
        _check_value(key, field, value)
        values[key] = value
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    return parse_config(kvio.read_text(path), source=str(path))


def save_config(config: ExperimentConfig, path) -> None:
    kvio.write_text(path, config.canonical())
