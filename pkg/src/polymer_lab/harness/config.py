"""Experiment configuration: one JSON document, validated before any computation."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..engine import Geometry, Mode
from ..environment import BOUND_PHASE, CONTROL, Distribution, WeightSpec
from ..errors import ConfigInvalid, InvalidSpec

EXPERIMENTS = ("validate", "lln", "pinning", "midpoint", "variance", "clt", "blocks", "near-vertical", "ldp",
               "influence", "efron-stein", "lindeberg", "excursion", "couple-demo")
Experiment = Literal["validate", "lln", "pinning", "midpoint", "variance", "clt", "blocks", "near-vertical", "ldp",
                     "influence", "efron-stein", "lindeberg", "excursion", "couple-demo"]

PRESETS = {"bound-phase": BOUND_PHASE, "control": CONTROL}

REQUIRED: dict[str, tuple[str, ...]] = {
    "validate": (),
    "lln": ("n_list",),
    "pinning": ("n", "s1", "s2_list"),
    "midpoint": ("n", "k_list"),
    "variance": ("n_list",),
    "clt": ("n",),
    "blocks": ("n",),
    "near-vertical": ("n_list", "y_rule"),
    "ldp": ("t_list",),
    "influence": ("n", "rows", "x_max"),
    "efron-stein": ("n",),
    "lindeberg": ("n", "epsilon_list"),
    "excursion": ("n",),
    "couple-demo": ("u", "v", "u2", "v2"),
}

DEFAULT_REPLICATES = {"validate": 0, "variance": 1000, "clt": 2000, "ldp": 1000, "lindeberg": 1000,
                      "excursion": 10_000, "efron-stein": 200}
FALLBACK_REPLICATES = 200
EXECUTION_FIELDS = {"out", "threads", "dump_env"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LawConfig(_Strict):
    family: Literal["exponential", "gamma", "constant"]
    rate: float | None = None
    shape: float | None = None
    value: float | None = None

    def build(self) -> Distribution:
        params = {k: v for k, v in (("rate", self.rate), ("shape", self.shape), ("value", self.value))
                  if v is not None}
        return Distribution.from_dict({"family": self.family, **params})


class ModelConfig(_Strict):
    bulk: LawConfig
    vertical: LawConfig


class PowerRule(_Strict):
    """``y_n = floor_even(scale * n ** power)``."""

    power: float
    scale: float = 1.0


YRuleConfig = Union[int, dict[str, int], PowerRule]
Pair = tuple[int, int]


class ExperimentConfig(_Strict):
    experiment: Experiment
    model: Union[Literal["bound-phase", "control"], ModelConfig] = "bound-phase"
    mode: Mode = Mode.POSITIVE
    geometry: Geometry = Geometry.HALF
    replicates: int | None = Field(default=None, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: str = "results"
    threads: int | None = Field(default=None, ge=1)
    dump_env: bool = False

    n: int | None = Field(default=None, ge=2)
    n_list: list[int] | None = None
    t_list: list[int] | None = None
    s1: int | None = None
    s2_list: list[int] | None = None
    k_list: list[int] | None = None
    J: int | None = None
    K: int | None = None
    y_rule: YRuleConfig | None = None
    delta: float | None = Field(default=None, gt=0)
    cutoff_power: float | None = Field(default=None, gt=0)
    rows: list[int] | None = None
    x_max: int | None = Field(default=None, ge=0)
    B_low: float | None = Field(default=None, gt=0)
    B_high: float | None = Field(default=None, gt=0)
    epsilon: float = Field(default=0.1, gt=0)
    epsilon_list: list[float] | None = None
    fit_range: Pair | None = None
    eps_hwy: float = Field(default=1e-3, gt=0)
    min_blocks: int = Field(default=40, ge=1)
    alpha: float = Field(default=0.01, gt=0, lt=1)
    level: float = Field(default=0.95, gt=0, lt=1)
    instance_count: int = Field(default=200, ge=0)
    u: Pair | None = None
    v: Pair | None = None
    u2: Pair | None = None
    v2: Pair | None = None

    @field_validator("n_list", "t_list", "s2_list", "k_list", "rows", "epsilon_list")
    @classmethod
    def _nonempty(cls, value):
        if value is not None and len(value) == 0:
            raise ValueError("must not be empty")
        return value

    @field_validator("y_rule")
    @classmethod
    def _y_keys(cls, value):
        if isinstance(value, dict):
            for key in value:
                if not key.lstrip("-").isdigit():
                    raise ValueError(f"mapping keys must be integers, got {key!r}")
        return value

    # ------------------------------------------------------------ derived values

    @property
    def spec(self) -> WeightSpec:
        if isinstance(self.model, str):
            return PRESETS[self.model]
        return WeightSpec(self.model.bulk.build(), self.model.vertical.build())

    @property
    def replicate_count(self) -> int:
        if self.replicates is not None:
            return self.replicates
        return DEFAULT_REPLICATES.get(self.experiment, FALLBACK_REPLICATES)

    @property
    def y_rule_value(self):
        from ..estimators.lln import power_rule

        rule = self.y_rule
        if isinstance(rule, PowerRule):
            return power_rule(rule.power, rule.scale)
        if isinstance(rule, dict):
            return {int(k): v for k, v in rule.items()}
        return rule

    def canonical(self) -> str:
        """Sorted keys, no insignificant whitespace; the hashing form.

        Execution settings (output directory, worker count, snapshot flag)
        do not change results and are left out.
        """
        return canonical_json(self.model_dump(mode="json", exclude=EXECUTION_FIELDS))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        data = self.model_dump(mode="json")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return parse_config(data)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _path(loc: tuple) -> str:
    parts = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        elif item in {"function-after", "function-before", "union"} or "[" in str(item) or str(item) in {
                "int", "str", "ModelConfig", "PowerRule", "literal['bound-phase','control']"}:
            continue
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts)


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a decoded JSON document, raising :class:`ConfigInvalid` with the field path."""
    if not isinstance(data, dict):
        raise ConfigInvalid("", "the configuration must be a JSON object")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        # inside unions the deepest location is the most specific complaint
        err = max(exc.errors(), key=lambda e: len(e["loc"]))
        raise ConfigInvalid(_path(tuple(err["loc"])), err["msg"]) from None
    for name in REQUIRED[cfg.experiment]:
        if getattr(cfg, name) is None:
            raise ConfigInvalid(name, f"required by experiment {cfg.experiment!r}")
    if cfg.B_low is not None and cfg.B_high is not None and cfg.B_low > cfg.B_high:
        raise ConfigInvalid("B_high", "must not be smaller than B_low")
    if not isinstance(cfg.model, str):
        for side in ("bulk", "vertical"):
            try:
                getattr(cfg.model, side).build()
            except InvalidSpec as exc:
                raise ConfigInvalid(f"model.{side}", str(exc)) from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid("", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("", f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return parse_config(data)
