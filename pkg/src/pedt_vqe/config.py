"""Run configuration: schema, defaults, presets and validation.

Config files are YAML (plain JSON also parses). Every field has a default
except ``hamiltonian.family``. Example::

    preset: ci              # optional: ci | paper-protocol
    hamiltonian: {family: ising, n: 5, j: 1.0, h: 0.5}
    ansatz: {layers: 3, shots: 1024}
    gp: {sigma0: null, gamma: 0.7, sigma_n_floor: 1.0e-6, center: true}
    threshold:
      variant: pedt         # emicore | pedt | pedt_generalized | pedt_lenient | pedt_strict
      t_avg: 10
      constants: {a: 0.5, b: 1, c: 3, d: 1, f: 1}
      warmup_kappa: null    # null -> sigma0 / 6
    loop:
      optimizer: emicore-bo # emicore-bo | nft
      iterations: 100
      n_grid: 25
      points_per_iter: 2
      n_samples: 100
      n_init: null          # null -> n_params + 1
      max_subsets: 200
    seeds: [0, 1, 2, 3, 4]
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Union, get_args, get_origin, get_type_hints

import yaml

from .threshold import VARIANTS, PedtConstants, ThresholdConfigError

OPTIMIZERS = ("emicore-bo", "nft")
FAMILIES = ("ising", "heisenberg")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class HamiltonianSpec:
    family: str = "ising"
    n: int = 5
    j: float = 1.0
    h: float = 0.5


@dataclass(frozen=True)
class AnsatzSpec:
    layers: int = 3
    shots: int = 0


@dataclass(frozen=True)
class GpSpec:
    sigma0: Optional[float] = None
    gamma: float = 0.7
    sigma_n_floor: float = 1e-6
    center: bool = True


@dataclass(frozen=True)
class ThresholdSpec:
    variant: str = "pedt"
    t_avg: int = 10
    constants: PedtConstants = field(default_factory=PedtConstants)
    warmup_kappa: Optional[float] = None


@dataclass(frozen=True)
class LoopSpec:
    optimizer: str = "emicore-bo"
    iterations: int = 100
    n_grid: int = 25
    points_per_iter: int = 2
    n_samples: int = 100
    n_init: Optional[int] = None
    max_subsets: int = 200


@dataclass(frozen=True)
class RunConfig:
    hamiltonian: HamiltonianSpec = field(default_factory=HamiltonianSpec)
    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    gp: GpSpec = field(default_factory=GpSpec)
    threshold: ThresholdSpec = field(default_factory=ThresholdSpec)
    loop: LoopSpec = field(default_factory=LoopSpec)
    seeds: List[int] = field(default_factory=lambda: [0])

    @property
    def sigma0(self) -> float:
        return float(self.gp.sigma0) if self.gp.sigma0 is not None else float(self.hamiltonian.n)

    @property
    def variant_label(self) -> str:
        return "nft" if self.loop.optimizer == "nft" else self.threshold.variant

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **sections) -> "RunConfig":
        """Shallow-merge overrides into sections, e.g. ``replace(loop={"iterations": 5})``."""
        data = self.to_dict()
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return config_from_dict(data)


PRESETS = {
    "ci": {
        "hamiltonian": {"family": "ising", "n": 5, "j": 1.0, "h": 0.5},
        "loop": {"iterations": 100},
        "seeds": [0, 1, 2, 3, 4],
    },
    "paper-protocol": {
        "hamiltonian": {"family": "ising", "n": 10, "j": 1.0, "h": 0.5},
        "ansatz": {"shots": 1024},
        "threshold": {"t_avg": 10},
        "loop": {"iterations": 310},
        "seeds": list(range(10)),
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _build(cls, data: Any, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    unknown = set(data) - set(hints)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    return cls(**{k: _coerce(v, hints[k], f"{path}.{k}") for k, v in data.items()})


def _coerce(value, hint, path):
    optional = get_origin(hint) is Union and type(None) in get_args(hint)
    if optional:
        hint = next(a for a in get_args(hint) if a is not type(None))
    if value is None:
        if optional:
            return None
        raise ConfigError(path, "may not be null")
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
    elif hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
    elif hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        value = float(value)
    elif hint is str and not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def config_from_dict(data: dict) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`; raises :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    data = dict(data)
    preset = data.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = _merge(PRESETS[preset], data)
    elif "hamiltonian" not in data or not isinstance(data["hamiltonian"], dict) \
            or "family" not in data["hamiltonian"]:
        missing = "hamiltonian" if "hamiltonian" not in data else "hamiltonian.family"
        raise ConfigError(missing, "required field is missing")

    sections = {"hamiltonian", "ansatz", "gp", "threshold", "loop", "seeds"}
    unknown = set(data) - sections
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")

    ham = _build(HamiltonianSpec, data.get("hamiltonian"), "hamiltonian")
    ans = _build(AnsatzSpec, data.get("ansatz"), "ansatz")
    gp = _build(GpSpec, data.get("gp"), "gp")
    thr_raw = dict(data.get("threshold") or {})
    consts_raw = thr_raw.pop("constants", None)
    thr = _build(ThresholdSpec, thr_raw, "threshold")
    consts = _build(PedtConstants, consts_raw, "threshold.constants")
    thr = ThresholdSpec(thr.variant, thr.t_avg, consts, thr.warmup_kappa)
    loop = _build(LoopSpec, data.get("loop"), "loop")

    seeds = data.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
    ):
        raise ConfigError("seeds", "expected a nonempty list of nonnegative integers")

    _validate(ham, ans, gp, thr, loop)
    return RunConfig(ham, ans, gp, thr, loop, list(seeds))


def _validate(ham, ans, gp, thr, loop):
    if ham.family not in FAMILIES:
        raise ConfigError("hamiltonian.family", f"must be one of {FAMILIES}, got {ham.family!r}")
    if ham.n < 2:
        raise ConfigError("hamiltonian.n", "must be >= 2")
    if ans.layers < 1:
        raise ConfigError("ansatz.layers", "must be >= 1")
    if ans.shots < 0:
        raise ConfigError("ansatz.shots", "must be >= 0")
    if gp.sigma0 is not None and gp.sigma0 <= 0:
        raise ConfigError("gp.sigma0", "must be > 0")
    if not 0 < gp.gamma <= 1:
        raise ConfigError("gp.gamma", "must lie in (0, 1]")
    if gp.sigma_n_floor < 0:
        raise ConfigError("gp.sigma_n_floor", "must be >= 0")
    if thr.variant not in VARIANTS:
        raise ConfigError("threshold.variant", f"must be one of {VARIANTS}, got {thr.variant!r}")
    if thr.t_avg < 1:
        raise ConfigError("threshold.t_avg", "must be >= 1")
    if thr.warmup_kappa is not None and thr.warmup_kappa < 0:
        raise ConfigError("threshold.warmup_kappa", "must be >= 0")
    try:
        thr.constants.validate()
    except ThresholdConfigError as exc:
        raise ConfigError("threshold.constants", str(exc)) from None
    if loop.optimizer not in OPTIMIZERS:
        raise ConfigError("loop.optimizer", f"must be one of {OPTIMIZERS}, got {loop.optimizer!r}")
    if loop.iterations < 0:
        raise ConfigError("loop.iterations", "must be >= 0")
    if loop.n_grid < 1:
        raise ConfigError("loop.n_grid", "must be >= 1")
    if not 1 <= loop.points_per_iter <= loop.n_grid:
        raise ConfigError("loop.points_per_iter", "must lie in [1, n_grid]")
    if loop.n_samples < 1:
        raise ConfigError("loop.n_samples", "must be >= 1")
    if loop.n_init is not None and loop.n_init < 1:
        raise ConfigError("loop.n_init", "must be >= 1")
    if loop.max_subsets < 1:
        raise ConfigError("loop.max_subsets", "must be >= 1")


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"could not parse {path}: {exc}") from None
    return config_from_dict(data if data is not None else {})
