"""Experiment configuration: JSON files, named profiles and dotted overrides.

A config file is a JSON object with these sections (all optional)::

    {
      "profile": "desk",
      "seed": 1,
      "output_dir": "runs/desk",
      "dataset": {"profile": "desk", "n_nodes": 1000, ...} | {"path": "data/"},
      "partition": {"K": 5, "strategy": "auto"},
      "federation": {"rounds": 20, "aggregation": "moe", "cross_border": "quantized", ...},
      "gnn": {"learning_rate": 0.005, "hidden_dim": 32, ...},
      "privacy": {"mode": "off", "epsilon": 1.0, "delta": 1e-5, "clip_norm": 1.0},
      "reasoning": {"threshold": 0.7, "w_gnn": 0.6, "w_lam": 0.4},
      "ablation": {"no_agi": false, "no_moe": false, ...},
      "experiment": {"seeds": [1, 2, 3], "epsilons": [0.1, 0.5, 1.0, 10.0], ...}
    }

Values missing from a file come from the named profile. Unknown keys are
configuration errors.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..federation.rounds import RoundConfig
from ..gnn.params import Hyperparams
from ..graph.generator import desk_config, table1_config
from ..graph.types import GeneratorConfig
from ..privacy.accounting import ADVANCED
from ..privacy.dp import DPNoiseConfig
from ..reasoning.types import AssessConfig

PROFILES = ("desk", "paper")
ABLATION_FLAGS = ("no_agi", "no_moe", "no_attention", "no_privacy", "no_fed")


@dataclass(frozen=True)
class PartitionSettings:
    K: int = 5
    strategy: str = "auto"


@dataclass(frozen=True)
class FederationSettings:
    rounds: int = 20
    aggregation: str = "moe"
    cross_border: str = "quantized"
    clients_per_round: int | None = None
    gamma: float = 0.1
    entropy_sign: float = -1.0
    gate_hidden: int = 128
    gate_lr: float = 0.001
    key_bits: int = 512
    accountant: str = ADVANCED
    sampling_q: float = 1.0
    workers: int = 1
    persist_optimizer: bool = True
    clip_norm: float | None = None


@dataclass(frozen=True)
class PrivacySettings:
    mode: str = "off"
    epsilon: float = 1.0
    delta: float = 1e-5
    clip_norm: float = 1.0
    sigma: float | None = None

    def noise(self):
        return DPNoiseConfig(self.clip_norm, self.epsilon, self.delta, self.sigma)


@dataclass(frozen=True)
class AblationFlags:
    no_agi: bool = False
    no_moe: bool = False
    no_attention: bool = False
    no_privacy: bool = False
    no_fed: bool = False

    def active(self):
        return tuple(f for f in ABLATION_FLAGS if getattr(self, f))


@dataclass(frozen=True)
class ExperimentSettings:
    seeds: tuple = (1, 2, 3)
    epsilons: tuple = (0.1, 0.5, 1.0, 10.0)
    client_counts: tuple = (1, 2, 4, 8)
    scale_rounds: int = 2
    importance_repeats: int = 10
    methods: tuple = ("fedavg_tabular", "fedprox", "fedgnn_avg", "fedgraph_agi", "centralized_gat")


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "desk"
    seed: int | None = None
    output_dir: str = "runs"
    dataset: dict = field(default_factory=lambda: {"profile": "desk"})
    partition: PartitionSettings = field(default_factory=PartitionSettings)
    federation: FederationSettings = field(default_factory=FederationSettings)
    gnn: Hyperparams = field(default_factory=lambda: Hyperparams(learning_rate=0.005))
    privacy: PrivacySettings = field(default_factory=PrivacySettings)
    reasoning: AssessConfig = field(default_factory=AssessConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if self.federation.aggregation not in ("fedavg", "moe"):
            raise ConfigError("exactly one aggregation mode must be active: 'fedavg' or 'moe'")
        if self.partition.K < 1:
            raise ConfigError("partition.K must be >= 1")
        if not self.experiment.seeds:
            raise ConfigError("experiment.seeds must not be empty")
        for e in self.experiment.epsilons:
            if not (e > 0 or math.isinf(e)):
                raise ConfigError("every epsilon must be positive")
        # surface invalid federation/privacy combinations at load time
        self.round_config(0)
        ds = dict(self.dataset)
        if "path" not in ds:
            self.generator_config(0)

    # --- builders ---------------------------------------------------------

    def generator_config(self, seed) -> GeneratorConfig:
        ds = dict(self.dataset)
        if "path" in ds:
            raise ConfigError("dataset is loaded from a path; no generator config")
        profile = ds.pop("profile", "desk")
        ds.pop("seed", None)
        try:
            if profile == "desk":
                return desk_config(seed=seed, **ds)
            if profile in ("table1", "paper"):
                return table1_config(seed=seed, **ds)
        except TypeError as exc:
            raise ConfigError(f"dataset: {exc}") from None
        raise ConfigError(f"unknown dataset profile {profile!r}")

    def round_config(self, seed, **overrides) -> RoundConfig:
        fed = asdict(self.federation)
        fed.update(
            hyper=self.gnn,
            privacy=self.privacy.mode,
            dp=self.privacy.noise(),
            seed=int(seed),
        )
        fed.update(overrides)
        return RoundConfig(**fed)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        return {
            "profile": self.profile,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "dataset": dict(self.dataset),
            "partition": asdict(self.partition),
            "federation": asdict(self.federation),
            "gnn": asdict(self.gnn),
            "privacy": asdict(self.privacy),
            "reasoning": asdict(self.reasoning),
            "ablation": asdict(self.ablation),
            "experiment": {k: list(v) if isinstance(v, tuple) else v
                           for k, v in asdict(self.experiment).items()},
        }


SECTIONS = {
    "partition": PartitionSettings,
    "federation": FederationSettings,
    "gnn": Hyperparams,
    "privacy": PrivacySettings,
    "reasoning": AssessConfig,
    "ablation": AblationFlags,
    "experiment": ExperimentSettings,
}
TOP_LEVEL = ("profile", "seed", "output_dir", "dataset") + tuple(SECTIONS)


def profile_dict(name="desk"):
    """Plain-dict defaults for a named profile."""
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {PROFILES}")
    d = ExperimentConfig().to_dict()
    if name == "paper":
        d["profile"] = "paper"
        d["dataset"] = {"profile": "table1"}
        d["partition"]["K"] = 10
        d["federation"]["rounds"] = 100
        d["gnn"].update(hidden_dim=256, heads=8, learning_rate=0.001)
    return d


def _merge(base, over, path=""):
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base and not (path == "dataset." or path == ""):
            raise ConfigError(f"unknown config key {where!r}")
        if path == "" and k not in TOP_LEVEL:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(v, dict) and isinstance(base.get(k), dict) and k != "dataset":
            _merge(base[k], v, where + ".")
        elif k == "dataset" and isinstance(v, dict):
            base[k] = dict(v) if ("path" in v or "profile" in v) else {**base[k], **v}
        else:
            base[k] = v
    return base


def _section(cls, values, name):
    known = {f.name for f in fields(cls)}
    extra = set(values) - known
    if extra:
        raise ConfigError(f"unknown key(s) in {name}: {sorted(extra)}")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    if name == "experiment" and "epsilons" in vals:
        vals["epsilons"] = tuple(math.inf if e in ("inf", "Infinity") else float(e) for e in vals["epsilons"])
    try:
        return cls(**vals)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(d) -> ExperimentConfig:
    """Build a config from a (possibly partial) dict layered over its profile."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    base = profile_dict(d.get("profile", "desk"))
    merged = _merge(copy.deepcopy(base), d)
    kwargs = {k: merged[k] for k in ("profile", "seed", "output_dir", "dataset")}
    for name, cls in SECTIONS.items():
        kwargs[name] = _section(cls, merged[name], name)
    if kwargs["seed"] is not None:
        kwargs["seed"] = int(kwargs["seed"])
    return ExperimentConfig(**kwargs)


def load_config(path=None, overrides=(), profile=None) -> ExperimentConfig:
    """Read ``path`` (or start from ``profile``), then apply ``key.path=value`` overrides."""
    d = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if profile is not None:
        d = {**d, "profile": profile}
    for item in overrides:
        apply_override(d, item)
    return config_from_dict(d)


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(d, item):
    """Apply one ``a.b.c=value`` override in place; the value is parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    key, text = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {item!r} has an empty key")
    node = d
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {p} is not a section")
    node[parts[-1]] = parse_value(text)
    return d


def save_config(config: ExperimentConfig, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True,
                                     default=lambda x: None) + "\n", encoding="utf-8")
