"""Run configuration; defaults reproduce the reference training recipe.

Config files are plain `key = value` lines (# comments allowed); every
field can be overridden by a CLI flag.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .fusion import LossWeights


@dataclass
class RunConfig:
    seed: int = 1234
    lr: float = 1e-4
    epochs: int = 100
    weight_decay: float = 5e-4
    dropout: float = 0.5
    attn_dropout: float = 0.6
    leaky_slope: float = 0.2
    heads_hidden: int = 16
    heads_out: int = 4
    head_width: int = 4
    fusion_heads_hidden: int = 4
    fusion_heads_out: int = 4
    gcn_layers: int = 2
    loss_alpha: float = 0.2
    loss_beta: float = 0.2
    loss_gamma: float = 1.0
    val_ratio: float = 0.05
    embedding_dim: int = 0          # 0 means "take from the embedding file"
    msv_theta: float = 0.3
    coherence_score: str = "mean"   # mean | sum, ablation knob
    ensemble_heads: bool = False    # average global and fused heads at inference
    word_threshold: int = 100
    min_sentences: int = 5
    problems_per_abstract: int = 1
    toposort_hidden: int = 16
    toposort_epochs: int = 50
    toposort_lr: float = 1e-3
    problems_path: str = ""
    embeddings_path: str = ""

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.loss_alpha, self.loss_beta, self.loss_gamma)


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELDS[name]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {name}: {raw!r}") from e


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _FIELDS:
                raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(key, raw))
    return cfg


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """New config with every non-None override applied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(updates) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return dataclasses.replace(cfg, **updates)
