"""Run configuration: flat key=value files plus CLI overrides.

A config file holds one `key = value` pair per line; blank lines and
`#` comments are ignored. Unknown keys are a hard error. CLI flags take
precedence over file values, which take precedence over the defaults
below. The fully resolved configuration (including the seed) is written
into every run's output manifest so any artifact can be reproduced from
its manifest alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigError


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _parse_ints(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {value!r}") from exc


@dataclass
class RunConfig:
    """Every tunable of the pipeline; see README for the schema."""

    seed: int = 0
    out: str = "out"
    data: str = ""
    checkpoint: str = ""
    scores_csv: str = ""

    # noise schedule
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    # network
    hidden: tuple[int, ...] = (128, 128, 128)
    embed_dim: int = 64

    # training
    epochs: int = 200
    batch_size: int = 256
    lr: float = 1e-3
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    # inference / scoring
    t_infer: int = 0  # 0 = per-command default (toy 250, feature maps 500)
    scorer: str = "irf-mean"
    infer_batch: int = 256
    normalize_scores: bool = False
    save_maps: bool = False
    fpr_limit: float = 0.3

    # baselines
    recon_t_start: int = 500
    recon_steps: int = 50
    ddim_steps: int = 3
    bench_repeats: int = 5

    # blob generator
    n_train: int = 512
    n_test: int = 128
    channels: int = 4
    height: int = 8
    width: int = 8
    up_height: int = 32
    up_width: int = 32
    blob_amplitude: float = 3.0
    blob_rows: int = 3
    blob_cols: int = 3

    def set_key(self, key: str, raw: str) -> None:
        spec = {f.name: f.type for f in fields(self)}
        if key not in spec:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(self, key)
        try:
            if isinstance(current, bool):
                value = _parse_bool(raw)
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            elif isinstance(current, tuple):
                value = _parse_ints(raw)
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        setattr(self, key, value)

    def items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                rendered = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            out.append((f.name, rendered))
        return out


def load_config_file(path: str | os.PathLike, config: RunConfig) -> RunConfig:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            config.set_key(key.strip(), value.strip())
    return config


def resolve_config(
    config_path: str | None, overrides: dict[str, str]
) -> RunConfig:
    """Defaults <- config file <- CLI overrides, in increasing precedence."""
    config = RunConfig()
    if config_path:
        load_config_file(config_path, config)
    for key, raw in overrides.items():
        if raw is not None:
            config.set_key(key, raw)
    return config
