"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Every key must be known; values
are parsed by the key's type. Lists are comma separated, ``none`` clears an
optional value.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .data.features import MARKETS
from .errors import CnnpredError
from .models.train import TrainConfig

MODEL_TAGS = ("Technical", "PCA+ANN", "2D-CNNpred", "3D-CNNpred")


class ConfigError(CnnpredError):
    exit_code = 1


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str):
    return None if text.strip().lower() in ("none", "") else int(text)


def _opt_str(text: str):
    return None if text.strip().lower() in ("none", "") else text.strip()


def _str_list(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _int_list(text: str) -> tuple:
    return tuple(int(p) for p in _str_list(text))


@dataclass
class RunConfig:
    # data
    data: str | None = None            # raw CSV root (gen-data layout)
    features: str | None = None        # feature CSV directory, used if data is unset
    kara_period: int = 10
    window: int = 60
    lookback_across_splits: bool = True
    markets: tuple = MARKETS
    # models
    models: tuple = MODEL_TAGS
    filters: int = 8
    hidden: int = 20
    pca_k: tuple = (5, 10, 20)
    # training
    batch_size: int = 128
    dropout: float = 0.1
    max_epochs: int = 200
    patience: int | None = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # experiment
    seeds: int = 10
    seed_start: int = 1
    threads: int = 1
    report_format: tuple = ("markdown", "csv")

    _PARSERS = {
        "data": _opt_str, "features": _opt_str, "kara_period": int, "window": int,
        "lookback_across_splits": _bool, "markets": _str_list, "models": _str_list,
        "filters": int, "hidden": int, "pca_k": _int_list, "batch_size": int,
        "dropout": float, "max_epochs": int, "patience": _opt_int, "learning_rate": float,
        "beta1": float, "beta2": float, "epsilon": float, "seeds": int, "seed_start": int,
        "threads": int, "report_format": _str_list,
    }

    def __post_init__(self):
        unknown = [m for m in self.models if m not in MODEL_TAGS]
        if unknown:
            raise ConfigError(f"unknown model tag(s) {', '.join(unknown)}; "
                              f"choose from {', '.join(MODEL_TAGS)}")
        bad = [f for f in self.report_format if f not in ("markdown", "csv")]
        if bad:
            raise ConfigError(f"unknown report format(s) {', '.join(bad)}")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.pca_k or min(self.pca_k) < 1:
            raise ConfigError("pca_k needs at least one positive component count")
        try:
            self.train_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def keys(cls) -> tuple:
        return tuple(cls._PARSERS)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, dropout=self.dropout,
                           max_epochs=self.max_epochs, patience=self.patience,
                           learning_rate=self.learning_rate, beta1=self.beta1,
                           beta2=self.beta2, epsilon=self.epsilon, seed=seed)

    def seed_list(self) -> list[int]:
        return list(range(self.seed_start, self.seed_start + self.seeds))

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def with_overrides(self, **values) -> "RunConfig":
        """Copy with non-None overrides applied (CLI flags win over the file)."""
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update({k: v for k, v in values.items() if v is not None})
        return RunConfig(**current)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in RunConfig._PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = RunConfig._PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not UTF-8") from None
    return parse_config_text(text, str(path))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
