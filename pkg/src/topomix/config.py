"""Pipeline configuration: one flat record, loadable from a sectioned INI file."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

# section -> keys accepted there
SECTIONS = {
    "io": ("input", "output", "header", "delimiter", "detrend", "synth", "seed"),
    "decompose": ("tau_threshold", "standardize", "pca_keep"),
    "persistence": ("delay_r", "delay_eps", "field_prime", "rho", "alpha", "landmarks"),
    "metric": ("w_lin", "w_circ", "missing_penalty", "metric_grid"),
    "cluster": ("clusters",),
    "mogp": ("lambda1", "lambda2", "grid_file", "gp_detrend", "times", "task"),
}


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class PipelineConfig:
    input: str | None = None
    output: str = "out"
    header: bool | None = None  # None: detect
    delimiter: str = ","
    detrend: bool = True
    synth: tuple | None = None  # (n, t_max, noise_std, seed)
    seed: int = 0
    tau_threshold: float = 0.5
    standardize: bool = False
    pca_keep: str = "all"  # "all", a count, or a variance fraction in (0, 1)
    delay_r: int = 20
    delay_eps: int = 1
    field_prime: int = 47
    rho: float = 0.5
    alpha: float = 0.25
    landmarks: int = 256
    w_lin: float = 1.0
    w_circ: float = 1.0
    missing_penalty: float = 1.0
    metric_grid: int = 256
    clusters: int = 2
    lambda1: float = 1.0
    lambda2: float = 1.0
    grid_file: str | None = None
    gp_detrend: bool = True
    times: str | None = None  # "a,b,c" or "start:stop:count"; default training times
    task: str = "0"  # index or channel name

    def __post_init__(self):
        checks = [
            (0.0 < self.tau_threshold < 1.0, "tau_threshold must lie in (0, 1)"),
            (self.delay_r >= 1, "delay_r must be >= 1"),
            (self.delay_eps >= 1, "delay_eps must be >= 1"),
            (_is_prime(self.field_prime), "field_prime must be prime"),
            (0.0 <= self.rho <= 1.0, "rho must lie in [0, 1]"),
            (self.alpha >= 0.0, "alpha must be non-negative"),
            (self.landmarks >= 3, "landmarks must be >= 3"),
            (self.w_lin >= 0 and self.w_circ >= 0 and self.w_lin + self.w_circ > 0,
             "metric weights must be non-negative and not both zero"),
            (self.missing_penalty >= 0, "missing_penalty must be non-negative"),
            (self.metric_grid >= 2, "metric_grid must be >= 2"),
            (self.clusters >= 1, "clusters must be >= 1"),
            (self.lambda1 > 0 and self.lambda2 > 0, "lambda1 and lambda2 must be positive"),
            (len(self.delimiter) == 1, "delimiter must be a single character"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        self.pca_keep_value  # validates
        if self.synth is not None:
            n, t_max, std, _ = self.synth
            if n < 3 or t_max <= 0 or std < 0:
                raise ConfigError("synth needs n >= 3, t_max > 0, std >= 0")

    @property
    def pca_keep_value(self):
        """``("all", None)``, ``(count, None)`` or ``("all", fraction)``."""
        raw = str(self.pca_keep).strip()
        if raw == "all":
            return "all", None
        try:
            v = float(raw)
        except ValueError:
            raise ConfigError(f"pca_keep must be 'all', a count or a fraction, got {raw!r}") from None
        if 0.0 < v < 1.0:
            return "all", v
        if v >= 1 and v == int(v):
            return int(v), None
        raise ConfigError(f"pca_keep must be 'all', a count or a fraction, got {raw!r}")

    def replace(self, **changes) -> "PipelineConfig":
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    @property
    def out_dir(self) -> Path:
        return Path(self.output)


def parse_synth(text: str) -> tuple:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) not in (3, 4):
        raise ConfigError("synth expects n,tmax,std[,seed]")
    try:
        n, t_max, std = int(parts[0]), float(parts[1]), float(parts[2])
        seed = int(parts[3]) if len(parts) == 4 else None
    except ValueError:
        raise ConfigError(f"cannot parse synth parameters {text!r}") from None
    return n, t_max, std, seed


def _coerce(name: str, raw: str):
    field = {f.name: f for f in dataclasses.fields(PipelineConfig)}[name]
    kind = str(field.type)
    raw = raw.strip()
    try:
        if name == "synth":
            return parse_synth(raw)
        if name == "header":
            return None if raw.lower() in ("auto", "") else _bool(raw)
        if kind.startswith("bool"):
            return _bool(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw or None if "None" in kind else raw


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def read_ini(path) -> dict:
    """Keys from a sectioned INI file, validated against :data:`SECTIONS`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _coerce(key, raw)
    return values


def load_config(path=None, **overrides) -> PipelineConfig:
    """File values first, then ``overrides`` (entries equal to None are ignored)."""
    values = read_ini(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
