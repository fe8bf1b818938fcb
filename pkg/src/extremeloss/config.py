"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Keys are either
top-level (``seed``, ``a``, ``test_months`` ...) or prefixed with the
section they configure (``gbdt.n_rounds``, ``mlp.epochs``,
``synth.noise_std``, ``sweep.a_values``).  Unknown keys are an error.

Example::

    model = gbdt
    a = 0.9
    test_months = 2018-08,2019-02
    gbdt.n_rounds = 100
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .gbdt import GbdtParams
from .loss import LossConfig
from .mlp import MlpParams
from .synth import SynthConfig

DEFAULT_TEST_MONTHS = ((2018, 8), (2019, 2))
DEFAULT_A_VALUES = (0.5, 0.7, 0.9)


def derive_seed(seed: int, label: str) -> int:
    """Stable 32-bit child seed of ``seed`` for the named consumer."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=[int(b) for b in label.encode()])
    return int(ss.generate_state(1)[0])


def parse_months(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            year, month = part.split("-")
            y, m = int(year), int(month)
        except ValueError:
            raise ConfigError(f"bad month {part!r}; expected YYYY-MM") from None
        if not 1 <= m <= 12:
            raise ConfigError(f"bad month {part!r}")
        out.append((y, m))
    return tuple(out)


def format_months(months) -> str:
    return ",".join(f"{y:04d}-{m:02d}" for y, m in months)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(value: str, like, name):
    try:
        if isinstance(like, bool):
            return _parse_bool(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, tuple):
            items = [v.strip() for v in value.split(",") if v.strip()]
            kind = type(like[0]) if like else float
            return tuple(kind(v) for v in items)
        return value.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r}") from None


@dataclass
class RunConfig:
    input: str | None = None
    out: str | None = None
    model: str = "gbdt"
    baseline: bool = False
    seed: int = 0
    test_months: tuple = DEFAULT_TEST_MONTHS
    a_values: tuple = DEFAULT_A_VALUES
    t_high: float = 30.0
    t_low: float = 10.0
    a: float = 0.9
    w_high: float | None = None
    w_low: float | None = None
    gbdt: dict = field(default_factory=dict)
    mlp: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("gbdt", "mlp"):
            raise ConfigError(f"model must be gbdt or mlp, got {self.model!r}")
        self.loss_config()
        self.gbdt_params()
        self.mlp_params()
        self.synth_config()

    def loss_config(self) -> LossConfig:
        return LossConfig(self.t_high, self.t_low, self.a, self.w_high, self.w_low)

    def gbdt_params(self) -> GbdtParams:
        return GbdtParams(**self.gbdt)

    def mlp_params(self) -> MlpParams:
        kw = {"seed": derive_seed(self.seed, "mlp"), **self.mlp}
        return MlpParams(**kw)

    def synth_config(self) -> SynthConfig:
        kw = {"seed": derive_seed(self.seed, "synth"), **self.synth}
        return SynthConfig(**kw)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {"gbdt": GbdtParams, "mlp": MlpParams, "synth": SynthConfig}
_TOP = {f.name: f for f in fields(RunConfig) if f.name not in _SECTIONS}
_ALIASES = {"sweep.a_values": "a_values"}


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    top = {}
    sections = {name: dict(getattr(base, name)) for name in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if "." in key:
            section, name = key.split(".", 1)
            cls = _SECTIONS.get(section)
            defaults = {f.name: f.default for f in fields(cls)} if cls else {}
            if name not in defaults:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            sections[section][name] = _coerce(value, defaults[name], key)
            continue
        if key not in _TOP:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key == "test_months":
            top[key] = parse_months(value)
        elif key in ("w_high", "w_low"):
            top[key] = None if value.lower() in ("", "none") else _coerce(value, 1.0, key)
        elif key in ("input", "out"):
            top[key] = value
        else:
            top[key] = _coerce(value, getattr(base, key), key)
    return dataclasses.replace(base, **top, **sections)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def format_loss_config(cfg: LossConfig) -> str:
    lines = [f"{k} = {'none' if v is None else repr(v)}" for k, v in cfg.to_dict().items()]
    return "\n".join(lines) + "\n"
