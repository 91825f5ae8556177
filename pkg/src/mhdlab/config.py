"""
Run configuration: INI schema, validation and lossless serialization.

Sections and keys (defaults in brackets)::

    [domain]      n [2], N [64], regime (viscous | resistive)
    [background]  bfield [golden], r [n - 1 + 0.1], K_cert [256]
    [initial]     m [regime threshold], eps [1e-3], seed [0],
                  sigma [m + n/2 + 1], s_list [0, 1, ..., m]
    [time]        t_final, cfl_number [0.4], max_dt [0.05], dt [adaptive],
                  linear_only [false], stride [0.05], per_decade [25],
                  t_first [0.01]
    [output]      directory [.], series [series.csv],
                  checkpoint [checkpoint.bin], manifest [manifest.json],
                  checkpoint_every [10]
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, replace

from .diophantine import resolve_bfield
from .linear import Regime

__all__ = ["RunConfig", "ConfigError", "parse_config", "default_m"]


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def default_m(regime, n: int, r: float) -> int:
    """Smallest integer above the regime's regularity threshold.

    Resistive runs need ``m > 4 + 2r + n/2``, viscous ones ``m > 3 + 2r + n/2``.
    """
    base = 4 if Regime.parse(regime) is Regime.RESISTIVE else 3
    return math.floor(base + 2 * r + n / 2) + 1


@dataclass(frozen=True)
class RunConfig:
    regime: Regime
    t_final: float
    n: int = 2
    N: int = 64
    bfield: str = "golden"
    r: float | None = None
    K_cert: int = 256
    m: int | None = None
    eps: float = 1e-3
    seed: int = 0
    sigma: float | None = None
    s_list: tuple | None = None
    cfl_number: float = 0.4
    max_dt: float = 0.05
    dt: float | None = None
    linear_only: bool = False
    stride: float = 0.05
    per_decade: int = 25
    t_first: float = 0.01
    directory: str = "."
    series: str = "series.csv"
    checkpoint: str = "checkpoint.bin"
    manifest: str = "manifest.json"
    checkpoint_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        if self.s_list is not None:
            object.__setattr__(self, "s_list", tuple(self.s_list))

    def filled(self) -> RunConfig:
        """Copy with every derived default made explicit."""
        r = round(self.n - 1 + 0.1, 12) if self.r is None else self.r
        m = default_m(self.regime, self.n, r) if self.m is None else self.m
        sigma = m + self.n / 2 + 1 if self.sigma is None else self.sigma
        s_list = tuple(range(m + 1)) if self.s_list is None else tuple(self.s_list)
        return replace(self, r=r, m=m, sigma=sigma, s_list=s_list)

    def to_text(self) -> str:
        """INI text that :func:`parse_config` maps back to an equal config."""
        out = []
        for section, keys in _SECTIONS.items():
            out.append(f"[{section}]")
            for key in keys:
                v = getattr(self, key)
                if v is None:
                    continue
                out.append(f"{key} = {_format(v)}")
            out.append("")
        return "\n".join(out)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        if d["s_list"] is not None:
            d["s_list"] = list(d["s_list"])
        return d


_SECTIONS = {
    "domain": ("n", "N", "regime"),
    "background": ("bfield", "r", "K_cert"),
    "initial": ("m", "eps", "seed", "sigma", "s_list"),
    "time": ("t_final", "cfl_number", "max_dt", "dt", "linear_only", "stride", "per_decade",
             "t_first"),
    "output": ("directory", "series", "checkpoint", "manifest", "checkpoint_every"),
}

_INTS = {"n", "N", "K_cert", "m", "seed", "per_decade", "checkpoint_every"}
_FLOATS = {"r", "eps", "sigma", "t_final", "cfl_number", "max_dt", "dt", "stride", "t_first"}


def _format(v) -> str:
    if isinstance(v, Regime):
        return v.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    return str(v)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "regime":
        return Regime.parse(raw)
    if key in _INTS:
        return int(raw)
    if key in _FLOATS:
        return float(raw)
    if key == "linear_only":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if key == "s_list":
        items = [x for x in raw.replace(",", " ").split() if x]
        vals = tuple(float(x) for x in items)
        return tuple(int(v) if v.is_integer() else v for v in vals)
    return raw


def _validate(c: RunConfig) -> list:
    v = []
    if c.n not in (2, 3):
        v.append(f"domain.n: dimension must be 2 or 3, got {c.n}")
    if c.N < 16 or c.N % 2:
        v.append(f"domain.N: grid N must be even ≥ 16, got {c.N}")
    elif c.n == 3 and c.N > 64:
        v.append(f"domain.N: 3D grids are limited to N ≤ 64, got {c.N}")
    if c.n in (2, 3):
        if c.r is not None and not c.r > c.n - 1:
            v.append(f"background.r: exponent must exceed n - 1 = {c.n - 1}, got {c.r}")
        try:
            resolve_bfield(c.bfield, c.n, c.r if c.r is not None and c.r > c.n - 1 else None)
        except ValueError as exc:
            v.append(f"background.bfield: {exc}")
    if c.K_cert < 1:
        v.append(f"background.K_cert: certification radius must be ≥ 1, got {c.K_cert}")
    if c.m is not None and c.m < 0:
        v.append(f"initial.m: must be ≥ 0, got {c.m}")
    if not (c.eps >= 0 and math.isfinite(c.eps)):
        v.append(f"initial.eps: amplitude must be finite and ≥ 0, got {c.eps}")
    if c.seed < 0:
        v.append(f"initial.seed: must be ≥ 0, got {c.seed}")
    if c.sigma is not None and not math.isfinite(c.sigma):
        v.append(f"initial.sigma: must be finite, got {c.sigma}")
    if c.s_list is not None:
        if not c.s_list:
            v.append("initial.s_list: must not be empty")
        m = c.m
        if m is None and c.n in (2, 3) and (c.r is None or c.r > c.n - 1):
            m = default_m(c.regime, c.n, c.r if c.r is not None else c.n - 0.9)
        for s in c.s_list:
            if s < 0 or (m is not None and s > m):
                v.append(f"initial.s_list: order {s} outside [0, m = {m}]")
    if not (c.t_final >= 0 and math.isfinite(c.t_final)):
        v.append(f"time.t_final: must be finite and ≥ 0, got {c.t_final}")
    if not c.cfl_number > 0:
        v.append(f"time.cfl_number: must be > 0, got {c.cfl_number}")
    if not c.max_dt > 0:
        v.append(f"time.max_dt: must be > 0, got {c.max_dt}")
    if c.dt is not None and not c.dt > 0:
        v.append(f"time.dt: must be > 0, got {c.dt}")
    if not c.stride > 0:
        v.append(f"time.stride: must be > 0, got {c.stride}")
    if c.per_decade < 0:
        v.append(f"time.per_decade: must be ≥ 0, got {c.per_decade}")
    if not c.t_first > 0:
        v.append(f"time.t_first: must be > 0, got {c.t_first}")
    if c.checkpoint_every < 1:
        v.append(f"output.checkpoint_every: must be ≥ 1, got {c.checkpoint_every}")
    return v


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate INI text.

    Args:
        text: configuration in the documented schema.
        overrides: field values applied before validation (e.g. a seed override).

    Returns:
        The validated config with derived defaults filled in.

    Raises:
        ConfigError: listing every violation found.
    """
    cp = configparser.ConfigParser(strict=True, interpolation=None, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError([f"line {exc.lineno}: duplicate key '{exc.option}' in [{exc.section}]"])
    except configparser.DuplicateSectionError as exc:
        raise ConfigError([f"line {exc.lineno}: duplicate section [{exc.section}]"])
    except configparser.Error as exc:
        raise ConfigError([f"malformed configuration: {exc}"])

    violations, values = [], {}
    for section in cp.sections():
        if section not in _SECTIONS:
            violations.append(f"{section}: unknown section")
            continue
        for key, raw in cp.items(section):
            path = f"{section}.{key}"
            if key not in _SECTIONS[section]:
                violations.append(f"{path}: unknown key")
                continue
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                violations.append(f"{path}: {exc}")
    values.update(overrides or {})
    for key, section in (("regime", "domain"), ("t_final", "time")):
        if key not in values:
            violations.append(f"{section}.{key}: required")
    if violations:
        raise ConfigError(violations)
    cfg = RunConfig(**values)
    violations = _validate(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg.filled()
