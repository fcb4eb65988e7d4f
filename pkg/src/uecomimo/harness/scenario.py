"""Scenario description, flat config files and per-trial channel draws."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from uecomimo.channel import (
    LinkSet,
    RicianSpec,
    apply_snr_scaling,
    derive_rng,
    free_space_path_loss,
    los_matrix,
    rician_sample,
    ula,
    wavelength_of,
)
from uecomimo.composite import Structure
from uecomimo.optimize import DEFAULT_BUDGET, Algorithm, Order

# spawn-key link ids
LINK_H1, LINK_HC, LINK_HP, LINK_G, LINK_BENCH = range(5)


class ConfigError(ValueError):
    """Bad scenario file or field value."""


@dataclass
class ScenarioSpec:
    """Everything needed to regenerate an experiment bit for bit.

    Positions are in units of the high-band wavelength except ``bs_position``,
    which is in low-band wavelengths. ``distances`` are in meters.
    """

    m: int = 4
    n1: int = 4
    n2: int = 4
    nc: int = 4
    co_ue_position: tuple = (10.0, 10.0, 10.0)
    kappas: tuple = (0.0, 0.0, math.inf)
    snr_db: float = 20.0
    snr_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    distances: tuple = (0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0)
    q: int = 8
    structure: Structure = Structure.S2
    algorithm: Algorithm = Algorithm.BG
    order: Order = Order.T_FIRST
    rounds: int = 2
    rms_trials: int = 8
    trials: int = 1000
    seed: int = 0
    path_loss: bool = False
    rho: float = 1.0
    power_normalization: bool = True
    f_low_hz: float = 3.65e9
    f_high_hz: float = 7.65e9
    bs_position: tuple = (200.0, 0.0, 0.0)
    bandwidth_hz: float = 100e6
    overhead: float = 0.14
    max_evaluations: int = DEFAULT_BUDGET

    def __post_init__(self):
        self.structure = Structure.parse(self.structure)
        self.algorithm = Algorithm(self.algorithm) if not isinstance(self.algorithm, Algorithm) else self.algorithm
        self.order = Order.parse(self.order)
        for name in ("co_ue_position", "kappas", "snr_list", "distances", "bs_position"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("m", "n1", "n2", "nc", "q", "rounds", "rms_trials", "trials", "max_evaluations"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if len(self.co_ue_position) != 3 or not all(map(math.isfinite, self.co_ue_position)):
            raise ConfigError(f"co_ue_position must be three finite numbers, got {self.co_ue_position}")
        if len(self.bs_position) != 3 or not all(map(math.isfinite, self.bs_position)):
            raise ConfigError(f"bs_position must be three finite numbers, got {self.bs_position}")
        if len(self.kappas) != 3 or any(math.isnan(k) or k < 0 for k in self.kappas):
            raise ConfigError(f"kappas must be three values >= 0, got {self.kappas}")
        if any(d <= 0 for d in self.distances):
            raise ConfigError("distances must be positive")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    @property
    def wavelength_low(self) -> float:
        return wavelength_of(self.f_low_hz)

    @property
    def wavelength_high(self) -> float:
        return wavelength_of(self.f_high_hz)

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "value"):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(p) for p in raw.replace(";", ",").split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str, base: ScenarioSpec | None = None) -> ScenarioSpec:
    """Read ``key = value`` lines into a spec; '#' starts a comment.

    Tuples are comma separated (``inf`` allowed). Unknown keys raise
    :class:`ConfigError`.
    """
    base = ScenarioSpec() if base is None else base
    defaults = {f.name: getattr(base, f.name) for f in fields(base)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        changes[key] = _parse_value(key, raw, defaults[key])
    return base.replace(**changes)


def load_config(path, base: ScenarioSpec | None = None) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)


@dataclass
class Geometry:
    """Array placements for one Co-UE position (meters)."""

    bs: object
    pr_low: object
    pr_high: object
    co_low: object
    co_high: object
    separation_m: float = field(default=0.0)


def geometry(spec: ScenarioSpec, co_ue_center_m=None) -> Geometry:
    """Pr-UE arrays at the origin, Co-UE arrays at its centre, BS far along ``bs_position``.

    All arrays are half-wavelength ULAs along x in their own band.
    """
    lo, hi = spec.wavelength_low, spec.wavelength_high
    if co_ue_center_m is None:
        co_ue_center_m = np.asarray(spec.co_ue_position) * hi
    center = np.asarray(co_ue_center_m, dtype=float)
    return Geometry(
        bs=ula(spec.m, np.asarray(spec.bs_position) * lo, lo),
        pr_low=ula(spec.n1, (0.0, 0.0, 0.0), lo),
        pr_high=ula(spec.n2, (0.0, 0.0, 0.0), hi),
        co_low=ula(spec.nc, center, lo),
        co_high=ula(spec.nc, center, hi),
        separation_m=float(np.linalg.norm(center)),
    )


def _draw(kappa: float, los: np.ndarray, seed: int, trial: int, link: int) -> np.ndarray:
    spec = RicianSpec(kappa, seed, los.shape)
    return rician_sample(spec, los, derive_rng(seed, trial, link))


@dataclass
class TrialChannels:
    """Channel draws for one trial before SNR scaling.

    ``g`` is the same-band reflector hop (Co-UE to Pr-UE at the low band) and
    ``bench_extra`` holds the extra rows of the larger-array benchmark.
    """

    links: LinkSet
    g: np.ndarray
    bench_extra: np.ndarray


def draw_trial(spec: ScenarioSpec, trial: int, geo: Geometry | None = None) -> TrialChannels:
    """Unit-power channels for ``trial``; a pure function of (spec, trial)."""
    geo = geometry(spec) if geo is None else geo
    k1, kc, kp = spec.kappas
    lo, hi = spec.wavelength_low, spec.wavelength_high
    h1 = _draw(k1, los_matrix(geo.bs, geo.pr_low, lo), spec.seed, trial, LINK_H1)
    hc = _draw(kc, los_matrix(geo.bs, geo.co_low, lo), spec.seed, trial, LINK_HC)
    hp = _draw(kp, los_matrix(geo.co_high, geo.pr_high, hi), spec.seed, trial, LINK_HP)
    g = _draw(kp, los_matrix(geo.co_low, geo.pr_low, lo), spec.seed, trial, LINK_G)
    extra = ula(spec.n2, (spec.n1 * lo / 2, 0.0, 0.0), lo)
    bench = _draw(k1, los_matrix(geo.bs, extra, lo), spec.seed, trial, LINK_BENCH)
    if spec.path_loss:
        d = max(geo.separation_m, 1e-9)
        hp = hp * math.sqrt(free_space_path_loss(d, hi))
        g = g * math.sqrt(free_space_path_loss(d, lo))
    return TrialChannels(LinkSet(h1, hc, hp), g, bench)


def scaled(channels: TrialChannels, snr_db: float) -> TrialChannels:
    """Apply the transmit SNR to every link that leaves the base station."""
    links = channels.links
    h1, hc = apply_snr_scaling(links.h1, links.hc, snr_db)
    _, bench = apply_snr_scaling(links.h1, channels.bench_extra, snr_db)
    return TrialChannels(LinkSet(h1, hc, links.hp, snr_db=snr_db), channels.g, bench)
