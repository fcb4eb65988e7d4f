"""Relay channel construction for both phase-shifter structures, channel
stacking and the RIS-style additive baseline."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Structure(enum.Enum):
    """Relay architecture at the collaborating device."""

    S1 = "s1"  # one phase shifter per parallel chain (multiplexing)
    S2 = "s2"  # combiner + single chain + splitter (diversity)

    @classmethod
    def parse(cls, value) -> "Structure":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("structure", "s").replace("_", "")
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown structure {value!r}")


def phases(levels, q: int) -> np.ndarray:
    """Unit-modulus coefficients exp(j 2 pi k / q) for integer levels k."""
    return np.exp(2j * np.pi * np.asarray(levels) / q)


@dataclass(frozen=True)
class PhaseConfig:
    """Discrete phase-shifter state.

    Structure 1 uses ``s1_levels``; Structure 2 uses ``r_levels`` (combiner)
    and ``t_levels`` (splitter). Level k maps to phase 2 pi k / q.
    """

    kind: Structure
    q: int
    s1_levels: tuple[int, ...] | None = None
    r_levels: tuple[int, ...] | None = None
    t_levels: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.kind is Structure.S1:
            if self.s1_levels is None or self.r_levels is not None or self.t_levels is not None:
                raise ValueError("Structure 1 config takes s1_levels only")
            blocks = [self.s1_levels]
        else:
            if self.r_levels is None or self.t_levels is None or self.s1_levels is not None:
                raise ValueError("Structure 2 config takes r_levels and t_levels")
            if len(self.r_levels) != len(self.t_levels):
                raise ValueError("r_levels and t_levels must have equal length")
            blocks = [self.r_levels, self.t_levels]
        for block in blocks:
            if any(not 0 <= int(k) < self.q for k in block):
                raise ValueError(f"level out of range [0, {self.q}): {block}")
        for name in ("s1_levels", "r_levels", "t_levels"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(int(k) for k in value))

    @classmethod
    def structure1(cls, levels, q: int) -> "PhaseConfig":
        return cls(Structure.S1, q, s1_levels=tuple(levels))

    @classmethod
    def structure2(cls, r_levels, t_levels, q: int) -> "PhaseConfig":
        return cls(Structure.S2, q, r_levels=tuple(r_levels), t_levels=tuple(t_levels))

    @classmethod
    def zeros(cls, kind: Structure, nc: int, q: int) -> "PhaseConfig":
        if kind is Structure.S1:
            return cls.structure1([0] * nc, q)
        return cls.structure2([0] * nc, [0] * nc, q)

    @property
    def nc(self) -> int:
        return len(self.s1_levels if self.kind is Structure.S1 else self.r_levels)

    def as_levels(self) -> np.ndarray:
        """Flat level vector: s1 levels, or r levels followed by t levels."""
        if self.kind is Structure.S1:
            return np.array(self.s1_levels, dtype=int)
        return np.array(self.r_levels + self.t_levels, dtype=int)

    @classmethod
    def from_levels(cls, kind: Structure, levels, q: int) -> "PhaseConfig":
        levels = [int(k) for k in levels]
        if kind is Structure.S1:
            return cls.structure1(levels, q)
        nc = len(levels) // 2
        return cls.structure2(levels[:nc], levels[nc:], q)

    def label(self) -> str:
        if self.kind is Structure.S1:
            return "s1=" + ".".join(map(str, self.s1_levels))
        return "r=" + ".".join(map(str, self.r_levels)) + ";t=" + ".".join(map(str, self.t_levels))

    @classmethod
    def from_label(cls, label: str, q: int) -> "PhaseConfig":
        """Inverse of :meth:`label`."""
        parts = dict(p.split("=", 1) for p in label.strip().split(";"))

        def levels(text):
            return [int(k) for k in text.split(".")] if text else []

        if set(parts) == {"s1"}:
            return cls.structure1(levels(parts["s1"]), q)
        if set(parts) == {"r", "t"}:
            return cls.structure2(levels(parts["r"]), levels(parts["t"]), q)
        raise ValueError(f"not a config label: {label!r}")


@dataclass(frozen=True)
class RelayParams:
    """LNA power gain ``rho`` and the Structure-2 power normalization switch."""

    rho: float = 1.0
    structure: Structure = Structure.S1
    power_normalization: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


def _check_relay_dims(hp, hc, nc):
    if hp.shape[1] != hc.shape[0]:
        raise ValueError(f"hp {hp.shape} and hc {hc.shape} are not chainable")
    if hp.shape[1] != nc:
        raise ValueError(f"config has {nc} phase shifters but the relay has {hp.shape[1]} chains")


def build_h2_structure1(hp: np.ndarray, hc: np.ndarray, cfg: PhaseConfig, params: RelayParams) -> np.ndarray:
    """sqrt(rho) Hp diag(phi_s1) Hc."""
    if cfg.kind is not Structure.S1:
        raise ValueError("build_h2_structure1 needs a Structure 1 config")
    _check_relay_dims(hp, hc, cfg.nc)
    return relay_s1(hp, hc, phases(cfg.s1_levels, cfg.q), params)


def relay_s1(hp: np.ndarray, hc: np.ndarray, phi: np.ndarray, params: RelayParams) -> np.ndarray:
    """Structure 1 relay channel for arbitrary (continuous) phase coefficients."""
    return math.sqrt(params.rho) * (hp * np.asarray(phi)[None, :]) @ hc


def structure2_scale(nc: int, params: RelayParams) -> float:
    """Frobenius power normalization: ||c phi_t phi_r^H||_F = sqrt(nc)."""
    return 1.0 / math.sqrt(nc) if params.power_normalization else 1.0


def build_h2_structure2(hp: np.ndarray, hc: np.ndarray, cfg: PhaseConfig, params: RelayParams) -> np.ndarray:
    """sqrt(rho) c Hp phi_t phi_r^H Hc; always rank one."""
    if cfg.kind is not Structure.S2:
        raise ValueError("build_h2_structure2 needs a Structure 2 config")
    _check_relay_dims(hp, hc, cfg.nc)
    return relay_s2(hp, hc, phases(cfg.r_levels, cfg.q), phases(cfg.t_levels, cfg.q), params)


def relay_s2(hp: np.ndarray, hc: np.ndarray, phi_r: np.ndarray, phi_t: np.ndarray,
             params: RelayParams) -> np.ndarray:
    """Structure 2 relay channel for arbitrary (continuous) combiner/splitter phases."""
    c = structure2_scale(len(phi_t), params)
    return math.sqrt(params.rho) * c * np.outer(hp @ phi_t, np.conj(phi_r) @ hc)


def quantize(phi: np.ndarray, q: int) -> np.ndarray:
    """Nearest discrete level for each unit-modulus coefficient."""
    return np.mod(np.rint(np.angle(phi) / (2 * np.pi / q)).astype(int), q)


def build_h2(hp, hc, cfg: PhaseConfig, params: RelayParams) -> np.ndarray:
    if cfg.kind is Structure.S1:
        return build_h2_structure1(hp, hc, cfg, params)
    return build_h2_structure2(hp, hc, cfg, params)


def stack_channel(h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """Composite channel [H1; H2]."""
    h1 = np.asarray(h1)
    h2 = np.asarray(h2)
    if h2.size == 0 and h2.ndim < 2:
        h2 = h2.reshape(0, h1.shape[1])
    if h1.shape[1] != h2.shape[1]:
        raise ValueError(f"column mismatch: {h1.shape} vs {h2.shape}")
    return np.vstack([h1, h2])


def ris_additive_channel(h1: np.ndarray, a, hrow) -> np.ndarray:
    """H1 + a h', a rank-one additive perturbation."""
    a = np.asarray(a).reshape(-1)
    hrow = np.asarray(hrow).reshape(-1)
    if a.shape[0] != h1.shape[0] or hrow.shape[0] != h1.shape[1]:
        raise ValueError(f"a ({a.shape[0]}) and h' ({hrow.shape[0]}) do not fit H1 {h1.shape}")
    return h1 + np.outer(a, hrow)


def ris_channel(h1: np.ndarray, g: np.ndarray, hc: np.ndarray, cfg: PhaseConfig, rho: float = 1.0) -> np.ndarray:
    """Same-band active reflector: H1 + sqrt(rho) G diag(phi) Hc.

    This is the Structure 1 chain without frequency translation, so the relay
    path adds onto the direct link instead of appending rows; it is a sum of
    rank-one additive terms of the ``ris_additive_channel`` kind.
    """
    if cfg.kind is not Structure.S1:
        raise ValueError("the RIS baseline uses per-element (Structure 1) phases")
    phi = phases(cfg.s1_levels, cfg.q)
    return h1 + math.sqrt(rho) * (g * phi[None, :]) @ hc
