"""Statistical channel generation for the direct, first-hop and relay links.

All matrices are dense ``complex128`` numpy arrays. Rows index receive
antennas, columns index transmit antennas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class InvalidGeometryError(ValueError):
    """Raised when antenna coordinates or wavelengths are unusable."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna element positions (meters) and the reference wavelength."""

    element_positions: np.ndarray
    wavelength: float

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise InvalidGeometryError(f"expected an (n, 3) position array, got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise InvalidGeometryError("element positions must be finite")
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise InvalidGeometryError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "element_positions", pos)

    @property
    def size(self) -> int:
        return self.element_positions.shape[0]

    @property
    def aperture(self) -> float:
        """Largest distance between two elements (0 for a single element)."""
        pos = self.element_positions
        if len(pos) < 2:
            return 0.0
        diff = pos[:, None, :] - pos[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())


def ula(n: int, center: Sequence[float], wavelength: float, spacing: float | None = None,
        axis: Sequence[float] = (1.0, 0.0, 0.0)) -> ArrayGeometry:
    """Uniform linear array of ``n`` elements centred at ``center``.

    Args:
        n: number of elements.
        center: array centre in meters.
        wavelength: reference wavelength in meters.
        spacing: element spacing in meters, half a wavelength by default.
        axis: direction of the array line (normalised internally).
    """
    if n < 1:
        raise InvalidGeometryError("an array needs at least one element")
    if spacing is None:
        spacing = wavelength / 2
    direction = np.asarray(axis, dtype=float)
    direction = direction / np.linalg.norm(direction)
    offsets = (np.arange(n) - (n - 1) / 2) * spacing
    positions = np.asarray(center, dtype=float)[None, :] + offsets[:, None] * direction[None, :]
    return ArrayGeometry(positions, wavelength)


@dataclass(frozen=True)
class RicianSpec:
    """Rician K-factor, RNG seed and matrix dimensions for one link.

    ``kappa = math.inf`` is the pure line-of-sight case.
    """

    kappa: float
    seed: int
    dims: tuple[int, int]

    def __post_init__(self):
        if math.isnan(self.kappa) or self.kappa < 0:
            raise ValueError(f"kappa must be >= 0 or inf, got {self.kappa}")
        rows, cols = self.dims
        if rows < 1 or cols < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")


@dataclass
class LinkSet:
    """Direct link ``h1`` (N1 x M), first hop ``hc`` (Nc x M) and relay hop ``hp`` (N2 x Nc)."""

    h1: np.ndarray
    hc: np.ndarray
    hp: np.ndarray
    snr_db: float = 20.0
    bands: dict = field(default_factory=lambda: {"h1": "f_L", "hc": "f_L", "hp": "f_H"})

    def __post_init__(self):
        if self.h1.shape[1] != self.hc.shape[1]:
            raise ValueError(f"h1 and hc must share the BS dimension: {self.h1.shape} vs {self.hc.shape}")
        if self.hp.shape[1] != self.hc.shape[0]:
            raise ValueError(f"hp columns must equal hc rows: {self.hp.shape} vs {self.hc.shape}")


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (trial, link, ...) index path under one master seed.

    The path is used as the ``spawn_key`` of a :class:`numpy.random.SeedSequence`,
    so streams do not depend on the order in which they are created.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with unit total variance."""
    scale = math.sqrt(0.5)
    return rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape)


def los_matrix(tx: ArrayGeometry, rx: ArrayGeometry, wavelength: float) -> np.ndarray:
    """Spherical-wavefront LOS matrix, entry (n, m) = exp(-j 2 pi d_nm / wavelength).

    ``d_nm`` is the distance from transmit element m to receive element n.
    """
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise InvalidGeometryError(f"wavelength must be positive, got {wavelength}")
    diff = rx.element_positions[:, None, :] - tx.element_positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    return np.exp(-2j * np.pi * dist / wavelength)


def rician_sample(spec: RicianSpec, los: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw sqrt(1/(k+1)) H_iid + sqrt(k/(k+1)) H_los.

    When ``rng`` is omitted a generator seeded from ``spec.seed`` is used, so the
    same (spec, los) pair always gives the same matrix.
    """
    los = np.asarray(los, dtype=complex)
    if los.shape != tuple(spec.dims):
        raise ValueError(f"LOS matrix shape {los.shape} does not match spec dims {spec.dims}")
    if math.isinf(spec.kappa):
        return los.copy()
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    iid = complex_gaussian(rng, los.shape)
    if spec.kappa == 0:
        return iid
    k = spec.kappa
    return math.sqrt(1.0 / (k + 1.0)) * iid + math.sqrt(k / (k + 1.0)) * los


def free_space_path_loss(d: float, wavelength: float) -> float:
    """Linear free-space power gain (wavelength / (4 pi d))^2."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return (wavelength / (4.0 * math.pi * d)) ** 2


def wavelength_of(freq_hz: float) -> float:
    return SPEED_OF_LIGHT / freq_hz


def apply_snr_scaling(h1: np.ndarray, hc: np.ndarray, snr_db: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale both first-hop matrices by sqrt(gamma / M).

    With unit-variance entries, identity transmit covariance and unit noise,
    the expected per-antenna SNR on ``h1`` is then ``gamma = 10**(snr_db/10)``.
    The relay hop is deliberately left untouched.
    """
    m = h1.shape[1]
    scale = math.sqrt(10.0 ** (snr_db / 10.0) / m)
    return h1 * scale, hc * scale


def fraunhofer_distance(aperture: float, wavelength: float) -> float:
    """Far-field boundary 2 D^2 / wavelength."""
    if not (aperture > 0 and wavelength > 0):
        raise ValueError("aperture and wavelength must be positive")
    return 2.0 * aperture ** 2 / wavelength
