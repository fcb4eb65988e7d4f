"""Link evaluation: spectral efficiency and its decomposition, average SNR,
and the rank-indicator / throughput proxies.

SE is exact (log2 det(I + H H^H) under identity transmit covariance and unit
noise). RI and TP are simplified stand-ins for the NR CQI/RI procedure and are
always labelled ``proxy`` in experiment outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# 256-QAM, code rate 948/1024
MAX_LAYER_SE = 7.4063
DEFAULT_OVERHEAD = 0.14


@dataclass
class LinkReport:
    snr_db: float
    se_bps_hz: float
    ri: int
    tp_mbps: float
    se_base: float
    se_gain: float


def spectral_efficiency(h: np.ndarray) -> float:
    """sum_i log2(1 + sigma_i^2) over the singular values of ``h``."""
    h = np.asarray(h)
    if h.size == 0:
        return 0.0
    s = np.linalg.svd(h, compute_uv=False)
    return float(np.log2(1.0 + s ** 2).sum())


def batch_spectral_efficiency(h: np.ndarray) -> np.ndarray:
    """log2 det(I + H^H H) for a stack of matrices of shape (..., N, M)."""
    h = np.asarray(h)
    m = h.shape[-1]
    gram = np.swapaxes(h.conj(), -1, -2) @ h
    gram = gram + np.eye(m)
    _, logdet = np.linalg.slogdet(gram)
    return logdet / math.log(2.0)


def se_decomposition(h1: np.ndarray, h2: np.ndarray) -> tuple[float, float]:
    """Split SE([H1; H2]) into the direct-link SE and the relay gain.

    base = sum log2(1 + sigma_m^2(H1)),
    gain = log2 det(I + H2' (I + D^2)^-1 H2'^H) with H2' = H2 V_H1.
    """
    h1 = np.asarray(h1)
    h2 = np.atleast_2d(np.asarray(h2))
    if h1.shape[1] != h2.shape[1]:
        raise ValueError(f"column mismatch: {h1.shape} vs {h2.shape}")
    m = h1.shape[1]
    _, s, vh = np.linalg.svd(h1)
    d2 = np.zeros(m)
    d2[: len(s)] = s ** 2
    base = float(np.log2(1.0 + d2).sum())
    if h2.shape[0] == 0:
        return base, 0.0
    whitened = (h2 @ vh.conj().T) / np.sqrt(1.0 + d2)[None, :]
    sw = np.linalg.svd(whitened, compute_uv=False)
    return base, float(np.log2(1.0 + sw ** 2).sum())


def average_snr(h: np.ndarray, total_power_normalized: bool = False) -> float:
    """Per-receive-antenna SNR in dB, averaged in linear power over the rows.

    By default the transmit covariance is the identity (total power M), the
    same convention as :func:`spectral_efficiency`, so the received power on
    row n is ||h_n||^2. With ``total_power_normalized`` the transmit power is
    split as I/M and the row power becomes ||h_n||^2 / M.
    """
    h = np.asarray(h)
    power = float(np.mean(np.sum(np.abs(h) ** 2, axis=1)))
    if total_power_normalized:
        power /= h.shape[1]
    if power <= 0:
        return -math.inf
    return 10.0 * math.log10(power)


def _equal_split_rates(s: np.ndarray, m: int) -> np.ndarray:
    """Sum rate over the r strongest modes with power M/r each, for r = 1..len(s)."""
    s2 = s ** 2
    r = np.arange(1, len(s) + 1)
    share = m / r
    # rates[r-1] = sum_{i<r} log2(1 + s2_i * m / r)
    table = np.log2(1.0 + s2[None, :] * share[:, None])
    mask = np.arange(len(s))[None, :] < r[:, None]
    return (table * mask).sum(1)


def rank_indicator(h: np.ndarray) -> int:
    """Number of layers that maximises the equal-power-split sum rate (proxy RI).

    The transmit power M (columns of ``h``) is spread evenly over the r
    strongest eigenmodes; ties go to the smaller r.
    """
    h = np.asarray(h)
    s = np.linalg.svd(h, compute_uv=False)
    if len(s) == 0:
        return 1
    rates = _equal_split_rates(s, h.shape[1])
    best = rates.max()
    return int(np.flatnonzero(rates >= best - 1e-12 * max(1.0, abs(best)))[0] + 1)


def layer_se(h: np.ndarray, ri: int | None = None) -> np.ndarray:
    """Per-layer SE log2(1 + sigma_i^2 M / ri) of the ``ri`` strongest modes."""
    h = np.asarray(h)
    if ri is None:
        ri = rank_indicator(h)
    s = np.linalg.svd(h, compute_uv=False)[:ri]
    return np.log2(1.0 + s ** 2 * h.shape[1] / ri)


def throughput(se_eff, bandwidth_hz: float, overhead: float = DEFAULT_OVERHEAD) -> float:
    """Throughput in Mbps, se * bandwidth * (1 - overhead) / 1e6 (proxy TP).

    A scalar ``se_eff`` is taken as the already-aggregated SE. A sequence is
    read as per-layer SEs, each capped at :data:`MAX_LAYER_SE` before summing.
    """
    if not 0 <= overhead < 1:
        raise ValueError(f"overhead must be in [0, 1), got {overhead}")
    if np.ndim(se_eff) == 0:
        total = float(se_eff)
    else:
        total = float(np.minimum(np.asarray(se_eff, dtype=float), MAX_LAYER_SE).sum())
    return total * bandwidth_hz * (1.0 - overhead) / 1e6


def link_report(h1: np.ndarray, h2: np.ndarray | None, bandwidth_hz: float = 100e6,
                overhead: float = DEFAULT_OVERHEAD) -> LinkReport:
    """All evaluation quantities for the composite channel [h1; h2]."""
    h1 = np.asarray(h1)
    h2 = np.zeros((0, h1.shape[1]), dtype=complex) if h2 is None else np.atleast_2d(h2)
    h = np.vstack([h1, h2])
    base, gain = se_decomposition(h1, h2)
    ri = rank_indicator(h)
    return LinkReport(
        snr_db=average_snr(h),
        se_bps_hz=spectral_efficiency(h),
        ri=ri,
        tp_mbps=throughput(layer_se(h, ri), bandwidth_hz, overhead),
        se_base=base,
        se_gain=gain,
    )
