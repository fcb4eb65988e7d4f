"""Singular spectrum of the stacked channel [H1; H2] as a low-rank update of H1.

The stacked channel is reduced to a small matrix A whose Gram matrix is
``diag(poles) + H2'^H H2'`` (``reduce_tall`` / ``reduce_wide``). Its spectrum is
then obtained one row of H2' at a time by solving the secular equation

    F(x) = 1 + sum_i w_i / (d_i - x) = 0

for the rank-one update ``diag(d) + z z^H`` with ``w_i = |z_i|^2``. The
eigenbasis is carried along explicitly between rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = np.finfo(float).eps
WEIGHT_DEFLATION = 1e-14
POLE_CLUSTER = 1e-12


@dataclass(frozen=True)
class SingularSpectrum:
    """Descending, nonnegative singular values."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("singular values must be finite and nonnegative")
        if np.any(np.diff(v) > 0):
            raise ValueError("singular values must be sorted in descending order")
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, h: np.ndarray) -> "SingularSpectrum":
        return cls(np.linalg.svd(np.asarray(h), compute_uv=False))

    @classmethod
    def from_squared(cls, squared) -> "SingularSpectrum":
        sq = np.sort(np.clip(np.asarray(squared, dtype=float), 0.0, None))[::-1]
        return cls(np.sqrt(sq))

    @property
    def squared(self) -> np.ndarray:
        return self.values ** 2

    def padded(self, n: int) -> "SingularSpectrum":
        if n < len(self):
            raise ValueError("cannot pad to a shorter length")
        return SingularSpectrum(np.concatenate([self.values, np.zeros(n - len(self))]))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SecularProblem:
    """Rank-one Gram update instance: poles d_i (descending) and weights w_i = |h'_i|^2."""

    poles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.poles, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if d.shape != w.shape:
            raise ValueError("poles and weights must have equal length")
        if np.any(np.diff(d) > 0):
            raise ValueError("poles must be sorted in descending order")
        if np.any(d < 0) or np.any(w < 0):
            raise ValueError("poles and weights must be nonnegative")
        object.__setattr__(self, "poles", d)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_channels(cls, h1: np.ndarray, h2_row: np.ndarray) -> "SecularProblem":
        """Build (sigma_i^2(H1), |h2 V_H1|^2) for a single relay row, N1 >= M."""
        h1 = np.asarray(h1)
        _, s, vh = np.linalg.svd(h1)
        m = h1.shape[1]
        poles = np.zeros(m)
        poles[: len(s)] = s ** 2
        hprime = np.asarray(h2_row).reshape(-1) @ vh.conj().T
        return cls(poles, np.abs(hprime) ** 2)

    def evaluate(self, x) -> np.ndarray:
        """Secular function F at the points ``x``."""
        x = np.asarray(x, dtype=float)
        return 1.0 + (self.weights / (self.poles - x[..., None])).sum(-1)


@dataclass
class ReducedForm:
    """Compact matrix A with the same nonzero spectrum as [H1; H2].

    ``poles`` are the squared diagonal of the D_H1 block (zero-padded to the
    column count of A) and ``update_rows`` is the lower block of A, so that
    ``A^H A = diag(poles) + update_rows^H update_rows``.
    """

    a_matrix: np.ndarray
    case: str
    poles: np.ndarray
    update_rows: np.ndarray
    u_h1: np.ndarray
    v_h1: np.ndarray
    q_22: np.ndarray | None = None

    @property
    def base(self) -> SingularSpectrum:
        return SingularSpectrum(np.sqrt(self.poles))


def _check_stack(h1, h2):
    h1 = np.atleast_2d(np.asarray(h1, dtype=complex))
    h2 = np.asarray(h2, dtype=complex)
    if h2.ndim == 1:
        h2 = h2.reshape(1, -1) if h2.size else h2.reshape(0, h1.shape[1])
    if h1.shape[1] != h2.shape[1]:
        raise ValueError(f"column mismatch between H1 {h1.shape} and H2 {h2.shape}")
    return h1, h2


def reduce_tall(h1: np.ndarray, h2: np.ndarray) -> ReducedForm:
    """A = [D_H1; H2 V_H1] for N1 >= M; A is (M + N2) x M."""
    h1, h2 = _check_stack(h1, h2)
    n1, m = h1.shape
    if n1 < m:
        raise ValueError(f"reduce_tall needs N1 >= M, got N1={n1}, M={m}")
    u, s, vh = np.linalg.svd(h1)
    v = vh.conj().T
    h2p = h2 @ v
    a = np.vstack([np.diag(s).astype(complex), h2p])
    return ReducedForm(a, "tall", s ** 2, h2p, u, v)


def reduce_wide(h1: np.ndarray, h2: np.ndarray) -> ReducedForm:
    """A = [[D_H1, 0], [H'_21, R'_22]] for N1 < M.

    H'_22 = H2 V_H1,2 is factorised as R'_22 Q'_22^H with orthonormal Q'_22 and
    lower-trapezoidal R'_22 of width k = min(N2, M - N1), so A is
    (N1 + N2) x (N1 + k).
    """
    h1, h2 = _check_stack(h1, h2)
    n1, m = h1.shape
    if n1 >= m:
        raise ValueError(f"reduce_wide needs N1 < M, got N1={n1}, M={m}")
    n2 = h2.shape[0]
    u, s, vh = np.linalg.svd(h1)
    v = vh.conj().T
    h21 = h2 @ v[:, :n1]
    h22 = h2 @ v[:, n1:]
    if n2:
        q, r = np.linalg.qr(h22.conj().T)
        r22 = r.conj().T
    else:
        q = np.zeros((m - n1, 0), dtype=complex)
        r22 = np.zeros((0, 0), dtype=complex)
    k = r22.shape[1]
    top = np.hstack([np.diag(s).astype(complex), np.zeros((n1, k), dtype=complex)])
    bottom = np.hstack([h21, r22])
    poles = np.concatenate([s ** 2, np.zeros(k)])
    return ReducedForm(np.vstack([top, bottom]), "wide", poles, bottom, u, v, q)


def reduce(h1: np.ndarray, h2: np.ndarray) -> ReducedForm:
    """Dispatch to the tall or wide reduction by the shape of H1."""
    h1 = np.atleast_2d(np.asarray(h1))
    return reduce_tall(h1, h2) if h1.shape[0] >= h1.shape[1] else reduce_wide(h1, h2)


# --------------------------------------------------------------------------
# secular equation


@dataclass
class _SecularSolution:
    roots: np.ndarray  # descending, one per pole
    diffs: np.ndarray  # diffs[k, j] = d_j - root_k, computed without cancellation


def _solve_distinct(d: np.ndarray, w: np.ndarray, max_iter: int = 200) -> _SecularSolution:
    """Roots of 1 + sum w_j/(d_j - x) for strictly descending d and positive w.

    Root k lies in (d_k, d_{k-1}), the top one in (d_0, d_0 + sum w]. Each root
    is located relative to the nearer pole of its interval (the origin), and a
    safeguarded Newton iteration runs on the secular function with the two
    interval poles multiplied out. All roots are iterated together.
    """
    n = len(d)
    total = float(w.sum())
    upper = np.empty(n)
    upper[0] = d[0] + total
    upper[1:] = d[:-1]
    mid = 0.5 * (d + upper)
    f_mid = 1.0 + (w[None, :] / (d[None, :] - mid[:, None])).sum(1)
    left = f_mid >= 0
    left[0] = True
    origin = np.where(left, d, upper)
    delta = d[None, :] - origin[:, None]

    lo = np.where(left, 0.0, mid - upper)
    hi = np.where(left, mid - d, 0.0)
    hi[0] = total

    idx = np.arange(n)
    has_r = idx >= 1
    r_idx = np.maximum(idx - 1, 0)
    own = np.zeros((n, n), dtype=bool)
    own[idx, idx] = True
    own[idx[1:], idx[1:] - 1] = True
    w_rest = np.where(own, 0.0, w[None, :])
    d_l = delta[idx, idx]
    d_r = np.where(has_r, delta[idx, r_idx], 0.0)
    w_l = w
    w_r = np.where(has_r, w[r_idx], 0.0)

    tau = 0.5 * (lo + hi)
    active = np.ones(n, dtype=bool)
    tiny = np.finfo(float).tiny
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(max_iter):
            inv = 1.0 / (delta - tau[:, None])
            inv[own] = 0.0
            wi = w_rest * inv
            s = 1.0 + wi.sum(1)
            ds = (wi * inv).sum(1)
            a = d_l - tau
            b = np.where(has_r, d_r - tau, 1.0)
            p = a * b
            dp = -b - a * has_r
            g = p * s + w_l * b + w_r * a
            dg = dp * s + p * ds - (w_l + w_r) * has_r

            # p < 0 inside the interval, so F > 0 exactly when g < 0
            hit = g == 0
            hi = np.where(active & (g < 0), tau, hi)
            lo = np.where(active & (g > 0), tau, lo)
            step = g / dg
            new = tau - step
            # a Newton correction below rounding level means tau is converged
            tiny_step = np.abs(step) <= 4 * _EPS * np.maximum(np.abs(tau), tiny)
            bad = ~np.isfinite(new) | (new <= lo) | (new >= hi)
            new = np.where(bad, 0.5 * (lo + hi), new)
            new = np.where(hit | tiny_step, tau, new)
            done = hit | tiny_step | (hi - lo <= 4 * _EPS * np.maximum(np.abs(lo), np.abs(hi)))
            tau = np.where(active, new, tau)
            active &= ~done
            if not active.any():
                break

    roots = origin + tau
    diffs = delta - tau[:, None]
    return _SecularSolution(roots, diffs)


def _deflate(d: np.ndarray, a: np.ndarray):
    """Cluster near-equal poles and drop negligible weights.

    ``a`` holds the nonnegative magnitudes |z_i|. Returns the rotated
    magnitudes (deflated entries set to zero) and the orthogonal matrix G
    mapping the rotated coordinates back: z = G a_rot for the real problem.
    """
    n = len(d)
    a = a.astype(float).copy()
    rot = np.eye(n)
    scale = max(float(np.abs(d).max()) if n else 0.0, np.finfo(float).tiny)
    rep = 0
    for j in range(1, n):
        if d[rep] - d[j] <= POLE_CLUSTER * scale:
            r = np.hypot(a[rep], a[j])
            if r > 0:
                c, s = a[rep] / r, a[j] / r
                col_rep, col_j = rot[:, rep].copy(), rot[:, j].copy()
                rot[:, rep] = c * col_rep + s * col_j
                rot[:, j] = -s * col_rep + c * col_j
                a[rep], a[j] = r, 0.0
        else:
            rep = j
    total = float((a ** 2).sum())
    a[a ** 2 < WEIGHT_DEFLATION * total] = 0.0
    return a, rot


def rank_one_update(poles: np.ndarray, z: np.ndarray):
    """Eigen-decomposition of diag(poles) + c c^H where c = conj(z).

    This is the Gram update produced by appending the row ``z`` under a matrix
    whose Gram is diag(poles). Returns the new eigenvalues (descending) and the
    unitary eigenvector matrix in the coordinates of ``poles``.
    """
    d = np.asarray(poles, dtype=float)
    z = np.asarray(z, dtype=complex).reshape(-1)
    n = len(d)
    mag = np.abs(z)
    phase = np.ones(n, dtype=complex)
    nz = mag > 0
    phase[nz] = np.conj(z[nz]) / mag[nz]

    a, rot = _deflate(d, mag)
    keep = np.flatnonzero(a > 0)
    values = d.copy()
    vecs = np.eye(n)
    if len(keep):
        sol = _solve_distinct(d[keep], a[keep] ** 2)
        diffs = sol.diffs  # diffs[k, j] = d_j - root_k over the kept set
        # Gu-Eisenstat: rebuild the weights from the computed roots so the
        # eigenvectors come out numerically orthogonal.
        dk = d[keep]
        pole_gap = dk[None, :] - dk[:, None]
        np.fill_diagonal(pole_gap, 1.0)
        zhat_sq = np.prod(-diffs, axis=0) / np.prod(pole_gap, axis=0)
        zhat = np.sqrt(np.abs(zhat_sq))
        u = zhat[None, :] / diffs
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        values[keep] = sol.roots
        block = np.zeros((n, len(keep)))
        block[keep, :] = u.T
        vecs[:, keep] = block
    vecs = phase[:, None] * (rot @ vecs)
    order = np.argsort(-values, kind="stable")
    return values[order], vecs[:, order]


def secular_roots(problem: SecularProblem) -> SingularSpectrum:
    """Roots of the secular equation, i.e. the updated squared singular values.

    Returned as a :class:`SingularSpectrum` of *squared* values, descending.
    Zero-weight indices keep their pole; clustered poles are merged first.
    """
    d = problem.poles
    a = np.sqrt(problem.weights)
    a_rot, _ = _deflate(d, a)
    keep = np.flatnonzero(a_rot > 0)
    values = d.copy()
    if len(keep):
        values[keep] = _solve_distinct(d[keep], a_rot[keep] ** 2).roots
    return SingularSpectrum(np.sort(values)[::-1])


@dataclass
class UpdateStep:
    """One rank-one stage of :func:`rank_update` (spectra in singular-value units)."""

    before: SingularSpectrum
    after: SingularSpectrum
    h_norm: float


@dataclass
class UpdateTrace:
    spectrum: SingularSpectrum
    steps: list = field(default_factory=list)


def rank_update(base: SingularSpectrum, h2_rows: np.ndarray, v_h1: np.ndarray,
                return_steps: bool = False):
    """Spectrum of a matrix with right basis ``v_h1`` and singular values ``base``
    after appending ``h2_rows``, computed one secular solve per row.

    ``base`` is zero-padded to the width of ``v_h1``. With ``return_steps`` the
    intermediate rank-one spectra are returned in an :class:`UpdateTrace`.
    """
    v = np.asarray(v_h1, dtype=complex)
    rows = np.atleast_2d(np.asarray(h2_rows, dtype=complex))
    k = v.shape[1]
    if rows.size and rows.shape[1] != v.shape[0]:
        raise ValueError(f"rows have {rows.shape[1]} columns but the basis has {v.shape[0]} rows")
    if len(base) > k:
        raise ValueError("more singular values than basis vectors")
    lam = base.padded(k).squared
    basis = v
    steps = []
    for row in rows:
        z = row @ basis
        before = SingularSpectrum(np.sqrt(lam))
        lam, u = rank_one_update(lam, z)
        lam = np.maximum(lam, 0.0)
        basis = basis @ u
        if return_steps:
            steps.append(UpdateStep(before, SingularSpectrum(np.sqrt(lam)), float(np.linalg.norm(z))))
    spectrum = SingularSpectrum(np.sqrt(lam))
    if return_steps:
        return UpdateTrace(spectrum, steps)
    return spectrum


def stacked_spectrum(h1: np.ndarray, h2: np.ndarray, return_steps: bool = False):
    """Singular values of [H1; H2] through the reduced form and secular updates.

    The result has min(N1 + N2, M) entries, matching a direct SVD of the stack.
    """
    form = reduce(h1, h2)
    k = form.a_matrix.shape[1]
    return rank_update(form.base, form.update_rows, np.eye(k), return_steps=return_steps)


# --------------------------------------------------------------------------
# diagnostics


@dataclass
class InterlacingReport:
    passed: bool
    lower_margins: np.ndarray  # new_i - old_i
    upper_margins: np.ndarray  # old_{i-1} - new_i, and old_1 + ||h'|| - new_1 at i = 1
    violations: list

    def __bool__(self):
        return self.passed


def interlacing_check(old: SingularSpectrum, new: SingularSpectrum, h_norm: float,
                      tol: float = 1e-10) -> InterlacingReport:
    """Check s1(old) + ||h'|| >= s1(new) >= s1(old) and s_{i-1}(old) >= s_i(new) >= s_i(old).

    Violation indices in the report are 1-based.
    """
    if len(old) != len(new):
        raise ValueError("spectra must have equal length")
    o, n = old.values, new.values
    lower = n - o
    upper = np.empty_like(n)
    if len(n):
        upper[0] = o[0] + h_norm - n[0]
        upper[1:] = o[:-1] - n[1:]
    violations = [
        (i + 1, kind, float(m))
        for kind, margins in (("lower", lower), ("upper", upper))
        for i, m in enumerate(margins)
        if m < -tol
    ]
    violations.sort()
    return InterlacingReport(not violations, lower, upper, violations)


def singular_shift(problem: SecularProblem, roots: SingularSpectrum):
    """Per-index shift w_i / (1 + Delta_i) with Delta_i = sum_{m != i} w_m / (d_m - root_i).

    ``roots`` holds squared values as returned by :func:`secular_roots`.
    Returns ``(shift, delta)``; ``poles + shift`` reproduces the roots.
    """
    d, w = problem.poles, problem.weights
    x = roots.values
    if len(x) != len(d):
        raise ValueError("roots and poles must have equal length")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = w[None, :] / (d[None, :] - x[:, None])
    n = len(d)
    terms[np.arange(n), np.arange(n)] = 0.0
    terms[~np.isfinite(terms)] = 0.0
    delta = terms.sum(1)
    shift = np.zeros(n)
    nz = w > 0
    shift[nz] = w[nz] / (1.0 + delta[nz])
    return shift, delta


def lemma1_check(old: SingularSpectrum, new: SingularSpectrum, tol: float = 1e-12) -> bool:
    """True iff every singular value is non-decreasing (up to ``tol``).

    The shorter spectrum is zero-padded before comparing.
    """
    n = max(len(old), len(new))
    o = old.padded(n).values
    v = new.padded(n).values
    return bool(np.all(v >= o - tol))
