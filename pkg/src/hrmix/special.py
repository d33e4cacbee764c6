"""Gaussian kernels: densities, distribution functions, orthant
probabilities, Cholesky factorization and the normalizing constants of
Gaussian maxima.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sc
from scipy.stats import qmc

from ._errors import DomainError, FactorizationError

__all__ = [
    "std_normal_pdf",
    "std_normal_cdf",
    "NormalizingConstant",
    "normalizing_constant",
    "bivariate_normal_cdf",
    "bivariate_normal_upper",
    "mvn_survivor",
    "cholesky_lower",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# 20-point Gauss-Legendre rule on [-1, 1]
_GL20_X, _GL20_W = np.polynomial.legendre.leggauss(20)

# thresholds beyond this are treated as +-infinity by the orthant code
_Z_CLIP = 38.0


def std_normal_pdf(x):
    """Standard normal density, elementwise."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("std_normal_pdf requires finite input")
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(x):
    """Standard normal distribution function, elementwise; accepts +-inf."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("std_normal_cdf is undefined for NaN")
    out = sc.ndtr(x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NormalizingConstant:
    """Root ``b_n`` of ``b = n * phi(b)``."""

    n: int
    b_n: float

    def __float__(self):
        return self.b_n


def _bn_expansion(n):
    # asymptotic expansion; only used as a starting point
    s = math.sqrt(2.0 * math.log(n))
    return s - (0.5 * math.log(math.log(n)) + math.log(2.0 * math.sqrt(math.pi))) / s


@lru_cache(maxsize=4096)
def _solve_bn(n: int) -> float:
    log_n = math.log(n)

    def g(b):
        return math.log(b) - log_n + 0.5 * b * b + _LOG_SQRT_2PI

    lo, hi = 0.1, math.sqrt(2.0 * log_n) + 2.0
    b = _bn_expansion(n) if n >= 3 else 0.5 * (lo + hi)
    if not lo < b < hi:
        b = 0.5 * (lo + hi)
    for _ in range(200):
        gb = g(b)
        if gb > 0:
            hi = b
        else:
            lo = b
        step = gb / (1.0 / b + b)
        cand = b - step
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if abs(cand - b) <= 1e-16 * b:
            b = cand
            break
        b = cand
    return b


def normalizing_constant(n: int) -> NormalizingConstant:
    """Normalizing constant of the maximum of ``n`` standard normals.

    Solves ``b = n * phi(b)`` by safeguarded Newton iteration on
    ``log b - log n + b**2 / 2 + log sqrt(2 pi)``. For ``n = 1`` this is the
    positive fixed point of ``b = phi(b)``.

    Raises
    ------
    DomainError
        If ``n < 1``.
    """
    if isinstance(n, (bool, np.bool_)) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    return NormalizingConstant(n, _solve_bn(n))


def cholesky_lower(psi, pivot_tol: float = 0.0, sym_tol: float = 1e-12):
    """Lower Cholesky factor ``L`` with ``L @ L.T == psi``.

    Parameters
    ----------
    psi : array_like, shape (l, l)
        Symmetric matrix.
    pivot_tol : float
        A pivot is accepted only if it exceeds ``pivot_tol`` times the
        largest diagonal entry of ``psi``.
    sym_tol : float
        Relative asymmetry tolerated before a DomainError is raised.

    Raises
    ------
    FactorizationError
        On the first rejected pivot; ``err.pivot`` is its zero-based index.
    """
    a = np.array(psi, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    if np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise DomainError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    floor = pivot_tol * max(np.max(np.diag(a)), 0.0)
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if not d > floor:
            raise FactorizationError(
                f"matrix is not positive definite (pivot {j} = {d:.3e})", pivot=j
            )
        L[j, j] = math.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def bivariate_normal_upper(h, k, r):
    """``P(X > h, Y > k)`` for a standard bivariate normal pair with
    correlation ``r``; vectorized.

    Integrates the density over the correlation parameter (asin
    substitution for ``|r| < 0.925``, a transformed series-corrected
    integral near ``|r| = 1``), following Genz's BVNU scheme with a
    20-point Gauss-Legendre rule throughout. Absolute accuracy is about
    1e-15.
    """
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    shape = h.shape
    h, k, r = h.ravel(), k.ravel(), r.ravel()
    if np.any(np.isnan(h) | np.isnan(k) | np.isnan(r)):
        raise DomainError("NaN argument to bivariate normal probability")
    if np.any(np.abs(r) > 1.0):
        raise DomainError("correlation must lie in [-1, 1]")
    out = np.zeros(h.shape)

    hinf = h == -np.inf
    kinf = k == -np.inf
    zero = (h == np.inf) | (k == np.inf)
    m = hinf & ~zero
    out[m] = sc.ndtr(-k[m])
    m = kinf & ~hinf & ~zero
    out[m] = sc.ndtr(-h[m])
    fin = ~(zero | hinf | kinf)

    low = fin & (np.abs(r) < 0.925)
    if np.any(low):
        hh, kk, rr = h[low], k[low], r[low]
        hk = hh * kk
        hs = 0.5 * (hh * hh + kk * kk)
        asr = 0.5 * np.arcsin(rr)
        sn = np.sin(asr[:, None] * (1.0 + _GL20_X[None, :]))
        terms = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
        bvn = terms @ _GL20_W * asr / (2.0 * math.pi)
        out[low] = bvn + sc.ndtr(-hh) * sc.ndtr(-kk)

    high = fin & ~low
    if np.any(high):
        hh, kk, rr = h[high], k[high], r[high]
        neg = rr < 0
        kk = np.where(neg, -kk, kk)
        hk = hh * kk
        bvn = np.zeros(hh.shape)
        inner = np.abs(rr) < 1.0
        if np.any(inner):
            hi_, ki, ri, hki = hh[inner], kk[inner], rr[inner], hk[inner]
            as_ = (1.0 - ri) * (1.0 + ri)
            a = np.sqrt(as_)
            bs = (hi_ - ki) ** 2
            asr = -0.5 * (bs / as_ + hki)
            c = (4.0 - hki) / 8.0
            d = (12.0 - hki) / 80.0
            val = np.where(
                asr > -100.0,
                a * np.exp(np.maximum(asr, -100.0))
                * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_),
                0.0,
            )
            b = np.sqrt(bs)
            sp = math.sqrt(2.0 * math.pi) * sc.ndtr(-b / a)
            corr = np.exp(-0.5 * np.maximum(hki, -100.0)) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
            val = val - np.where(hki > -100.0, corr, 0.0)
            a2 = 0.5 * a
            xs = (a2[:, None] * _GL20_X[None, :] + a2[:, None]) ** 2
            rs = np.sqrt(1.0 - xs)
            asr2 = -0.5 * (bs[:, None] / xs + hki[:, None])
            spx = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
            ep = np.exp(-hki[:, None] * xs / (2.0 * (1.0 + rs) ** 2)) / rs
            t = np.where(asr2 > -100.0, np.exp(np.maximum(asr2, -100.0)) * (spx - ep), 0.0)
            val = (a2 * (t @ _GL20_W) - val) / (2.0 * math.pi)
            bvn[inner] = val
        pos = ~neg
        res = np.empty(hh.shape)
        res[pos] = bvn[pos] + sc.ndtr(-np.maximum(hh[pos], kk[pos]))
        if np.any(neg):
            hn, kn, bn = hh[neg], kk[neg], bvn[neg]
            lower = np.where(hn < 0, sc.ndtr(kn) - sc.ndtr(hn), sc.ndtr(-hn) - sc.ndtr(-kn))
            res[neg] = np.where(hn >= kn, -bn, lower - bn)
        out[high] = res

    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return float(out) if out.ndim == 0 else out


def bivariate_normal_cdf(x, y, rho):
    """``P(Z1 <= x, Z2 <= y)`` for standard normals with correlation
    ``rho``; vectorized, absolute error below 1e-12."""
    return bivariate_normal_upper(-np.asarray(x, dtype=float), -np.asarray(y, dtype=float), rho)


# ---------------------------------------------------------------------------
# orthant probabilities


def _conditioning_nodes(lo, width_hint):
    """Composite 20-point Gauss-Legendre nodes on [lo_k, lo_k + span] per row."""
    lo = np.maximum(lo, -9.0)
    hi = np.maximum(lo, 0.0) + 9.0
    span = hi - lo
    panels = int(math.ceil(float(np.max(span)) / width_hint))
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL20_X[None, :]).ravel()
    wu = (half[:, None] * _GL20_W[None, :]).ravel()
    z = lo[:, None] + span[:, None] * u[None, :]
    w = span[:, None] * wu[None, :]
    return z, w


def _survivor_conditioning(a, R):
    """P(X > a) for rows of standardized thresholds ``a`` (k, l), l <= 4,
    by conditioning on the most restrictive coordinate and integrating the
    remaining (l-1)-variate probability against the normal density."""
    k, l = a.shape
    if l == 1:
        return sc.ndtr(-a[:, 0])
    if l == 2:
        return bivariate_normal_upper(a[:, 0], a[:, 1], R[0, 1])
    first = int(np.argmax(np.mean(a, axis=0)))
    rest = [j for j in range(l) if j != first]
    r = R[first, rest]
    s = np.sqrt((1.0 - r) * (1.0 + r))
    Rc = (R[np.ix_(rest, rest)] - np.outer(r, r)) / np.outer(s, s)
    np.fill_diagonal(Rc, 1.0)
    slope = float(np.max(np.abs(r) / s))
    width = min(1.0, 1.0 / max(slope, 1e-300))
    out = np.empty(k)
    block = 256 if l == 3 else 16
    for start in range(0, k, block):
        ab = a[start:start + block]
        z, w = _conditioning_nodes(ab[:, first], width)
        cond = (ab[:, None, rest] - z[:, :, None] * r[None, None, :]) / s[None, None, :]
        cond = np.clip(cond, -_Z_CLIP, _Z_CLIP)
        inner = _survivor_conditioning(cond.reshape(-1, l - 1), Rc).reshape(z.shape)
        out[start:start + block] = np.sum(w * _INV_SQRT_2PI * np.exp(-0.5 * z * z) * inner, axis=1)
    return out


def _survivor_qmc(a, R, seed, n_points, n_shifts):
    """Separation-of-variables estimate of P(X > a) with scrambled Sobol
    points; returns (estimate, standard error) per row."""
    k, l = a.shape
    order = np.argsort(-np.mean(a, axis=0))
    # P(X > a) = P(Y < -a) with Y = -X ~ N(0, R)
    b = -a[:, order]
    L = cholesky_lower(R[np.ix_(order, order)])
    m = int(2 ** math.ceil(math.log2(n_points)))
    ests = np.empty((n_shifts, k))
    for rep in range(n_shifts):
        sob = qmc.Sobol(d=max(l - 1, 1), scramble=True, seed=np.random.default_rng([seed, rep]))
        w = sob.random(m)
        y = np.zeros((k, m, l))
        f = np.ones((k, m))
        for i in range(l):
            mu = y[:, :, :i] @ L[i, :i]
            e = sc.ndtr((b[:, i, None] - mu) / L[i, i])
            f *= e
            if i < l - 1:
                u = np.clip(w[None, :, i] * e, 1e-300, 1.0 - 1e-16)
                y[:, :, i] = sc.ndtri(u)
        ests[rep] = f.mean(axis=1)
    est = ests.mean(axis=0)
    err = ests.std(axis=0, ddof=1) / math.sqrt(n_shifts) if n_shifts > 1 else np.zeros(k)
    return est, err


def mvn_survivor(x, psi, *, seed: int = 20240601, n_points: int = 1 << 14,
                 n_shifts: int = 8, return_error: bool = False):
    """Joint upper-tail probability ``P(X_1 > x_1, ..., X_l > x_l)`` of
    ``X ~ N(0, psi)``.

    Parameters
    ----------
    x : array_like, shape (..., l)
        Thresholds; leading axes are evaluated in one batch.
    psi : array_like, shape (l, l)
        Positive definite covariance matrix.
    seed, n_points, n_shifts
        Randomized quasi-Monte Carlo settings, used only for ``l >= 5``.
    return_error : bool
        Also return an error estimate (zero for the deterministic
        ``l <= 4`` path).

    Notes
    -----
    For ``l <= 4`` the probability is computed by sequential conditioning
    with composite Gauss-Legendre quadrature (absolute error about 1e-10);
    for ``5 <= l <= 9`` by scrambled Sobol integration after the Genz
    separation-of-variables transform (error about 1e-5).
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    x = np.asarray(x, dtype=float)
    l = psi.shape[0]
    if x.shape[-1:] != (l,) and not (x.ndim == 0 and l == 1):
        raise DomainError(f"threshold dimension {x.shape} does not match covariance {psi.shape}")
    if l > 9:
        raise DomainError("orthant probabilities are supported up to dimension 9")
    if np.any(np.isnan(x)):
        raise DomainError("NaN threshold")
    cholesky_lower(psi)
    sd = np.sqrt(np.diag(psi))
    R = psi / np.outer(sd, sd)
    np.fill_diagonal(R, 1.0)
    shape = x.shape[:-1] if x.ndim else ()
    a = np.clip(x.reshape(-1, l) / sd, -_Z_CLIP, _Z_CLIP)
    if l <= 4:
        est = _survivor_conditioning(a, R)
        err = np.zeros_like(est)
    else:
        est, err = _survivor_qmc(a, R, seed, n_points, n_shifts)
    est = np.clip(est, 0.0, 1.0).reshape(shape)
    err = err.reshape(shape)
    if est.ndim == 0:
        est, err = float(est), float(err)
    return (est, err) if return_error else est
