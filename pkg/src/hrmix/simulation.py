"""Samplers for Gaussian triangular arrays, Husler-Reiss mixtures and
Brown-Resnick type fields.

Poisson-point-process samplers come in two flavours:

``method='normalized'`` (default)
    Every point carries a spectral profile normalized to sum to the number
    of coordinates ``m`` (tilting by a uniformly chosen coordinate). Profiles
    are then bounded by ``m``, so generation stops exactly once
    ``U_k + log m`` falls below every running maximum. The result has the
    exact target law and ``truncation_bound`` is 0.

``method='cascade'``
    The plain construction ``U_k = -log(E_1 + ... + E_k)`` with mean-one
    log-normal profiles. After each point the expected number of future
    points exceeding a current maximum is computed in closed form; that
    number bounds the probability that truncation changes the output.
    Generation stops when the bound is at most ``accuracy``.

All randomness flows from an :class:`RngHandle`; the same handle yields the
same output regardless of threading.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special as sc

from ._errors import DomainError, SimulationError
from .dependence import Variogram
from .distributions import DependenceMatrix
from .measures import INF, MixtureMeasure, sample as sample_measure
from .special import bivariate_normal_cdf, cholesky_lower, normalizing_constant

__all__ = [
    "RngHandle",
    "GridSpec",
    "FieldSample",
    "dependence_matrix_from_grid",
    "correlations_from_radii",
    "sample_row_max_bivariate",
    "exact_finite_n_cdf",
    "sample_hr_mixture_ppp",
    "brown_resnick_field",
    "mixture_process_field",
    "rescaled_gaussian_max_field",
    "rescaled_row_correlations",
    "replicate",
    "default_threads",
]

MAX_GRID = 500
_U64 = 1 << 64
_MAX_POINTS = 10**7
_CASCADE_POINTS = 10**6


# -- plumbing --------------------------------------------------------------------

@dataclass(frozen=True)
class RngHandle:
    """Reproducible random stream ``(seed, stream)``.

    ``generator(*counter)`` returns a fresh ``numpy.random.Generator``
    keyed by the seed, the stream id and an optional counter, so disjoint
    (stream, counter) pairs never share a sequence.
    """

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= int(v) < _U64:
                raise DomainError(f"{name} must be an integer in [0, 2**64)")
            object.__setattr__(self, name, int(v))

    def generator(self, *counter: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *counter))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


def default_threads() -> int:
    """Thread count from ``HRMIX_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HRMIX_THREADS", "1")))
    except ValueError:
        return 1


def replicate(fn: Callable[[RngHandle], object], n: int, seed: int = 0,
              threads: int | None = None, first_stream: int = 0) -> list:
    """``[fn(RngHandle(seed, first_stream + r)) for r in range(n)]``, optionally
    on a thread pool; the result order never depends on scheduling."""
    if n < 0:
        raise DomainError("number of replicates must be nonnegative")
    handles = [RngHandle(seed, first_stream + r) for r in range(n)]
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or n < 2:
        return [fn(h) for h in handles]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, handles))


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Distinct points ``t_1, ..., t_m`` in ``R^dim`` (``m <= 500``)."""

    points: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2 or p.shape[0] < 1:
            raise DomainError("grid needs at least one point")
        if not np.all(np.isfinite(p)):
            raise DomainError("grid coordinates must be finite")
        if p.shape[0] > MAX_GRID:
            raise DomainError(f"grid has {p.shape[0]} points, the ceiling is {MAX_GRID}")
        if np.unique(p, axis=0).shape[0] != p.shape[0]:
            raise DomainError("grid points must be pairwise distinct")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)
        labels = tuple(str(s) for s in self.labels) or tuple(f"p{i}" for i in range(p.shape[0]))
        if len(labels) != p.shape[0]:
            raise DomainError("one label per grid point")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def distances(self) -> np.ndarray:
        diff = self.points[:, None, :] - self.points[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def index(self, point) -> int:
        """Position of ``point`` (a coordinate or a label) in the grid."""
        if isinstance(point, str):
            try:
                return self.labels.index(point)
            except ValueError:
                raise DomainError(f"no grid point labelled {point!r}") from None
        q = np.atleast_1d(np.asarray(point, dtype=float))
        hit = np.nonzero(np.all(self.points == q[None, :], axis=1))[0]
        if hit.size == 0:
            raise DomainError(f"point {point!r} is not in the grid")
        return int(hit[0])


@dataclass(frozen=True, eq=False)
class FieldSample:
    grid: GridSpec
    values: np.ndarray
    truncation_bound: float = 0.0
    seed: int = 0
    stream: int = 0
    accuracy: float = 0.0
    method: str = "normalized"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise DomainError("one value per grid point")
        if not np.all(np.isfinite(v)):
            raise SimulationError("field values must be finite")
        object.__setattr__(self, "values", v)

    def value_at(self, point) -> float:
        return float(self.values[self.grid.index(point)])

    def to_csv(self) -> str:
        lines = [f"# seed={self.seed} stream={self.stream} accuracy={self.accuracy!r} "
                 f"truncation_bound={self.truncation_bound!r} method={self.method}"]
        coords = ",".join(f"coord{k}" for k in range(self.grid.dim))
        lines.append(f"point_id,{coords},value")
        for lab, pt, v in zip(self.grid.labels, self.grid.points, self.values):
            lines.append(",".join([lab] + ["%.17g" % c for c in pt] + ["%.17g" % v]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "FieldSample":
        meta, rows = {}, []
        for ln in text.splitlines():
            if ln.startswith("#"):
                for tok in ln[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = v
            elif ln.strip() and not ln.startswith("point_id"):
                rows.append(ln.split(","))
        if not rows:
            raise DomainError("no data rows")
        labels = [r[0] for r in rows]
        pts = np.array([[float(c) for c in r[1:-1]] for r in rows])
        vals = np.array([float(r[-1]) for r in rows])
        return cls(GridSpec(pts, tuple(labels)), vals,
                   truncation_bound=float(meta.get("truncation_bound", 0.0)),
                   seed=int(meta.get("seed", 0)), stream=int(meta.get("stream", 0)),
                   accuracy=float(meta.get("accuracy", 0.0)), method=meta.get("method", "normalized"))


def dependence_matrix_from_grid(grid: GridSpec, gamma: Variogram) -> DependenceMatrix:
    """``Lambda_0 = (sqrt(gamma(t_j - t_k)))``; raises NotInDomainError when
    the grid is degenerate for the variogram (e.g. collinear points and
    ``alpha = 2``)."""
    return DependenceMatrix(np.sqrt(gamma.radial(grid.distances())))


# -- Gaussian triangular arrays ---------------------------------------------------

def correlations_from_radii(radii, n: int) -> np.ndarray:
    """``rho_i = max(1 - 2 R_i^2 / b_n^2, -1)``."""
    r = np.asarray(radii, dtype=float)
    if np.any(np.isnan(r)) or np.any(r < 0):
        raise DomainError("radii must be nonnegative")
    if np.any(np.isinf(r)):
        raise DomainError("infinite radius has no finite-n correlation; use a large finite radius")
    b = normalizing_constant(n).b_n
    return np.maximum(1.0 - 2.0 * r * r / (b * b), -1.0)


def _check_corr(correlations):
    rho = np.atleast_1d(np.asarray(correlations, dtype=float))
    if rho.ndim != 1 or rho.size < 1:
        raise DomainError("need at least one correlation")
    if np.any(np.isnan(rho)) or np.any(np.abs(rho) > 1):
        raise DomainError("correlations must lie in [-1, 1]")
    return rho


def sample_row_max_bivariate(correlations, rng: RngHandle) -> tuple[float, float]:
    """Component-wise maximum of ``b_n (X_i - b_n)`` over ``n`` independent
    standard normal pairs with correlations ``rho_i``."""
    rho = _check_corr(correlations)
    n = rho.size
    b = normalizing_constant(n).b_n
    z = rng.generator().standard_normal((2, n))
    x1 = z[0]
    x2 = rho * z[0] + np.sqrt(np.maximum(1.0 - rho * rho, 0.0)) * z[1]
    return float(b * (x1.max() - b)), float(b * (x2.max() - b))


def exact_finite_n_cdf(x: float, y: float, correlations) -> float:
    """Exact law of :func:`sample_row_max_bivariate`:
    ``prod_i P(X1 <= b_n + x/b_n, X2 <= b_n + y/b_n; rho_i)``."""
    rho = _check_corr(correlations)
    b = normalizing_constant(rho.size).b_n
    u, v = b + float(x) / b, b + float(y) / b
    p = np.asarray(bivariate_normal_cdf(u, v, rho), dtype=float)
    if np.any(p <= 0):
        return 0.0
    return math.exp(math.fsum(np.log(p)))


# -- Poisson point process machinery ------------------------------------------------

def _normalized_max(gen, draw_logprofile, m, max_points):
    """Run the normalized construction; ``draw_logprofile(gen, k)`` returns
    ``(k, m)`` log-profiles with ``logsumexp == log m`` per row."""
    logm = math.log(m)
    running = np.full(m, -np.inf)
    gsum, used, block = 0.0, 0, 8
    while used < max_points:
        gam = gsum + np.cumsum(gen.standard_exponential(block))
        gsum = float(gam[-1])
        u = -np.log(gam)
        vals = u[:, None] + draw_logprofile(gen, block)
        acc = np.maximum(np.maximum.accumulate(vals, axis=0), running)
        done = np.nonzero(u + logm <= acc.min(axis=1))[0]
        if done.size:
            return acc[done[0]]
        running = acc[-1]
        used += block
        block = min(2 * block, 4096)
    raise SimulationError(f"normalized sampler did not stop within {max_points} points")


def _future_exceedance(c, s, log_gamma):
    """Expected number of future points above the running maxima.

    A future point ``u < U`` with adjustment ``G ~ N(-s^2/2, s^2)`` exceeds
    ``M = U + c`` with mean count
    ``e^{-M} Phi_bar((c - s^2/2)/s) - e^{-U} Phi_bar((c + s^2/2)/s)``;
    ``e^{-U}`` equals ``Gamma_k = exp(log_gamma)``.
    c: (k, m); s: (A, m); returns (k, A, m).
    """
    c3 = c[:, None, :]
    pos = s > 0
    ss = np.where(pos, s, 1.0)[None, :, :]
    e_u = np.exp(log_gamma)[:, None, None]
    t1 = np.exp(-c3) * sc.ndtr(-(c3 - 0.5 * ss * ss) / ss)
    t2 = sc.ndtr(-(c3 + 0.5 * ss * ss) / ss)
    out = e_u * np.maximum(t1 - t2, 0.0)
    return np.where(pos[None, :, :], out, 0.0)


def _cascade_max(gen, draw_adjust, sd, weights, accuracy, max_points):
    max_points = min(max_points, _CASCADE_POINTS) if max_points == _MAX_POINTS else max_points
    """Run the plain cascade. ``draw_adjust(gen, k)`` returns ``(k, m)``
    Gaussian adjustments; ``sd`` (A, m) and ``weights`` (A,) describe the
    mixture of their standard deviations for the stopping bound."""
    m = sd.shape[1]
    running = np.full(m, -np.inf)
    gsum, used, block = 0.0, 0, 64
    while used < max_points:
        gam = gsum + np.cumsum(gen.standard_exponential(block))
        gsum = float(gam[-1])
        u = -np.log(gam)
        vals = u[:, None] + draw_adjust(gen, block)
        acc = np.maximum(np.maximum.accumulate(vals, axis=0), running)
        c = acc - u[:, None]
        bound = np.einsum("kam,a->k", _future_exceedance(c, sd, np.log(gam)), weights)
        done = np.nonzero(bound <= accuracy)[0]
        if done.size:
            i = done[0]
            return acc[i], float(bound[i])
        running = acc[-1]
        used += block
        block = min(2 * block, 8192)
    raise SimulationError(
        f"cascade did not reach accuracy {accuracy:g} within {max_points} points; "
        "use method='normalized'"
    )


def _check_accuracy(accuracy, method):
    if not accuracy > 0:
        raise DomainError("accuracy must be positive")
    if method not in ("normalized", "cascade"):
        raise DomainError(f"unknown method {method!r}")


def _atomic_parts(nu: MixtureMeasure):
    if not nu.is_atomic:
        raise DomainError("sampler needs an atomic measure; apply discretize() first")
    if nu.has_inf_atom:
        raise DomainError("atom at infinity cannot be simulated")
    pairs = [(a, w) for a, w in nu.atoms if w > 0]
    locs = np.array([a for a, _ in pairs])
    wts = np.array([w for _, w in pairs])
    return locs, wts / wts.sum()


def _pick(gen, locs, wts, k):
    if locs.size == 1:
        return np.full(k, locs[0])
    return locs[gen.choice(locs.size, size=k, p=wts)]


def sample_hr_mixture_ppp(nu: MixtureMeasure, accuracy: float, rng: RngHandle,
                          method: str = "normalized", max_points: int = _MAX_POINTS):
    """One draw from ``F_nu`` as ``max_k (U_k, U_k + B_k)`` with
    ``B_k | S ~ N(-2 S^2, 4 S^2)`` and ``S ~ nu``.

    Parameters
    ----------
    nu : MixtureMeasure
        Atomic, without an atom at infinity.
    accuracy : float
        Target for the truncation bound (used by ``method='cascade'``).

    Returns
    -------
    y1, y2, bound : float
        The sample and the achieved truncation bound (0 when normalized).
    """
    _check_accuracy(accuracy, method)
    locs, wts = _atomic_parts(nu)
    gen = rng.generator()
    if method == "normalized":
        def draw(g, k):
            s = _pick(g, locs, wts, k)
            sign = 2.0 * g.integers(0, 2, size=k) - 1.0
            bb = 2.0 * s * (sign * s + g.standard_normal(k))
            d = np.stack([np.zeros(k), bb], axis=1)
            return math.log(2.0) + d - np.logaddexp(0.0, bb)[:, None]

        out = _normalized_max(gen, draw, 2, max_points)
        return float(out[0]), float(out[1]), 0.0

    def adjust(g, k):
        s = _pick(g, locs, wts, k)
        return np.stack([np.zeros(k), 2.0 * s * (g.standard_normal(k) - s)], axis=1)

    sd = np.stack([np.zeros_like(locs), 2.0 * locs], axis=1)
    out, bound = _cascade_max(gen, adjust, sd, wts, accuracy, max_points)
    return float(out[0]), float(out[1]), bound


# -- fields ------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _field_factor(points_bytes, shape, alpha, scale):
    pts = np.frombuffer(points_bytes, dtype=float).reshape(shape)
    gam = Variogram(alpha, scale)
    diff = pts[:, None, :] - pts[None, :, :]
    G = gam.radial(np.sqrt(np.sum(diff * diff, axis=-1)))
    if shape[0] == 1:
        return G, np.zeros((0, 0))
    # pin W at the first grid point
    g0 = G[0, 1:]
    C = 0.5 * (g0[:, None] + g0[None, :] - G[1:, 1:])
    L = cholesky_lower(C, pivot_tol=1e-12)
    G.setflags(write=False)
    L.setflags(write=False)
    return G, L


def _factor(grid: GridSpec, gamma: Variogram):
    pts = np.ascontiguousarray(grid.points)
    return _field_factor(pts.tobytes(), pts.shape, float(gamma.alpha), float(gamma.scale))


def _gaussian_field(gen, L, k):
    """(k, m) zero-mean Gaussian vectors pinned to 0 at the first point."""
    m1 = L.shape[0]
    w = np.zeros((k, m1 + 1))
    if m1:
        w[:, 1:] = gen.standard_normal((k, m1)) @ L.T
    return w


def _field_max(grid, gamma, scales, scale_wts, accuracy, rng, method, max_points):
    """Shared driver: spectral functions ``exp(a W - a^2 gamma / 2)`` with a
    random factor ``a`` drawn from ``scales``/``scale_wts`` per point."""
    _check_accuracy(accuracy, method)
    G, L = _factor(grid, gamma)
    m = grid.m
    gen = rng.generator()
    if method == "normalized":
        logm = math.log(m)

        def draw(g, k):
            a = _pick(g, scales, scale_wts, k)
            j = g.integers(0, m, size=k)
            w = _gaussian_field(g, L, k)
            d = a[:, None] * (w - w[np.arange(k), j][:, None]) - 0.5 * (a * a)[:, None] * G[j, :]
            return logm + d - sc.logsumexp(d, axis=1, keepdims=True)

        vals = _normalized_max(gen, draw, m, max_points)
        bound = 0.0
    else:
        sig = np.sqrt(G[0, :])

        def adjust(g, k):
            a = _pick(g, scales, scale_wts, k)
            w = _gaussian_field(g, L, k)
            return a[:, None] * w - 0.5 * (a * a)[:, None] * G[0, :][None, :]

        sd = scales[:, None] * sig[None, :]
        vals, bound = _cascade_max(gen, adjust, sd, scale_wts, accuracy, max_points)
    return FieldSample(grid, vals, truncation_bound=bound, seed=rng.seed, stream=rng.stream,
                       accuracy=float(accuracy), method=method)


def brown_resnick_field(grid: GridSpec, gamma: Variogram, accuracy: float, rng: RngHandle,
                        method: str = "normalized", max_points: int = _MAX_POINTS) -> FieldSample:
    """Brown-Resnick field ``max_k (U_k + W_k(t) - gamma(t - t_1)/2)`` on the
    grid, with ``W`` pinned to 0 at the first grid point.

    Raises
    ------
    FactorizationError
        If the variogram covariance on the grid is not positive definite.
    """
    return _field_max(grid, gamma, np.array([1.0]), np.array([1.0]), accuracy, rng, method, max_points)


def _check_positive_measure(nu: MixtureMeasure):
    if nu.has_zero_atom or nu.has_inf_atom:
        raise DomainError("measure must live on (0, inf)")


def _draw_scales(nu, size, gen):
    if nu.is_atomic:
        locs, wts = _atomic_parts(nu)
        return _pick(gen, locs, wts, size)
    return sample_measure(nu, size, gen)


def mixture_process_field(grid: GridSpec, gamma: Variogram, nu: MixtureMeasure, n_mix: int,
                          accuracy: float, rng: RngHandle, method: str = "normalized",
                          max_points: int = _MAX_POINTS) -> FieldSample:
    """``max_{i <= n_mix} xi_i(t) - log n_mix`` where, given ``S_i ~ nu``,
    ``xi_i`` is Brown-Resnick with variogram ``4 S_i^2 gamma``.

    The maximum is generated as a single point process whose points choose
    one of the ``S_i`` uniformly (superposition of the ``n_mix`` processes
    with intensity rescaled by ``1/n_mix``), which has the same law.
    ``nu`` may be continuous; its draws are exact.
    """
    if int(n_mix) < 1:
        raise DomainError("n_mix must be >= 1")
    _check_positive_measure(nu)
    s = _draw_scales(nu, int(n_mix), rng.generator(1 << 32))
    scales = 2.0 * s
    wts = np.full(scales.size, 1.0 / scales.size)
    return _field_max(grid, gamma, scales, wts, accuracy, rng, method, max_points)


def rescaled_row_correlations(scales, lag: float, alpha: float, n: int) -> np.ndarray:
    """Row correlations ``exp(-S_i^2 s_n^alpha |h|^alpha)`` of the rescaled
    two-point field, with ``s_n^alpha = 2 / b_n^2`` for the covariance
    ``exp(-|h|^alpha)``."""
    b = normalizing_constant(n).b_n
    s = np.asarray(scales, dtype=float)
    return np.exp(-s * s * (2.0 / (b * b)) * abs(float(lag)) ** alpha)


def rescaled_gaussian_max_field(grid: GridSpec, alpha: float, nu: MixtureMeasure, n: int,
                                rng: RngHandle, chunk: int = 8192) -> FieldSample:
    """``Y_n(t) = max_{i<=n} b_n (X_i(S_i^{2/alpha} s_n t) - b_n)`` for the
    Gaussian field ``X`` with covariance ``exp(-|t1 - t2|^alpha)``.

    Here ``(1 - C(eps t1, eps t2)) / eps^alpha -> |t1 - t2|^alpha``, so the
    slowly varying factor is ``L = 1/2`` and ``s_n = (2 / b_n^2)^{1/alpha}``.
    Rows are generated in chunks, each from its own counter-keyed stream.
    """
    if not (0.0 < alpha < 2.0):
        raise DomainError("alpha must lie in (0, 2)")
    if int(n) < 2:
        raise DomainError("n must be >= 2")
    _check_positive_measure(nu)
    n = int(n)
    b = normalizing_constant(n).b_n
    sn_a = 2.0 / (b * b)
    D = grid.distances() ** alpha
    m = grid.m
    best = np.full(m, -np.inf)
    atomic = nu.is_atomic
    if atomic:
        locs, wts = _atomic_parts(nu)
        factors = {}
    for c, start in enumerate(range(0, n, chunk)):
        k = min(chunk, n - start)
        gen = rng.generator(c)
        s = _draw_scales(nu, k, gen)
        z = gen.standard_normal((k, m))
        if m == 1:
            x = z
        elif atomic:
            x = np.empty((k, m))
            for a in np.unique(s):
                if a not in factors:
                    factors[a] = np.linalg.cholesky(np.exp(-a * a * sn_a * D))
                sel = s == a
                x[sel] = z[sel] @ factors[a].T
        else:
            R = np.exp(-(s * s * sn_a)[:, None, None] * D[None, :, :])
            x = np.einsum("kij,kj->ki", np.linalg.cholesky(R), z)
        best = np.maximum(best, x.max(axis=0))
    return FieldSample(grid, b * (best - b), seed=rng.seed, stream=rng.stream, method="rows")
