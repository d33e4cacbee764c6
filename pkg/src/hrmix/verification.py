"""Monte Carlo and analytic diagnostics for the convergence of Gaussian
triangular-array maxima and for simulated max-stable fields."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._errors import DomainError
from .distributions import hr_mixture_cdf
from .measures import INF, MixtureMeasure, dumps_measure, sample as sample_measure
from .simulation import (
    FieldSample,
    RngHandle,
    correlations_from_radii,
    exact_finite_n_cdf,
    replicate,
    sample_row_max_bivariate,
)
from .special import normalizing_constant

__all__ = [
    "ConvergenceReport",
    "empirical_cdf",
    "sup_distance",
    "binomial_se",
    "estimate_ecf",
    "estimate_ecf_pairs",
    "draw_radii",
    "sequence_radii",
    "convergence_report",
]

MIN_ECF_REPLICATES = 100


def empirical_cdf(samples, grid) -> np.ndarray:
    """Fraction of samples that are component-wise ``<=`` each grid point."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise DomainError("need at least one sample")
    if s.ndim == 1:
        s = s[None, :]
    g = np.asarray(grid, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape[1] != s.shape[1]:
        raise DomainError("grid and samples differ in dimension")
    below = np.all(s[None, :, :] <= g[:, None, :], axis=2)
    return below.mean(axis=1)


def binomial_se(p, n: int):
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1.0 - p) / n)


def _values_on(F, grid):
    if callable(F):
        return np.array([F(*pt) for pt in grid], dtype=float)
    v = np.asarray(F, dtype=float)
    if v.shape != (len(grid),):
        raise DomainError("precomputed values must match the grid")
    return v


def sup_distance(F, G, grid) -> float:
    """``max |F - G|`` over the grid; ``F`` and ``G`` are callables or
    arrays of precomputed values."""
    grid = [tuple(pt) for pt in grid]
    if not grid:
        raise DomainError("empty grid")
    return float(np.max(np.abs(_values_on(F, grid) - _values_on(G, grid))))


def estimate_ecf_pairs(va, vb) -> float:
    """Inverse-max estimator ``2 - 1 / mean(exp(-max(va, vb)))`` for pairs
    with standard Gumbel margins, clipped to ``[0, 1]``."""
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    if va.shape != vb.shape or va.ndim != 1:
        raise DomainError("need two equal-length 1-d samples")
    if va.size < MIN_ECF_REPLICATES:
        raise DomainError(f"need at least {MIN_ECF_REPLICATES} replicates, got {va.size}")
    inv = float(np.mean(np.exp(-np.maximum(va, vb))))
    return min(1.0, max(0.0, 2.0 - 1.0 / inv))


def estimate_ecf(replicates: Sequence[FieldSample], point_a, point_b) -> float:
    """Extremal correlation between two grid points from field replicates.

    On the unit Frechet scale ``z = e^v`` one has
    ``E[1 / max(z_a, z_b)] = 1 / (2 - rho)``.
    """
    reps = list(replicates)
    if len(reps) < MIN_ECF_REPLICATES:
        raise DomainError(f"need at least {MIN_ECF_REPLICATES} replicates, got {len(reps)}")
    ia = reps[0].grid.index(point_a)
    ib = reps[0].grid.index(point_b)
    va = np.array([r.values[ia] for r in reps])
    vb = np.array([r.values[ib] for r in reps])
    return estimate_ecf_pairs(va, vb)


# -- convergence report ------------------------------------------------------------

def draw_radii(nu: MixtureMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. radii ``R_i ~ nu``; an atom at infinity is not allowed."""
    if nu.has_inf_atom:
        raise DomainError("atom at infinity: use a large finite radius instead")
    if nu.is_atomic:
        pairs = [(a, w) for a, w in nu.atoms if w > 0]
        locs = np.array([a for a, _ in pairs])
        wts = np.array([w for _, w in pairs])
        if locs.size == 1:
            return np.full(n, locs[0])
        return locs[rng.choice(locs.size, size=n, p=wts / wts.sum())]
    return sample_measure(nu, n, rng)


def sequence_radii(radii) -> np.ndarray:
    """Radii ``R_i b_n / b_i`` that turn the row-dependent correlations
    ``1 - 2 R_i^2 / b_i^2`` of the sequence construction into the
    triangular-array form used by :func:`correlations_from_radii`."""
    r = np.asarray(radii, dtype=float)
    n = r.size
    bi = np.array([normalizing_constant(i).b_n for i in range(1, n + 1)])
    return r * normalizing_constant(n).b_n / bi


@dataclass
class ConvergenceReport:
    """One row per ``n``: ``(n, sup_distance_exact_vs_limit, mc_distance,
    mc_standard_error, mc_vs_exact_distance)``. MC columns are NaN when no
    replicates were requested."""

    rows: list
    grid: list
    measure: str
    seed: int
    config_hash: str
    radii: dict = field(default_factory=dict, repr=False)

    COLUMNS = ("n", "sup_distance_exact_vs_limit", "mc_distance", "mc_standard_error",
               "mc_vs_exact_distance")

    def column(self, name: str) -> np.ndarray:
        j = self.COLUMNS.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        lines = [f"# seed={self.seed}", f"# config_hash={self.config_hash}",
                 f"# measure={self.measure}",
                 "# grid=" + ";".join(f"{x:.17g}:{y:.17g}" for x, y in self.grid),
                 ",".join(self.COLUMNS)]
        for r in self.rows:
            lines.append(",".join([str(int(r[0]))] + ["%.17g" % v for v in r[1:]]))
        return "\n".join(lines) + "\n"


def _config_hash(nu, n_list, grid, replicates, seed):
    cfg = {"measure": dumps_measure(nu), "n_list": list(n_list),
           "grid": [list(map(float, g)) for g in grid], "replicates": replicates, "seed": seed}
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def convergence_report(nu: MixtureMeasure, n_list: Sequence[int], grid, replicates: int,
                       rng: RngHandle, limit_cdf: Callable | None = None,
                       threads: int | None = None) -> ConvergenceReport:
    """Convergence of row maxima of Gaussian triangular arrays with
    correlations ``max(1 - 2 R_i^2 / b_n^2, -1)``, ``R_i ~ nu``.

    Radii are drawn once per ``n`` (stream keyed by ``n``) and kept in
    ``report.radii``. For each ``n`` the report gives the deterministic
    distance between the exact finite-n law and the limit ``F_nu``, and,
    if ``replicates > 0``, the Monte Carlo distances of the empirical CDF
    from the limit and from the exact law.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise DomainError("n_list must be positive and strictly ascending")
    if replicates < 0:
        raise DomainError("replicates must be nonnegative")
    grid = [tuple(map(float, g)) for g in grid]
    if limit_cdf is None:
        def limit_cdf(x, y):
            return hr_mixture_cdf(x, y, nu)
    limit = _values_on(limit_cdf, grid)
    rows, radii = [], {}
    stream0 = 0
    for n in n_list:
        r = draw_radii(nu, n, rng.generator(1 << 40, n))
        radii[n] = r
        rho = correlations_from_radii(r, n)
        exact = np.array([exact_finite_n_cdf(x, y, rho) for x, y in grid])
        d_lim = float(np.max(np.abs(exact - limit)))
        if replicates:
            draws = replicate(lambda h: sample_row_max_bivariate(rho, h), replicates,
                              seed=rng.seed, threads=threads, first_stream=stream0)
            emp = empirical_cdf(np.array(draws), grid)
            mc = float(np.max(np.abs(emp - limit)))
            se = float(np.max(binomial_se(exact, replicates)))
            mc_exact = float(np.max(np.abs(emp - exact)))
        else:
            mc = se = mc_exact = math.nan
        stream0 += replicates
        rows.append((n, d_lim, mc, se, mc_exact))
    return ConvergenceReport(rows, grid, nu.describe(), rng.seed,
                             _config_hash(nu, n_list, grid, replicates, rng.seed), radii)
