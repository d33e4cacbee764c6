"""Spectral densities on the quarter circle and extremal correlation
functions.

A bivariate max-stable law with standard Gumbel margins has the spectral
representation

    -log F(x, y) = int_0^{pi/2} max(e^{-x} sin t, e^{-y} cos t) s(t) dt,

and its extremal correlation ``rho`` is defined by
``F(x, x) = exp(-e^{-x}) ** (2 - rho)``.

Internally angles are handled through ``t = log tan(theta)``, under which
``d theta = sin(theta) cos(theta) dt``; the functions ``_log_g_*`` return
``log(s(theta) sin(theta) cos(theta))`` as a function of ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from ._errors import DomainError, IntegrationError
from .distributions import BivariateMaxStableCDF
from .measures import INF, MixtureMeasure, finite_rule
from .quadrature import gauss_kronrod

__all__ = [
    "Variogram",
    "SpectralDensity",
    "spectral_density",
    "cdf_from_spectral",
    "spectral_marginal_integrals",
    "ecf_brown_resnick",
    "ecf_mixture",
    "ecf_laplace",
    "ecf_from_bivariate_cdf",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Variogram:
    """Power variogram ``gamma(h) = scale * |h| ** alpha``, ``0 < alpha <= 2``."""

    alpha: float = 1.0
    scale: float = 1.0
    family: str = "power"

    def __post_init__(self):
        if self.family != "power":
            raise DomainError(f"unknown variogram family {self.family!r}")
        if not (0.0 < self.alpha <= 2.0):
            raise DomainError("alpha must lie in (0, 2]")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError("scale must be positive and finite")

    def radial(self, r):
        """Variogram as a function of the lag norm; vectorized."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(np.isnan(r)):
            raise DomainError("lag norms must be nonnegative")
        return self.scale * r**self.alpha

    def __call__(self, h) -> float:
        return float(self.radial(np.linalg.norm(np.atleast_1d(np.asarray(h, dtype=float)))))


# -- spectral densities ---------------------------------------------------------

def _log_half_cosh2(t):
    # log(2 cosh t)
    a = np.abs(t)
    return a + np.log1p(np.exp(-2.0 * a))


def _log_g_hr(t, lam):
    z = lam + t / (2.0 * lam)
    return -0.5 * z * z - _LOG_SQRT_2PI + 0.5 * np.logaddexp(0.0, 2.0 * t) - np.log(2.0 * lam)


def _log_g_rayleigh(t, sigma):
    eta = math.sqrt(1.0 + 1.0 / sigma**2)
    return (-0.5 * eta * np.abs(t) + 0.5 * _log_half_cosh2(t)
            - math.log(4.0 * sigma * math.sqrt(sigma**2 + 1.0)))


def _log_g_type2(t, b):
    u = np.sqrt(0.25 * t * t + 2.0 * b)
    # 1 - t^2/(4u^2) == 2b/u^2
    return (-u + 0.5 * _log_half_cosh2(t) - math.log(4.0)
            + np.log(2.0 * b) - 2.0 * np.log(u) + np.log1p(1.0 / u))


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density of a Husler-Reiss mixture.

    ``kind`` is ``'hr'`` (param: lambda in (0, inf)), ``'rayleigh'``
    (sigma), ``'type2gumbel'`` (b) or ``'mixture'`` (a MixtureMeasure
    without atoms at 0 or infinity; the density is ``int s_lam nu(dlam)``).
    """

    kind: str
    param: object

    def __post_init__(self):
        if self.kind in ("hr", "rayleigh", "type2gumbel"):
            p = float(self.param)
            if not (p > 0 and math.isfinite(p)):
                raise DomainError(f"{self.kind} parameter must be positive and finite")
            object.__setattr__(self, "param", p)
        elif self.kind == "mixture":
            nu = self.param
            if not isinstance(nu, MixtureMeasure):
                raise DomainError("mixture kind needs a MixtureMeasure")
            if nu.has_zero_atom or nu.has_inf_atom:
                raise DomainError("no spectral density for mixing measures with atoms at 0 or infinity")
        else:
            raise DomainError(f"unknown spectral kind {self.kind!r}")

    @classmethod
    def hr(cls, lam):
        return cls("hr", lam)

    @classmethod
    def rayleigh(cls, sigma):
        return cls("rayleigh", sigma)

    @classmethod
    def type2gumbel(cls, b):
        return cls("type2gumbel", b)

    @classmethod
    def mixture(cls, nu):
        return cls("mixture", nu)

    def _g(self, t):
        """``s(theta) sin(theta) cos(theta)`` at ``t = log tan(theta)``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "hr":
            return np.exp(_log_g_hr(t, self.param))
        if self.kind == "rayleigh":
            return np.exp(_log_g_rayleigh(t, self.param))
        if self.kind == "type2gumbel":
            return np.exp(_log_g_type2(t, self.param))
        locs, wts = finite_rule(self.param)
        keep = (locs > 0) & (wts > 0)
        locs, wts = locs[keep], wts[keep]
        tt = t.reshape(-1, 1)
        out = np.exp(_log_g_hr(tt, locs[None, :])) @ wts
        return out.reshape(t.shape)

    def __call__(self, theta):
        return spectral_density(theta, self)


def spectral_density(theta, s: SpectralDensity):
    """Evaluate ``s`` at angles in ``[0, pi/2]``; the endpoints map to 0."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.isnan(theta)) or np.any(theta < 0) or np.any(theta > 0.5 * math.pi):
        raise DomainError("theta must lie in [0, pi/2]")
    inner = (theta > 0) & (theta < 0.5 * math.pi)
    th = np.where(inner, theta, 0.25 * math.pi)
    t = np.log(np.sin(th)) - np.log(np.cos(th))
    val = s._g(t) / (np.sin(th) * np.cos(th))
    out = np.where(inner, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _log_sin(t):
    # log sin(theta) = -log(1 + e^{-2t}) / 2
    return -0.5 * np.logaddexp(0.0, -2.0 * t)


def _half_line(f, t0, direction, rtol):
    # int_{t0}^{+-inf} f(t) dt with t = t0 +- w / (1 - w)
    def mapped(w):
        one = 1.0 - w
        t = t0 + direction * w / one
        return f(t) / (one * one)

    val, _ = gauss_kronrod(mapped, 0.0, 1.0, rtol=rtol, atol=1e-300, initial=16, max_intervals=5000)
    return val


def _weighted_parts(s, x, y, rtol):
    """``int_{x-y}^inf e^{-x} sin * g dt`` and ``int_{-inf}^{x-y} e^{-y} cos * g dt``."""
    def upper(t):
        return np.exp(_log_sin(t) - x) * s._g(t)

    def lower(t):
        return np.exp(_log_sin(-t) - y) * s._g(t)

    if x == INF and y == INF:
        return 0.0, 0.0
    if y == INF:
        return _half_line(upper, 0.0, 1, rtol) + _half_line(upper, 0.0, -1, rtol), 0.0
    if x == INF:
        return 0.0, _half_line(lower, 0.0, 1, rtol) + _half_line(lower, 0.0, -1, rtol)
    t_star = x - y
    return _half_line(upper, t_star, 1, rtol), _half_line(lower, t_star, -1, rtol)


def cdf_from_spectral(x: float, y: float, s: SpectralDensity, rtol: float = 1e-10) -> float:
    """``exp(-int max(e^{-x} sin, e^{-y} cos) s dtheta)``, split at the
    crossover angle ``arctan(e^{x-y})`` where the maximum switches branch."""
    x, y = float(x), float(y)
    if math.isnan(x) or math.isnan(y):
        raise DomainError("NaN argument")
    if min(x, y) == -INF:
        return 0.0
    a, b = _weighted_parts(s, x, y, rtol)
    return math.exp(-(a + b))


def spectral_marginal_integrals(s: SpectralDensity, rtol: float = 1e-10) -> tuple[float, float]:
    """``(int sin * s dtheta, int cos * s dtheta)``; both equal 1 for a
    valid spectral density of a law with standard Gumbel margins."""
    def fs(t):
        return np.exp(_log_sin(t)) * s._g(t)

    def fc(t):
        return np.exp(_log_sin(-t)) * s._g(t)

    i_sin = _half_line(fs, 0.0, 1, rtol) + _half_line(fs, 0.0, -1, rtol)
    i_cos = _half_line(fc, 0.0, 1, rtol) + _half_line(fc, 0.0, -1, rtol)
    return i_sin, i_cos


# -- extremal correlation functions -------------------------------------------------

def _gamma_of(h, gamma: Variogram) -> float:
    if not isinstance(gamma, Variogram):
        raise DomainError("gamma must be a Variogram")
    return gamma(h)


def ecf_brown_resnick(h, gamma: Variogram) -> float:
    """``2 (1 - Phi(sqrt(gamma(h)) / 2))``."""
    g = _gamma_of(h, gamma)
    return float(2.0 * sc.ndtr(-0.5 * math.sqrt(g)))


def _closed_form_part(family, p, g):
    if family == "rayleigh":
        q = p * p * g
        return 1.0 - math.sqrt(q / (q + 1.0))
    if family == "type2gumbel":
        return math.exp(-math.sqrt(2.0 * p * g))
    return None


def ecf_mixture(h, gamma: Variogram, nu: MixtureMeasure, method: str = "auto") -> float:
    """``int 2 (1 - Phi(s sqrt(gamma(h)))) nu(ds)``.

    With ``method='auto'`` the continuous part uses the closed forms
    ``1 - sqrt(sigma^2 g / (sigma^2 g + 1))`` (Rayleigh) and
    ``exp(-sqrt(2 b g))`` (Type-2 Gumbel); ``method='quadrature'`` always
    integrates numerically.
    """
    if method not in ("auto", "quadrature"):
        raise DomainError(f"unknown method {method!r}")
    if nu.has_zero_atom or nu.has_inf_atom:
        raise DomainError("mixing measure must have no mass at 0 or infinity")
    g = _gamma_of(h, gamma)
    rg = math.sqrt(g)
    terms = [w * 2.0 * sc.ndtr(-a * rg) for a, w in nu.atoms if w > 0]
    if not nu.is_atomic:
        closed = _closed_form_part(nu.family, nu.params[0], g) if (
            method == "auto" and nu.family in ("rayleigh", "type2gumbel")) else None
        if closed is not None:
            terms.append(nu.continuous_weight * closed)
        else:
            nodes, weights = nu.continuous_rule
            terms.extend(weights * 2.0 * sc.ndtr(-nodes * rg))
    return min(1.0, max(0.0, math.fsum(terms)))


def ecf_laplace(h, gamma: Variogram, mu_atoms) -> float:
    """``sum w exp(-r sqrt(gamma(h)))`` for atoms ``(r, w)`` of a
    probability measure on ``(0, inf)``."""
    mu_atoms = [(float(r), float(w)) for r, w in mu_atoms]
    if not mu_atoms:
        raise DomainError("need at least one atom")
    if any(not (r > 0 and math.isfinite(r)) for r, _ in mu_atoms):
        raise DomainError("Laplace atoms must be positive and finite")
    if any(w < 0 for _, w in mu_atoms) or abs(math.fsum(w for _, w in mu_atoms) - 1.0) > 1e-12:
        raise DomainError("weights must be nonnegative and sum to 1")
    rg = math.sqrt(_gamma_of(h, gamma))
    return math.fsum(w * math.exp(-r * rg) for r, w in mu_atoms)


def ecf_from_bivariate_cdf(F: BivariateMaxStableCDF, x: float = 0.0) -> float:
    """``rho = 2 + e^x log F(x, x)``; independent of ``x`` for max-stable
    ``F`` with standard Gumbel margins."""
    v = F(x, x)
    if not v > 0:
        raise IntegrationError(f"F({x}, {x}) underflows to zero", node=float(x))
    return 2.0 + math.exp(x) * math.log(v)
