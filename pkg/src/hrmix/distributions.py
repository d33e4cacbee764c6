"""Husler-Reiss distributions and their mixtures.

All distribution functions have standard (or shifted) Gumbel margins and
are max-stable: ``F(x + log n, y + log n) ** n == F(x, y)``.

Dependence parameters ``lam`` live on ``[0, inf]``; ``lam = 0`` is complete
dependence and ``lam = inf`` independence. Both endpoints, and values
numerically indistinguishable from them, are evaluated through their
continuous limits.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special as sc

from ._errors import CapacityError, DomainError, FactorizationError, NotInDomainError
from .measures import INF, EtaMeasure, MixtureMeasure, integrate
from .quadrature import gauss_kronrod
from .special import cholesky_lower, mvn_survivor

__all__ = [
    "DependenceMatrix",
    "BivariateMaxStableCDF",
    "hr_exponent",
    "hr_bivariate_cdf",
    "hr_mixture_cdf",
    "rayleigh_mixture_cdf",
    "type2_gumbel_mixture_cdf",
    "general_mixture_cdf",
    "is_strictly_cnd",
    "gamma_transform",
    "h_lm",
    "husler_reiss_cdf",
    "h_eta_cdf",
    "loads_dependence_matrix",
    "dumps_dependence_matrix",
]

# below / above these the limit branches are used
LAMBDA_ZERO = 1e-8
LAMBDA_INF = 1e8

MAX_DIM = 10
CND_PIVOT_TOL = 1e-10


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.isnan(x)) or np.any(np.isnan(y)):
        raise DomainError("NaN argument")
    return x, y


def hr_exponent(x, y, lam):
    """Exponent ``-log F_lam(x, y)`` of the bivariate Husler-Reiss law;
    broadcasts over all three arguments."""
    x, y = _check_xy(x, y)
    lam = np.asarray(lam, dtype=float)
    if np.any(np.isnan(lam)) or np.any(lam < 0):
        raise DomainError("lambda must lie in [0, inf]")
    x, y, lam = np.broadcast_arrays(x, y, lam)
    with np.errstate(over="ignore", invalid="ignore"):
        ex = np.exp(-x)
        ey = np.exp(-y)
        both_inf = np.isinf(x) & np.isinf(y) & (x == y)
        d = np.where(both_inf, 0.0, y - x)
        dep = np.exp(-np.minimum(x, y))
        ind = ex + ey
        mid = (lam >= LAMBDA_ZERO) & (lam <= LAMBDA_INF)
        ls = np.where(mid, lam, 1.0)
        z = d / (2.0 * ls)
        t1 = np.where(ex == 0, 0.0, sc.ndtr(ls + z) * ex)
        t2 = np.where(ey == 0, 0.0, sc.ndtr(ls - z) * ey)
        out = np.where(mid, t1 + t2, np.where(lam < LAMBDA_ZERO, dep, ind))
    return float(out) if out.ndim == 0 else out


def hr_bivariate_cdf(x, y, lam):
    """Bivariate Husler-Reiss distribution function

    ``F(x, y) = exp(-Phi(lam + (x-y)/(2 lam)) e^{-y} - Phi(lam + (y-x)/(2 lam)) e^{-x})``

    with the limits ``exp(-e^{-min(x,y)})`` at ``lam = 0`` and
    ``exp(-e^{-x} - e^{-y})`` at ``lam = inf``. Arguments may be ``+inf``
    to obtain margins.
    """
    out = np.exp(-np.asarray(hr_exponent(x, y, lam)))
    return float(out) if out.ndim == 0 else out


def _mixture_exponent(x, y, nu: MixtureMeasure) -> float:
    x, y = float(x), float(y)
    _check_xy(x, y)
    with np.errstate(over="ignore"):
        at_inf = math.exp(-x) + math.exp(-y) if min(x, y) > -math.inf else math.inf
    return integrate(nu, lambda lam: hr_exponent(x, y, lam), at_inf=at_inf)


def hr_mixture_cdf(x: float, y: float, nu: MixtureMeasure) -> float:
    """Husler-Reiss mixture ``F_nu(x, y) = exp(-int V_lam(x, y) nu(dlam))``
    for a mixing measure ``nu`` on ``[0, inf]``."""
    return math.exp(-_mixture_exponent(x, y, nu))


def rayleigh_mixture_cdf(x: float, y: float, sigma: float) -> float:
    """Closed form of the Husler-Reiss mixture with Rayleigh(sigma) mixing:

    ``exp(-e^{-min(x,y)} - e^{-(x+y)/2} e^{-|y-x| eta/2} / eta)``,
    ``eta = sqrt(1 + 1/sigma**2)``.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    x, y = float(x), float(y)
    _check_xy(x, y)
    lo = min(x, y)
    if lo == math.inf:
        return 1.0
    eta = math.sqrt(1.0 + 1.0 / sigma**2)
    expo = (x + y) / 2.0 + abs(y - x) * eta / 2.0
    return math.exp(-math.exp(-lo) - math.exp(-expo) / eta)


def type2_gumbel_mixture_cdf(x: float, y: float, b: float) -> float:
    """Closed form of the Husler-Reiss mixture with Type-2 Gumbel(b) mixing:

    ``exp(-e^{-x} - e^{-y} + e^{-(x+y)/2} e^{-sqrt(((y-x)/2)**2 + 2b)})``.
    """
    if not b > 0:
        raise DomainError("b must be positive")
    x, y = float(x), float(y)
    _check_xy(x, y)
    if min(x, y) == math.inf:
        return 1.0
    if max(x, y) == math.inf:
        return math.exp(-math.exp(-min(x, y)))
    joint = math.exp(-(x + y) / 2.0 - math.sqrt(((y - x) / 2.0) ** 2 + 2.0 * b))
    return math.exp(-math.exp(-x) - math.exp(-y) + joint)


def general_mixture_cdf(x: float, y: float, eta: EtaMeasure) -> float:
    """Mixture over dependence and margin shifts:

    ``-log F = sum w [Phi(lam + D/(2 lam)) e^{-(x-theta)} + Phi(lam - D/(2 lam)) e^{-(y-gamma)}]``

    with ``D = y - x + theta - gamma``. Margins are Gumbel with locations
    given by :meth:`EtaMeasure.margin_locations`.
    """
    at = np.array(eta.atoms)
    lam, theta, gamma, w = at[:, 0], at[:, 1], at[:, 2], at[:, 3]
    vals = np.asarray(hr_exponent(float(x) - theta, float(y) - gamma, lam))
    return math.exp(-math.fsum(w * vals))


# -- multivariate -------------------------------------------------------------

def _validate_zero_diag(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    if np.any(a < 0):
        raise DomainError(f"{name} has negative entries")
    scale = max(float(np.max(a)), 1.0)
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise DomainError(f"{name} is not symmetric")
    if np.any(np.diag(a) != 0):
        raise DomainError(f"{name} must have a zero diagonal")
    return 0.5 * (a + a.T)


def is_strictly_cnd(a) -> bool:
    """True iff ``x' a x < 0`` for every nonzero ``x`` with ``sum(x) == 0``.

    Checked by Cholesky of ``B[j, k] = a[j, d] + a[k, d] - a[j, k]``
    (``j, k < d``) with pivots required to exceed ``1e-10`` times the
    largest diagonal entry of ``B``.

    Raises
    ------
    DomainError
        If ``a`` is not symmetric, nonnegative with zero diagonal.
    """
    a = _validate_zero_diag(a)
    d = a.shape[0]
    if d == 1:
        return True
    last = a[:-1, -1]
    B = last[:, None] + last[None, :] - a[:-1, :-1]
    if np.max(np.diag(B)) <= 0:
        return False
    try:
        cholesky_lower(B, pivot_tol=CND_PIVOT_TOL)
    except FactorizationError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class DependenceMatrix:
    """Symmetric, zero-diagonal matrix ``(lam_jk)`` whose entrywise square
    is strictly conditionally negative definite.

    Raises
    ------
    NotInDomainError
        If the squared matrix fails the strict CND test.
    """

    values: np.ndarray

    def __post_init__(self):
        a = _validate_zero_diag(self.values, "dependence matrix")
        if a.shape[0] < 2:
            raise DomainError("dependence matrix needs d >= 2")
        if not is_strictly_cnd(a * a):
            raise NotInDomainError("squared dependence matrix is not strictly conditionally negative definite")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def squared(self) -> np.ndarray:
        return self.values * self.values

    def scaled(self, c: float) -> "DependenceMatrix":
        if not c > 0:
            raise DomainError("scale must be positive")
        return DependenceMatrix(self.values * c)

    def __repr__(self):
        return f"DependenceMatrix(d={self.d})"


def _lambda_array(Lambda):
    if isinstance(Lambda, DependenceMatrix):
        return Lambda.values
    return _validate_zero_diag(Lambda, "dependence matrix")


def gamma_transform(Lambda, m: Sequence[int]) -> np.ndarray:
    """Covariance ``2 (lam2[m_j, m_l] + lam2[m_k, m_l] - lam2[m_j, m_k])``,
    ``j, k < l``, of the spectral increments relative to the last index of
    ``m`` (zero-based, strictly increasing, length >= 2).

    Raises
    ------
    NotInDomainError
        If the result is not positive definite; ``err.subset`` is ``m``.
    """
    lam = _lambda_array(Lambda)
    m = tuple(int(i) for i in m)
    d = lam.shape[0]
    if len(m) < 2:
        raise DomainError("index tuple needs length >= 2")
    if any(i < 0 or i >= d for i in m) or any(b <= a for a, b in zip(m, m[1:])):
        raise DomainError(f"indices {m} must be strictly increasing within 0..{d - 1}")
    lam2 = lam * lam
    head, last = list(m[:-1]), m[-1]
    col = lam2[head, last]
    G = 2.0 * (col[:, None] + col[None, :] - lam2[np.ix_(head, head)])
    try:
        cholesky_lower(G, pivot_tol=CND_PIVOT_TOL)
    except FactorizationError:
        raise NotInDomainError(f"transformed matrix for indices {m} is not positive definite",
                               subset=m) from None
    return G


def _h_tolerances(l):
    # orthant accuracy: exact for l=2, ~1e-10 by conditioning, ~1e-6 by QMC
    if l == 2:
        return 1e-11, 1e-15
    if l <= 4:
        return 1e-7, 1e-11
    return 1e-5, 1e-6


def h_lm(y, m: Sequence[int], Lambda, rtol: float | None = None) -> float:
    """Exponent-measure mass of ``{z_i > y_i for all i}`` over the index
    tuple ``m``:

    ``h(y) = int_{y_l}^inf S((y_i - z + 2 lam2[m_i, m_l])_{i<l} | Gamma_m) e^{-z} dz``

    and ``h(y) = e^{-y}`` for a single index. The integral is computed
    after ``z = y_l - log(1 - v)`` by adaptive Gauss-Kronrod on ``v``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = tuple(int(i) for i in m)
    if y.shape != (len(m),):
        raise DomainError("y and m differ in length")
    if np.any(np.isnan(y)):
        raise DomainError("NaN argument")
    l = len(m)
    if l == 1:
        return math.exp(-y[0]) if y[0] < math.inf else 0.0
    if np.any(y == math.inf):
        return 0.0
    lam = _lambda_array(Lambda)
    G = gamma_transform(lam, m)
    shift = 2.0 * (lam * lam)[list(m[:-1]), m[-1]]
    base = y[:-1] - y[-1] + shift
    rt, at = _h_tolerances(l)
    if rtol is not None:
        rt = rtol

    def integrand(v):
        thr = base[None, :] + np.log1p(-v)[:, None]
        return mvn_survivor(thr, G)

    val, _ = gauss_kronrod(integrand, 0.0, 1.0, rtol=rt, atol=at)
    return math.exp(-y[-1]) * val


def _hr_log_cdf(x, lam):
    d = lam.shape[0]
    if np.any(x == -math.inf):
        return -math.inf
    terms = []
    for l in range(1, d + 1):
        sign = -1.0 if l % 2 else 1.0
        for m in itertools.combinations(range(d), l):
            xm = x[list(m)]
            if np.any(xm == math.inf):
                continue
            terms.append(sign * h_lm(xm, m, lam))
    return math.fsum(terms)


def husler_reiss_cdf(x, Lambda) -> float:
    """d-variate Husler-Reiss distribution function by inclusion-exclusion
    over the ``2**d - 1`` index subsets (``d <= 10``).

    Raises
    ------
    CapacityError
        If ``d > 10``.
    NotInDomainError
        If ``Lambda`` is not a valid dependence matrix.
    """
    lam_arr = np.asarray(Lambda.values if isinstance(Lambda, DependenceMatrix) else Lambda, dtype=float)
    if lam_arr.ndim == 2 and lam_arr.shape[0] > MAX_DIM:
        raise CapacityError(f"dimension {lam_arr.shape[0]} exceeds the ceiling of {MAX_DIM}")
    if not isinstance(Lambda, DependenceMatrix):
        Lambda = DependenceMatrix(lam_arr)
    x = np.asarray(x, dtype=float)
    if x.shape != (Lambda.d,):
        raise DomainError(f"x must have length {Lambda.d}")
    if np.any(np.isnan(x)):
        raise DomainError("NaN argument")
    return math.exp(_hr_log_cdf(x, Lambda.values))


def h_eta_cdf(x, eta_atoms) -> float:
    """Mixture ``exp(sum w log H_Lambda(x))`` over weighted dependence
    matrices ``[(Lambda, w), ...]``."""
    eta_atoms = list(eta_atoms)
    if not eta_atoms:
        raise DomainError("need at least one atom")
    total = math.fsum(w for _, w in eta_atoms)
    if abs(total - 1.0) > 1e-12 or any(w < 0 for _, w in eta_atoms):
        raise DomainError("weights must be nonnegative and sum to 1")
    x = np.asarray(x, dtype=float)
    logs = []
    for Lam, w in eta_atoms:
        if not isinstance(Lam, DependenceMatrix):
            Lam = DependenceMatrix(np.asarray(Lam, dtype=float))
        if Lam.d > MAX_DIM:
            raise CapacityError(f"dimension {Lam.d} exceeds the ceiling of {MAX_DIM}")
        if x.shape != (Lam.d,):
            raise DomainError(f"x must have length {Lam.d}")
        if w > 0:
            logs.append(w * _hr_log_cdf(x, Lam.values))
    return math.exp(math.fsum(logs))


# -- bivariate evaluator handle -------------------------------------------------

@dataclass(frozen=True)
class BivariateMaxStableCDF:
    """A bivariate max-stable distribution function with its dependence
    descriptor.

    ``kind`` is one of ``'hr'`` (param: lambda), ``'mixture'`` (a
    MixtureMeasure), ``'rayleigh'`` (sigma), ``'type2gumbel'`` (b) or
    ``'eta'`` (an EtaMeasure).
    """

    kind: str
    param: object

    def __call__(self, x, y) -> float:
        if self.kind == "hr":
            return float(hr_bivariate_cdf(x, y, self.param))
        if self.kind == "mixture":
            return hr_mixture_cdf(x, y, self.param)
        if self.kind == "rayleigh":
            return rayleigh_mixture_cdf(x, y, self.param)
        if self.kind == "type2gumbel":
            return type2_gumbel_mixture_cdf(x, y, self.param)
        if self.kind == "eta":
            return general_mixture_cdf(x, y, self.param)
        raise DomainError(f"unknown kind {self.kind!r}")

    @classmethod
    def hr(cls, lam):
        return cls("hr", float(lam))

    @classmethod
    def mixture(cls, nu):
        return cls("mixture", nu)

    @classmethod
    def rayleigh(cls, sigma):
        return cls("rayleigh", float(sigma))

    @classmethod
    def type2gumbel(cls, b):
        return cls("type2gumbel", float(b))

    @classmethod
    def eta(cls, eta):
        return cls("eta", eta)


# -- text format ------------------------------------------------------------------

def loads_dependence_matrix(text: str) -> DependenceMatrix:
    """Parse ``d`` on the first line followed by ``d`` whitespace-separated
    rows. Lines starting with ``#`` are skipped.

    Raises
    ------
    DomainError
        With a ``line L, column C`` diagnostic on malformed input.
    """
    rows = [(i, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines(), 1)]
    rows = [(i, tok) for i, tok in rows if tok]
    if not rows:
        raise DomainError("empty dependence matrix file")
    first_line, tok = rows[0]
    if len(tok) != 1:
        raise DomainError(f"line {first_line}: expected the dimension alone")
    try:
        d = int(tok[0])
    except ValueError:
        raise DomainError(f"line {first_line}, column 1: dimension {tok[0]!r} is not an integer") from None
    if d < 2:
        raise DomainError(f"line {first_line}, column 1: dimension must be >= 2")
    body = rows[1:]
    if len(body) != d:
        raise DomainError(f"expected {d} matrix rows, found {len(body)}")
    a = np.empty((d, d))
    for r, (lineno, tok) in enumerate(body):
        if len(tok) != d:
            raise DomainError(f"line {lineno}: expected {d} entries, found {len(tok)}")
        for c, t in enumerate(tok):
            try:
                v = float(t)
            except ValueError:
                raise DomainError(f"line {lineno}, column {c + 1}: {t!r} is not a number") from None
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"line {lineno}, column {c + 1}: entry must be finite and >= 0")
            if r == c and v != 0:
                raise DomainError(f"line {lineno}, column {c + 1}: diagonal entry must be 0")
            a[r, c] = v
    for r in range(d):
        for c in range(r + 1, d):
            if a[r, c] != a[c, r]:
                raise DomainError(f"line {body[c][0]}, column {r + 1}: matrix is not symmetric")
    return DependenceMatrix(a)


def dumps_dependence_matrix(Lambda: DependenceMatrix) -> str:
    lines = [str(Lambda.d)]
    lines += [" ".join(repr(float(v)) for v in row) for row in Lambda.values]
    return "\n".join(lines) + "\n"
