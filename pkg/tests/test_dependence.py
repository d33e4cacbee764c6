import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as si
from scipy.special import ndtr
from scipy.stats import norm

from hrmix import DomainError, IntegrationError
from hrmix import measures as M
from hrmix.dependence import (
    SpectralDensity,
    Variogram,
    cdf_from_spectral,
    ecf_brown_resnick,
    ecf_from_bivariate_cdf,
    ecf_laplace,
    ecf_mixture,
    spectral_density,
    spectral_marginal_integrals,
)
from hrmix.distributions import (
    BivariateMaxStableCDF,
    hr_bivariate_cdf,
    hr_mixture_cdf,
    rayleigh_mixture_cdf,
    type2_gumbel_mixture_cdf,
)

DENSITIES = [
    SpectralDensity.hr(0.3), SpectralDensity.hr(1.0), SpectralDensity.hr(3.0),
    SpectralDensity.rayleigh(0.5), SpectralDensity.rayleigh(1.0), SpectralDensity.rayleigh(3.0),
    SpectralDensity.type2gumbel(0.5), SpectralDensity.type2gumbel(2.0),
    SpectralDensity.mixture(M.atomic([(0.5, 0.5), (2.0, 0.5)])),
    SpectralDensity.mixture(M.rayleigh(1.0)),
]
ids = [f"{s.kind}" for s in DENSITIES]


def line(g):
    # a lag whose variogram value is g under the unit linear variogram
    return np.array([g])


LIN = Variogram(alpha=1.0, scale=1.0)


# -- variograms ------------------------------------------------------------------------------

def test_variogram_basics():
    v = Variogram(alpha=1.5, scale=2.0)
    assert v(np.zeros(2)) == 0.0
    assert v([1.0, -2.0]) == v([-1.0, 2.0]) == pytest.approx(2.0 * 5 ** 0.75)
    for bad in (dict(alpha=0.0), dict(alpha=2.1), dict(scale=0.0), dict(family="exp")):
        with pytest.raises(DomainError):
            Variogram(**bad)


# -- spectral densities --------------------------------------------------------------------------

def test_spectral_examples():
    assert spectral_density(math.pi / 4, SpectralDensity.hr(1.0)) == pytest.approx(
        math.sqrt(2) * norm.pdf(1.0), rel=1e-14)
    # corrected value: the Rayleigh density at the diagonal is 1/2 for sigma = 1
    assert spectral_density(math.pi / 4, SpectralDensity.rayleigh(1.0)) == pytest.approx(0.5, rel=1e-14)
    s = SpectralDensity.type2gumbel(0.5)
    assert spectral_density(math.pi / 8, s) == pytest.approx(spectral_density(3 * math.pi / 8, s), rel=1e-12)


def test_spectral_endpoints_and_domain():
    for s in DENSITIES:
        assert spectral_density(0.0, s) == 0.0
        assert spectral_density(math.pi / 2, s) == 0.0
    with pytest.raises(DomainError):
        spectral_density(-0.1, SpectralDensity.hr(1.0))
    with pytest.raises(DomainError):
        SpectralDensity.mixture(M.atomic([(0.0, 0.5), (1.0, 0.5)]))
    with pytest.raises(DomainError):
        SpectralDensity.mixture(M.atomic([(M.INF, 0.5), (1.0, 0.5)]))
    with pytest.raises(DomainError):
        SpectralDensity.hr(0.0)


@pytest.mark.parametrize("s", DENSITIES, ids=ids)
def test_symmetry(s):
    th = np.linspace(0.02, math.pi / 2 - 0.02, 20)
    a = np.array([spectral_density(t, s) for t in th])
    b = np.array([spectral_density(math.pi / 2 - t, s) for t in th])
    assert np.max(np.abs(a - b)) <= 1e-10
    assert np.all(a >= 0)


@pytest.mark.parametrize("s", DENSITIES, ids=ids)
def test_marginal_constraints(s):
    i_sin, i_cos = spectral_marginal_integrals(s)
    assert i_sin == pytest.approx(1.0, abs=1e-4)
    assert i_cos == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("s", DENSITIES[:5], ids=ids[:5])
def test_marginal_constraints_independent_quad(s):
    # fold onto (0, pi/4] by symmetry, where small angles keep full relative
    # precision; theta = arctan(e^t) with d theta = sin cos dt. Slowly decaying
    # kinds keep mass below the smallest double angle and are left to the
    # log-tangent check above.
    def f(t):
        th = math.atan(math.exp(t))
        return (math.sin(th) + math.cos(th)) * math.sin(th) * math.cos(th) * spectral_density(th, s)
    br = np.linspace(-300.0, 0.0, 151)
    v = math.fsum(si.quad(f, a, b, epsabs=1e-15, limit=200)[0] for a, b in zip(br[:-1], br[1:]))
    assert v == pytest.approx(1.0, abs=1e-4)


def test_rayleigh_density_matches_mixture_of_hr():
    # closed form for the Rayleigh spectral density vs integrating s_lambda over nu
    s_closed = SpectralDensity.rayleigh(1.3)
    nu = M.rayleigh(1.3)
    for th in (0.2, 0.6, 1.1):
        def f(lam):
            return np.array([spectral_density(th, SpectralDensity.hr(float(l))) for l in np.atleast_1d(lam)])
        ref = M.integrate(nu, f)
        assert spectral_density(th, s_closed) == pytest.approx(ref, rel=1e-7)


# -- CDF from spectral representation ------------------------------------------------------------

def test_cdf_from_spectral_examples():
    assert cdf_from_spectral(0, 0, SpectralDensity.hr(1.0)) == pytest.approx(hr_bivariate_cdf(0, 0, 1.0), abs=1e-5)
    assert cdf_from_spectral(0.5, -0.5, SpectralDensity.rayleigh(1.0)) == pytest.approx(
        rayleigh_mixture_cdf(0.5, -0.5, 1.0), abs=1e-5)
    for x in (-1.0, 0.0, 1.5):
        assert cdf_from_spectral(x, 50.0, SpectralDensity.hr(1.0)) == pytest.approx(math.exp(-math.exp(-x)), abs=1e-4)


@given(st.sampled_from([-2.0, -0.5, 0.0, 1.0, 2.5]), st.sampled_from([-2.0, 0.0, 0.7, 3.0]),
       st.sampled_from([0.25, 1.0, 4.0]))
def test_cdf_from_spectral_closed_forms(x, y, p):
    assert cdf_from_spectral(x, y, SpectralDensity.rayleigh(p)) == pytest.approx(
        rayleigh_mixture_cdf(x, y, p), rel=1e-5)
    assert cdf_from_spectral(x, y, SpectralDensity.type2gumbel(p)) == pytest.approx(
        type2_gumbel_mixture_cdf(x, y, p), rel=1e-5)
    assert cdf_from_spectral(x, y, SpectralDensity.hr(p)) == pytest.approx(hr_bivariate_cdf(x, y, p), rel=1e-5)


def test_cdf_from_spectral_mixture():
    nu = M.atomic([(0.5, 0.5), (2.0, 0.5)])
    assert cdf_from_spectral(0.3, -0.1, SpectralDensity.mixture(nu)) == pytest.approx(
        hr_mixture_cdf(0.3, -0.1, nu), rel=1e-5)


# -- extremal correlation functions --------------------------------------------------------------

def test_ecf_brown_resnick_examples():
    assert ecf_brown_resnick(np.zeros(1), LIN) == 1.0
    assert ecf_brown_resnick(line(4.0), LIN) == pytest.approx(2 * (1 - ndtr(1.0)), rel=1e-14)
    assert ecf_brown_resnick(line(4.0), LIN) == pytest.approx(0.31731, abs=1e-5)
    assert ecf_brown_resnick(line(1e4), LIN) <= 1e-8


def test_ecf_mixture_examples():
    assert ecf_mixture(line(1.0), LIN, M.rayleigh(1.0)) == pytest.approx(1 - math.sqrt(0.5), rel=1e-14)
    assert ecf_mixture(line(1.0), LIN, M.rayleigh(1.0)) == pytest.approx(0.29289, abs=1e-5)
    assert ecf_mixture(line(2.0), LIN, M.type2gumbel(1.0)) == pytest.approx(math.exp(-2), rel=1e-14)
    v = ecf_mixture(line(1.0), LIN, M.type2gumbel(3.0))
    assert v == pytest.approx(math.exp(-math.sqrt(6)), rel=1e-14)
    dens = lambda s: 6.0 * s**-3 * math.exp(-3.0 / s**2)
    ref, _ = si.quad(lambda s: 2 * ndtr(-s) * dens(s), 0, np.inf, epsabs=1e-13, limit=300)
    assert abs(v - ref) <= 1e-7


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0])
def test_ecf_rayleigh_closed_vs_quadrature(g):
    q = ecf_mixture(line(g), LIN, M.rayleigh(1.0), method="quadrature")
    assert q == pytest.approx(1 - math.sqrt(g / (g + 1)), abs=1e-7)


@pytest.mark.parametrize("fam, p", [("rayleigh", 0.4), ("rayleigh", 2.5), ("type2gumbel", 0.3), ("type2gumbel", 5.0)])
@pytest.mark.parametrize("g", [0.05, 1.0, 20.0])
def test_ecf_closed_forms_vs_independent_quad(fam, p, g):
    if fam == "rayleigh":
        dens = lambda s: s / p**2 * math.exp(-s * s / (2 * p * p))
    else:
        dens = lambda s: 2 * p * s**-3 * math.exp(-p / s**2)
    ref, _ = si.quad(lambda s: 2 * ndtr(-s * math.sqrt(g)) * dens(s), 0, np.inf, epsabs=1e-13, limit=300)
    assert ecf_mixture(line(g), LIN, M.make_measure(fam, p)) == pytest.approx(ref, abs=1e-9)


def test_ecf_mixture_domain():
    with pytest.raises(DomainError):
        ecf_mixture(line(1.0), LIN, M.atomic([(0.0, 0.5), (1.0, 0.5)]))
    with pytest.raises(DomainError):
        ecf_mixture(line(1.0), LIN, M.atomic([(M.INF, 0.5), (1.0, 0.5)]))


def test_ecf_laplace_examples():
    assert ecf_laplace(line(2.0), LIN, [(math.sqrt(2), 1.0)]) == pytest.approx(
        ecf_mixture(line(2.0), LIN, M.type2gumbel(1.0)), abs=1e-12)
    assert ecf_laplace(np.zeros(1), LIN, [(1.0, 0.5), (3.0, 0.5)]) == 1.0
    assert ecf_laplace(line(1.0), LIN, [(1.0, 0.5), (2.0, 0.5)]) == pytest.approx(
        (math.exp(-1) + math.exp(-2)) / 2, rel=1e-15)
    with pytest.raises(DomainError):
        ecf_laplace(line(1.0), LIN, [(0.0, 1.0)])
    with pytest.raises(DomainError):
        ecf_laplace(line(1.0), LIN, [(1.0, 0.6)])


def test_ecf_from_cdf_examples():
    assert ecf_from_bivariate_cdf(BivariateMaxStableCDF.hr(1.0)) == pytest.approx(2 - 2 * ndtr(1.0), abs=1e-12)
    assert ecf_from_bivariate_cdf(BivariateMaxStableCDF.hr(math.inf)) == pytest.approx(0.0, abs=1e-14)
    assert ecf_from_bivariate_cdf(BivariateMaxStableCDF.rayleigh(1.0)) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)
    with pytest.raises(IntegrationError):
        ecf_from_bivariate_cdf(BivariateMaxStableCDF.hr(1.0), x=-30.0)


@pytest.mark.parametrize("F", [BivariateMaxStableCDF.hr(0.7), BivariateMaxStableCDF.rayleigh(2.0),
                               BivariateMaxStableCDF.type2gumbel(0.5),
                               BivariateMaxStableCDF.mixture(M.rayleigh(1.0))], ids=lambda F: F.kind)
def test_ecf_from_cdf_x_independent(F):
    vals = [ecf_from_bivariate_cdf(F, x) for x in (-1.0, 0.0, 2.0)]
    assert max(vals) - min(vals) <= 1e-9


@pytest.mark.parametrize("nu", [M.rayleigh(1.0), M.type2gumbel(2.0), M.atomic([(0.3, 0.4), (1.7, 0.6)]),
                                M.tabulated([0.5, 1, 2], [1, 2, 0.5])], ids=str)
def test_diagonal_consistency(nu):
    # the bivariate CDF at the diagonal and the mixture of 2(1 - Phi) agree
    F = BivariateMaxStableCDF.mixture(nu)
    ref = M.integrate(nu, lambda l: 2 * ndtr(-l))
    assert ecf_from_bivariate_cdf(F) == pytest.approx(ref, abs=1e-6)


ECFS = [
    lambda h, v: ecf_brown_resnick(h, v),
    lambda h, v: ecf_mixture(h, v, M.rayleigh(1.0)),
    lambda h, v: ecf_mixture(h, v, M.type2gumbel(0.5)),
    lambda h, v: ecf_mixture(h, v, M.atomic([(0.5, 0.5), (2.0, 0.5)])),
    lambda h, v: ecf_laplace(h, v, [(1.0, 0.5), (2.0, 0.5)]),
]


@given(st.sampled_from(range(len(ECFS))), st.floats(0.1, 2.0), st.floats(0.1, 5.0),
       st.floats(-math.pi, math.pi))
def test_ecf_rays(k, alpha, scale, angle):
    rho = ECFS[k]
    v = Variogram(alpha=alpha, scale=scale)
    direction = np.array([math.cos(angle), math.sin(angle)])
    r = np.linspace(0.0, 5.0, 50)
    vals = np.array([rho(t * direction, v) for t in r])
    assert vals[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) <= 1e-15)
