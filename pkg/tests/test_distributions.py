import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as si
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from hrmix import CapacityError, DomainError, NotInDomainError
from hrmix import measures as M
from hrmix.distributions import (
    BivariateMaxStableCDF,
    DependenceMatrix,
    dumps_dependence_matrix,
    gamma_transform,
    general_mixture_cdf,
    h_eta_cdf,
    h_lm,
    hr_bivariate_cdf,
    hr_mixture_cdf,
    husler_reiss_cdf,
    is_strictly_cnd,
    loads_dependence_matrix,
    rayleigh_mixture_cdf,
    type2_gumbel_mixture_cdf,
)

GRID = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
grid_pt = st.sampled_from(GRID)


def line_lambda(ts, alpha=1.0):
    t = np.asarray(ts, dtype=float)
    return np.sqrt(np.abs(t[:, None] - t[None, :]) ** alpha)


# -- bivariate Husler-Reiss ----------------------------------------------------------

def test_hr_examples():
    assert hr_bivariate_cdf(0, 1, 0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert hr_bivariate_cdf(0, 0, math.inf) == pytest.approx(math.exp(-2), abs=1e-15)
    assert hr_bivariate_cdf(0, 0, 1) == pytest.approx(math.exp(-2 * ndtr(1.0)), abs=1e-15)
    assert hr_bivariate_cdf(0, 0, 1) == pytest.approx(0.18587, abs=1e-5)


def test_hr_limit_branches_continuous():
    x, y = 0.3, -0.2
    assert hr_bivariate_cdf(x, y, 1e-9) == hr_bivariate_cdf(x, y, 0.0)
    assert hr_bivariate_cdf(x, y, 1e-6) == pytest.approx(hr_bivariate_cdf(x, y, 0.0), abs=1e-9)
    assert hr_bivariate_cdf(x, y, 1e9) == hr_bivariate_cdf(x, y, math.inf)
    assert hr_bivariate_cdf(x, y, 40.0) == pytest.approx(hr_bivariate_cdf(x, y, math.inf), abs=1e-12)


def test_hr_margins_with_inf():
    for lam in (0.0, 0.7, math.inf):
        assert hr_bivariate_cdf(0.4, math.inf, lam) == pytest.approx(math.exp(-math.exp(-0.4)), abs=1e-15)
        assert hr_bivariate_cdf(math.inf, math.inf, lam) == 1.0


@pytest.mark.parametrize("lam", [-0.1, math.nan])
def test_hr_domain(lam):
    with pytest.raises(DomainError):
        hr_bivariate_cdf(0, 0, lam)
    with pytest.raises(DomainError):
        hr_bivariate_cdf(math.nan, 0, 1.0)


@given(st.floats(0, 10), st.floats(0, 10))
def test_hr_diagonal_ordering(l1, dl):
    # -log F(0, 0) = 2 Phi(lambda) is nondecreasing in lambda
    assert -math.log(hr_bivariate_cdf(0, 0, l1)) <= -math.log(hr_bivariate_cdf(0, 0, l1 + dl)) + 1e-15


# -- mixtures ------------------------------------------------------------------------

def _quad_mixture(x, y, density):
    # independent oracle: scipy adaptive quadrature of the exponent
    def integrand(l):
        return (ndtr(l + (y - x) / (2 * l)) * math.exp(-x) + ndtr(l + (x - y) / (2 * l)) * math.exp(-y)) * density(l)
    v, _ = si.quad(integrand, 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
    return math.exp(-v)


@pytest.mark.parametrize("lam", [0.0, 1.0, math.inf])
def test_point_mass_reduction(lam):
    assert hr_mixture_cdf(0.3, -0.2, M.dirac(lam)) == hr_bivariate_cdf(0.3, -0.2, lam)


def test_mixture_examples():
    assert hr_mixture_cdf(0, 0, M.rayleigh(1.0)) == pytest.approx(math.exp(-1 - 1 / math.sqrt(2)), rel=1e-12)
    nu = M.atomic([(0.0, 0.5), (M.INF, 0.5)])
    assert hr_mixture_cdf(0, 1, nu) == pytest.approx(math.exp(-1 - math.exp(-1) / 2), rel=1e-15)


def test_rayleigh_closed_form_examples():
    assert rayleigh_mixture_cdf(0, 0, 1) == pytest.approx(math.exp(-1 - 1 / math.sqrt(2)), rel=1e-15)
    assert abs(rayleigh_mixture_cdf(0, 1, 1e-6) - math.exp(-1)) <= 1e-3
    assert rayleigh_mixture_cdf(0.7, -0.4, 2.0) == pytest.approx(hr_mixture_cdf(0.7, -0.4, M.rayleigh(2.0)), abs=1e-7)


def test_type2_closed_form_examples():
    assert type2_gumbel_mixture_cdf(0, 0, 1) == pytest.approx(math.exp(-2 + math.exp(-math.sqrt(2))), rel=1e-15)
    assert type2_gumbel_mixture_cdf(0, 0, 1) == pytest.approx(0.17258, abs=1e-5)
    assert abs(type2_gumbel_mixture_cdf(0, 0, 1e4) - math.exp(-2)) <= 1e-3
    assert type2_gumbel_mixture_cdf(0.5, -1, 0.7) == pytest.approx(hr_mixture_cdf(0.5, -1, M.type2gumbel(0.7)), abs=1e-7)


@pytest.mark.parametrize("sigma", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("x, y", [(-2, 3), (0.5, 0.5), (1, -1)])
def test_rayleigh_closed_form_vs_independent_quad(sigma, x, y):
    dens = lambda l: l / sigma**2 * math.exp(-l * l / (2 * sigma**2))
    assert rayleigh_mixture_cdf(x, y, sigma) == pytest.approx(_quad_mixture(x, y, dens), abs=1e-10)


@pytest.mark.parametrize("b", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("x, y", [(-2, 3), (0.5, 0.5), (1, -1)])
def test_type2_closed_form_vs_independent_quad(b, x, y):
    dens = lambda l: 2 * b * l**-3 * math.exp(-b / l**2) if l > 0 else 0.0
    assert type2_gumbel_mixture_cdf(x, y, b) == pytest.approx(_quad_mixture(x, y, dens), abs=1e-10)


def test_closed_form_domains():
    with pytest.raises(DomainError):
        rayleigh_mixture_cdf(0, 0, 0.0)
    with pytest.raises(DomainError):
        type2_gumbel_mixture_cdf(0, 0, -1.0)


# -- general mixtures over margin shifts -----------------------------------------------

def test_general_mixture_examples():
    eta = M.EtaMeasure(((1.0, 0.0, 0.0, 1.0),))
    assert general_mixture_cdf(0, 0, eta) == pytest.approx(hr_bivariate_cdf(0, 0, 1.0), rel=1e-15)
    eta = M.EtaMeasure(((1.0, math.log(2), 0.0, 1.0),))
    assert -math.log(general_mixture_cdf(0, math.inf, eta)) == pytest.approx(2.0, rel=1e-14)


def test_general_mixture_hand_sum():
    atoms = [(0.5, 0.1, -0.2, 0.5), (2.0, 0.0, 0.3, 0.5)]
    x = y = 0.0
    total = 0.0
    for lam, th, ga, w in atoms:
        d = y - x + th - ga
        total += w * (ndtr(lam + d / (2 * lam)) * math.exp(-(x - th)) + ndtr(lam - d / (2 * lam)) * math.exp(-(y - ga)))
    assert general_mixture_cdf(x, y, M.EtaMeasure(tuple(atoms))) == pytest.approx(math.exp(-total), abs=1e-12)


def test_general_mixture_margin_location():
    eta = M.EtaMeasure(((0.5, 0.3, -0.1, 0.4), (2.0, -0.2, 0.6, 0.6)))
    loc_x, loc_y = eta.margin_locations()
    assert general_mixture_cdf(0.2, math.inf, eta) == pytest.approx(math.exp(-math.exp(-(0.2 - loc_x))), rel=1e-14)
    assert general_mixture_cdf(math.inf, 0.2, eta) == pytest.approx(math.exp(-math.exp(-(0.2 - loc_y))), rel=1e-14)


# -- invariants over all bivariate CDFs ------------------------------------------------------

ALL_CDFS = [
    BivariateMaxStableCDF.hr(0.0), BivariateMaxStableCDF.hr(0.5), BivariateMaxStableCDF.hr(2.0),
    BivariateMaxStableCDF.hr(math.inf),
    BivariateMaxStableCDF.mixture(M.rayleigh(1.0)), BivariateMaxStableCDF.mixture(M.type2gumbel(0.5)),
    BivariateMaxStableCDF.mixture(M.atomic([(0.0, 0.3), (1.0, 0.3), (M.INF, 0.4)])),
    BivariateMaxStableCDF.rayleigh(0.25), BivariateMaxStableCDF.rayleigh(4.0),
    BivariateMaxStableCDF.type2gumbel(0.25), BivariateMaxStableCDF.type2gumbel(4.0),
    BivariateMaxStableCDF.eta(M.EtaMeasure(((0.5, 0.1, -0.2, 0.5), (2.0, 0.0, 0.3, 0.5)))),
]
cdf_st = st.sampled_from(ALL_CDFS)


@given(cdf_st, grid_pt, grid_pt, st.sampled_from([2, 10]))
def test_max_stability(F, x, y, n):
    ln = math.log(n)
    assert abs(F(x + ln, y + ln) ** n - F(x, y)) <= 1e-10


@given(cdf_st, grid_pt, grid_pt)
def test_frechet_bounds(F, x, y):
    if F.kind == "eta":
        return  # shifted margins
    lo = math.exp(-math.exp(-x) - math.exp(-y))
    hi = math.exp(-math.exp(-min(x, y)))
    v = F(x, y)
    assert lo - 1e-14 <= v <= hi + 1e-14


@given(cdf_st, grid_pt)
def test_standard_margins(F, x):
    if F.kind == "eta":
        return
    assert F(x, math.inf) == pytest.approx(math.exp(-math.exp(-x)), abs=1e-9)
    assert F(math.inf, x) == pytest.approx(math.exp(-math.exp(-x)), abs=1e-9)


@given(cdf_st, grid_pt, grid_pt, st.floats(0.01, 2.0))
def test_monotone_in_each_argument(F, x, y, d):
    v = F(x, y)
    assert 0.0 <= v <= 1.0
    assert F(x + d, y) >= v - 1e-15
    assert F(x, y + d) >= v - 1e-15


@pytest.mark.parametrize("fam, p", [("rayleigh", 0.25), ("rayleigh", 1.0), ("rayleigh", 4.0),
                                    ("type2gumbel", 0.25), ("type2gumbel", 1.0), ("type2gumbel", 4.0)])
def test_closed_forms_vs_quadrature_grid(fam, p):
    nu = M.make_measure(fam, p)
    closed = rayleigh_mixture_cdf if fam == "rayleigh" else type2_gumbel_mixture_cdf
    err = max(abs(closed(x, y, p) - hr_mixture_cdf(x, y, nu)) for x in GRID for y in GRID)
    assert err <= 1e-7


# -- conditional negative definiteness ---------------------------------------------------

def _cnd_oracle(a):
    # eigenvalues of a restricted to the zero-sum hyperplane
    d = a.shape[0]
    q, _ = np.linalg.qr(np.vstack([np.ones(d), np.eye(d)[:-1]]).T)
    basis = q[:, 1:]
    return np.linalg.eigvalsh(basis.T @ a @ basis).max() < -1e-12


def test_cnd_examples():
    assert not is_strictly_cnd(np.zeros((3, 3)))
    t = np.array([0.0, 1.0, 3.0])
    a = np.abs(t[:, None] - t[None, :])
    assert is_strictly_cnd(a) and _cnd_oracle(a)
    t = np.array([0.0, 1.0, 2.0])
    a2 = (t[:, None] - t[None, :]) ** 2
    assert not is_strictly_cnd(a2)
    v = np.array([1.0, -2.0, 1.0])
    assert v @ a2 @ v == 0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=7, unique=True), st.floats(0.2, 1.9))
def test_cnd_power_variograms_agree_with_oracle(ts, alpha):
    t = np.array(ts)
    if np.min(np.diff(np.sort(t))) < 1e-3:
        return
    a = np.abs(t[:, None] - t[None, :]) ** alpha
    assert is_strictly_cnd(a) == _cnd_oracle(a)


def test_cnd_input_validation():
    with pytest.raises(DomainError):
        is_strictly_cnd(np.array([[0, 1], [2, 0.0]]))
    with pytest.raises(DomainError):
        is_strictly_cnd(np.array([[1, 1], [1, 0.0]]))


# -- dependence matrices, transforms, h ------------------------------------------------------

def test_dependence_matrix_validation():
    L = DependenceMatrix(line_lambda([0, 1, 2]))
    assert L.d == 3
    with pytest.raises(NotInDomainError):
        DependenceMatrix(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        DependenceMatrix(np.array([[0.0]]))
    t = np.array([0.0, 1.0, 2.0])
    with pytest.raises(NotInDomainError):
        DependenceMatrix(np.abs(t[:, None] - t[None, :]))  # alpha = 2 on a line


def test_gamma_transform_examples():
    lam = 0.7
    L = np.array([[0, lam], [lam, 0]])
    np.testing.assert_allclose(gamma_transform(L, (0, 1)), [[4 * lam**2]], rtol=1e-15)
    L3 = line_lambda([0, 1, 2])
    G = gamma_transform(L3, (0, 1, 2))
    # l2[i, last] = |t_i - 2|: 2, 1; l2[0, 1] = 1
    np.testing.assert_allclose(G, [[8.0, 4.0], [4.0, 4.0]], rtol=1e-15)
    assert np.all(np.linalg.eigvalsh(G) > 0)
    np.testing.assert_allclose(gamma_transform(L3, (0, 2)), [[4 * 2.0]], rtol=1e-15)


def test_gamma_transform_errors():
    t = np.array([0.0, 1.0, 2.0])
    bad = np.abs(t[:, None] - t[None, :])
    with pytest.raises(NotInDomainError) as exc:
        gamma_transform(bad, (0, 1, 2))
    assert exc.value.subset == (0, 1, 2)
    with pytest.raises(DomainError):
        gamma_transform(line_lambda([0, 1, 2]), (1, 0))
    with pytest.raises(DomainError):
        gamma_transform(line_lambda([0, 1, 2]), (0, 3))


def test_h_examples():
    L = np.array([[0, 1.0], [1.0, 0]])
    assert h_lm([0.0], (0,), L) == 1.0
    y1, y2 = 0.0, 0.5
    h2 = h_lm([y1, y2], (0, 1), L)
    assert -math.log(hr_bivariate_cdf(y1, y2, 1.0)) == pytest.approx(math.exp(-y1) + math.exp(-y2) - h2, abs=1e-6)
    L8 = np.array([[0, 8.0], [8.0, 0]])
    assert h_lm([0.0, 0.0], (0, 1), L8) <= 1e-6


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 4))
def test_h2_closed_form(y1, y2, lam):
    L = np.array([[0, lam], [lam, 0]])
    ref = (math.exp(-y1) * ndtr(-(lam + (y2 - y1) / (2 * lam)))
           + math.exp(-y2) * ndtr(-(lam + (y1 - y2) / (2 * lam))))
    assert h_lm([y1, y2], (0, 1), L) == pytest.approx(ref, rel=1e-9, abs=1e-13)


# -- multivariate CDF ----------------------------------------------------------------------------

def _classical_hr(x, L):
    # exponent as a sum over anchors of (d-1)-variate normal CDFs
    d = len(x)
    L2 = L * L
    tot = 0.0
    for k in range(d):
        o = [j for j in range(d) if j != k]
        a = np.array([L[j, k] + (x[j] - x[k]) / (2 * L[j, k]) for j in o])
        R = np.array([[1.0 if i == j else (L2[i, k] + L2[j, k] - L2[i, j]) / (2 * L[i, k] * L[j, k])
                       for j in o] for i in o])
        tot += math.exp(-x[k]) * multivariate_normal.cdf(a, np.zeros(d - 1), R, abseps=1e-11,
                                                         releps=1e-11, maxpts=200000)
    return math.exp(-tot)


def test_hr_d2_reduction():
    L = np.array([[0, 0.8], [0.8, 0]])
    assert husler_reiss_cdf([0, 0.5], L) == pytest.approx(hr_bivariate_cdf(0, 0.5, 0.8), abs=1e-6)


def test_hr_d3_examples():
    L = np.full((3, 3), 8.0)
    np.fill_diagonal(L, 0)
    assert husler_reiss_cdf([0, 0, 0], L) == pytest.approx(math.exp(-3), abs=1e-4)
    Ll = line_lambda([0, 1, 2])
    assert husler_reiss_cdf([0, 40, 40], Ll) == pytest.approx(math.exp(-1), abs=1e-5)
    assert husler_reiss_cdf([0, math.inf, math.inf], Ll) == pytest.approx(math.exp(-1), abs=1e-15)


@pytest.mark.parametrize("x", [[0.2, 0.5, -0.1], [1.0, -1.0, 0.3], [-1.5, 0.0, 2.0]])
def test_hr_d3_against_classical_formula(x):
    L = np.array([[0, 1, 1.5], [1, 0, 0.8], [1.5, 0.8, 0]])
    assert husler_reiss_cdf(x, L) == pytest.approx(_classical_hr(np.array(x), L), abs=1e-8)


def test_hr_d3_bivariate_margin():
    L = np.array([[0, 1, 1.5], [1, 0, 0.8], [1.5, 0.8, 0]])
    assert husler_reiss_cdf([0.2, math.inf, 0.5], L) == pytest.approx(hr_bivariate_cdf(0.2, 0.5, 1.5), abs=1e-9)


def test_hr_d4_against_classical_formula():
    rng = np.random.default_rng(1)
    t = rng.random((4, 2))
    L = np.sqrt(np.linalg.norm(t[:, None] - t[None], axis=2))
    x = rng.normal(size=4)
    assert husler_reiss_cdf(x, L) == pytest.approx(_classical_hr(x, L), abs=1e-7)


def test_hr_capacity_and_domain():
    t = np.linspace(0, 1, 11)
    with pytest.raises(CapacityError):
        husler_reiss_cdf(np.zeros(11), line_lambda(t))
    with pytest.raises(NotInDomainError):
        husler_reiss_cdf(np.zeros(3), np.zeros((3, 3)))
    with pytest.raises(DomainError):
        husler_reiss_cdf(np.zeros(2), line_lambda([0, 1, 2]))


def test_h_eta_examples():
    L = DependenceMatrix(line_lambda([0, 1, 2]))
    x = [0.1, -0.3, 0.4]
    H = husler_reiss_cdf(x, L)
    assert h_eta_cdf(x, [(L, 1.0)]) == pytest.approx(H, rel=1e-14)
    assert h_eta_cdf(x, [(L, 0.5), (L, 0.5)]) == pytest.approx(H, rel=1e-14)
    La = np.array([[0, 0.5], [0.5, 0]])
    Lb = np.array([[0, 2.0], [2.0, 0]])
    nu = M.atomic([(0.5, 0.5), (2.0, 0.5)])
    for xy in [(0.0, 0.0), (0.3, -0.7), (2.0, 1.0)]:
        assert h_eta_cdf(xy, [(La, 0.5), (Lb, 0.5)]) == pytest.approx(hr_mixture_cdf(*xy, nu), abs=1e-10)
    with pytest.raises(DomainError):
        h_eta_cdf(x, [(L, 0.7)])


# -- text format ----------------------------------------------------------------------------------

def test_dependence_text_roundtrip():
    L = DependenceMatrix(line_lambda([0, 1, 3]))
    back = loads_dependence_matrix(dumps_dependence_matrix(L))
    np.testing.assert_array_equal(back.values, L.values)


@pytest.mark.parametrize("text, where", [
    ("x\n", "line 1, column 1"),
    ("2\n0 1\n1\n", "line 3"),
    ("2\n0 a\n1 0\n", "line 2, column 2"),
    ("2\n0 1\n2 0\n", "column 1"),
    ("2\n1 1\n1 0\n", "line 2, column 1"),
])
def test_dependence_text_diagnostics(text, where):
    with pytest.raises(DomainError) as exc:
        loads_dependence_matrix(text)
    assert where in str(exc.value)
