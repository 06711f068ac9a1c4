import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from boltzent import distributions as D
from boltzent.errors import InvalidArgumentError, ResourceBudgetError
from boltzent.kde import (
    KERNELS,
    grid_nodes_needed,
    kde_density,
    kde_density_bruteforce,
    kde_derivative_mass,
    kde_entropy,
    kde_entropy_derivative,
    kde_mass,
    kde_second_derivative_residual,
    kernel_derivative,
    kernel_eval,
    kernel_mass,
    kernel_roughness,
    kernel_second_moment,
    make_kde,
)
from boltzent.selector import Estimator, default_grid

KERNEL_IDS = tuple(KERNELS)


@pytest.fixture(scope="module")
def normal_1e4():
    return D.sample("normal1d", 10**4, 0).data


def entropy_at(x, h, kernel="epanechnikov"):
    return kde_entropy(make_kde(x, h, kernel))


def fd_first(x, h, kernel, rel=1e-4):
    d = rel * h
    return (entropy_at(x, h + d, kernel) - entropy_at(x, h - d, kernel)) / (2 * d)


def fd_second(x, h, kernel, rel=1e-2):
    d = rel * h
    return (entropy_at(x, h + d, kernel) - 2 * entropy_at(x, h, kernel) + entropy_at(x, h - d, kernel)) / d**2


def oracle_entropy(x, h, kernel):
    # adaptive quadrature of the brute-force density, split at every kernel edge
    est = make_kde(x, h, kernel)
    f = lambda v: float(kde_density_bruteforce(est, v))  # noqa: E731
    g = lambda v: -f(v) * math.log(f(v)) if f(v) > 0 else 0.0  # noqa: E731
    if kernel == "gaussian":
        return integrate.quad(g, x.min() - 12 * h, x.max() + 12 * h, limit=500, epsabs=1e-13)[0]
    edges = np.unique(np.concatenate([x - h, x + h]))
    return sum(integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(edges[:-1], edges[1:]))


class TestKernels:
    def test_values(self):
        assert kernel_eval("epanechnikov", 0.0) == 0.75
        assert kernel_eval("epanechnikov", 1.0) == 0.0 and kernel_eval("epanechnikov", -1.0) == 0.0
        assert kernel_eval("uniform", 0.3) == 0.5
        assert kernel_eval("gaussian", 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_unit_mass_and_symmetry(self, k):
        assert kernel_mass(k) == pytest.approx(1.0, abs=1e-12)
        u = np.linspace(-3, 3, 101)
        assert np.array_equal(kernel_eval(k, u), kernel_eval(k, -u))

    @pytest.mark.parametrize("k,rk,mu2", [("epanechnikov", 0.6, 0.2), ("uniform", 0.5, 1 / 3),
                                          ("gaussian", 1 / (2 * math.sqrt(math.pi)), 1.0)])
    def test_moments(self, k, rk, mu2):
        assert kernel_roughness(k) == pytest.approx(rk, rel=1e-10)
        assert kernel_second_moment(k) == pytest.approx(mu2, rel=1e-10)

    @pytest.mark.parametrize("k", ["epanechnikov", "gaussian"])
    def test_derivative_matches_difference(self, k):
        u = np.array([-0.7, -0.2, 0.1, 0.55, 0.9])
        fd = (kernel_eval(k, u + 1e-6) - kernel_eval(k, u - 1e-6)) / 2e-6
        assert np.allclose(kernel_derivative(k, u), fd, atol=1e-8)

    def test_unknown_kernel(self):
        with pytest.raises(InvalidArgumentError, match="epanechnikov"):
            make_kde(np.zeros(3), 1.0, "triangle")


class TestDensity:
    def test_single_point(self):
        assert kde_density(make_kde(np.array([0.0]), 1.0), 0.0) == 0.75
        assert kde_density(make_kde(np.array([0.0]), 2.0), 0.0) == 0.375

    @pytest.mark.parametrize("h", [0.0, -0.5, math.inf, math.nan])
    def test_bad_bandwidth(self, h):
        with pytest.raises(InvalidArgumentError):
            make_kde(np.zeros(3), h)

    def test_near_truth_at_mode(self):
        x = D.sample("normal1d", 10**5, 2).data
        est = make_kde(x, 0.2)
        val = kde_density(est, 0.0)
        assert val == pytest.approx(kde_density_bruteforce(est, 0.0), abs=1e-12)
        # bias h^2 mu2 f''(0)/2 plus ~3 standard errors
        bias = 0.5 * 0.04 * 0.2 * (-1 / math.sqrt(2 * math.pi))
        se = math.sqrt(val * 0.6 / (10**5 * 0.2))
        assert abs(val - (1 / math.sqrt(2 * math.pi) + bias)) < 3 * se

    @pytest.mark.parametrize("k", KERNEL_IDS)
    @pytest.mark.parametrize("dist", D.DISTRIBUTION_IDS)
    def test_accelerated_equals_brute_force(self, k, dist):
        x = D.sample(dist, 3000, 5).data
        est = make_kde(x, 0.3, k)
        rng = np.random.default_rng(1)
        q = rng.uniform(x.min(0) - 0.5, x.max(0) + 0.5, size=(100, x.shape[1]))
        q = q[:, 0] if x.shape[1] == 1 else q
        fast, slow = kde_density(est, q), kde_density_bruteforce(est, q)
        assert np.max(np.abs(fast - slow)) < 1e-12

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_leave_one_out(self, k):
        x = D.sample("normal3d", 400, 3).data
        est = make_kde(x, 0.5, k)
        full = kde_density(est, x)
        loo = kde_density(est, x, leave_one_out=True)
        self_term = float(kernel_eval(k, 0.0)) ** 3 / (400 * 0.5**3)
        assert np.allclose(loo * 399 / 400, full - self_term, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("k", ["epanechnikov", "uniform"])
    def test_normalization_compact_1d(self, k):
        x = D.sample("powerlaw1d", 2000, 1).data
        assert abs(kde_mass(make_kde(x, 0.01, k)) - 1) < 1e-8
        # independent check with adaptive quadrature on a small sample
        y = x[:7, 0]
        est = make_kde(y, 0.2, k)
        edges = np.unique(np.concatenate([y - 0.2, y + 0.2]))
        mass = sum(integrate.quad(lambda v: float(kde_density_bruteforce(est, v)), a, b)[0]
                   for a, b in zip(edges[:-1], edges[1:]))
        assert abs(mass - 1) < 1e-10

    def test_normalization_gaussian(self):
        x = D.sample("normal1d", 2000, 1).data
        assert abs(kde_mass(make_kde(x, 0.1, "gaussian")) - 1) < 1e-4

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_normalization_3d(self, k):
        x = D.sample("normal3d", 2000, 1).data
        assert abs(kde_mass(make_kde(x, 0.6, k)) - 1) < 1e-4


class TestEntropy:
    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_matches_adaptive_quadrature_oracle(self, k):
        x = D.sample("normal1d", 12, 4).data[:, 0]
        assert entropy_at(x, 0.3, k) == pytest.approx(oracle_entropy(x, 0.3, k), abs=1e-8)

    def test_single_point_is_kernel_entropy(self):
        # -int K ln K for the Epanechnikov kernel scaled by h
        k_ent = -integrate.quad(lambda u: 0.75 * (1 - u * u) * math.log(0.75 * (1 - u * u)), -1, 1)[0]
        for h in (0.5, 2.0):
            assert entropy_at(np.array([1.0]), h) == pytest.approx(k_ent + math.log(h), abs=1e-12)

    def test_published_row(self):
        x = D.sample("normal1d", 10**5, 0).data
        assert abs(entropy_at(x, 3.531e-2) - 1.418) < 0.01

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_grows_beyond_range(self, k):
        x = D.sample("normal1d", 500, 3).data
        h0 = float(np.ptp(x))
        assert entropy_at(x, 10 * h0, k) > entropy_at(x, h0, k)

    def test_quadrature_vs_resubstitution(self, normal_1e4):
        est = make_kde(normal_1e4, 0.1)
        quad = kde_entropy(est)
        resub = kde_entropy(est, "resubstitution")
        assert abs(quad - resub) <= 0.02
        # fine trapezoid oracle, 10^6 nodes
        v = np.linspace(normal_1e4.min() - 0.1, normal_1e4.max() + 0.1, 10**6)
        f = kde_density(est, v)
        fine = -integrate.trapezoid(np.where(f > 0, f * np.log(np.where(f > 0, f, 1)), 0), v)
        assert abs(quad - fine) < 1e-6

    def test_unknown_method(self, normal_1e4):
        with pytest.raises(InvalidArgumentError):
            kde_entropy(make_kde(normal_1e4, 0.1), "simpson")

    @pytest.mark.parametrize("k", ["epanechnikov", "gaussian"])
    def test_3d_quadrature_vs_monte_carlo(self, k):
        # -E[ln F] with draws from the estimate itself: point plus kernel noise
        x = D.sample("normal3d", 2000, 2).data
        est = make_kde(x, 0.5, k)
        rng = np.random.default_rng(3)
        m = 100_000
        noise = 2 * rng.beta(2, 2, (m, 3)) - 1 if k == "epanechnikov" else rng.standard_normal((m, 3))
        draws = x[rng.integers(0, len(x), m)] + 0.5 * noise
        logs = np.log(kde_density(est, draws))
        mc, se = -logs.mean(), logs.std() / math.sqrt(m)
        assert abs(kde_entropy(est) - mc) < 4 * se + 1e-3

    def test_resubstitution_leave_one_out_is_larger(self):
        x = D.sample("normal3d", 3000, 2).data
        est = make_kde(x, 0.5)
        assert kde_entropy(est, "resubstitution", leave_one_out=True) > kde_entropy(est, "resubstitution")

    def test_3d_budget_error(self):
        x = D.sample("normal3d", 1000, 2).data
        need = grid_nodes_needed(x, 0.05)
        with pytest.raises(ResourceBudgetError, match=str(need // 2)):
            kde_entropy(make_kde(x, 0.05), node_budget=need // 2)

    @pytest.mark.parametrize("dist", ["normal1d", "powerlaw1d"])
    def test_monotone_on_default_grid(self, dist):
        x = D.sample(dist, 5000, 7).data
        grid = default_grid(x, Estimator("kde"))
        s = np.array([entropy_at(x, h) for h in grid.values])
        assert np.all(np.diff(s) >= -1e-6)


class TestDerivatives:
    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_first_derivative_matches_fd(self, normal_1e4, k):
        est = make_kde(normal_1e4, 0.1, k)
        assert kde_entropy_derivative(est) == pytest.approx(fd_first(normal_1e4, 0.1, k), rel=1e-3)

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_derivative_mass_zero(self, k):
        x = D.sample("powerlaw1d", 10**4, 4).data
        assert abs(kde_derivative_mass(make_kde(x, 0.02, k))) < 1e-8

    def test_derivative_nonnegative_above_selected(self, normal_1e4):
        for h in np.geomspace(0.1, 5, 12):
            assert kde_entropy_derivative(make_kde(normal_1e4, h)) >= 0

    @pytest.mark.parametrize("k", ["epanechnikov", "gaussian"])
    def test_residual_matches_fd_second(self, normal_1e4, k):
        est = make_kde(normal_1e4, 0.1, k)
        assert -kde_second_derivative_residual(est) == pytest.approx(fd_second(normal_1e4, 0.1, k), rel=5e-3)

    def test_uniform_residual_is_between_crossings(self):
        # two points 1 apart: kernel edges cross only at h = 0.5, so S is
        # smooth on (0.5, inf) and the a.e. value matches the difference quotient
        x = np.array([0.0, 1.0])
        h = 0.8
        assert -kde_second_derivative_residual(make_kde(x, h, "uniform")) == pytest.approx(
            fd_second(x, h, "uniform", 1e-3), rel=1e-5)

    @pytest.mark.parametrize("k", KERNEL_IDS)
    def test_two_point_forms_agree(self, k):
        x = np.array([0.0, 1.0])
        est = make_kde(x, 0.03, k)
        a = kde_second_derivative_residual(est, "split")
        b = kde_second_derivative_residual(est, "log")
        assert a == pytest.approx(b, abs=1e-10 * max(1.0, abs(a)))

    def test_single_point_residual_closed_form(self):
        # S = const + ln h, so -S'' = 1/h^2
        for h in (0.5, 1.0, 2.0):
            assert kde_second_derivative_residual(make_kde(np.array([0.3]), h)) == pytest.approx(1 / h**2, rel=1e-12)

    def test_bad_form(self, normal_1e4):
        with pytest.raises(InvalidArgumentError):
            kde_second_derivative_residual(make_kde(normal_1e4, 0.1), "other")

    def test_3d_rejected(self):
        with pytest.raises(InvalidArgumentError):
            kde_entropy_derivative(make_kde(np.zeros((3, 3)), 1.0))


# -- properties ---------------------------------------------------------------

small_1d = arrays(np.float64, st.integers(1, 60), elements=st.floats(-20, 20, allow_nan=False))
small_3d = st.integers(1, 40).flatmap(
    lambda n: arrays(np.float64, (n, 3), elements=st.floats(-5, 5, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(x=st.one_of(small_1d, small_3d), h=st.floats(0.01, 10), k=st.sampled_from(KERNEL_IDS),
       q=arrays(np.float64, (10, 3), elements=st.floats(-25, 25, allow_nan=False)))
def test_accelerated_equals_brute_force_random(x, h, k, q):
    est = make_kde(x, h, k)
    q = q[:, 0] if est.dim == 1 else q
    fast, slow = kde_density(est, q), kde_density_bruteforce(est, q)
    assert np.allclose(fast, slow, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(slow))))


@settings(max_examples=40, deadline=None)
@given(x=small_1d, h=st.floats(0.05, 5), k=st.sampled_from(KERNEL_IDS), e=st.integers(-4, 4))
def test_entropy_scaling_covariance(x, h, k, e):
    lam = 2.0**e
    a = entropy_at(x, h, k)
    b = entropy_at(x * lam, h * lam, k)
    assert b - a == pytest.approx(math.log(lam), abs=1e-7)


def test_mass_exact_after_isolated_outlier():
    # a far point followed by a large coincident group once lost 1e-10 of mass
    x = np.array([0.0625, -17.35630954] + [0.0] * 48)
    assert abs(kde_mass(make_kde(x, 0.0625)) - 1) < 1e-14


@settings(max_examples=40, deadline=None)
@given(x=small_1d, h=st.floats(0.05, 5), k=st.sampled_from(["epanechnikov", "uniform"]))
def test_compact_mass_exact(x, h, k):
    assert abs(kde_mass(make_kde(x, h, k)) - 1) < 1e-10


@settings(max_examples=40, deadline=None)
@given(x=small_1d, h=st.floats(0.05, 5))
def test_entropy_bounded_by_resubstitution_order(x, h):
    # coarse-graining: doubling h never lowers the Epanechnikov entropy by more than rounding
    assert entropy_at(x, 2 * h) >= entropy_at(x, h) - 1e-9


def test_residual_changes_sign_at_derivative_minimum():
    from boltzent.selector import SmoothingGrid, entropy_curve, find_derivative_minimum
    x = D.sample("normal1d", 10**5, 0).data
    grid = SmoothingGrid.geometric(0.005, 0.5, 30, "bandwidth")
    # minimum of the finite-difference dS/dh on the grid
    curve = entropy_curve([x], grid, "kde")
    slope = np.gradient(curve.mean_entropy, grid.values)
    j = int(np.argmin(slope))
    assert 0 < j < len(grid) - 1
    below = kde_second_derivative_residual(make_kde(x, grid.values[j - 1]))
    above = kde_second_derivative_residual(make_kde(x, grid.values[j + 1]))
    assert below > 0 > above
    # the log-parameter selector picks a smaller bandwidth, where S is still concave
    r = find_derivative_minimum(curve)
    assert r.param_dm <= grid.values[j]
    assert kde_second_derivative_residual(make_kde(x, r.param_dm)) > 0
