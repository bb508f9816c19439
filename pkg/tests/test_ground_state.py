import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkdv.ground_state import (
    BranchEscapeError,
    NoGroundStateError,
    SolverError,
    bessel_kernel,
    default_grid,
    dual_norm,
    kernel_fixed_point_check,
    nehari_rescale,
    petviashvili_single,
    rearrange_decreasing,
    regularity_check,
    sign_class,
    solve,
    solve_double_power,
    stationary_residual,
    tail_decay_fit,
)
from fkdv.model import (
    Equation,
    ModelParams,
    ScalingMap,
    apply_scaling,
    hc_norm_sq,
    nehari,
)
from fkdv.spectral_core import Grid, fractional_derivative, reflect, sobolev_norm, symmetrize_even

from conftest import double, single, smooth_profile


def nehari_root_oracle(v, eq, lam_max=50.0, scan=20000):
    """Scan K(lam v) on a dense lam grid, then bisect the first sign change."""
    A = hc_norm_sq(v, eq.sigma, eq.c)
    B = [(coef, m, v.grid.h * float(np.sum(v.values ** (m + 1)))) for coef, m in eq.terms]

    def g(lam):
        return A - sum(coef * I * lam ** (m - 1) for coef, m, I in B)

    lams = np.linspace(lam_max / scan, lam_max, scan)
    vals = np.array([g(l) for l in lams])
    idx = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    lo, hi = lams[idx[0]], lams[idx[0] + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sign(g(mid)) == np.sign(g(lo)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestPetviashvili:
    def test_kdv_soliton(self):
        res = single(2, 2.0)
        x = res.profile.x
        assert res.profile.peak == pytest.approx(1.5, abs=1e-8)
        assert np.max(np.abs(res.profile.values - 1.5 / np.cosh(x / 2) ** 2)) <= 1e-8

    def test_mkdv_soliton(self):
        res = single(3, 2.0)
        x = res.profile.x
        assert res.profile.peak == pytest.approx(np.sqrt(2), abs=1e-8)
        assert np.max(np.abs(res.profile.values - np.sqrt(2) / np.cosh(x))) <= 1e-8

    def test_benjamin_ono_soliton(self):
        res = petviashvili_single(2, 1.0, 1.0, Grid(200.0, 4096))
        x = res.profile.x
        assert res.profile.peak == pytest.approx(2.0, abs=1e-3)
        assert np.max(np.abs(res.profile.values - 2 / (1 + x ** 2))) <= 1e-3

    def test_speed_scaling(self):
        r, sigma, c = 3, 1.5, 3.0
        psi1, psic = single(r, sigma).profile, single(r, sigma, c).profile
        smap = ScalingMap.single(r, sigma)
        mapped = apply_scaling(psi1, smap, "to_physical", c, target_grid=psic.grid)
        assert np.max(np.abs(mapped.values - psic.values)) <= 1e-8 * psic.peak

    def test_negative_init_rejected(self):
        g = Grid(30.0, 256)
        with pytest.raises(SolverError):
            petviashvili_single(2, 2.0, 1.0, g, init=g.profile(lambda x: -np.exp(-x ** 2)))

    def test_non_convergence_has_history(self):
        with pytest.raises(SolverError) as err:
            petviashvili_single(2, 2.0, 1.0, Grid(30.0, 256), max_iter=2)
        assert len(err.value.history) >= 1

    @pytest.mark.parametrize("r,sigma", [(2, 2.0), (3, 2.0), (4, 2.0), (2, 1.5), (3, 1.5), (2, 1.0)])
    def test_invariants(self, r, sigma):
        res = single(r, sigma)
        assert all(res.invariants().values()), res.invariants()
        assert res.sign_class == "positive"
        assert res.resolution < 1e-10


class TestDoublePower:
    CASES = [(2.0, 1, 2, 3, 1.0), (2.0, -1, 2, 3, 1.0), (2.0, -1, 3, 4, 1.0), (2.0, -1, 3, 5, 0.5),
             (1.5, 1, 2, 3, 2.0), (1.5, -1, 2, 3, 0.5), (1.0, 1, 2, 3, 1.0)]

    @pytest.mark.parametrize("sigma,a,p,q,c", CASES)
    def test_invariants_and_sign(self, sigma, a, p, q, c):
        res = double(sigma, a, p, q, c)
        inv = res.invariants()
        assert all(inv.values()), inv
        assert res.sign_class == {1: "positive", -1: "negative"}[
            -1 if (a == -1 and p % 2 == 0) else 1]
        assert res.action_value > 0

    def test_case_II2_strictly_negative(self):
        res = double(2.0, -1, 2, 3, 100.0)
        assert np.max(res.profile.values) < 0

    def test_case_I_small_speed_close_to_limit(self):
        params = ModelParams(2.0, 1, 2, 3)
        c = 1e-3
        psi = single(2, 2.0).profile
        res = solve_double_power(params.with_c(c), grid=psi.grid.scaled(c ** -0.5))
        tilde = apply_scaling(res.profile, ScalingMap.tilde(params), "to_normalized", c,
                              target_grid=psi.grid)
        assert sobolev_norm(tilde - psi, 1.0) <= 0.05 * sobolev_norm(psi, 1.0)

    @pytest.mark.parametrize("sigma,a,p,q,c", [(2.0, 1, 2, 3, 1.0), (2.0, -1, 3, 4, 2.0),
                                                (2.0, -1, 2, 3, 1.0)])
    def test_direct_agrees_with_continuation(self, sigma, a, p, q, c):
        params = ModelParams(sigma, a, p, q, c)
        cont = double(sigma, a, p, q, c)
        direct = solve_double_power(params, strategy="direct", grid=cont.profile.grid)
        assert direct.solver_tag.startswith("direct")
        assert np.max(np.abs(direct.profile.values - cont.profile.values)) <= 1e-8 * cont.profile.peak

    @pytest.mark.parametrize("a,p,q", [(1, 2, 4), (1, 3, 4), (-1, 2, 4)])
    def test_refuses_without_ground_state(self, a, p, q):
        with pytest.raises(NoGroundStateError):
            solve_double_power(ModelParams(2.0, a, p, q))

    def test_solve_dispatch(self):
        res = solve(Equation.single_power(2, 2.0))
        assert res.profile.peak == pytest.approx(1.5, abs=1e-8)
        res2 = solve(ModelParams(2.0, 1, 2, 3))
        assert res2.solver_tag

    def test_branch_escape_is_solver_error(self):
        assert issubclass(BranchEscapeError, SolverError)

    def test_residual_helpers(self):
        res = double(2.0, 1, 2, 3, 1.0)
        r = stationary_residual(res.profile, res.equation)
        assert dual_norm(r, 2.0, 1.0) == pytest.approx(res.residual, rel=1e-6, abs=1e-14)


class TestNehariRescale:
    def test_on_manifold(self):
        res = double(2.0, 1, 2, 3, 1.0)
        lam, _ = nehari_rescale(res.profile, res.equation)
        assert lam == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("r", [2, 3, 5])
    def test_double_of_single_power_state(self, r):
        res = single(r, 2.0)
        lam, w = nehari_rescale(res.profile * 2.0, res.equation)
        want = nehari_root_oracle(res.profile * 2.0, res.equation)
        assert lam == pytest.approx(want, abs=1e-12)
        assert lam == pytest.approx(0.5, abs=1e-9)
        assert abs(nehari(w, res.equation)) <= 1e-12 * hc_norm_sq(w, 2.0, 1.0)

    @given(st.integers(0, 500), st.sampled_from([(1, 2, 3), (-1, 3, 5), (-1, 2, 3), (1, 3, 5)]))
    def test_random_bump_vs_scan_oracle(self, seed, apq):
        a, p, q = apq
        g = Grid(20.0, 256)
        rng = np.random.default_rng(seed)
        amp = rng.uniform(0.5, 3.0) * (-1 if (a == -1 and p % 2 == 0) else 1)
        v = g.profile(lambda x: amp * np.exp(-(x / rng.uniform(0.5, 3.0)) ** 2))
        eq = ModelParams(2.0, a, p, q, rng.uniform(0.2, 5)).equation
        lam, w = nehari_rescale(v, eq)
        assert lam == pytest.approx(nehari_root_oracle(v, eq), rel=1e-10)
        assert abs(nehari(w, eq)) <= 1e-12 * hc_norm_sq(w, eq.sigma, eq.c)

    def test_no_positive_root(self):
        g = Grid(20.0, 256)
        v = g.profile(lambda x: -np.exp(-x ** 2))
        with pytest.raises(ValueError):
            nehari_rescale(v, Equation.single_power(2, 2.0))

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            nehari_rescale(Grid(20.0, 64).zero(), Equation.single_power(2, 2.0))


class TestRearrangement:
    def test_fixed_point(self):
        res = single(2, 2.0)
        np.testing.assert_array_equal(rearrange_decreasing(res.profile).values, res.profile.values)

    @given(st.integers(0, 10_000))
    def test_preserves_multiset(self, seed):
        g = Grid(10.0, 128)
        v = g.zero().like(np.random.default_rng(seed).standard_normal(128))
        w = rearrange_decreasing(v)
        np.testing.assert_array_equal(np.sort(w.values), np.sort(np.abs(v.values)))
        # same multiset, so every discrete L^gamma norm agrees bit for bit
        for gamma in (2, 3, 4, 6):
            a = np.sum(np.sort(np.abs(w.values)) ** gamma)
            b = np.sum(np.sort(np.abs(v.values)) ** gamma)
            assert a == b

    @given(st.integers(0, 10_000))
    def test_symmetric_and_decreasing(self, seed):
        g = Grid(10.0, 128)
        w = rearrange_decreasing(g.zero().like(np.random.default_rng(seed).standard_normal(128)))
        half = w.values[g.n // 2:]
        assert np.all(np.diff(half) <= 0)
        # +jh and -jh hold consecutive sorted values, so they are equal up to one rank step
        sorted_desc = np.sort(w.values)[::-1]
        for j in range(1, g.n // 2):
            assert w.values[g.n // 2 + j] == sorted_desc[2 * j - 1]
            assert w.values[g.n // 2 - j] == sorted_desc[2 * j]

    @given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5, 2.0]))
    def test_polya_szego(self, seed, sigma):
        g = Grid(20.0, 256)
        v = smooth_profile(g, np.random.default_rng(seed), width=3.0)
        w = rearrange_decreasing(v)
        lhs = sobolev_norm(fractional_derivative(w, sigma / 2), 0)
        rhs = sobolev_norm(fractional_derivative(v, sigma / 2), 0)
        assert lhs <= rhs + 1e-6 * sobolev_norm(v, sigma / 2)


class TestKernel:
    @pytest.mark.parametrize("nu", [1.0, 2.0])
    @pytest.mark.parametrize("sigma", [1.0, 1.5, 2.0])
    def test_positive_even_decreasing(self, nu, sigma):
        g = Grid(20.0, 512)
        k = bessel_kernel(nu, sigma, g).values
        assert k.values.min() > 0
        assert np.max(np.abs(k.values - reflect(k).values)) <= 1e-12 * k.peak
        half = k.values[g.n // 2:]
        assert np.all(np.diff(half) <= 0)
        assert g.h * k.values.sum() == pytest.approx(1 / nu, rel=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0])
    def test_kdv_kernel_vs_exact_cell_average(self, nu):
        # periodized e^{-b|x|}/(2b) is cosh(b(L-|x|))/(2b sinh(bL)); average it over each cell
        g = Grid(20.0, 512)
        L, h, b = g.L, g.h, np.sqrt(nu)
        x = np.abs(g.x)
        den = 2 * b * b * h * np.sinh(b * L)
        avg = (np.sinh(b * (L - x + h / 2)) - np.sinh(b * (L - x - h / 2))) / den
        avg[g.n // 2] = 2 * (np.sinh(b * L) - np.sinh(b * (L - h / 2))) / den
        avg[0] = 2 * np.sinh(b * h / 2) / den
        k = bessel_kernel(nu, 2.0, g).values.values
        assert np.max(np.abs(k - avg)) <= 1e-12 * k.max()

    def test_bad_nu(self):
        with pytest.raises(ValueError):
            bessel_kernel(0.0, 2.0, Grid(10.0, 64))

    def test_reconstruction_gap(self):
        res = single(2, 2.0)
        assert kernel_fixed_point_check(res.profile, res.equation) <= 1e-8 * res.profile.peak

    def test_reconstruction_gap_double_power(self):
        res = double(2.0, -1, 2, 3, 1.0)
        assert kernel_fixed_point_check(res.profile, res.equation) <= 1e-8 * res.profile.peak


class TestRegularity:
    @pytest.mark.parametrize("r,sigma", [(2, 2.0), (2, 1.5), (2, 1.0)])
    def test_norms_finite(self, r, sigma):
        rep = regularity_check(single(r, sigma).profile, sigma)
        assert all(np.isfinite(v) and v > 0 for v in rep.norms.values())
        assert set(rep.norms) == {sigma / 2, sigma, sigma + 1, sigma + 2}

    def test_kdv_tail_is_exponential(self):
        rep = regularity_check(single(2, 2.0).profile, 2.0)
        assert rep.exp_r2 > 0.99 and rep.exp_slope < 0

    def test_tail_fit_rejects_exponential_case(self):
        with pytest.raises(ValueError):
            tail_decay_fit(single(2, 2.0).profile, 2.0)


def test_sign_class():
    g = Grid(10.0, 64)
    assert sign_class(g.profile(lambda x: np.exp(-x ** 2))) == "positive"
    assert sign_class(g.profile(lambda x: -np.exp(-x ** 2))) == "negative"
    assert sign_class(g.profile(lambda x: np.sin(x))) == "sign_changing"


def test_default_grid_scales_with_speed():
    g1, g4 = default_grid(2.0, 1.0), default_grid(2.0, 4.0)
    assert g4.L == pytest.approx(g1.L / 2) and g4.n == g1.n
