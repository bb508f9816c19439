import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkdv.evolution import (
    IFRK4,
    PERTURBATIONS,
    EvolutionState,
    default_dt,
    evolve,
    orbital_distance,
    perturbation,
    stability_experiment,
    step,
)
from fkdv.ground_state import petviashvili_single
from fkdv.model import Equation, energy, mass
from fkdv.spectral_core import Grid, Profile, shift, sobolev_norm

from conftest import single, smooth_profile

KDV = Equation(2.0, 1.0, ((1.0, 2),))


def H_dist(u, v, sigma):
    return sobolev_norm(u - v, sigma / 2)


class TestIntegrator:
    def test_zero_stays_zero(self):
        g = Grid(20.0, 128)
        out = evolve(g.zero(), KDV, 1.0, 0.01)
        assert np.all(out.values == 0.0)

    @pytest.mark.parametrize("sigma", [1.0, 1.5, 2.0])
    def test_linear_flow_is_exact(self, sigma):
        g = Grid(30.0, 256)
        u0 = g.profile(lambda x: np.exp(-x ** 2))
        T = 2.0
        lam = 1j * g.kr * g.kr ** sigma
        lam[-1] = 0.0
        exact = g.irfft(g.rfft(u0.values) * np.exp(lam * T))
        out = evolve(u0, Equation(sigma, 1.0, ((1.0, 2),)), T, 0.05, nonlinear=False)
        np.testing.assert_allclose(out.values, exact, atol=1e-12)

    @pytest.mark.parametrize("r,sigma", [(2, 2.0), (3, 2.0), (2, 1.5)])
    def test_travelling_wave(self, r, sigma):
        res = single(r, sigma)
        phi, T = res.profile, 1.0
        out = evolve(phi, res.equation, T, default_dt(res.equation, phi))
        target = shift(phi, res.equation.c * T)
        assert H_dist(out, target, sigma) <= 1e-6 * sobolev_norm(phi, sigma / 2)

    @pytest.mark.parametrize("sigma", [1.0, 1.5, 2.0])
    def test_fourth_order(self, sigma):
        res = single(2, sigma)
        phi = res.profile
        u0 = phi + perturbation(phi, "bump", 0.1, sigma)
        # coarse step a few times the stability scale, inside the asymptotic range
        T, dt = 1.0, min(0.01, 4 * default_dt(res.equation, u0))
        ref = evolve(u0, res.equation, T, dt / 20)
        e1 = H_dist(evolve(u0, res.equation, T, dt), ref, sigma)
        e2 = H_dist(evolve(u0, res.equation, T, dt / 2), ref, sigma)
        assert e1 / e2 == pytest.approx(16.0, rel=0.2)

    def test_conservation(self):
        res = single(2, 2.0)
        phi = res.profile
        u0 = phi + perturbation(phi, "bump", 0.05, 2.0)
        out = evolve(u0, res.equation, 10.0, default_dt(res.equation, u0))
        assert abs(energy(out, res.equation) - energy(u0, res.equation)) <= 1e-6 * abs(energy(u0, res.equation))
        assert abs(mass(out) - mass(u0)) <= 1e-8 * mass(u0)
        g = phi.grid
        assert abs(out.values.sum() - u0.values.sum()) * g.h <= 1e-12 * np.abs(u0.values).sum() * g.h

    @given(seed=st.integers(0, 2**31 - 1), sigma=st.floats(1.0, 2.0))
    def test_mean_and_linear_norm_preserved(self, seed, sigma):
        g = Grid(20.0, 128)
        u0 = smooth_profile(g, np.random.default_rng(seed)) * 0.2
        eq = Equation(sigma, 1.0, ((1.0, 2), (-1.0, 3)))
        u = evolve(u0, eq, 0.2, default_dt(eq, u0))
        assert abs(u.values.sum() - u0.values.sum()) <= 1e-11 * (1 + np.abs(u0.values).sum())
        lin = evolve(u0, eq, 0.2, 0.01, nonlinear=False)
        assert mass(lin) == pytest.approx(mass(u0), rel=1e-12)

    def test_step_matches_integrator(self):
        res = single(2, 2.0)
        st0 = EvolutionState.start(res.profile, res.equation)
        a = step(st0, 0.01, res.equation)
        b = IFRK4(res.equation, res.profile.grid, 0.01).step(st0)
        assert a.t == pytest.approx(0.01)
        np.testing.assert_array_equal(a.u.values, b.u.values)

    @pytest.mark.parametrize("q,n", [(3, 128), (5, 256), (9, 100)])
    def test_padding_size(self, q, n):
        eq = Equation(1.5, 1.0, ((1.0, 2), (1.0, q)))
        integ = IFRK4(eq, Grid(10.0, n), 0.01)
        assert integ.n_pad >= (q + 1) * n / 2 and integ.n_pad % 2 == 0

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            IFRK4(KDV, Grid(10.0, 64), 0.0)


class TestOrbitalDistance:
    def test_recovers_off_grid_shift(self):
        res = single(2, 2.0)
        phi, g = res.profile, res.profile.grid
        y0 = 3.3 * g.h + 0.123
        d, y = orbital_distance(shift(phi, y0), phi, 2.0)
        assert d <= 1e-8
        assert abs(y - y0) <= 1e-3 * g.h

    def test_fine_scan_oracle(self, rng):
        res = single(3, 1.5)
        phi, g = res.profile, res.profile.grid
        y0 = -5.7 * g.h
        u = shift(phi, y0) + smooth_profile(g, rng, width=2.0) * 0.01
        d, y = orbital_distance(u, phi, 1.5)
        ys = np.linspace(y0 - 2 * g.h, y0 + 2 * g.h, 10_001)
        ds = [H_dist(u, shift(phi, s), 1.5) for s in ys]
        j = int(np.argmin(ds))
        assert abs(y - ys[j]) <= 1e-3 * g.h
        assert d <= ds[j] * (1 + 1e-8)
        assert d == pytest.approx(ds[j], rel=1e-6)

    @pytest.mark.parametrize("cells", [1, 17, 200])
    def test_invariant_under_roll(self, cells, rng):
        res = single(2, 1.5)
        phi, g = res.profile, res.profile.grid
        u = phi + smooth_profile(g, rng) * 0.05
        d0, _ = orbital_distance(u, phi, 1.5)
        d1, _ = orbital_distance(Profile(g, np.roll(u.values, cells)), phi, 1.5)
        assert abs(d1 - d0) <= 1e-10

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            orbital_distance(Grid(10.0, 64).zero(), Grid(10.0, 128).zero(), 2.0)


class TestPerturbations:
    @pytest.mark.parametrize("kind", PERTURBATIONS)
    @pytest.mark.parametrize("delta", [1e-3, 1e-1])
    def test_norm(self, kind, delta):
        phi = single(2, 1.5).profile
        pert = perturbation(phi, kind, delta, 1.5, seed=4)
        assert sobolev_norm(pert, 0.75) == pytest.approx(delta * sobolev_norm(phi, 0.75), rel=1e-12)

    def test_noise_seeded(self):
        phi = single(2, 2.0).profile
        a = perturbation(phi, "noise", 0.01, 2.0, seed=1)
        b = perturbation(phi, "noise", 0.01, 2.0, seed=1)
        c = perturbation(phi, "noise", 0.01, 2.0, seed=2)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.allclose(a.values, c.values)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            perturbation(single(2, 2.0).profile, "kick", 0.1, 2.0)


class TestStabilityExperiment:
    def test_unperturbed_wave_stays_on_orbit(self):
        tr = stability_experiment(single(2, 2.0), "rescale", 0.0, T=10.0, stride=50)
        assert not tr.halted
        assert tr.ratio <= 1e-4
        # the tracked shift follows the wave speed
        assert tr.shifts[-1] == pytest.approx(tr.times[-1], abs=1e-4)

    def test_trace_invariant_under_whole_cell_translation(self):
        res = single(2, 1.5)
        phi, g = res.profile, res.profile.grid
        u0 = phi + perturbation(phi, "bump", 0.05, 1.5)
        dt = default_dt(res.equation, u0)
        for T in (0.5, 1.0):
            a = evolve(u0, res.equation, T, dt)
            b = evolve(Profile(g, np.roll(u0.values, 11)), res.equation, T, dt)
            assert abs(orbital_distance(a, phi, 1.5)[0] - orbital_distance(b, phi, 1.5)[0]) <= 1e-10

    def test_drift_budget_halves_default_step(self):
        # a coarse grid makes the default step overspend the drift budget
        g = Grid(30.0, 64)
        ground = petviashvili_single(2, 2.0, 1.0, g)
        once = stability_experiment(ground, "bump", 0.3, T=5.0, stride=100, max_halvings=0)
        assert once.mass_drift.max() > 1e-8
        tr = stability_experiment(ground, "bump", 0.3, T=5.0, stride=100, max_halvings=2)
        assert tr.meta["dt_halvings"] == 2
        # step counts are rounded up so the run lands on T
        assert tr.meta["dt"] == pytest.approx(once.meta["dt"] / 4, rel=0.02)
        assert tr.mass_drift.max() < once.mass_drift.max()
        # an explicit dt is never changed
        fixed = stability_experiment(ground, "bump", 0.3, T=5.0, dt=once.meta["dt"], stride=100)
        assert fixed.meta["dt_halvings"] == 0

    def test_trace_shape_and_meta(self):
        tr = stability_experiment(single(2, 2.0), "bump", 1e-2, T=2.0, stride=20)
        rows = list(tr.rows())
        assert len(rows) == len(tr.times) and len(rows[0]) == 6
        assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(2.0)
        assert tr.meta["kind"] == "bump" and tr.meta["delta"] == 1e-2
        assert 1.0 <= tr.ratio <= 10.0
        assert np.max(tr.energy_drift) <= 1e-6 and np.max(tr.mass_drift) <= 1e-8
