"""Time integration of u_t + (f(u))_x - (D^sigma u)_x = 0 and orbital tracking.

In mode space the linear part is u_hat' = i k |k|^sigma u_hat, a pure phase
rotation, so an integrating-factor RK4 treats it exactly.  The nonlinear flux
is evaluated on a zero-padded grid large enough that the highest power q
produces no aliasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len
from scipy.optimize import minimize_scalar

from .ground_state import GroundStateResult
from .model import Equation, as_equation, energy, mass
from .spectral_core import Grid, Profile, sobolev_norm, symmetrize_even

BLOWUP_FACTOR = 1e3


class BlowUpError(RuntimeError):
    pass


@dataclass
class EvolutionState:
    t: float
    u: Profile
    E0: float
    M0: float

    @classmethod
    def start(cls, u: Profile, params, t: float = 0.0) -> "EvolutionState":
        eq = as_equation(params)
        return cls(t, u, energy(u, eq), mass(u))


class IFRK4:
    """Fixed-step integrating-factor RK4 for one (equation, grid, dt)."""

    def __init__(self, equation: Equation, grid: Grid, dt: float, nonlinear: bool = True):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.equation = equation
        self.grid = grid
        self.dt = float(dt)
        self.nonlinear = nonlinear
        k = grid.kr
        lam = 1j * k * k ** equation.sigma
        lam[-1] = 0.0                      # odd symbol: Nyquist dropped
        self.half = np.exp(0.5 * dt * lam)
        self.full = self.half ** 2
        self.n_pad = next_fast_len(int(np.ceil((equation.max_power + 1) * grid.n / 2)), real=True)
        self.n_pad += self.n_pad % 2

    def _flux(self, U: np.ndarray) -> np.ndarray:
        """Mode-space -d/dx f(u), dealiased by zero padding."""
        if not self.nonlinear:
            return np.zeros_like(U)
        g, M = self.grid, self.n_pad
        Up = np.zeros(M // 2 + 1, dtype=complex)
        Up[: g.n // 2 + 1] = U
        Up[g.n // 2] *= 0.5 if M > g.n else 1.0     # split Nyquist symmetrically
        u = np.fft.irfft(Up, n=M) * (M / g.n)
        F = np.fft.rfft(self.equation.f(u))[: g.n // 2 + 1] * (g.n / M)
        return -g.ik * F

    def advance(self, U: np.ndarray) -> np.ndarray:
        dt, E, E2 = self.dt, self.half, self.full
        k1 = dt * self._flux(U)
        k2 = dt * self._flux(E * (U + 0.5 * k1))
        k3 = dt * self._flux(E * U + 0.5 * k2)
        k4 = dt * self._flux(E2 * U + E * k3)
        return E2 * U + (E2 * k1 + 2.0 * E * (k2 + k3) + k4) / 6.0

    def step(self, state: EvolutionState) -> EvolutionState:
        g = self.grid
        with np.errstate(over="ignore", invalid="ignore"):
            U = self.advance(g.rfft(state.u.values))
            u = g.irfft(U)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite solution at t = {state.t + self.dt:.6g}")
        return EvolutionState(state.t + self.dt, Profile(g, u), state.E0, state.M0)


@lru_cache(maxsize=16)
def _integrator(equation: Equation, grid: Grid, dt: float, nonlinear: bool) -> IFRK4:
    return IFRK4(equation, grid, dt, nonlinear)


def step(state: EvolutionState, dt: float, params, nonlinear: bool = True) -> EvolutionState:
    return _integrator(as_equation(params), state.u.grid, float(dt), nonlinear).step(state)


def default_dt(params, u0: Profile, safety: float = 0.25) -> float:
    """min(0.2 h^sigma / max(1, sigma), advective CFL of the flux).

    The dispersive phase is exact, but larger steps excite a slow resonant
    growth of near-Nyquist modes in the integrating-factor scheme.
    """
    eq = as_equation(params)
    h = u0.grid.h
    speed = max(1.0, float(np.max(np.abs(eq.df(u0.values)))))
    return min(0.2 * h ** eq.sigma / max(1.0, eq.sigma), safety * h / speed)


def evolve(u0: Profile, params, T: float, dt: float, nonlinear: bool = True) -> Profile:
    """u(T) by n = round(T/dt) steps of size T/n."""
    nsteps = max(1, int(round(T / dt)))
    integ = IFRK4(as_equation(params), u0.grid, T / nsteps, nonlinear)
    U = u0.grid.rfft(u0.values)
    for _ in range(nsteps):
        U = integ.advance(U)
    return u0.like(u0.grid.irfft(U))


# --------------------------------------------------------------- orbit tracking

def _weights(grid: Grid, sigma: float) -> np.ndarray:
    return grid.symbol(sigma) + 1.0


def orbital_distance(u: Profile, phi: Profile, sigma: float) -> tuple[float, float]:
    """min over y of ||u - phi(. - y)||_{H^{sigma/2}} and the minimizing y in [-L, L)."""
    if u.grid != phi.grid:
        raise ValueError("u and phi must share a grid")
    g = u.grid
    w = _weights(g, sigma)
    U, P = g.rfft(u.values), g.rfft(phi.values)
    C = w * U * P.conj()
    corr = np.fft.irfft(C, n=g.n) * g.h        # corr[j] = (u, phi(. - j h))_H
    j = int(np.argmax(corr))
    y0 = j * g.h
    mult = g.mode_weights()

    def neg_corr(y):
        ph = np.exp(1j * g.kr * y)
        ph[-1] = np.cos(g.kr[-1] * y)
        return -g.h / g.n * float(np.sum(mult * (C * ph).real))

    opt = minimize_scalar(neg_corr, bounds=(y0 - g.h, y0 + g.h), method="bounded",
                          options={"xatol": 1e-6 * g.h})
    y = float(opt.x)
    y = (y + g.L) % (2 * g.L) - g.L
    # the distance itself from the difference, so a perfect match gives ~1e-16
    ph = np.exp(-1j * g.kr * y)
    ph[-1] = np.cos(g.kr[-1] * y)
    D = U - P * ph
    dist2 = g.h / g.n * float(np.sum(mult * w * np.abs(D) ** 2))
    return float(np.sqrt(max(dist2, 0.0))), y


# ----------------------------------------------------------------- experiments

@dataclass
class OrbitalTrace:
    times: np.ndarray
    distances: np.ndarray
    shifts: np.ndarray
    energy_drift: np.ndarray
    mass_drift: np.ndarray
    max_u: np.ndarray
    halted: bool = False
    halt_reason: str = ""
    ratio: float = float("nan")
    meta: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.times, self.distances, self.shifts, self.energy_drift,
                   self.mass_drift, self.max_u)


PERTURBATIONS = ("bump", "rescale", "noise")


def perturbation(phi: Profile, kind: str, delta: float, sigma: float, c: float = 1.0,
                 seed: int = 0) -> Profile:
    """Perturbation with H^{sigma/2} norm delta * ||phi||_{H^{sigma/2}}.

    bump: Gaussian of soliton width centred one width off the crest, so the
    perturbation is not just a multiple of phi.  rescale: delta * phi.
    noise: seeded random even field on the lowest eighth of the modes.
    """
    g = phi.grid
    target = delta * sobolev_norm(phi, sigma / 2)
    if kind == "rescale":
        return phi * delta
    if kind == "bump":
        width = c ** (-1.0 / sigma)
        w = np.exp(-((g.x - width) / width) ** 2)
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        kmax = g.n // 16
        coef = np.zeros(g.n // 2 + 1, dtype=complex)
        coef[1:kmax] = rng.standard_normal(kmax - 1)
        w = symmetrize_even(g.zero().like(g.irfft(coef))).values
    else:
        raise ValueError(f"unknown perturbation {kind!r}; choose from {PERTURBATIONS}")
    w = g.zero().like(w)
    nrm = sobolev_norm(w, sigma / 2)
    return w * (target / nrm) if nrm > 0 else w


DRIFT_BUDGET = {"energy": 1e-6, "mass": 1e-8}


def _run_trace(phi: Profile, eq: Equation, u0: Profile, T: float, dt: float, stride: int):
    sigma = eq.sigma
    nsteps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / nsteps                    # land exactly on T
    integ = IFRK4(eq, phi.grid, dt, True)
    state = EvolutionState.start(u0, eq)
    peak0 = u0.peak
    period = 2 * phi.grid.L
    rec = {k: [] for k in ("t", "d", "y", "e", "m", "u")}
    halted, reason = False, ""
    last_y = None

    def record(st):
        nonlocal last_y
        d, y = orbital_distance(st.u, phi, sigma)
        if last_y is not None:
            y += period * np.round((last_y - y) / period)
        last_y = y
        rec["t"].append(st.t)
        rec["d"].append(d)
        rec["y"].append(y)
        rec["e"].append(abs(energy(st.u, eq) - st.E0) / abs(st.E0))
        rec["m"].append(abs(mass(st.u) - st.M0) / st.M0)
        rec["u"].append(st.u.peak)

    record(state)
    for i in range(1, nsteps + 1):
        try:
            state = integ.step(state)
        except BlowUpError as exc:
            halted, reason = True, str(exc)
            break
        if state.u.peak > BLOWUP_FACTOR * peak0:
            with np.errstate(over="ignore", invalid="ignore"):   # diagnostics of a blown-up state
                record(state)
            halted, reason = True, f"max|u| exceeded {BLOWUP_FACTOR:g} x initial peak at t = {state.t:.6g}"
            break
        if i % stride == 0 or i == nsteps:
            record(state)
    return {k: np.asarray(v) for k, v in rec.items()}, halted, reason, dt


def stability_experiment(ground: GroundStateResult, kind: str, delta: float, T: float,
                         dt: float | None = None, stride: int = 10, seed: int = 0,
                         max_halvings: int = 2) -> OrbitalTrace:
    """Evolve phi_c + perturbation to time T and record the orbital distance.

    ratio R = max distance / initial distance; for delta = 0 the initial
    distance is zero and R is reported relative to ||phi||_{H^{sigma/2}}.
    With the default dt, a run that finishes but overspends the energy or
    mass drift budget is repeated with dt halved, at most max_halvings times.
    """
    eq = ground.equation
    phi = ground.profile
    u0 = phi + perturbation(phi, kind, delta, eq.sigma, eq.c, seed) if delta else phi.copy()
    auto = dt is None
    if auto:
        dt = default_dt(eq, u0)
    halvings = 0
    while True:
        rec, halted, reason, used = _run_trace(phi, eq, u0, T, dt, stride)
        over = rec["e"].max() > DRIFT_BUDGET["energy"] or rec["m"].max() > DRIFT_BUDGET["mass"]
        if not (auto and over and not halted and halvings < max_halvings):
            break
        dt, halvings = dt / 2, halvings + 1
    d = rec["d"]
    base = d[0] if d[0] > 0 else sobolev_norm(phi, eq.sigma / 2)
    ratio = float(np.max(d) / base) if not halted else float("inf")
    return OrbitalTrace(rec["t"], d, rec["y"], rec["e"], rec["m"], rec["u"], halted, reason, ratio,
                        {"kind": kind, "delta": delta, "T": T, "dt": used, "stride": stride,
                         "seed": seed, "dt_halvings": halvings})
