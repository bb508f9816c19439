"""Ground states of the stationary problems.

Single power: Petviashvili iteration.  Double power: continuation in c from
the single-power limits, carried out in the rescaled frame where the limit
profile is an exact c-independent seed, with Newton-Krylov refinement and
Nehari projection at every step.  Also the discrete symmetric-decreasing
rearrangement, the Bessel-type kernel 1/(|k|^sigma + nu), and regularity and
tail-decay diagnostics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import optimize, special
from scipy.sparse.linalg import LinearOperator, gmres

from .model import (
    CaseTag,
    Equation,
    ModelParams,
    ScalingMap,
    action,
    apply_scaling,
    as_equation,
    classify,
    hc_norm_sq,
    nehari,
    normalized_equation,
)
from .spectral_core import Grid, Profile, derivative, reflect, sobolev_norm

log = logging.getLogger(__name__)

TOL_RES = 1e-9
NEWTON_TOL = 1e-11
CONTINUATION_FACTOR = 2 ** 0.25
SEED_SMALL_C = 1e-4
SEED_LARGE_C = 1e4


class SolverError(RuntimeError):
    """Raised when a solve does not converge; carries the residual history."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


class NoGroundStateError(ValueError):
    pass


class BranchEscapeError(SolverError):
    pass


@dataclass
class GroundStateResult:
    profile: Profile
    residual: float
    action_value: float
    nehari_value: float
    sign_class: str
    iterations: int
    solver_tag: str
    equation: Equation
    history: list = field(default_factory=list, repr=False)

    @property
    def resolution(self) -> float:
        return spectral_tail(self.profile)

    @property
    def hc_norm(self) -> float:
        return float(np.sqrt(hc_norm_sq(self.profile, self.equation.sigma, self.equation.c)))

    def invariants(self, tol_res: float = TOL_RES, tol_shape: float = 1e-8) -> dict:
        """Named pass/fail flags for the ground-state invariants."""
        v = self.profile.values
        peak = self.profile.peak
        nrm = self.hc_norm
        half = np.abs(v[self.profile.grid.n // 2:])
        return {
            "residual": self.residual <= tol_res * nrm,
            "nehari": abs(self.nehari_value) <= 1e-8 * nrm ** 2,
            "even": float(np.max(np.abs(v - reflect(self.profile).values))) <= tol_shape * peak,
            "monotone": bool(np.all(np.diff(half) <= tol_shape * peak)),
            "positive_action": self.action_value > 0,
        }

    def summary(self) -> dict:
        return {
            "sigma": self.equation.sigma,
            "c": self.equation.c,
            "L": self.profile.grid.L,
            "N": self.profile.grid.n,
            "residual": self.residual,
            "action": self.action_value,
            "nehari": self.nehari_value,
            "hc_norm": self.hc_norm,
            "peak": float(self.profile.values[np.argmax(np.abs(self.profile.values))]),
            "sign_class": self.sign_class,
            "iterations": self.iterations,
            "solver": self.solver_tag,
            "spectral_tail": self.resolution,
        }


# ------------------------------------------------------------------ helpers

def _lin_symbol(g: Grid, eq: Equation) -> np.ndarray:
    return g.symbol(eq.sigma) + eq.c


def _symmetrize(g: Grid, u: np.ndarray) -> np.ndarray:
    return 0.5 * (u + np.roll(u[::-1], 1))


def stationary_residual(u: Profile, params) -> Profile:
    """D^sigma u + c u - f(u)."""
    eq = as_equation(params)
    g = u.grid
    r = g.irfft(_lin_symbol(g, eq) * g.rfft(u.values)) - eq.f(u.values)
    return u.like(r)


def dual_norm(r: Profile, sigma: float, c: float) -> float:
    """||r||_{H^{-sigma/2}_c}."""
    g = r.grid
    R = g.rfft(r.values)
    return float(np.sqrt(g.h / g.n * np.sum(g.mode_weights() * np.abs(R) ** 2
                                            / (g.symbol(sigma) + c))))


def _residual_norm(g: Grid, u: np.ndarray, eq: Equation) -> tuple[float, float]:
    sym = _lin_symbol(g, eq)
    U = g.rfft(u)
    R = sym * U - g.rfft(eq.f(u))
    w = g.mode_weights()
    res = np.sqrt(g.h / g.n * np.sum(w * np.abs(R) ** 2 / sym))
    nrm = np.sqrt(g.h / g.n * np.sum(w * sym * np.abs(U) ** 2))
    return float(res), float(nrm)


def sign_class(v: Profile, rel_tol: float = 1e-12) -> str:
    vals, peak = v.values, v.peak
    if peak == 0:
        return "sign_changing"
    if vals.min() > -rel_tol * peak:
        return "positive"
    if vals.max() < rel_tol * peak:
        return "negative"
    return "sign_changing"


def _finish(u: Profile, eq: Equation, iterations: int, tag: str, history) -> GroundStateResult:
    res = dual_norm(stationary_residual(u, eq), eq.sigma, eq.c)
    return GroundStateResult(
        profile=u,
        residual=res,
        action_value=action(u, eq),
        nehari_value=nehari(u, eq),
        sign_class=sign_class(u),
        iterations=iterations,
        solver_tag=tag,
        equation=eq,
        history=list(history),
    )


# smallest N (on the base box) whose top 5% of modes sit below ~1e-10 of the peak,
# indexed by the highest nonlinear power; measured on single-power ground states
_RESOLUTION = {
    2.0: {2: 512, 3: 512, 4: 1024, 5: 1024, 6: 1024},
    1.5: {2: 2048, 3: 4096, 4: 8192, 5: 16384, 6: 16384},
    1.0: {2: 4096, 3: 16384, 4: 32768, 5: 65536, 6: 65536},
}


def default_grid(sigma: float, c: float = 1.0, n: int | None = None,
                 power: int = 2) -> Grid:
    """Default box: L = 30 (sigma = 2) or 200 (sigma < 2), stretched by c^(-1/sigma).

    The default N resolves the ground state of the highest power present.
    """
    base = 30.0 if sigma >= 2 else 200.0
    if n is None:
        col = 2.0 if sigma >= 2 else (1.5 if sigma >= 1.5 else 1.0)
        table = _RESOLUTION[col]
        n = table.get(power, 2 * table[max(table)])
    return Grid(base * c ** (-1.0 / sigma), n)


def spectral_tail(v: Profile) -> float:
    """Largest |v_hat| over the top 5% of modes, relative to the largest overall."""
    amp = np.abs(v.grid.rfft(v.values))
    top = amp[-max(1, amp.size // 20):]
    return float(top.max() / amp.max()) if amp.max() > 0 else 0.0


# ------------------------------------------------------------ single power

def petviashvili_single(r: int, sigma: float, c: float = 1.0, grid: Grid | None = None,
                        init: Profile | None = None, tol: float = TOL_RES,
                        max_iter: int = 500) -> GroundStateResult:
    """Positive ground state of D^sigma psi + c psi - psi^r = 0.

    Fixed point of psi <- M^gamma (D^sigma + c)^-1 psi^r with stabilizing
    factor M = <(D^sigma + c) psi, psi> / <psi^r, psi>, gamma = r/(r-1).
    """
    if r < 2:
        raise ValueError("power must be >= 2")
    eq = Equation.single_power(r, sigma, c)
    g = grid if grid is not None else default_grid(sigma, c, power=r)
    if init is None:
        u = np.exp(-g.x ** 2)
    else:
        if init.grid != g:
            raise ValueError("initial profile lives on a different grid")
        u = init.values.copy()
    sym = _lin_symbol(g, eq)
    gamma = r / (r - 1.0)
    history = []
    for it in range(1, max_iter + 1):
        U = g.rfft(u)
        N = g.rfft(u ** r)
        w = g.mode_weights()
        num = np.sum(w * sym * np.abs(U) ** 2)
        den = np.sum(w * (N * U.conj()).real)
        if not (den > 0 and num > 0):
            raise SolverError(f"stabilizing factor nonpositive at iteration {it}", history)
        m = num / den
        u = _symmetrize(g, m ** gamma * g.irfft(N / sym))
        res, nrm = _residual_norm(g, u, eq)
        history.append(res / nrm)
        if res <= tol * min(1.0, nrm):   # relative, and absolute once the state is O(1) or larger
            return _finish(Profile(g, u), eq, it, "petviashvili", history)
        if not np.isfinite(res):
            break
    raise SolverError(f"Petviashvili did not converge in {max_iter} iterations "
                      f"(last relative residual {history[-1]:.3e})", history)


# ---------------------------------------------------------- nehari scaling

def nehari_rescale(v: Profile, params) -> tuple[float, Profile]:
    """Smallest lam > 0 with K_c(lam v) = 0, together with lam v.

    K_c(lam v) = lam^2 (A - sum_i B_i lam^(m_i - 1)) where A = ||v||^2_{H_c}
    and B_i = coef_i int v^(m_i + 1).
    """
    eq = as_equation(params)
    A = hc_norm_sq(v, eq.sigma, eq.c)
    if A <= 0:
        raise ValueError("cannot rescale the zero profile")
    deg = eq.max_power - 1
    poly = np.zeros(deg + 1)  # ascending powers of lam
    poly[0] = A
    h = v.grid.h
    for coef, m in eq.terms:
        poly[m - 1] -= coef * h * np.sum(v.values ** (m + 1))
    roots = np.roots(poly[::-1])
    cand = sorted(z.real for z in roots
                  if abs(z.imag) <= 1e-8 * max(1.0, abs(z)) and z.real > 0)
    if not cand:
        raise ValueError("no positive Nehari scaling: input outside the manifold's basin")
    lam = cand[0]
    P = np.polynomial.Polynomial(poly)
    dP = P.deriv()
    for _ in range(3):
        d = dP(lam)
        if d == 0:
            break
        lam = lam - P(lam) / d
    if not lam > 0:
        raise ValueError("Nehari root polish left the positive axis")
    return float(lam), v * lam


# -------------------------------------------------------------- Newton-Krylov

def newton_krylov(u0: Profile, params, tol: float = NEWTON_TOL, max_iter: int = 50,
                  even: bool = True) -> tuple[Profile, int, list]:
    """Newton's method on v -> (D^sigma + c) v - f(v), preconditioned by (D^sigma + c)^-1.

    Each linear solve is GMRES on I - (D^sigma + c)^-1 f'(u), a compact
    perturbation of the identity.
    """
    eq = as_equation(params)
    g = u0.grid
    sym = _lin_symbol(g, eq)
    u = u0.values.copy()
    history = []

    def prec(w):
        return g.irfft(g.rfft(w) / sym)

    for it in range(max_iter + 1):
        res, nrm = _residual_norm(g, u, eq)
        history.append(res / nrm if nrm > 0 else np.inf)
        if not np.isfinite(history[-1]):
            raise SolverError("Newton iterate became non-finite", history)
        if res <= tol * nrm:
            return Profile(g, u), it, history
        if it == max_iter:
            break
        if len(history) > 4 and history[-1] > 0.5 * history[-4]:
            raise SolverError("Newton stagnated", history)
        dfu = eq.df(u)
        rhs = -prec(g.irfft(sym * g.rfft(u)) - eq.f(u))
        op = LinearOperator((g.n, g.n), matvec=lambda w: w - prec(dfu * w), dtype=float)
        rtol = min(1e-3, max(1e-13, 0.1 * history[-1]))
        du, info = gmres(op, rhs, rtol=rtol, atol=0.0, restart=80, maxiter=20)
        if info < 0:
            raise SolverError("GMRES breakdown", history)
        u = u + du
        if even:
            u = _symmetrize(g, u)
    raise SolverError(f"Newton did not converge in {max_iter} iterations", history)


# ------------------------------------------------------------ double power

def _seed_single(r: int, sigma: float, grid: Grid, sign: int) -> Profile:
    psi = petviashvili_single(r, sigma, 1.0, grid, tol=1e-12, max_iter=2000).profile
    return psi * sign


def _continuation(params: ModelParams, ngrid: Grid, max_newton: int):
    """Trace the rescaled branch from the single-power limit to the target c.

    Returns the normalized profile at the target speed, the scaling map, and
    the number of continuation steps.
    """
    case = classify(params)
    target = params.c
    if case.tag is CaseTag.I:
        smap = ScalingMap.tilde(params)
        variant, r = "tilde", params.p
        c_cur = min(target, SEED_SMALL_C)
        up = True
    else:
        smap = ScalingMap.breve(params)
        variant, r = "breve", params.q
        c_cur = max(target, SEED_LARGE_C)
        up = False
    u = _seed_single(r, params.sigma, ngrid, case.sign)
    u, _, _ = newton_krylov(u, normalized_equation(params, variant, c=c_cur), max_iter=max_newton)
    norm_prev = sobolev_norm(u, params.sigma / 2)
    factor = CONTINUATION_FACTOR
    steps = 0
    while c_cur != target:
        c_next = c_cur * factor if up else c_cur / factor
        if (up and c_next >= target) or (not up and c_next <= target):
            c_next = target
        eq = normalized_equation(params, variant, c=c_next)
        try:
            w, its, _ = newton_krylov(u, eq, max_iter=max_newton)
            nrm = sobolev_norm(w, params.sigma / 2)
            jump = abs(nrm - norm_prev) / norm_prev
            ok = sign_class(w) == case.expected_sign and jump <= 0.2
        except SolverError:
            ok, its = False, max_newton
        if not ok:
            factor = factor ** 0.5
            if factor - 1.0 < 1e-6:
                raise SolverError(f"continuation step collapsed near c = {c_cur:.4g}")
            continue
        u, c_cur, norm_prev = w, c_next, nrm
        steps += 1
        if its <= 3:
            factor = min(factor ** 2, 2.0)
    return u, smap, steps


def _direct(params: ModelParams, grid: Grid, init: Profile | None, tol: float,
            max_iter: int = 3000, step: float = 0.5) -> tuple[Profile, int, list]:
    """Projected preconditioned gradient descent of S_c on the Nehari manifold.

    On the manifold S_c = I_c = J_c, so this minimizes whichever of the two
    the case calls for.  Polished by Newton once the residual is small.
    """
    eq = params.equation
    case = classify(params)
    g = grid
    if init is None:
        width = params.c ** (-1.0 / params.sigma)
        u = case.sign * np.exp(-(g.x / width) ** 2)
    else:
        u = init.values.copy()
    _, prof = nehari_rescale(Profile(g, _symmetrize(g, u)), eq)
    u = prof.values
    sym = _lin_symbol(g, eq)
    history = []
    for it in range(1, max_iter + 1):
        grad = u - g.irfft(g.rfft(eq.f(u)) / sym)
        u = _symmetrize(g, u - step * grad)
        _, prof = nehari_rescale(Profile(g, u), eq)
        u = prof.values
        res, nrm = _residual_norm(g, u, eq)
        history.append(res / nrm)
        if res <= 1e-6 * nrm:
            polished, its, hist = newton_krylov(Profile(g, u), eq, tol=min(tol, NEWTON_TOL))
            return polished, it + its, history + hist
    raise SolverError(f"projected gradient did not converge in {max_iter} iterations", history)


def solve_double_power(params: ModelParams, strategy: str = "continuation",
                       grid: Grid | None = None, init: Profile | None = None,
                       tol: float = TOL_RES, max_newton: int = 50) -> GroundStateResult:
    """Ground state of D^sigma phi + c phi - a phi^p - phi^q = 0 on the physical grid."""
    case = classify(params)
    if not case.has_ground_state:
        raise NoGroundStateError(
            f"no ground state for a={params.a}, p={params.p}, q={params.q}; refusing to solve"
        )
    g = grid if grid is not None else default_grid(params.sigma, params.c, power=params.q)
    eq = params.equation
    history = []
    tag = strategy
    if strategy == "continuation":
        ngrid = g.scaled(params.c ** (1.0 / params.sigma))
        try:
            un, smap, steps = _continuation(params, ngrid, max_newton)
            phi = apply_scaling(un, smap, "to_physical", params.c, target_grid=g)
            phi, its, history = newton_krylov(phi, eq, max_iter=max_newton)
            iterations = steps + its
        except SolverError as exc:
            log.warning("continuation failed (%s); falling back to direct minimization", exc)
            tag = "direct(fallback)"
            phi, iterations, history = _direct(params, g, init, tol)
    elif strategy == "direct":
        phi, iterations, history = _direct(params, g, init, tol)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    _, phi = nehari_rescale(phi, eq)
    phi = Profile(g, _symmetrize(g, phi.values))
    result = _finish(phi, eq, iterations, tag, history)
    if result.sign_class != case.expected_sign:
        raise BranchEscapeError(
            f"solver left the {case.expected_sign} branch (got {result.sign_class})", history
        )
    return result


def solve(params: Union[ModelParams, Equation], grid: Grid | None = None,
          **kw) -> GroundStateResult:
    """Dispatch: single-power equations go to Petviashvili, double power to continuation."""
    if isinstance(params, ModelParams):
        return solve_double_power(params, grid=grid, **kw)
    if len(params.terms) != 1 or params.terms[0][0] != 1.0:
        raise ValueError("only unit-coefficient single powers are solved directly")
    return petviashvili_single(params.terms[0][1], params.sigma, params.c, grid, **kw)


# -------------------------------------------------------------- rearrangement

def rearrange_decreasing(v: Profile) -> Profile:
    """Discrete symmetric-decreasing rearrangement of |v|.

    Values of |v| sorted in descending order and laid out center-out:
    x = 0, then +h, -h, +2h, -2h, ...; the smallest value lands on x = -L.
    """
    n = v.grid.n
    mid = n // 2
    order = np.empty(n, dtype=int)
    order[0] = mid
    j = np.arange(1, mid)
    order[1:-1:2] = mid + j
    order[2:-1:2] = mid - j
    order[-1] = 0
    out = np.empty(n)
    out[order] = np.sort(np.abs(v.values))[::-1]
    return v.like(out)


# -------------------------------------------------------------- kernel

@dataclass
class BesselKernel:
    """Inverse transform of 1/(|k|^sigma + nu) on the periodic box.

    ``values`` are cell averages of the periodized line kernel, which keep its
    positivity, evenness and monotonicity (point samples of the truncated
    Fourier series show a Gibbs ripple instead).  ``convolve`` applies the
    symbol itself, the exact discrete convolution for grid functions.
    """

    nu: float
    sigma: float
    values: Profile

    def convolve(self, f: Profile) -> Profile:
        g = f.grid
        return f.like(g.irfft(g.rfft(f.values) / (g.symbol(self.sigma) + self.nu)))


def _alias_sum(nu: float, sigma: float, grid: Grid, terms: int = 4000) -> np.ndarray:
    """sum over m of ghat(k + m K) sinc((k + m K) h / 2), K = 2 pi / h.

    Paired terms +-m alternate in sign, so the tail is cut by averaging
    two consecutive partial sums.
    """
    k = grid.kr
    h = grid.h
    K = 2 * np.pi / grid.h

    def term(kk):
        arg = 0.5 * kk * h
        sinc = np.where(arg == 0, 1.0, np.sin(arg) / np.where(arg == 0, 1.0, arg))
        return sinc / (np.abs(kk) ** sigma + nu)

    total = term(k)
    prev = total
    for m in range(1, terms + 1):
        prev = total
        total = total + term(k + m * K) + term(k - m * K)
    return 0.5 * (prev + total)


def bessel_kernel(nu: float, sigma: float, grid: Grid) -> BesselKernel:
    """Cell-averaged periodic kernel of (D^sigma + nu)^-1, centred at x = 0."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    lag = grid.irfft(_alias_sum(nu, sigma, grid)) / grid.h
    return BesselKernel(nu, sigma, Profile(grid, np.roll(lag, grid.n // 2)))


def kernel_fixed_point_check(phi: Profile, params) -> float:
    """Max-norm gap between phi and N_{c+lam} * (lam phi + f(phi)).

    lam = sup f(phi)/phi + 1.  Adding lam phi to both sides of the stationary
    equation gives (D^sigma + c + lam) phi = lam phi + f(phi); the sign of the
    f-term follows from that algebra.
    """
    eq = as_equation(params)
    u = phi.values
    lam = float(np.max(sum(coef * u ** (m - 1) for coef, m in eq.terms))) + 1.0
    kern = bessel_kernel(eq.c + lam, eq.sigma, phi.grid)
    recon = kern.convolve(phi.like(lam * u + eq.f(u)))
    return float(np.max(np.abs(u - recon.values)))


# ------------------------------------------------------- regularity / decay

@dataclass
class RegularityReport:
    norms: dict
    exp_slope: float
    exp_r2: float
    alg_slope: float
    alg_r2: float
    k_window: tuple


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(coef[0]), float(1 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def regularity_check(phi: Profile, sigma: float, floor: float = 1e-12) -> RegularityReport:
    """H^s norms at s in {sigma/2, sigma, sigma+1, sigma+2} and a fit of the |phi_hat| tail."""
    norms = {s: sobolev_norm(phi, s) for s in (sigma / 2, sigma, sigma + 1, sigma + 2)}
    g = phi.grid
    amp = np.abs(g.rfft(phi.values))
    amp = amp / amp.max()
    start = int(np.argmax(amp < 1e-2))
    below = np.nonzero(amp[start:] < floor)[0]
    stop = start + (int(below[0]) if below.size else amp.size - start)
    sel = slice(max(start, 1), stop)
    k, a = g.kr[sel], amp[sel]
    if k.size < 4:
        raise ValueError("resolved Fourier tail too short to fit")
    exp_slope, exp_r2 = _linfit(k, np.log(a))
    alg_slope, alg_r2 = _linfit(np.log(k), np.log(a))
    return RegularityReport(norms, exp_slope, exp_r2, alg_slope, alg_r2, (float(k[0]), float(k[-1])))


@dataclass
class TailFit:
    slope: float          # for |phi|
    slope_xdx: float      # for |x d/dx phi|
    slope_dxx: float      # for |d^2/dx^2 phi|
    raw_slopes: tuple     # plain log-log slopes, periodic images included
    window: tuple


def _periodized(x, t, L, odd):
    # sum over images x + 2Ln of sgn^odd * |.|^-t, via Hurwitz zeta
    z = x / (2 * L)
    a, b = special.zeta(t, z), special.zeta(t, 1 - z)
    return (2 * L) ** (-t) * (a - b if odd else a + b)


def _fit_periodized(x, y, L, odd):
    ly = np.log(y)

    def cost(t):
        model = np.log(_periodized(x, t, L, odd))
        la = np.mean(ly - model)
        return np.mean((ly - la - model) ** 2)

    res = optimize.minimize_scalar(cost, bounds=(1.01, 10.0), method="bounded",
                                   options={"xatol": 1e-8})
    return float(res.x), float(np.sqrt(res.fun))


def tail_decay_fit(phi: Profile, sigma: float, window=(0.25, 0.75),
                   max_rms: float = 0.05) -> TailFit:
    """Power-law decay exponents of phi, x phi' and phi'' over [L/4, 3L/4].

    The box is periodic, so each sample carries the tails of every periodic
    image.  The fit model is the periodized power law A sum_n |x + 2Ln|^-t
    (odd-signed for phi'), whose exponent is the decay rate on the line.
    """
    if sigma >= 2:
        raise ValueError("tail fit applies to algebraic tails (sigma < 2)")
    g = phi.grid
    L = g.L
    x = g.x
    sel = (x >= window[0] * L) & (x <= window[1] * L)
    xs = x[sel]
    d1 = derivative(phi, 1).values
    d2 = derivative(phi, 2).values
    mirror = reflect(phi).values
    asym = np.max(np.abs(phi.values[sel] - mirror[sel])) / np.max(np.abs(phi.values[sel]))
    if asym > 1e-6:
        raise ValueError(f"tail asymmetry {asym:.2e}; the fit window is not image-clean")
    data = [np.abs(phi.values[sel]), np.abs(d1[sel]), np.abs(d2[sel])]
    if any(np.any(d <= 0) for d in data):
        raise ValueError("tail changes sign inside the fit window; enlarge L")
    t0, rms0 = _fit_periodized(xs, data[0], L, odd=False)
    t1, rms1 = _fit_periodized(xs, data[1], L, odd=True)
    t2, rms2 = _fit_periodized(xs, data[2], L, odd=False)
    if max(rms0, rms1, rms2) > max_rms:
        raise ValueError(
            f"tail is not a clean power law (rms log misfit {max(rms0, rms1, rms2):.3f}); "
            f"use a larger box than L = {L:g}"
        )
    lx = np.log(xs)
    raw = (_linfit(lx, np.log(data[0]))[0],
           _linfit(lx, np.log(xs * data[1]))[0],
           _linfit(lx, np.log(data[2]))[0])
    return TailFit(-t0, 1.0 - t1, -t2, raw, (window[0] * L, window[1] * L))
