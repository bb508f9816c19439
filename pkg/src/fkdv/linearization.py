"""Linearized operator about a ground state and its low-lying spectrum.

L v = D^sigma v + c v - f'(phi) v is the Hessian of the action at phi.  Its
spectrum is computed densely for N <= 1024 and with preconditioned LOBPCG
above that.  The constrained coercivity constant C1 is the minimum of
<L v, v> / ||v||^2_{H^{sigma/2}} over v L^2-orthogonal to phi and phi'.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, lobpcg

from .ground_state import (
    GroundStateResult,
    NoGroundStateError,
    SolverError,
    default_grid,
    petviashvili_single,
    solve_double_power,
)
from .model import (
    Equation,
    ModelParams,
    action,
    as_equation,
    classify,
    hc_norm_sq,
    mass,
    nehari,
)
from .spectral_core import Profile, derivative, l2_inner, sobolev_inner

DENSE_MAX_N = 1024


@dataclass(frozen=True)
class LinearizedOperator:
    equation: Equation
    profile: Profile

    @property
    def grid(self):
        return self.profile.grid

    @property
    def potential(self) -> np.ndarray:
        """c - f'(phi), the multiplicative part."""
        return self.equation.c - self.equation.df(self.profile.values)

    def matvec(self, w: np.ndarray) -> np.ndarray:
        g = self.grid
        if w.ndim == 2:
            return np.column_stack([self.matvec(col) for col in w.T])
        return g.irfft(g.symbol(self.equation.sigma) * g.rfft(w)) + self.potential * w

    def dense(self) -> np.ndarray:
        g = self.grid
        col = g.irfft(g.symbol(self.equation.sigma))
        return linalg.circulant(col) + np.diag(self.potential)


def linearize(result_or_profile, params=None) -> LinearizedOperator:
    if isinstance(result_or_profile, GroundStateResult):
        return LinearizedOperator(result_or_profile.equation, result_or_profile.profile)
    return LinearizedOperator(as_equation(params), result_or_profile)


def apply_linearized(op: LinearizedOperator, v: Profile) -> Profile:
    if v.grid != op.grid:
        raise ValueError(f"grid mismatch: {v.grid} vs {op.grid}")
    return v.like(op.matvec(v.values))


def quadratic_form(op: LinearizedOperator, v: Profile) -> float:
    """||v||^2_{H_c} - int f'(phi) v^2."""
    eq = op.equation
    return hc_norm_sq(v, eq.sigma, eq.c) - op.grid.h * float(
        np.sum(eq.df(op.profile.values) * v.values ** 2))


def _metric_matvec(op: LinearizedOperator):
    g = op.grid
    sym = g.symbol(op.equation.sigma) + 1.0

    def mv(w):
        if w.ndim == 2:
            return np.column_stack([mv(col) for col in w.T])
        return g.irfft(sym * g.rfft(w))

    def inv(w):
        if w.ndim == 2:
            return np.column_stack([inv(col) for col in w.T])
        return g.irfft(g.rfft(w) / sym)

    return mv, inv


def _metric_dense(op: LinearizedOperator) -> np.ndarray:
    g = op.grid
    return linalg.circulant(g.irfft(g.symbol(op.equation.sigma) + 1.0))


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    kernel_alignment: float
    coercivity_constant: float
    negative_count: int
    metric: str
    method: str
    vectors: np.ndarray = field(repr=False, default=None)
    minimizer: np.ndarray = field(repr=False, default=None)


def _constraints(op: LinearizedOperator) -> np.ndarray:
    phi = op.profile
    q, _ = np.linalg.qr(np.column_stack([phi.values, derivative(phi).values]))
    return q


def _dense_eigs(op, metric, m, constrained):
    A = op.dense()
    B = _metric_dense(op) if metric == "H_half_sigma" else None
    if constrained:
        Q = _constraints(op)
        P = np.eye(op.grid.n) - Q @ Q.T
        # constraint directions pushed to a large eigenvalue, decoupled from the rest
        shift = 10.0 * (np.abs(A).sum(axis=1).max() + 1.0)
        A = P @ A @ P + shift * (Q @ Q.T)
        if B is not None:
            B = P @ B @ P + Q @ Q.T
    w, V = linalg.eigh(A, B, subset_by_index=[0, m - 1])
    return w, V


def _lobpcg_eigs(op, metric, m, constrained, tol=1e-9, maxiter=3000, seed=0):
    g = op.grid
    n = g.n
    mv, _ = _metric_matvec(op)
    sym = g.symbol(op.equation.sigma) + op.equation.c
    a_mv, b_mv = op.matvec, (mv if metric == "H_half_sigma" else None)

    def prec(w):
        if w.ndim == 2:
            return np.column_stack([prec(col) for col in w.T])
        return g.irfft(g.rfft(w) / sym)

    m_mv = prec
    if constrained:
        # same deflated pencil as the dense path: P A P + s QQ^T, P B P + QQ^T
        Q = _constraints(op)
        proj = lambda w: w - Q @ (Q.T @ w)
        shift = 10.0 * (float(g.kr[-1]) ** op.equation.sigma + abs(op.potential).max() + 1.0)
        a0, b0, m0 = a_mv, (b_mv or (lambda w: w)), prec
        a_mv = lambda w: proj(a0(proj(w))) + shift * (Q @ (Q.T @ w))
        b_mv = lambda w: proj(b0(proj(w))) + Q @ (Q.T @ w)
        m_mv = lambda w: proj(m0(proj(w))) + Q @ (Q.T @ w) / shift

    def lin(f):
        return LinearOperator((n, n), matvec=f, matmat=f, dtype=float)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    w, V = lobpcg(lin(a_mv), X, B=None if b_mv is None else lin(b_mv), M=lin(m_mv),
                  tol=tol, maxiter=maxiter, largest=False)
    order = np.argsort(w)
    return w[order], V[:, order]


def low_spectrum(op: LinearizedOperator, m: int = 6, metric: str = "L2",
                 method: str = "auto", block: int | None = None) -> SpectrumReport:
    """Lowest m eigenpairs in the chosen metric plus the constrained C1.

    L2 metric: L v = mu v.  H_half_sigma metric: L v = mu (D^sigma + 1) v.
    C1 always uses the H^{sigma/2} metric on the constrained subspace.
    ``block`` sets the LOBPCG block size for the C1 solve (default m).
    """
    if not 1 <= m <= 20:
        raise ValueError("m must lie in 1..20")
    if metric not in ("L2", "H_half_sigma"):
        raise ValueError(f"unknown metric {metric!r}")
    if method == "auto":
        method = "dense" if op.grid.n <= DENSE_MAX_N else "lobpcg"
    solver = _dense_eigs if method == "dense" else _lobpcg_eigs
    w, V = solver(op, metric, m, False)
    cw, CV = solver(op, "H_half_sigma", block or m, True)

    dphi = derivative(op.profile).values
    j0 = int(np.argmin(np.abs(w)))
    v0 = V[:, j0]
    align = abs(np.dot(v0, dphi)) / (np.linalg.norm(v0) * np.linalg.norm(dphi))
    tol0 = 1e-6 * max(1.0, abs(w).max())
    return SpectrumReport(
        eigenvalues=w,
        kernel_alignment=float(min(align, 1.0)),
        coercivity_constant=float(cw[0]),
        negative_count=int(np.sum(w < -tol0)),
        metric=metric,
        method=method,
        vectors=V,
        minimizer=CV[:, 0],
    )


def rayleigh_quotient(op: LinearizedOperator, v: np.ndarray, metric: str = "H_half_sigma") -> float:
    Lv = op.matvec(v)
    if metric == "L2":
        return float(np.dot(v, Lv) / np.dot(v, v))
    mv, _ = _metric_matvec(op)
    return float(np.dot(v, Lv) / np.dot(v, mv(v)))


# ------------------------------------------------------------------ sweeps

@dataclass
class CoercivityRow:
    c: float
    C1: float = float("nan")
    negative_count: int = -1
    kernel_alignment: float = float("nan")
    action: float = float("nan")
    error: str = ""


@dataclass
class CoercivitySweep:
    params: ModelParams
    rows: list
    sign_change: float | None

    def table(self):
        return [(r.c, r.C1) for r in self.rows]


def coercivity_sweep(params: ModelParams, c_values, m: int = 6, grid_for=None) -> CoercivitySweep:
    """C1(c) along the ground-state branch; the empirical sign change, if any."""
    if not classify(params).has_ground_state:
        raise NoGroundStateError(f"no ground state for {params}")
    rows = []
    for c in c_values:
        p = params.with_c(float(c))
        row = CoercivityRow(float(c))
        try:
            grid = grid_for(p) if grid_for else None
            res = solve_double_power(p, grid=grid)
            rep = low_spectrum(linearize(res), m=m)
            row.C1 = rep.coercivity_constant
            row.negative_count = rep.negative_count
            row.kernel_alignment = rep.kernel_alignment
            row.action = res.action_value
        except (SolverError, ValueError) as exc:
            row.error = str(exc)
        rows.append(row)
    ok = [r for r in rows if not r.error]
    change = None
    for a, b in zip(ok, ok[1:]):
        if np.sign(a.C1) != np.sign(b.C1):
            change = float(np.sqrt(a.c * b.c))
            break
    return CoercivitySweep(params, rows, change)


@dataclass
class DCurve:
    c_values: np.ndarray
    d_values: np.ndarray
    second_derivative: np.ndarray   # at interior points c_values[1:-1]
    scaling_exponent: float | None
    flags: list


def _second_difference(x, y):
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    return 2.0 * (h0 * y[2:] - (h0 + h1) * y[1:-1] + h1 * y[:-2]) / (h0 * h1 * (h0 + h1))


def d_curve(c_grid, family, grid=None) -> DCurve:
    """d(c) = S_c(phi_c) along the branch, with d'' by nonuniform central differences.

    ``family`` is either a single power given as ``(r, sigma)`` or a
    ModelParams whose c is ignored.  Single-power curves also get the
    fitted exponent e in d(c) = d(1) c^e.
    """
    cs = np.asarray(sorted(float(c) for c in c_grid))
    flags = []
    ds = []
    single = not isinstance(family, ModelParams)
    if single:
        r, sigma = family
        if grid is None:
            base = default_grid(sigma, cs[0], power=r)
            widen = (cs[-1] / cs[0]) ** (1.0 / sigma)
            n = int(2 ** np.ceil(np.log2(base.n * widen)))
            grid = type(base)(base.L, n)
        for c in cs:
            res = petviashvili_single(r, sigma, c, grid, tol=1e-12, max_iter=2000)
            ds.append(res.action_value)
    else:
        # a jump is a >20% miss of the log-linear extrapolation from the two previous points
        lognorms = []
        for c in cs:
            res = solve_double_power(family.with_c(c), grid=grid)
            lognorms.append(0.5 * np.log(hc_norm_sq(res.profile, family.sigma, c)))
            if len(lognorms) >= 3:
                lc = np.log(cs[len(lognorms) - 3: len(lognorms)])
                slope = (lognorms[-2] - lognorms[-3]) / (lc[1] - lc[0])
                guess = lognorms[-2] + slope * (lc[2] - lc[1])
                if abs(lognorms[-1] - guess) > np.log(1.2):
                    flags.append(f"branch jump near c = {c:.4g}")
            ds.append(res.action_value)
    ds = np.asarray(ds)
    d2 = _second_difference(cs, ds) if cs.size >= 3 else np.array([])
    e = None
    if single:
        e = float(np.polyfit(np.log(cs), np.log(ds), 1)[0])
    return DCurve(cs, ds, d2, e, flags)


def bss_exponent(r: int, sigma: float) -> float:
    """Exponent e of d(c) ~ c^e for a single power r."""
    return 2.0 / (r - 1) + 1.0 - 1.0 / sigma


# ------------------------------------------------------------ (C1)-(C5)

@dataclass
class CConditionsReport:
    r: int
    sigma: float
    nehari: float                      # (C1) K(psi)
    dK_psi: float                      # (C1) <K'(psi), psi>
    c2_identity_residual: float        # ||S''(psi) v2 + psi||_{L2} / ||psi||_{L2}, tapered weight
    c2_identity_residual_untapered: float
    dM_v2: float                       # <M'(psi), v2>
    dM_v2_expected: float              # (2/(r-1) - 1/sigma) M(psi)
    dK_v2: float                       # <K'(psi), v2>
    psi_l2_sq: float
    c5_orthogonality: float            # (psi, psi')_{L2}
    not_checkable: tuple = ("C3", "C4")

    def passes(self, tol: float = 1e-6) -> dict:
        return {
            "C1": abs(self.nehari) <= 1e-8 * self.psi_l2_sq and self.dK_psi < 0,
            "C2_identity": self.c2_identity_residual <= tol,
            # relative to M(psi) as well, since the expected value vanishes at r = 2 sigma + 1
            "C2_mass": abs(self.dM_v2 - self.dM_v2_expected)
            <= tol * max(abs(self.dM_v2_expected), 0.5 * self.psi_l2_sq),
            "C2_nehari": abs(self.dK_v2 + self.psi_l2_sq) <= tol * self.psi_l2_sq,
            "C5": abs(self.c5_orthogonality) <= 1e-12 * self.psi_l2_sq,
        }


def _taper(x: np.ndarray, L: float, frac: float = 0.1) -> np.ndarray:
    # 1 on |x| <= (1-frac)L, cos^2 roll-off to 0 at |x| = L
    t = np.clip((np.abs(x) - (1 - frac) * L) / (frac * L), 0.0, 1.0)
    return np.cos(0.5 * np.pi * t) ** 2


def scaling_direction(psi: Profile, r: int, sigma: float, taper: bool = True) -> Profile:
    """d/dc psi_c at c = 1: psi/(r-1) + (1/sigma) x psi'."""
    x = psi.x * (_taper(psi.x, psi.grid.L) if taper else 1.0)
    return psi.like(psi.values / (r - 1) + x * derivative(psi).values / sigma)


def check_c_conditions(psi: Profile, r: int, sigma: float) -> CConditionsReport:
    """Numerical check of (C1), (C2), (C5) for the normalized single-power ground state."""
    eq = Equation.single_power(r, sigma, 1.0)
    op = LinearizedOperator(eq, psi)
    l2 = l2_inner(psi, psi)
    hs = sigma / 2
    k = nehari(psi, eq)
    dK_psi = 2 * sobolev_inner(psi, psi, hs) - (r + 1) * psi.grid.h * float(np.sum(psi.values ** (r + 1)))

    def identity_residual(v2):
        return float(np.sqrt(l2_inner(psi.like(op.matvec(v2.values) + psi.values),
                                      psi.like(op.matvec(v2.values) + psi.values)) / l2))

    v2 = scaling_direction(psi, r, sigma, taper=True)
    v2_raw = scaling_direction(psi, r, sigma, taper=False)
    dM = l2_inner(psi, v2)
    dK = 2 * sobolev_inner(psi, v2, hs) - (r + 1) * psi.grid.h * float(
        np.sum(psi.values ** r * v2.values))
    return CConditionsReport(
        r=r,
        sigma=sigma,
        nehari=k,
        dK_psi=dK_psi,
        c2_identity_residual=identity_residual(v2),
        c2_identity_residual_untapered=identity_residual(v2_raw),
        dM_v2=dM,
        dM_v2_expected=(2.0 / (r - 1) - 1.0 / sigma) * mass(psi),
        dK_v2=dK,
        psi_l2_sq=l2,
        c5_orthogonality=l2_inner(psi, derivative(psi)),
    )


def second_variation_fd(params, phi: Profile, v: Profile, eps: float) -> float:
    """(S(phi + eps v) - 2 S(phi) + S(phi - eps v)) / eps^2."""
    return (action(phi + v * eps, params) - 2 * action(phi, params)
            + action(phi - v * eps, params)) / eps ** 2
