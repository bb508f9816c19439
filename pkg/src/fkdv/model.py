"""Parameters, parity classification, variational functionals and scalings.

The stationary problem is

    D^sigma phi + c phi - a phi^p - phi^q = 0,

with action S_c = E + c M and Nehari functional K_c = <S_c'(v), v>.  Power
integrals are always signed: the parity case analysis depends on the sign of
int v^m for odd m.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from typing import NamedTuple, Union

import numpy as np

from .spectral_core import Grid, Profile, interpolate, lp_integral

__all__ = [
    "ModelParams",
    "Equation",
    "CaseTag",
    "ParityCase",
    "ScalingMap",
    "classify",
    "dirichlet",
    "energy",
    "mass",
    "action",
    "nehari",
    "hc_norm_sq",
    "aux_functionals",
    "Functionals",
    "normalized_functionals",
    "normalized_equation",
    "apply_scaling",
]


@dataclass(frozen=True)
class ModelParams:
    sigma: float
    a: int
    p: int
    q: int
    c: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.sigma <= 2.0:
            raise ValueError(f"sigma must lie in [1, 2], got {self.sigma}")
        if self.a not in (1, -1):
            raise ValueError(f"a must be +1 or -1, got {self.a}")
        if int(self.p) != self.p or int(self.q) != self.q:
            raise ValueError("p and q must be integers")
        if not 2 <= self.p < self.q:
            raise ValueError(f"need 2 <= p < q, got p={self.p}, q={self.q}")
        if not self.c > 0:
            raise ValueError(f"speed c must be positive, got {self.c}")
        object.__setattr__(self, "a", int(self.a))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "c", float(self.c))

    def with_c(self, c: float) -> "ModelParams":
        return ModelParams(self.sigma, self.a, self.p, self.q, c)

    @property
    def equation(self) -> "Equation":
        return Equation(self.sigma, self.c, ((float(self.a), self.p), (1.0, self.q)))

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        d = json.loads(text)
        return cls(float(d["sigma"]), int(d["a"]), int(d["p"]), int(d["q"]), float(d["c"]))


@dataclass(frozen=True)
class Equation:
    """D^sigma v + c v - f(v) = 0 with f(s) = sum of coef * s^power."""

    sigma: float
    c: float
    terms: tuple

    @classmethod
    def single_power(cls, r: int, sigma: float, c: float = 1.0) -> "Equation":
        if r < 2:
            raise ValueError("power must be >= 2")
        return cls(float(sigma), float(c), ((1.0, int(r)),))

    def f(self, u):
        return sum(coef * u ** m for coef, m in self.terms)

    def df(self, u):
        return sum(coef * m * u ** (m - 1) for coef, m in self.terms)

    def F(self, u):
        return sum(coef * u ** (m + 1) / (m + 1) for coef, m in self.terms)

    @property
    def max_power(self) -> int:
        return max(m for _, m in self.terms)

    def with_c(self, c: float) -> "Equation":
        return Equation(self.sigma, float(c), self.terms)


EquationLike = Union[ModelParams, Equation]


def as_equation(params: EquationLike) -> Equation:
    return params.equation if isinstance(params, ModelParams) else params


class CaseTag(str, Enum):
    I = "I"
    II1 = "II-1"
    II2 = "II-2"
    NONE = "NoGroundState"


class ParityCase(NamedTuple):
    tag: CaseTag
    expected_sign: str  # "positive", "negative" or "none"

    @property
    def has_ground_state(self) -> bool:
        return self.tag is not CaseTag.NONE

    @property
    def sign(self) -> int:
        return {"positive": 1, "negative": -1}.get(self.expected_sign, 0)


def classify(params: ModelParams) -> ParityCase:
    """Existence case by the parities of p and q and the sign of a."""
    p_odd, q_odd = params.p % 2 == 1, params.q % 2 == 1
    if params.a == 1:
        if q_odd:
            return ParityCase(CaseTag.I, "positive")
    else:
        if p_odd:
            return ParityCase(CaseTag.II1, "positive")
        if q_odd:
            return ParityCase(CaseTag.II2, "negative")
    return ParityCase(CaseTag.NONE, "none")


# ---------------------------------------------------------------- functionals

def dirichlet(v: Profile, sigma: float) -> float:
    """||D^{sigma/2} v||_{L^2}^2."""
    g = v.grid
    V = g.rfft(v.values)
    return float(g.h / g.n * np.sum(g.mode_weights() * g.symbol(sigma) * np.abs(V) ** 2))


def mass(v: Profile) -> float:
    return 0.5 * float(v.grid.h * np.dot(v.values, v.values))


def hc_norm_sq(v: Profile, sigma: float, c: float) -> float:
    """||v||^2_{H^{sigma/2}_c} = ||D^{sigma/2} v||^2 + c ||v||^2."""
    return dirichlet(v, sigma) + 2.0 * c * mass(v)


def _potential(v: Profile, eq: Equation) -> float:
    return sum(coef * lp_integral(v, m + 1) / (m + 1) for coef, m in eq.terms)


def _power_sum(v: Profile, eq: Equation) -> float:
    return sum(coef * lp_integral(v, m + 1) for coef, m in eq.terms)


def energy(v: Profile, params: EquationLike) -> float:
    eq = as_equation(params)
    return 0.5 * dirichlet(v, eq.sigma) - _potential(v, eq)


def action(v: Profile, params: EquationLike) -> float:
    eq = as_equation(params)
    return energy(v, eq) + eq.c * mass(v)


def nehari(v: Profile, params: EquationLike) -> float:
    eq = as_equation(params)
    return hc_norm_sq(v, eq.sigma, eq.c) - _power_sum(v, eq)


def aux_functionals(v: Profile, params: ModelParams) -> tuple[float, float]:
    """(I_c, J_c) = (S_c - K_c/(q+1), S_c - K_c/(p+1))."""
    s, k = action(v, params), nehari(v, params)
    return s - k / (params.q + 1), s - k / (params.p + 1)


class Functionals(NamedTuple):
    S: float
    K: float
    I: float
    J: float


def normalized_equation(params: ModelParams, variant: str, c: float | None = None,
                        r: int | None = None) -> Equation:
    """The c = 1 equation solved by the rescaled profile.

    plain: D^s v + v - v^r; tilde: weight c^alpha on the q-term;
    breve: weight a c^-beta on the p-term.
    """
    if variant == "plain":
        if r is None:
            raise ValueError("plain variant needs the power r")
        return Equation.single_power(r, params.sigma, 1.0)
    if c is None:
        raise ValueError(f"variant {variant!r} needs a speed c")
    smap = ScalingMap.tilde(params) if variant == "tilde" else ScalingMap.breve(params)
    if variant == "tilde":
        terms = ((float(params.a), params.p), (c ** smap.alpha, params.q))
    elif variant == "breve":
        terms = ((params.a * c ** (-smap.beta), params.p), (1.0, params.q))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return Equation(params.sigma, 1.0, terms)


def normalized_functionals(v: Profile, params: ModelParams, variant: str = "plain",
                           r: int | None = None, c: float | None = None) -> Functionals:
    """(S, K, I, J) of the normalized problems.

    For tilde/breve, I = S - K/(q+1) and J = S - K/(p+1).  For the plain
    single-power problem both equal S - K/(r+1).
    """
    if variant in ("tilde", "breve") and c is None:
        raise ValueError(f"variant {variant!r} needs a speed c")
    eq = normalized_equation(params, variant, c=c, r=r)
    s, k = action(v, eq), nehari(v, eq)
    if variant == "plain":
        j = s - k / (r + 1)
        return Functionals(s, k, j, j)
    return Functionals(s, k, s - k / (params.q + 1), s - k / (params.p + 1))


# ------------------------------------------------------------------- scalings

@dataclass(frozen=True)
class ScalingMap:
    """phi(x) = c^amp * phi_n(c^(1/sigma) x) between physical and normalized profiles."""

    kind: str
    exponent_amp: float
    exponent_arg: float
    alpha: float | None = None
    beta: float | None = None

    @classmethod
    def tilde(cls, params: ModelParams) -> "ScalingMap":
        p, q = params.p, params.q
        return cls("tilde", 1.0 / (p - 1), 1.0 / params.sigma,
                   (q - p) / (p - 1), (q - p) / (q - 1))

    @classmethod
    def breve(cls, params: ModelParams) -> "ScalingMap":
        p, q = params.p, params.q
        return cls("breve", 1.0 / (q - 1), 1.0 / params.sigma,
                   (q - p) / (p - 1), (q - p) / (q - 1))

    @classmethod
    def single(cls, r: int, sigma: float) -> "ScalingMap":
        return cls("single", 1.0 / (r - 1), 1.0 / sigma)

    @property
    def sigma(self) -> float:
        return 1.0 / self.exponent_arg


def _support_radius(v: Profile, tol: float) -> float:
    big = np.abs(v.values) > tol * v.peak
    if not big.any():
        return 0.0
    return float(np.max(np.abs(v.x[big])))


def apply_scaling(v: Profile, smap: ScalingMap, direction: str, c: float,
                  target_grid: Grid | None = None, support_tol: float | None = None) -> Profile:
    """Rescale amplitude and argument between the physical and normalized frames.

    to_physical:   out(x) = c^amp v(c^(1/sigma) x)
    to_normalized: out(y) = c^-amp v(c^(-1/sigma) y)

    Off-grid evaluation uses the trigonometric interpolant.  When the target
    grid is the source grid stretched by exactly the argument factor, the
    samples coincide and are copied.
    """
    if direction == "to_physical":
        amp, arg = c ** smap.exponent_amp, c ** smap.exponent_arg
    elif direction == "to_normalized":
        amp, arg = c ** (-smap.exponent_amp), c ** (-smap.exponent_arg)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    src = v.grid
    tgt = src if target_grid is None else target_grid
    if tgt.n == src.n and abs(tgt.L * arg - src.L) <= 1e-13 * src.L:
        return Profile(tgt, amp * v.values)

    if support_tol is None:
        support_tol = 1e-8 if smap.sigma >= 2 else 1e-4
    radius = _support_radius(v, support_tol) / arg
    if radius > tgt.L:
        raise ValueError(
            f"rescaled profile needs half length >= {radius:.4g}, target box has {tgt.L:.4g}"
        )
    pts = arg * tgt.x
    inside = np.abs(pts) < src.L
    out = np.zeros(tgt.n)
    out[inside] = interpolate(v, pts[inside])
    return Profile(tgt, amp * out)
