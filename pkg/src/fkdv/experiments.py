"""Experiment recipes, configuration files and run manifests.

A config is an INI file with one ``[experiment]`` section; list values are
comma separated.  Every recipe returns tables, curves and named checks, and
``run`` writes them as CSV, two-column .dat files and a JSON manifest, each
carrying the config hash.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import PERTURBATIONS, stability_experiment
from .ground_state import (
    NoGroundStateError,
    SolverError,
    default_grid,
    petviashvili_single,
    sign_class,
    solve_double_power,
    tail_decay_fit,
)
from .linearization import bss_exponent, coercivity_sweep, d_curve, linearize, low_spectrum
from .model import ModelParams, ScalingMap, apply_scaling, classify, normalized_functionals
from .spectral_core import sobolev_norm

RECIPES = (
    "existence_table",
    "convergence_I",
    "convergence_II1",
    "convergence_II2",
    "coercivity_sweep",
    "dcurve",
    "stability_matrix",
    "decay_fits",
)

# recipe -> overrides of the dataclass defaults
_RECIPE_DEFAULTS = {
    "existence_table": dict(sigma_values=(1.0, 2.0), c_values=(0.5, 1.0, 2.0)),
    "convergence_I": dict(a=1, p=2, q=3, c_values=(1e-1, 1e-2, 1e-3, 1e-4)),
    "convergence_II1": dict(a=-1, p=3, q=5, c_values=(1e1, 1e2, 1e3, 1e4)),
    "convergence_II2": dict(a=-1, p=2, q=3, c_values=(1e1, 1e2, 1e3, 1e4)),
    "coercivity_sweep": dict(a=1, p=2, q=3, c_values=tuple(float(c) for c in np.geomspace(1e-4, 1e2, 12).round(12))),
    "dcurve": dict(r_values=(2, 3, 4, 5, 6), c_values=(0.5, 0.7071067811865476, 1.0,
                                                         1.4142135623730951, 2.0)),
    "stability_matrix": dict(r_values=(2, 6), deltas=(1e-3, 1e-2, 1e-1), T=100.0),
    "decay_fits": dict(sigma_values=(1.0, 1.5), r_values=(2, 3)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    recipe: str
    sigma: float = 2.0
    a: int = 1
    p: int = 2
    q: int = 3
    c_values: tuple = ()
    sigma_values: tuple = ()
    r_values: tuple = ()
    n: int | None = None
    L: float | None = None
    tol: float = 1e-9
    T: float = 100.0
    dt: float | None = None
    stride: int = 200
    deltas: tuple = (1e-2,)
    perturbations: tuple = PERTURBATIONS
    seed: int = 0
    output: str = "results"

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ValueError(f"unknown recipe {self.recipe!r}; choose from {', '.join(RECIPES)}")
        for name in ("perturbations",):
            bad = set(getattr(self, name)) - set(PERTURBATIONS)
            if bad:
                raise ValueError(f"unknown perturbation(s) {sorted(bad)}")

    @classmethod
    def with_defaults(cls, recipe: str, **kw) -> "ExperimentConfig":
        merged = dict(_RECIPE_DEFAULTS.get(recipe, {}))
        merged.update({k: v for k, v in kw.items() if v is not None})
        return cls(recipe=recipe, **merged)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.sigma, self.a, self.p, self.q)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_TUPLE_FLOAT = {"c_values", "sigma_values", "deltas"}
_TUPLE_INT = {"r_values"}
_TUPLE_STR = {"perturbations"}


def _coerce(name: str, text: str):
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ValueError(f"unknown config key {name!r}")
    text = text.strip()
    if name in _TUPLE_FLOAT:
        return tuple(float(s) for s in text.split(",") if s.strip())
    if name in _TUPLE_INT:
        return tuple(int(s) for s in text.split(",") if s.strip())
    if name in _TUPLE_STR:
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if name in ("a", "p", "q", "stride", "seed"):
        return int(text)
    if name in ("n",):
        return None if text.lower() == "none" else int(text)
    if name in ("L", "dt"):
        return None if text.lower() == "none" else float(text)
    if name in ("sigma", "tol", "T"):
        return float(text)
    return text


def parse_config(text: str) -> ExperimentConfig:
    """Read an INI ``[experiment]`` section; missing keys take recipe defaults."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    if "experiment" not in cp:
        raise ValueError("config needs an [experiment] section")
    sec = cp["experiment"]
    if "recipe" not in sec:
        raise ValueError("config needs a 'recipe' key")
    kw = {k: _coerce(k, v) for k, v in sec.items() if k != "recipe"}
    return ExperimentConfig.with_defaults(sec["recipe"].strip(), **kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    out = ["[experiment]"]
    for k, v in cfg.to_dict().items():
        if isinstance(v, tuple):
            v = ", ".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in v)
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


# -------------------------------------------------------------------- outputs

@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)

    def column(self, name):
        j = self.header.index(name)
        return [r[j] for r in self.rows]


@dataclass
class RecipeResult:
    tables: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)      # name -> (x, y)
    checks: dict = field(default_factory=dict)      # name -> bool
    tolerances: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    config_hash: str
    version: str
    recipe: str
    tolerances: dict
    wall_times: dict
    checks: dict
    files: list
    config: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2, default=float)


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(table: Table, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def curve_dat(x, y, config_hash: str, labels=("x", "y")) -> str:
    lines = [f"# config_hash={config_hash}", f"# {labels[0]} {labels[1]}"]
    lines += [f"{float(a):.17g} {float(b):.17g}" for a, b in zip(x, y)]
    return "\n".join(lines) + "\n"


def read_csv(path) -> Table:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return Table(rows[0], rows[1:])


# -------------------------------------------------------------------- recipes

def _grid_override(cfg: ExperimentConfig, sigma: float, c: float, power: int):
    if cfg.n is None and cfg.L is None:
        return None
    g = default_grid(sigma, c, n=cfg.n, power=power)
    if cfg.L is not None:
        g = type(g)(cfg.L * c ** (-1.0 / sigma), g.n)
    return g


# representative (p, q) for each (a, p parity, q parity) cell
EXISTENCE_CELLS = [
    (1, 2, 3), (1, 3, 5), (1, 2, 4), (1, 3, 4),
    (-1, 2, 3), (-1, 3, 5), (-1, 3, 4), (-1, 2, 4),
]


def existence_table(cfg: ExperimentConfig) -> RecipeResult:
    tab = Table(["sigma", "c", "a", "p", "q", "case", "expected_sign", "status", "sign",
                 "residual", "nehari_rel", "action", "seconds"])
    ok = True
    for sigma in cfg.sigma_values:
        for c in cfg.c_values:
            for a, p, q in EXISTENCE_CELLS:
                params = ModelParams(sigma, a, p, q, c)
                case = classify(params)
                t0 = time.perf_counter()
                try:
                    res = solve_double_power(params, grid=_grid_override(cfg, sigma, c, q),
                                             tol=cfg.tol)
                    nrm = 2 * (res.hc_norm ** 2)
                    row = ["ok", res.sign_class, res.residual, abs(res.nehari_value) / nrm,
                           res.action_value]
                    good = case.has_ground_state and res.sign_class == case.expected_sign
                except NoGroundStateError:
                    row = ["refused", "none", float("nan"), float("nan"), float("nan")]
                    good = not case.has_ground_state
                except SolverError as exc:
                    row = [f"failed: {exc}", "none", float("nan"), float("nan"), float("nan")]
                    good = False
                ok &= good
                tab.rows.append([sigma, c, a, p, q, case.tag.value, case.expected_sign, *row,
                                 time.perf_counter() - t0])
    return RecipeResult({"existence": tab}, {}, {"parity_table": ok},
                        {"residual": cfg.tol})


def convergence(cfg: ExperimentConfig, kind: str) -> RecipeResult:
    """Gap between the rescaled double-power state and its single-power limit."""
    params = cfg.params
    case = classify(params)
    want = {"convergence_I": "I", "convergence_II1": "II-1", "convergence_II2": "II-2"}[kind]
    if case.tag.value != want:
        raise ValueError(f"{kind} needs a case {want} tuple, got case {case.tag.value}")
    sigma = params.sigma
    if want == "I":
        r, smap = params.p, ScalingMap.tilde(params)
    else:
        r, smap = params.q, ScalingMap.breve(params)
    ngrid = _grid_override(cfg, sigma, 1.0, params.q) or default_grid(sigma, 1.0, power=params.q)
    psi = petviashvili_single(r, sigma, 1.0, ngrid, tol=1e-12, max_iter=2000).profile
    psi = psi * case.sign
    ref = normalized_functionals(psi, params, "plain", r=r)
    psi_norm = sobolev_norm(psi, sigma / 2)
    tab = Table(["c", "gap_H", "J_gap", "K_gap", "residual"])
    for c in cfg.c_values:
        try:
            res = solve_double_power(params.with_c(c), grid=ngrid.scaled(c ** (-1.0 / sigma)),
                                     tol=cfg.tol)
            v = apply_scaling(res.profile, smap, "to_normalized", c, target_grid=ngrid)
            f = normalized_functionals(v, params, "plain", r=r)
            tab.rows.append([c, sobolev_norm(v - psi, sigma / 2) / psi_norm,
                             abs(f.J - ref.J) / abs(ref.J), abs(f.K) / psi_norm ** 2,
                             res.residual])
        except SolverError as exc:
            tab.rows.append([c, float("nan"), float("nan"), float("nan"), f"failed: {exc}"])
    gaps = tab.column("gap_H")
    # order rows along the limit: c -> 0 for case I, c -> infinity for case II
    order = np.argsort(tab.column("c"))
    if want == "I":
        order = order[::-1]
    seq = [gaps[i] for i in order]
    checks = {
        "gap_decreasing": all(b < a for a, b in zip(seq, seq[1:])),
        "final_gap_small": bool(seq[-1] <= 0.05),
    }
    return RecipeResult({kind: tab},
                        {f"{kind}_gap": (np.asarray(tab.column("c")), np.asarray(gaps))},
                        checks, {"final_gap": 0.05})


def coercivity_recipe(cfg: ExperimentConfig) -> RecipeResult:
    params = cfg.params
    grid_for = None
    if cfg.n is not None or cfg.L is not None:
        grid_for = lambda p: _grid_override(cfg, p.sigma, p.c, p.q)
    sweep = coercivity_sweep(params, cfg.c_values, grid_for=grid_for)
    tab = Table(["c", "C1", "negative_count", "kernel_alignment", "action", "error"])
    for r in sweep.rows:
        tab.rows.append([r.c, r.C1, r.negative_count, r.kernel_alignment, r.action, r.error])
    checks = {"all_solved": all(not r.error for r in sweep.rows)}
    case = classify(params)
    ok = [r for r in sweep.rows if not r.error]
    ok.sort(key=lambda r: r.c)
    # positivity is asserted only at the small-c end (case I) or large-c end (case II)
    edge = ok[:3] if case.tag.value == "I" else ok[-3:]
    checks["C1_positive_at_edge"] = bool(edge) and all(r.C1 > 0 for r in edge)
    tab_sc = Table(["sign_change_c"], [[sweep.sign_change if sweep.sign_change else "none"]])
    return RecipeResult({"coercivity": tab, "sign_change": tab_sc},
                        {"C1": (np.asarray(tab.column("c")), np.asarray(tab.column("C1")))},
                        checks, {})


def dcurve_recipe(cfg: ExperimentConfig) -> RecipeResult:
    res = RecipeResult()
    exps = Table(["sigma", "r", "e_fit", "e_formula", "rel_err", "d2_sign"])
    for r in cfg.r_values:
        dc = d_curve(cfg.c_values, (r, cfg.sigma))
        e0 = bss_exponent(r, cfg.sigma)
        d2 = dc.second_derivative
        sign = 0 if np.all(np.abs(d2) <= 1e-4 * np.abs(dc.d_values[1:-1])) else int(np.sign(np.median(d2)))
        exps.rows.append([cfg.sigma, r, dc.scaling_exponent, e0,
                          abs(dc.scaling_exponent - e0) / e0, sign])
        tab = Table(["c", "d", "d2", "C1", "negative_count", "kernel_alignment"])
        d2full = np.concatenate([[np.nan], d2, [np.nan]])
        for c, d, dd in zip(dc.c_values, dc.d_values, d2full):
            g = default_grid(cfg.sigma, c, power=r)
            rep = low_spectrum(linearize(petviashvili_single(r, cfg.sigma, c, g)))
            tab.rows.append([c, d, dd, rep.coercivity_constant, rep.negative_count,
                             rep.kernel_alignment])
        res.tables[f"dcurve_r{r}"] = tab
        res.curves[f"d_r{r}"] = (dc.c_values, dc.d_values)
        crit = 2 * cfg.sigma + 1
        expect = 0 if abs(r - crit) < 1e-12 else int(np.sign(crit - r))
        res.checks[f"exponent_r{r}"] = abs(dc.scaling_exponent - e0) <= 1e-3 * e0
        res.checks[f"d2_sign_r{r}"] = sign == expect
    res.tables["exponents"] = exps
    res.tolerances = {"exponent_rel": 1e-3, "d2_zero_rel": 1e-4}
    return res


def stability_matrix(cfg: ExperimentConfig) -> RecipeResult:
    tab = Table(["sigma", "r", "perturbation", "delta", "R", "halted", "t_end",
                 "max_E_drift", "max_M_drift", "dt"])
    res = RecipeResult()
    for r in cfg.r_values:
        g = _grid_override(cfg, cfg.sigma, 1.0, r) or default_grid(cfg.sigma, 1.0, power=r)
        ground = petviashvili_single(r, cfg.sigma, 1.0, g)
        unstable = r > 2 * cfg.sigma + 1
        for kind in cfg.perturbations:
            for delta in cfg.deltas:
                tr = stability_experiment(ground, kind, delta, cfg.T, dt=cfg.dt,
                                          stride=cfg.stride, seed=cfg.seed)
                tab.rows.append([cfg.sigma, r, kind, delta, tr.ratio, tr.halted, tr.times[-1],
                                 float(tr.energy_drift.max()), float(tr.mass_drift.max()),
                                 tr.meta["dt"]])
                res.curves[f"dist_r{r}_{kind}_{delta:g}"] = (tr.times, tr.distances)
                name = f"r{r}_{kind}_{delta:g}"
                if unstable:
                    res.checks[name] = tr.halted or tr.ratio >= 1e2
                elif 2 * cfg.sigma + 1 > r:
                    res.checks[name] = (not tr.halted) and tr.ratio <= 10
    res.tables["stability"] = tab
    res.tolerances = {"R_stable_max": 10, "R_unstable_min": 100}
    return res


def decay_fits(cfg: ExperimentConfig) -> RecipeResult:
    tab = Table(["sigma", "r", "slope_psi", "slope_xdx", "slope_dxx", "target", "dxx_line_rate",
                 "error"])
    checks = {}
    for sigma in cfg.sigma_values:
        for r in cfg.r_values:
            g = _grid_override(cfg, sigma, 1.0, r) or default_grid(sigma, 1.0, power=r)
            target = -(1 + sigma)
            try:
                psi = petviashvili_single(r, sigma, 1.0, g, tol=1e-12, max_iter=2000).profile
                fit = tail_decay_fit(psi, sigma)
                tab.rows.append([sigma, r, fit.slope, fit.slope_xdx, fit.slope_dxx, target,
                                 -(3 + sigma), ""])
                checks[f"s{sigma:g}_r{r}_psi"] = abs(fit.slope - target) <= 0.25
                checks[f"s{sigma:g}_r{r}_xdx"] = abs(fit.slope_xdx - target) <= 0.25
                # the second derivative decays faster; the bound is one-sided
                checks[f"s{sigma:g}_r{r}_dxx"] = fit.slope_dxx <= target + 0.25
            except (ValueError, SolverError) as exc:
                tab.rows.append([sigma, r, np.nan, np.nan, np.nan, target, -(3 + sigma), str(exc)])
                checks[f"s{sigma:g}_r{r}"] = False
    return RecipeResult({"decay": tab}, {}, checks, {"slope_abs": 0.25})


_DISPATCH = {
    "existence_table": existence_table,
    "convergence_I": lambda cfg: convergence(cfg, "convergence_I"),
    "convergence_II1": lambda cfg: convergence(cfg, "convergence_II1"),
    "convergence_II2": lambda cfg: convergence(cfg, "convergence_II2"),
    "coercivity_sweep": coercivity_recipe,
    "dcurve": dcurve_recipe,
    "stability_matrix": stability_matrix,
    "decay_fits": decay_fits,
}


def run_recipe(cfg: ExperimentConfig) -> RecipeResult:
    return _DISPATCH[cfg.recipe](cfg)


def run(cfg: ExperimentConfig, output: str | Path | None = None) -> RunManifest:
    """Run a recipe and write its CSV, .dat and manifest files."""
    out = Path(output or cfg.output)
    h = cfg.config_hash()
    t0 = time.perf_counter()
    result = run_recipe(cfg)
    wall = time.perf_counter() - t0
    files = []
    for name, tab in result.tables.items():
        path = out / f"{cfg.recipe}_{name}.csv"
        atomic_write(path, table_csv(tab, h))
        files.append(path.name)
    for name, (x, y) in result.curves.items():
        path = out / f"{cfg.recipe}_{name}.dat"
        atomic_write(path, curve_dat(x, y, h))
        files.append(path.name)
    manifest = RunManifest(h, __version__, cfg.recipe, result.tolerances,
                           {"total": wall}, {k: bool(v) for k, v in result.checks.items()},
                           files, cfg.to_dict())
    atomic_write(out / f"{cfg.recipe}_manifest.json", manifest.to_json())
    return manifest


# ---------------------------------------------------------- admissible tuples

@dataclass
class TupleRow:
    sigma: float
    a: int
    p: int
    q: int
    case: str
    stability_hypothesis: bool
    note: str


def admissible_tuples(sigma_grid, q_max: int = 9) -> list:
    """All 2 <= p < q <= q_max with a = +-1, tagged by existence case and stability hypothesis.

    Stability hypotheses: case I needs p < 2 sigma + 1; case II-1 and II-2
    need q < 2 sigma + 1.
    """
    rows = []
    for sigma in sigma_grid:
        crit = 2 * sigma + 1
        for a in (1, -1):
            for p in range(2, q_max):
                for q in range(p + 1, q_max + 1):
                    case = classify(ModelParams(sigma, a, p, q))
                    tag = case.tag.value
                    if tag == "I":
                        hyp, note = p < crit, f"p < {crit:g}" if p < crit else f"p >= {crit:g}"
                    elif tag in ("II-1", "II-2"):
                        hyp, note = q < crit, f"q < {crit:g}" if q < crit else f"q >= {crit:g}"
                    else:
                        hyp, note = False, "no ground state"
                    rows.append(TupleRow(float(sigma), a, p, q, tag, hyp, note))
    return rows
