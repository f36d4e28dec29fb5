"""Fit effective conductivities and the shaft Robin conductance to measured traces.

The objective is the weighted sum over sensor groups of the mean squared
temperature residual, with the simulation resampled to the measurement
times.  Minimisation uses a bounded Nelder-Mead search on the logarithms of
the parameters.
"""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from machtherm.errors import CalibrationError
from machtherm.fem import (
    BoundarySpec, _scatter, assemble_robin, assemble_robin_volume, edge_length, stiffness_blocks,
)
from machtherm.materials import FITTED, MaterialTable, element_properties
from machtherm.mesh.core import Mesh
from machtherm.transient import ScenarioModel, ScenarioSpec, TemperatureTrace

CONDUCTIVITY = "conductivity"
ROBIN = "robin"


@dataclass(frozen=True)
class Parameter:
    """One fitted quantity.

    ``kind="conductivity"``: effective isotropic conductivity of region
    ``target`` in W/(m K).  ``kind="robin"``: total conductance of boundary
    ``target`` per axial metre in W/(K m).
    """

    kind: str
    target: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in (CONDUCTIVITY, ROBIN):
            raise CalibrationError(f"unknown parameter kind {self.kind!r}")
        if not (0 < self.lower < self.upper and math.isfinite(self.upper)):
            raise CalibrationError(
                f"bounds of {self.name} must be finite, positive and ordered, got "
                f"[{self.lower}, {self.upper}]")

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.target}"

    @property
    def unit(self) -> str:
        return "W/(m K)" if self.kind == CONDUCTIVITY else "W/(K m)"

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def default_bounds(kind: str, target: str, reference: float | None = None) -> Parameter:
    """Conductivities span 0.1x to 10x their reference; Robin conductance 0.001 to 10."""
    if kind == ROBIN:
        return Parameter(ROBIN, target, 1e-3, 10.0)
    if reference is None:
        raise CalibrationError(f"conductivity bounds for {target!r} need a reference value")
    return Parameter(CONDUCTIVITY, target, 0.1 * reference, 10.0 * reference)


class CalibrationProblem:
    """Scenario template, parameters and measurements of one fit.

    ``measured`` maps probe ids to traces, ``groups`` maps each measured
    probe to a sensor group and ``weights`` gives the weight per group
    (default 1).  Operators that do not depend on the parameters are built
    once here.
    """

    def __init__(self, mesh: Mesh, materials: MaterialTable, boundary: BoundarySpec,
                 scenario: ScenarioSpec, parameters, measured: dict[str, TemperatureTrace],
                 groups: dict[str, str] | None = None, weights: dict[str, float] | None = None):
        self.parameters = list(parameters)
        if not self.parameters:
            raise CalibrationError("nothing to fit: the parameter list is empty")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise CalibrationError(f"duplicate parameters in {names}")
        if not measured:
            raise CalibrationError("no measured traces")
        self.measured = dict(measured)
        self.groups = dict(groups) if groups else {pid: pid for pid in self.measured}
        missing = [pid for pid in self.measured if pid not in self.groups]
        if missing:
            raise CalibrationError(f"measured probes {missing} belong to no group")
        self.weights = {g: 1.0 for g in set(self.groups[pid] for pid in self.measured)}
        for g, w in (weights or {}).items():
            if g not in self.weights:
                raise CalibrationError(f"weight given for unknown group {g!r}")
            if w < 0:
                raise CalibrationError(f"weight of group {g!r} is negative")
            self.weights[g] = float(w)
        if all(w == 0 for w in self.weights.values()):
            warnings.warn("all misfit weights are zero; the misfit is identically 0", stacklevel=2)

        probes = dict(scenario.probes)
        unknown = [pid for pid in self.measured if pid not in probes]
        if unknown:
            raise CalibrationError(f"measured probes {unknown} have no model probe location")
        self.scenario = replace(scenario, probes={pid: probes[pid] for pid in self.measured})
        self.mesh, self.materials, self.boundary = mesh, materials, boundary
        for p in self.parameters:
            if p.kind == CONDUCTIVITY and p.target not in mesh.region_names():
                raise CalibrationError(f"region {p.target!r} is not in the mesh")
            if p.kind == ROBIN and p.target not in mesh.boundaries:
                raise CalibrationError(f"boundary {p.target!r} is not in the mesh")
        self._prepare()

    def _prepare(self):
        mesh = self.mesh
        _, lam = element_properties(self.materials, mesh)
        unit = np.zeros_like(lam)
        self._region_K = {}
        for p in self.parameters:
            if p.kind != CONDUCTIVITY:
                continue
            mask = mesh.region_mask(p.target)
            lam[mask] = 0.0
            u = unit.copy()
            u[mask] = np.eye(2)
            self._region_K[p.target] = _scatter(mesh, stiffness_blocks(mesh, u))
        self._fixed_K = _scatter(mesh, stiffness_blocks(mesh, lam))

        fitted_robin = {p.target for p in self.parameters if p.kind == ROBIN}
        self._robin_unit = {}
        self._robin_fixed = []
        b = self.boundary
        for tag, entry in b.robin.items():
            if tag in fitted_robin:
                h = 1.0 / edge_length(mesh, tag)
                k = (assemble_robin(mesh, tag, h)[0] if b.robin_mode == "edge"
                     else assemble_robin_volume(mesh, tag, b.robin_volume_region, h)[0])
                self._robin_unit[tag] = (k, entry.reference)
            else:
                k = (assemble_robin(mesh, tag, entry.h)[0] if b.robin_mode == "edge"
                     else assemble_robin_volume(mesh, tag, b.robin_volume_region, entry.h)[0])
                self._robin_fixed.append((k, entry.reference))
        absent = fitted_robin - set(self._robin_unit)
        if absent:
            raise CalibrationError(f"fitted Robin boundaries {sorted(absent)} have no Robin entry")
        self._model = ScenarioModel(mesh, self.materials, self.boundary, self.scenario)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    def vector(self, params) -> np.ndarray:
        if isinstance(params, dict):
            try:
                return np.array([float(params[n]) for n in self.names])
            except KeyError as exc:
                raise CalibrationError(f"missing value for parameter {exc.args[0]}") from None
        x = np.asarray(params, dtype=float).ravel()
        if len(x) != len(self.parameters):
            raise CalibrationError(f"expected {len(self.parameters)} values, got {len(x)}")
        return x

    def check_bounds(self, x) -> None:
        for p, v in zip(self.parameters, x):
            if not p.contains(v):
                raise CalibrationError(f"{p.name}={v} is outside [{p.lower}, {p.upper}]")

    def model(self, params) -> ScenarioModel:
        x = self.vector(params)
        K = self._fixed_K.copy()
        robin = list(self._robin_fixed)
        for p, v in zip(self.parameters, x):
            if p.kind == CONDUCTIVITY:
                K = K + v * self._region_K[p.target]
            else:
                k, ref = self._robin_unit[p.target]
                robin.append((v * k, ref))
        return self._model.with_operators(K, robin)

    def simulate(self, params) -> dict[str, TemperatureTrace]:
        return self.model(params).run().traces

    def group_errors(self, params) -> dict[str, float]:
        """Mean squared residual per group, in C^2."""
        self.check_bounds(self.vector(params))
        sim = self.simulate(params)
        sums: dict[str, list] = {}
        for pid in sorted(self.measured):
            meas = self.measured[pid]
            s = sim[pid]
            keep = (meas.times >= s.times[0]) & (meas.times <= s.times[-1])
            if not keep.any():
                raise CalibrationError(f"measured trace {pid!r} lies outside the simulated time span")
            r = meas.temperatures[keep] - s.at(meas.times[keep])
            acc = sums.setdefault(self.groups[pid], [0.0, 0])
            acc[0] += float(r @ r)
            acc[1] += len(r)
        return {g: sq / n for g, (sq, n) in sorted(sums.items())}

    def misfit_from_groups(self, errors: dict[str, float]) -> float:
        return math.fsum(self.weights[g] * e for g, e in sorted(errors.items()))


def misfit(params, problem: CalibrationProblem) -> float:
    return problem.misfit_from_groups(problem.group_errors(params))


@dataclass
class CalibrationResult:
    names: list[str]
    values: np.ndarray
    misfit: float
    initial_misfit: float
    evaluations: int
    iterations: int
    converged: bool
    group_residuals: dict[str, float]
    history: list[tuple[int, float, tuple]] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


class _Budget(Exception):
    pass


class _Objective:
    """Objective in log-parameter space with caching and an evaluation budget."""

    def __init__(self, problem, lo, hi, max_evals, log):
        self.problem, self.lo, self.hi = problem, lo, hi
        self.lower, self.upper = np.exp(lo), np.exp(hi)
        self.max_evals = max_evals
        self.cache: dict[tuple, float] = {}
        self.evals = 0
        self.best = (math.inf, None)
        self.log = log

    def project(self, z):
        return np.clip(z, self.lo, self.hi)

    def __call__(self, z):
        z = self.project(z)
        key = tuple(z.tolist())
        if key in self.cache:
            return self.cache[key]
        if self.evals >= self.max_evals:
            raise _Budget
        self.evals += 1
        x = np.clip(np.exp(z), self.lower, self.upper)
        try:
            value = misfit(x, self.problem)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            raise CalibrationError(f"simulation failed at {x.tolist()}: {exc}") from exc
        self.cache[key] = value
        if value < self.best[0]:
            self.best = (value, z.copy())
        self.log.append((self.evals, value, tuple(x.tolist())))
        return value


def coefficients(n: int, adaptive: bool) -> tuple[float, float, float, float]:
    """Reflection, expansion, contraction and shrink factors.

    The adaptive set scales with the dimension ``n`` (Gao and Han, 2012).
    """
    if adaptive:
        return 1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n
    return 1.0, 2.0, 0.5, 0.5


def _nelder_mead(obj, simplex, xtol, ftol, coef, restart_size=0.0):
    """Nelder-Mead iterations until converged, stagnant or out of budget.

    The run counts as stagnant once the simplex is smaller than
    ``restart_size`` without having converged.  Returns the final simplex,
    values, iteration count and a convergence flag.
    """
    alpha, gamma, rho, sigma = coef
    pts = np.array([obj.project(p) for p in simplex])
    vals = np.array([obj(p) for p in pts])
    iters = 0
    while True:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        size = np.max(np.abs(pts[1:] - pts[0]))
        if size < xtol and vals[-1] - vals[0] < ftol:
            return pts, vals, iters, True
        if size < restart_size:
            return pts, vals, iters, False
        iters += 1
        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = obj.project(centroid + alpha * (centroid - worst))
        fr = obj(xr)
        if fr < vals[0]:
            xe = obj.project(centroid + gamma * (centroid - worst))
            fe = obj(xe)
            pts[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = obj.project(centroid + rho * (xr - centroid))
            fc = obj(xc)
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = obj.project(centroid + rho * (worst - centroid))
            fc = obj(xc)
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        for i in range(1, len(pts)):
            pts[i] = obj.project(pts[0] + sigma * (pts[i] - pts[0]))
            vals[i] = obj(pts[i])


def _simplex(z0, step, lo, hi, signs):
    step = np.broadcast_to(np.asarray(step, dtype=float), z0.shape)
    pts = [z0.copy()]
    for i in range(len(z0)):
        p = z0.copy()
        s = signs[i] * step[i]
        if not lo[i] <= p[i] + s <= hi[i]:
            s = -s
        p[i] += s
        pts.append(p)
    return np.array(pts)


def _poll(obj, z, radius):
    """Evaluate ``z +- radius`` along every axis; the objective keeps the best."""
    for i in range(len(z)):
        for sign in (1.0, -1.0):
            p = z.copy()
            p[i] += sign * radius
            obj(p)


def fit(problem: CalibrationProblem, initial, *, max_evals: int = 500, xtol: float = 1e-3,
        ftol: float = 1e-6, step: float = 0.5, restart_shrink: float = 30.0, confirm: bool = True,
        seed: int = 0, adaptive: bool = False) -> CalibrationResult:
    """Bounded Nelder-Mead on log-parameters with restarts on stagnation.

    The initial simplex steps every log-parameter by ``step`` from the
    start point.  Trial points are projected onto the bounds.  The search
    converges when the simplex spans less than ``xtol`` (relative, as a log
    difference) and its values differ by less than ``ftol`` C^2.

    Whenever the simplex has shrunk by ``restart_shrink`` since it was
    built, it is rebuilt around the best point at its current size, which
    undoes the collapse Nelder-Mead suffers on ill-conditioned misfits.
    With ``confirm`` a converged point is polled at ``+-10 xtol`` along each
    axis; an improvement of ``ftol`` or more counts as stagnation and the
    search restarts from the better point.  Rebuilt simplices step in
    directions with random signs drawn from ``seed``.  Running out of
    ``max_evals`` returns the best point so far with ``converged=False``.
    """
    start = time.perf_counter()
    x0 = problem.vector(initial)
    problem.check_bounds(x0)
    lo = np.log([p.lower for p in problem.parameters])
    hi = np.log([p.upper for p in problem.parameters])
    log: list = []
    obj = _Objective(problem, lo, hi, max_evals, log)
    rng = np.random.default_rng(seed)
    z0 = np.log(x0)
    initial_misfit = obj(z0)
    converged, iterations = False, 0
    signs = np.ones(len(z0))
    coef = coefficients(len(z0), adaptive)
    scale = step
    try:
        while True:
            simplex = _simplex(obj.best[1], scale, lo, hi, signs)
            pts, vals, it, done = _nelder_mead(obj, simplex, xtol, ftol, coef, scale / restart_shrink)
            iterations += it
            signs = rng.choice([-1.0, 1.0], size=len(z0))
            scale = max(10 * xtol, float(np.max(np.abs(pts[1:] - pts[0]))))
            if done:
                if not confirm:
                    converged = True
                    break
                before = obj.best[0]
                _poll(obj, obj.best[1], 10 * xtol)
                if before - obj.best[0] < ftol:
                    converged = True
                    break
                scale = 10 * xtol
    except _Budget:
        converged = False
    best_val, best_z = obj.best
    x = np.clip(np.exp(best_z), [p.lower for p in problem.parameters],
                [p.upper for p in problem.parameters])
    groups = problem.group_errors(x)
    return CalibrationResult(problem.names, x, best_val, initial_misfit, obj.evals, iterations,
                             converged, groups, log, time.perf_counter() - start)


# -- reports --------------------------------------------------------------------

RESULT_HEADER = ("domain", "parameter", "value", "unit")


def result_csv(result: CalibrationResult, problem: CalibrationProblem) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for p, v in zip(problem.parameters, result.values.tolist()):
        label = "lambda_eff" if p.kind == CONDUCTIVITY else "h"
        w.writerow((p.target, label, repr(v), p.unit))
    return buf.getvalue()


def convergence_log_csv(result: CalibrationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("evaluation", "misfit_C2", "best_misfit_C2", *result.names))
    best = math.inf
    for k, value, x in result.history:
        best = min(best, value)
        w.writerow((k, repr(value), repr(best), *map(repr, x)))
    return buf.getvalue()


def fitted_table(result: CalibrationResult, problem: CalibrationProblem) -> MaterialTable:
    """Material table with the fitted conductivities filled in."""
    table = problem.materials
    h = table.robin_h
    for p, v in zip(problem.parameters, result.values.tolist()):
        if p.kind == CONDUCTIVITY:
            table = table.with_effective(p.target, v, FITTED)
        else:
            h = v
    return replace(table, robin_h=h)

