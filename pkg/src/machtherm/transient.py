"""Theta-method time integration of cooldown and load-cycle scenarios."""

from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from machtherm.errors import AssemblyError, ScheduleError, SolverError
from machtherm.fem import (
    BoundarySpec, SPDSolver, TemperatureField, assemble_load, assemble_mass,
    assemble_robin, assemble_robin_volume, assemble_stiffness, value_at,
)
from machtherm.materials import MaterialTable
from machtherm.mesh.core import CONDUCTOR_REGIONS, Mesh, locate_probe


@dataclass(frozen=True, eq=False)
class Schedule:
    """Piecewise-linear function of time, held constant outside its breakpoints."""

    times: NDArray
    values: NDArray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if len(t) == 0 or len(t) != len(v):
            raise ScheduleError("schedule needs matching, non-empty time and value lists")
        if np.any(np.diff(t) <= 0):
            raise ScheduleError("schedule breakpoint times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ScheduleError("schedule contains non-finite entries")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls([0.0], [value])

    @classmethod
    def from_pairs(cls, pairs) -> "Schedule":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def extrema(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    __hash__ = None


def power_cycle(levels, ramp_rate=1.0, hold_s=7200.0, off_s=7200.0, fall_s=1.0, start_s=0.0):
    """Power schedule: ramp to each level at ``ramp_rate`` W/s, hold, switch off.

    Switching off takes ``fall_s`` seconds since the schedule is continuous.
    """
    t, pairs = start_s, [(0.0, 0.0)] if start_s > 0 else []
    for level in levels:
        pairs.append((t, 0.0))
        t += level / ramp_rate
        pairs.append((t, float(level)))
        t += hold_s
        pairs.append((t, float(level)))
        t += fall_s
        pairs.append((t, 0.0))
        t += off_s
    pairs.append((t, 0.0))
    clean = []
    for p in pairs:
        if clean and p[0] <= clean[-1][0]:
            continue
        clean.append(p)
    return Schedule.from_pairs(clean)


@dataclass(frozen=True, eq=False)
class TemperatureTrace:
    probe_id: str
    times: NDArray
    temperatures: NDArray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.temperatures, dtype=float).ravel()
        if len(t) != len(v):
            raise ScheduleError(f"trace {self.probe_id!r}: times and temperatures differ in length")
        if len(t) and np.any(np.diff(t) <= 0):
            raise ScheduleError(f"trace {self.probe_id!r}: times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "temperatures", v)

    def __len__(self):
        return len(self.times)

    def at(self, times) -> NDArray:
        """Linear resampling onto ``times``."""
        return np.interp(times, self.times, self.temperatures)


@dataclass(frozen=True)
class ScenarioSpec:
    """Time grid, heat input and observation points of one run.

    ``power`` is the total electrical power of the whole machine in W.  It
    is turned into a volumetric source in the conductors using
    ``axial_length`` and ``fraction`` (the modelled share of the cross
    section).  ``probes`` maps probe ids to points in metres.
    """

    t_end: float
    dt: float = 1.0
    initial: float | NDArray = 26.0
    power: Schedule | float = 0.0
    axial_length: float = 0.1
    fraction: float = 0.25
    theta: float = 1.0
    probes: dict[str, tuple[float, float]] = field(default_factory=dict)
    snapshot_every: int = 0
    backend: str = "direct"
    conductor_regions: tuple[str, ...] = CONDUCTOR_REGIONS

    def __post_init__(self):
        if not self.dt > 0:
            raise ScheduleError("time step must be positive")
        if self.t_end < self.dt:
            raise ScheduleError("t_end must be at least one time step")
        if not self.axial_length > 0:
            raise ScheduleError("axial length must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ScheduleError(f"theta={self.theta} is outside the A-stable range [0.5, 1]")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_end / self.dt - 1e-9)


def joule_source_from_power(power: float, mesh: Mesh, axial_length: float, fraction: float = 0.25,
                            regions=CONDUCTOR_REGIONS) -> dict[str, float]:
    """Uniform volumetric heat source in the conductors for a machine power in W."""
    if power < 0:
        raise AssemblyError("power must be non-negative")
    present = [r for r in regions if r in mesh.region_names()]
    area = sum(mesh.region_area(r) for r in present)
    if area <= 0:
        raise AssemblyError("mesh has no conductor area to carry the Joule losses")
    q = power * fraction / (area * axial_length)
    return {r: q for r in present}


def _as_matrix(a):
    if sp.issparse(a):
        return sp.csr_matrix(a)
    return sp.csr_matrix(np.atleast_2d(np.asarray(a, dtype=float)))


class ThetaStepper:
    """Advance ``M dT/dt + K T = f`` with the theta method.

    ``(M/dt + theta K) T1 = (M/dt - (1-theta) K) T0 + theta f1 + (1-theta) f0``
    with the ``fixed`` nodes set to their values at the new time.  The
    system matrix is factorised once.
    """

    def __init__(self, M, K, dt, theta=1.0, fixed=None, backend="direct"):
        if not 0.5 <= theta <= 1.0:
            raise ScheduleError(f"theta={theta} is outside the A-stable range [0.5, 1]")
        self.M, self.K = _as_matrix(M), _as_matrix(K)
        self.dt, self.theta = float(dt), float(theta)
        n = self.M.shape[0]
        self.fixed = np.zeros(0, dtype=np.int64) if fixed is None else np.asarray(fixed, np.int64)
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.A = (self.M / self.dt + self.theta * self.K).tocsr()
        self.B = (self.M / self.dt - (1.0 - self.theta) * self.K).tocsr()
        self._Aff = self.A[self.free][:, self.free]
        self._Afc = self.A[self.free][:, self.fixed]
        self._solver = SPDSolver(self._Aff, backend) if len(self.free) else None

    def rhs(self, T0, f0, f1):
        return self.B @ T0 + self.theta * f1 + (1.0 - self.theta) * f0

    def increment(self, T0, f0, f1, fixed_values=None, net=None):
        """Solve for ``T1 - T0`` directly, which keeps small changes exact.

        ``net`` may supply ``theta f1 + (1-theta) f0 - K T0`` computed by the
        caller in a cancellation-free way; ``f0`` and ``f1`` are then unused.
        """
        T0 = np.asarray(T0, dtype=float)
        b = self.theta * f1 + (1.0 - self.theta) * f0 - self.K @ T0 if net is None else net
        dT = np.empty_like(T0)
        if len(self.fixed):
            dT[self.fixed] = np.asarray(fixed_values, dtype=float) - T0[self.fixed]
            b_free = b[self.free] - self._Afc @ dT[self.fixed]
        else:
            b_free = b[self.free]
        if self._solver is not None:
            dT[self.free] = self._solver.solve(b_free)
        return dT, b

    def step(self, T0, f0, f1, fixed_values=None):
        dT, _ = self.increment(T0, f0, f1, fixed_values)
        return np.asarray(T0, dtype=float) + dT


def step_theta(M, K, f_n, f_n1, T_n, dt, theta=1.0, fixed=None, fixed_values=None,
               backend="direct"):
    """One theta-method step; see :class:`ThetaStepper` for repeated use."""
    stepper = ThetaStepper(M, K, dt, theta, fixed, backend)
    T_n = np.atleast_1d(np.asarray(T_n, dtype=float))
    return stepper.step(T_n, np.atleast_1d(f_n), np.atleast_1d(f_n1), fixed_values)


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    mesh: Mesh
    times: NDArray
    probe_ids: list[str]
    samples: NDArray  # (n_times, n_probes)
    final: TemperatureField
    snapshots: list[tuple[float, NDArray]]
    balance: NDArray  # (n_steps, 5): stored, source, robin_in, dirichlet_in, relative residual

    @property
    def traces(self) -> dict[str, TemperatureTrace]:
        return {
            pid: TemperatureTrace(pid, self.times, self.samples[:, k])
            for k, pid in enumerate(self.probe_ids)
        }

    def max_balance_residual(self) -> float:
        return float(self.balance[:, 4].max()) if len(self.balance) else 0.0


class ScenarioModel:
    """Assembled operators of one mesh/material/boundary combination.

    Split out of :func:`run_scenario` so calibration can reuse the parts
    that do not depend on the fitted parameters.
    """

    def __init__(self, mesh: Mesh, materials: MaterialTable, boundary: BoundarySpec,
                 scenario: ScenarioSpec):
        boundary.check_mesh(mesh)
        self.mesh, self.materials, self.boundary, self.scenario = mesh, materials, boundary, scenario
        n = mesh.n_nodes
        self.K_diff = assemble_stiffness(mesh, materials)
        self.M = assemble_mass(mesh, materials)

        self.K_robin = sp.csr_matrix((n, n))
        self.robin_loads = []  # (unit load for T_ref = 1, reference schedule)
        self.robin_parts = []  # (K block, reference schedule)
        for tag, entry in boundary.robin.items():
            if boundary.robin_mode == "edge":
                k, f = assemble_robin(mesh, tag, entry.h, 1.0)
            else:
                k, f = assemble_robin_volume(mesh, tag, boundary.robin_volume_region, entry.h, 1.0)
            self.K_robin = self.K_robin + k
            self.robin_loads.append((f, entry.reference))
            self.robin_parts.append((k.tocsr(), entry.reference))
        self.K = (self.K_diff + self.K_robin).tocsr()

        unit = joule_source_from_power(1.0, mesh, scenario.axial_length, scenario.fraction,
                                       scenario.conductor_regions) if _has_power(scenario) else {}
        self.power_load = assemble_load(mesh, unit)

        fixed = {}
        self.dirichlet = []
        for tag, value in boundary.dirichlet.items():
            nodes = mesh.edge_nodes(tag)
            v0 = value_at(value, 0.0)
            for node in nodes.tolist():
                if node in fixed and fixed[node] != v0:
                    raise AssemblyError(f"node {node} is prescribed by two Dirichlet tags")
                fixed[node] = v0
            self.dirichlet.append((nodes, value))
        self.fixed = np.array(sorted(fixed), dtype=np.int64)
        self._pos = {node: k for k, node in enumerate(self.fixed.tolist())}

        self.probe_ids = list(scenario.probes)
        rows, cols, vals = [], [], []
        for k, pid in enumerate(self.probe_ids):
            loc = locate_probe(mesh, scenario.probes[pid])
            idx, w = loc.weights(mesh)
            rows += [k] * 3
            cols += idx.tolist()
            vals += w.tolist()
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.probe_ids), n))

    def with_operators(self, K_diff, robin_parts) -> "ScenarioModel":
        """Copy sharing mesh data but with new diffusion and Robin operators."""
        other = copy.copy(self)
        other.K_diff = sp.csr_matrix(K_diff)
        other.robin_parts = [(sp.csr_matrix(k), ref) for k, ref in robin_parts]
        n = self.mesh.n_nodes
        other.robin_loads = [(np.asarray(k.sum(axis=1)).ravel(), ref) for k, ref in other.robin_parts]
        other.K_robin = sum((k for k, _ in other.robin_parts), sp.csr_matrix((n, n)))
        other.K = (other.K_diff + other.K_robin).tocsr()
        return other

    def power(self, t):
        return value_at(self.scenario.power, t)

    def load(self, t) -> NDArray:
        f = self.power(t) * self.power_load
        for unit, ref in self.robin_loads:
            f = f + value_at(ref, t) * unit
        return f

    def net_load(self, T0, t0, t1, theta, shift):
        """``theta f(t1) + (1-theta) f(t0) - K T0`` built from temperature differences.

        Diffusion acts on ``T0 - shift`` and each Robin term on ``T_ref - T0``,
        so the result stays accurate when the net fluxes are tiny.
        Returns the load and the Robin heat input per node.
        """
        b = (theta * self.power(t1) + (1 - theta) * self.power(t0)) * self.power_load
        b -= self.K_diff @ (T0 - shift)
        robin = np.zeros_like(T0)
        for k, ref in self.robin_parts:
            ref_avg = theta * value_at(ref, t1) + (1 - theta) * value_at(ref, t0)
            robin += k @ (ref_avg - T0)
        return b + robin, robin

    def fixed_values(self, t) -> NDArray:
        g = np.empty(len(self.fixed))
        for nodes, value in self.dirichlet:
            g[[self._pos[n] for n in nodes.tolist()]] = value_at(value, t)
        return g

    def initial_field(self) -> NDArray:
        init = self.scenario.initial
        T0 = np.full(self.mesh.n_nodes, float(init)) if np.ndim(init) == 0 else np.array(init, float)
        if T0.shape != (self.mesh.n_nodes,):
            raise ScheduleError("initial field length does not match the mesh")
        return T0

    def run(self) -> ScenarioResult:
        sc = self.scenario
        dt, theta, n_steps = sc.dt, sc.theta, sc.n_steps
        stepper = ThetaStepper(self.M, self.K, dt, theta, self.fixed, sc.backend)
        m_sum = np.asarray(self.M.sum(axis=0)).ravel()
        kr_sum = np.asarray(self.K_robin.sum(axis=0)).ravel()
        p_sum = self.power_load.sum()

        T = self.initial_field()
        times = dt * np.arange(n_steps + 1)
        samples = np.empty((n_steps + 1, len(self.probe_ids)))
        samples[0] = self.P @ T
        balance = np.empty((n_steps, 5))
        snapshots = [(0.0, T.copy())] if sc.snapshot_every else []
        for k in range(1, n_steps + 1):
            t0, t1 = times[k - 1], times[k]
            g1 = self.fixed_values(t1)
            shift = g1.mean() if len(g1) else T.mean()
            b, robin_nodes = self.net_load(T, t0, t1, theta, shift)
            dT, _ = stepper.increment(T, None, None, g1, net=b)
            T1 = T + dT
            # heat balance over the step, W/m
            stored = m_sum @ dT / dt
            source = p_sum * (theta * self.power(t1) + (1 - theta) * self.power(t0))
            robin = robin_nodes.sum() - theta * (kr_sum @ dT)
            reaction = (stepper.A @ dT - b)[self.fixed]
            dirichlet = reaction.sum()
            scale = max(abs(stored), abs(source), abs(robin), np.abs(reaction).sum(), 1e-300)
            balance[k - 1] = (stored, source, robin, dirichlet,
                              abs(stored - source - robin - dirichlet) / scale)
            T = T1
            samples[k] = self.P @ T
            if sc.snapshot_every and k % sc.snapshot_every == 0:
                snapshots.append((float(t1), T.copy()))
        if not np.all(np.isfinite(samples)):
            raise SolverError("simulation produced non-finite temperatures")
        return ScenarioResult(self.mesh, times, self.probe_ids, samples,
                              TemperatureField(self.mesh, T), snapshots, balance)


def _has_power(scenario: ScenarioSpec) -> bool:
    p = scenario.power
    if isinstance(p, Schedule):
        return bool(np.any(p.values != 0))
    return value_at(p) != 0


def run_scenario(mesh: Mesh, materials: MaterialTable, boundary: BoundarySpec,
                 scenario: ScenarioSpec) -> ScenarioResult:
    """Integrate the scenario and sample every probe at every step."""
    return ScenarioModel(mesh, materials, boundary, scenario).run()


# -- trace files ----------------------------------------------------------------

TRACE_HEADER = ("time_s", "probe_id", "temperature_C")


def traces_to_csv(traces) -> str:
    """Tidy CSV, one row per sample, ordered by time then probe."""
    traces = list(traces.values()) if isinstance(traces, dict) else list(traces)
    rows = []
    for tr in traces:
        rows += [(t, tr.probe_id, v) for t, v in zip(tr.times.tolist(), tr.temperatures.tolist())]
    order = {tr.probe_id: k for k, tr in enumerate(traces)}
    rows.sort(key=lambda r: (r[0], order[r[1]]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t, pid, v in rows:
        w.writerow((repr(t), pid, repr(v)))
    return buf.getvalue()


def traces_from_csv(text: str) -> dict[str, TemperatureTrace]:
    """Parse trace CSV; sampling may be irregular and differ between probes."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
        raise ScheduleError(f"trace file must start with header {','.join(TRACE_HEADER)}")
    data: dict[str, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ScheduleError(f"line {lineno}: expected 3 columns, got {len(row)}")
        try:
            t, v = float(row[0]), float(row[2])
        except ValueError:
            raise ScheduleError(f"line {lineno}: non-numeric time or temperature") from None
        data.setdefault(row[1].strip(), []).append((t, v))
    if not data:
        raise ScheduleError("trace file holds no samples")
    out = {}
    for pid, rows in data.items():
        rows.sort()
        out[pid] = TemperatureTrace(pid, [r[0] for r in rows], [r[1] for r in rows])
    return out
