"""Time constants, relative errors and sensor-group statistics of traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from machtherm.errors import AnalysisError, ThresholdNotCrossedError
from machtherm.transient import TemperatureTrace

# Fraction of the drop completed after one time constant of an exponential.
DROP_FRACTION = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class TimeConstantResult:
    tau: float
    threshold: float
    bracket: tuple[int, int]


def time_constant(trace: TemperatureTrace, t_init: float, t_ambient: float,
                  start_tolerance: float = 0.5) -> TimeConstantResult:
    """Time to complete ``1 - 1/e`` of the drop from ``t_init`` to ``t_ambient``.

    The first sample at or below the threshold and its predecessor bracket
    the crossing, which is interpolated linearly.  The time is measured from
    the first sample.  Works for heating (``t_ambient > t_init``) as well.
    """
    if len(trace) < 2:
        raise AnalysisError(f"trace {trace.probe_id!r} needs at least two samples")
    if t_init == t_ambient:
        raise AnalysisError("initial and ambient temperatures coincide")
    T = trace.temperatures
    if abs(T[0] - t_init) > start_tolerance:
        raise AnalysisError(
            f"trace {trace.probe_id!r} starts at {T[0]:.3f} C, not within "
            f"{start_tolerance} C of the initial {t_init} C")
    threshold = t_init - DROP_FRACTION * (t_init - t_ambient)
    sign = 1.0 if t_init > t_ambient else -1.0
    below = np.flatnonzero(sign * (T - threshold) <= 0)
    if len(below) == 0:
        raise ThresholdNotCrossedError(
            f"trace {trace.probe_id!r} never reaches the threshold {threshold:.4f} C")
    i = int(below[0])
    if i == 0:
        raise AnalysisError(f"trace {trace.probe_id!r} starts beyond the threshold")
    t_a, t_b = trace.times[i - 1], trace.times[i]
    T_a, T_b = T[i - 1], T[i]
    tau = t_a + (T_a - threshold) / (T_a - T_b) * (t_b - t_a) - trace.times[0]
    return TimeConstantResult(float(tau), float(threshold), (i - 1, i))


def relative_error(tau_meas: float, tau_sim: float) -> float:
    if not tau_meas > 0:
        raise AnalysisError(f"measured time constant must be positive, got {tau_meas}")
    return abs(tau_meas - tau_sim) / tau_meas


def sensor_group_mean(traces, probe_id: str | None = None) -> TemperatureTrace:
    traces = list(traces)
    if not traces:
        raise AnalysisError("no traces to average")
    times = traces[0].times
    for tr in traces[1:]:
        if not np.array_equal(tr.times, times):
            raise AnalysisError(
                f"trace {tr.probe_id!r} is sampled on a different time grid than {traces[0].probe_id!r}")
    if len(traces) == 1:
        values = traces[0].temperatures
    else:
        values = np.mean([tr.temperatures for tr in traces], axis=0)
    name = probe_id or "+".join(tr.probe_id for tr in traces)
    return TemperatureTrace(name, times, values)


def abs_error_trace(measured: TemperatureTrace, simulated: TemperatureTrace) -> TemperatureTrace:
    """``|T_meas - T_sim|`` at the measured times inside the simulated range."""
    lo, hi = simulated.times[0], simulated.times[-1]
    keep = (measured.times >= lo) & (measured.times <= hi)
    if not keep.any():
        raise AnalysisError(
            f"time ranges of {measured.probe_id!r} and {simulated.probe_id!r} do not overlap")
    t = measured.times[keep]
    err = np.abs(measured.temperatures[keep] - simulated.at(t))
    return TemperatureTrace(f"abs_error:{measured.probe_id}", t, err)


@dataclass(frozen=True)
class ValidationRow:
    """One row of the validation report; ``tau_meas_min`` may be missing."""

    initial_temperature: float
    domain: str
    tau_meas_min: float | None
    tau_sim_min: float

    @property
    def rel_error_percent(self) -> float | None:
        if self.tau_meas_min is None:
            return None
        return 100.0 * relative_error(self.tau_meas_min, self.tau_sim_min)


VALIDATION_HEADER = ("initial_temperature", "domain", "tau_meas_min", "tau_sim_min",
                     "rel_error_percent")


def _cell(value) -> str:
    return "" if value is None else repr(value)


def validation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VALIDATION_HEADER)
    for r in rows:
        w.writerow((repr(r.initial_temperature), r.domain, _cell(r.tau_meas_min),
                    repr(r.tau_sim_min), _cell(r.rel_error_percent)))
    return buf.getvalue()


def group_traces(traces: dict[str, TemperatureTrace], groups: dict[str, str]) -> dict[str, TemperatureTrace]:
    """Average traces by group name; ``groups`` maps probe id to group."""
    members: dict[str, list] = {}
    for pid, group in groups.items():
        if pid in traces:
            members.setdefault(group, []).append(traces[pid])
    return {g: sensor_group_mean(trs, g) for g, trs in members.items()}
