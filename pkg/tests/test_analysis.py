import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from machtherm.analysis import (
    DROP_FRACTION, ValidationRow, abs_error_trace, group_traces, relative_error, sensor_group_mean,
    time_constant, validation_csv,
)
from machtherm.errors import AnalysisError, ThresholdNotCrossedError
from machtherm.transient import TemperatureTrace


def exponential(tau, t_init=93.0, t_amb=26.0, t_end=None, dt=1.0):
    t = np.arange(0.0, (t_end or 5 * tau) + dt, dt)
    return TemperatureTrace("x", t, t_amb + (t_init - t_amb) * np.exp(-t / tau))


def test_drop_fraction():
    assert DROP_FRACTION == pytest.approx(0.6321205588)


@given(st.floats(60.0, 3600.0), st.floats(30.0, 200.0), st.floats(-20.0, 29.0))
def test_exponential_time_constant(tau, t_init, t_amb):
    res = time_constant(exponential(tau, t_init, t_amb), t_init, t_amb)
    assert res.tau == pytest.approx(tau, rel=1e-4)
    assert res.threshold == pytest.approx(t_amb + math.exp(-1) * (t_init - t_amb))


def test_heating_curve():
    t = np.arange(0, 1000.0)
    tr = TemperatureTrace("h", t, 80.0 - 60.0 * np.exp(-t / 100.0))
    assert time_constant(tr, 20.0, 80.0).tau == pytest.approx(100.0, rel=1e-4)


def test_offset_start_time():
    tr = exponential(120.0)
    shifted = TemperatureTrace("s", tr.times + 500.0, tr.temperatures)
    assert time_constant(shifted, 93.0, 26.0).tau == pytest.approx(120.0, rel=1e-4)


def test_irregular_sampling_interpolates_linearly():
    tr = TemperatureTrace("p", [0.0, 10.0, 30.0], [100.0, 50.0, 0.0])
    # threshold 100 - 0.632 * 100 = 36.79 lies between 10 s and 30 s
    expected = 10.0 + (50.0 - 100 * math.exp(-1)) / 50.0 * 20.0
    assert time_constant(tr, 100.0, 0.0).tau == pytest.approx(expected)


def test_time_constant_errors():
    with pytest.raises(ThresholdNotCrossedError):
        time_constant(exponential(100.0, t_end=50.0), 93.0, 26.0)
    with pytest.raises(AnalysisError, match="starts at"):
        time_constant(exponential(100.0), 80.0, 26.0)
    with pytest.raises(AnalysisError, match="coincide"):
        time_constant(exponential(100.0), 26.0, 26.0)
    with pytest.raises(AnalysisError, match="two samples"):
        time_constant(TemperatureTrace("x", [0.0], [93.0]), 93.0, 26.0)


def test_relative_error():
    assert relative_error(7.01, 6.97) == pytest.approx(0.04 / 7.01)
    assert relative_error(2.0, 3.0) == pytest.approx(0.5)
    with pytest.raises(AnalysisError):
        relative_error(0.0, 1.0)


def test_group_mean():
    a = TemperatureTrace("a", [0, 1], [10.0, 20.0])
    b = TemperatureTrace("b", [0, 1], [30.0, 40.0])
    m = sensor_group_mean([a, b], "g")
    assert m.probe_id == "g" and m.temperatures.tolist() == [20.0, 30.0]
    grouped = group_traces({"a": a, "b": b}, {"a": "g", "b": "g", "missing": "h"})
    assert list(grouped) == ["g"]
    with pytest.raises(AnalysisError, match="different time grid"):
        sensor_group_mean([a, TemperatureTrace("c", [0, 2], [1.0, 2.0])])
    with pytest.raises(AnalysisError):
        sensor_group_mean([])


def test_abs_error_trace_resamples():
    meas = TemperatureTrace("m", [0.0, 5.0, 10.0, 20.0], [10.0, 9.0, 8.0, 7.0])
    sim = TemperatureTrace("s", [0.0, 10.0], [10.0, 6.0])
    err = abs_error_trace(meas, sim)
    assert err.times.tolist() == [0.0, 5.0, 10.0]
    assert err.temperatures.tolist() == pytest.approx([0.0, 1.0, 2.0])
    with pytest.raises(AnalysisError, match="do not overlap"):
        abs_error_trace(TemperatureTrace("m", [30.0], [1.0]), sim)


def test_validation_csv():
    rows = [ValidationRow(93.0, "slot", 7.01, 6.97), ValidationRow(93.0, "rotor", None, 14.0)]
    out = list(csv.reader(io.StringIO(validation_csv(rows))))
    assert out[0] == ["initial_temperature", "domain", "tau_meas_min", "tau_sim_min", "rel_error_percent"]
    assert float(out[1][4]) == pytest.approx(100 * 0.04 / 7.01)
    assert out[2][2] == "" and out[2][4] == ""
