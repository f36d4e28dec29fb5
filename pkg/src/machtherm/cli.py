"""Command-line front end.

    machtherm <command> [--config PATH] [--out DIR] [--seed N] [--threads N]

Commands: ``mesh``, ``simulate``, ``analyze``, ``calibrate``,
``dump-materials``.  Exit codes: 0 success, 1 configuration or input
error, 2 numerical failure, 3 calibration did not converge.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration (defaults apply without one)")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="optimizer seed (overrides calibration.seed)")
    common.add_argument("--threads", type=int, help="thread limit for the numerical libraries")

    parser = argparse.ArgumentParser(prog="machtherm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="generate or inspect the mesh")
    sub.add_parser("simulate", parents=[common], help="run the configured scenario")
    p = sub.add_parser("analyze", parents=[common], help="time constants and errors of traces")
    p.add_argument("--traces", type=Path, help="simulated trace CSV (default: OUT/traces.csv)")
    p.add_argument("--measured", type=Path, help="measured trace CSV to compare against")
    p = sub.add_parser("calibrate", parents=[common], help="fit parameters to measured traces")
    p.add_argument("--measured", type=Path, help="measured trace CSV (overrides calibration.measured_traces)")
    sub.add_parser("dump-materials", parents=[common], help="write the material table")
    return parser


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise SystemExit("--threads must be at least 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


class _Run:
    """Shared state of one command: config, output directory, manifest."""

    def __init__(self, args):
        from machtherm.config import RunConfig, load_config

        self.args = args
        self.start = time.perf_counter()
        if args.config is not None:
            self.config = load_config(args.config)
            self.base = args.config.resolve().parent
        else:
            self.config = RunConfig()
            self.base = Path.cwd()
        self.out = args.out if args.out is not None else self.base / self.config.output.directory
        self.outputs: list[str] = []

    def write(self, name: str, data: str | bytes) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data, encoding="utf-8")
        self.outputs.append(name)
        return path

    def manifest(self, **extra) -> None:
        import numpy
        import scipy

        from machtherm import __version__
        from machtherm.config import config_hash

        data = {
            "command": self.args.command,
            "config_hash": config_hash(self.config),
            "version": __version__,
            "wall_time_s": time.perf_counter() - self.start,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "threads": self.args.threads,
            "outputs": sorted(self.outputs),
            **extra,
            "config": self.config.model_dump(mode="json"),
        }
        self.write("manifest.json", json.dumps(data, indent=2, sort_keys=True) + "\n")


def _mesh_stats(mesh) -> str:
    regions = ", ".join(
        f"{name}={int(mesh.region_mask(name).sum())}" for name in mesh.region_names())
    return (f"nodes={mesh.n_nodes} elements={mesh.n_elements} area={mesh.total_area():.9e} m^2 "
            f"regions: {regions}")


def cmd_mesh(run: _Run) -> int:
    from machtherm.mesh.msh import serialize_msh
    from machtherm.pipeline import build_mesh

    mesh = build_mesh(run.config, run.base)
    run.write("mesh.msh", serialize_msh(mesh))
    print(_mesh_stats(mesh))
    run.manifest(nodes=mesh.n_nodes, elements=mesh.n_elements, area_m2=mesh.total_area())
    return EXIT_OK


def cmd_simulate(run: _Run) -> int:
    from machtherm.fem import field_to_csv, field_to_vtk, TemperatureField
    from machtherm.pipeline import (
        build_boundary, build_materials, build_mesh, build_probes, build_scenario,
    )
    from machtherm.transient import run_scenario, traces_to_csv

    cfg = run.config
    mesh = build_mesh(cfg, run.base)
    materials = build_materials(cfg)
    boundary = build_boundary(cfg, mesh, materials)
    probes = build_probes(cfg)
    scenario = build_scenario(cfg, probes)
    result = run_scenario(mesh, materials, boundary, scenario)

    run.write("traces.csv", traces_to_csv(result.traces))
    run.write("probes.csv", "probe_id,group,x_m,y_m\n" + "".join(
        f"{pid},{g},{p[0]!r},{p[1]!r}\n" for pid, (p, g) in probes.items()))
    rows = ["step,time_s,stored_W_m,source_W_m,robin_in_W_m,dirichlet_in_W_m,relative_residual\n"]
    for k, row in enumerate(result.balance.tolist(), start=1):
        rows.append(f"{k},{result.times[k]!r}," + ",".join(repr(v) for v in row) + "\n")
    run.write("energy_balance.csv", "".join(rows))
    if cfg.output.write_vtk:
        for t, values in result.snapshots:
            step = int(round(t / scenario.dt))
            run.write(f"snapshot_{step:07d}.vtk",
                      field_to_vtk(TemperatureField(mesh, values), f"temperature t={t!r} s"))
        run.write("final.vtk", field_to_vtk(result.final))
    if cfg.output.write_field_csv:
        run.write("final_field.csv", field_to_csv(result.final))

    last = result.samples[-1]
    hottest = result.probe_ids[int(last.argmax())]
    print(f"steps={len(result.times) - 1} probes={len(result.probe_ids)} "
          f"final_max={last.max():.6f} C at {hottest} ({probes[hottest][1]}) "
          f"max_balance_residual={result.max_balance_residual():.3e}")
    run.manifest(hottest_probe=hottest, max_balance_residual=result.max_balance_residual())
    return EXIT_OK


def _read_traces(path: Path, what: str):
    from machtherm.errors import ConfigError, ScheduleError
    from machtherm.transient import traces_from_csv

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        return traces_from_csv(text)
    except ScheduleError as exc:
        raise ConfigError(f"{what} {path}: {exc}") from None


def cmd_analyze(run: _Run) -> int:
    from machtherm.analysis import (
        ValidationRow, abs_error_trace, group_traces, time_constant, validation_csv,
    )
    from machtherm.errors import ConfigError
    from machtherm.pipeline import ambient_temperature, build_probes
    from machtherm.transient import traces_to_csv

    cfg = run.config
    sim = _read_traces(run.args.traces or run.out / "traces.csv", "trace file")
    probes = build_probes(cfg)
    groups = {pid: g for pid, (_, g) in probes.items()}
    for pid in sim:
        groups.setdefault(pid, pid)
    sim_groups = group_traces(sim, groups)
    t_init, t_amb = cfg.scenario.initial_C, ambient_temperature(cfg)

    meas_groups = {}
    if run.args.measured is not None:
        meas = _read_traces(run.args.measured, "measured trace file")
        for pid in meas:
            groups.setdefault(pid, pid)
        meas_groups = group_traces(meas, groups)
        missing = sorted(set(meas_groups) - set(sim_groups))
        if missing:
            raise ConfigError(f"measured groups {missing} have no simulated counterpart")
        errors = [abs_error_trace(meas[pid], sim[pid]) for pid in meas if pid in sim]
        errors += [abs_error_trace(meas_groups[g], sim_groups[g]) for g in meas_groups]
        run.write("abs_error_traces.csv", traces_to_csv(errors))

    rows = []
    for g in sorted(sim_groups):
        tau_sim = time_constant(sim_groups[g], t_init, t_amb).tau / 60.0
        if g in meas_groups:
            tau_meas = time_constant(meas_groups[g], t_init, t_amb).tau / 60.0
            rows.append(ValidationRow(t_init, g, tau_meas, tau_sim))
            print(f"{g}: tau_meas={tau_meas:.4f} min tau_sim={tau_sim:.4f} min "
                  f"rel_error={rows[-1].rel_error_percent:.3f} %")
        else:
            rows.append(ValidationRow(t_init, g, None, tau_sim))
            print(f"{g}: tau_sim={tau_sim:.4f} min")
    run.write("time_constants.csv", validation_csv(rows))
    run.manifest()
    return EXIT_OK


def cmd_calibrate(run: _Run) -> int:
    from machtherm.calibrate import convergence_log_csv, fit, fitted_table, result_csv
    from machtherm.errors import ConfigError
    from machtherm.pipeline import build_calibration, build_mesh, build_parameters, resolve_path

    cfg = run.config
    cal = cfg.calibration
    build_parameters(cfg)  # fail early on "nothing to fit"
    if run.args.measured is not None:
        path = run.args.measured
    elif cal.measured_traces:
        path = resolve_path(cal.measured_traces, run.base)
    else:
        raise ConfigError("calibration needs measured traces (calibration.measured_traces or --measured)")
    measured = _read_traces(path, "measured trace file")
    mesh = build_mesh(cfg, run.base)
    problem, start = build_calibration(cfg, mesh, measured)
    seed = run.args.seed if run.args.seed is not None else cal.seed
    result = fit(problem, start, max_evals=cal.max_evals, xtol=cal.xtol, ftol=cal.ftol_C2,
                 step=cal.initial_step, restart_shrink=cal.restart_shrink, seed=seed)
    run.write("calibration.csv", result_csv(result, problem))
    run.write("convergence_log.csv", convergence_log_csv(result))
    run.write("fitted_materials.csv", fitted_table(result, problem).to_csv())
    for name, value in result.params.items():
        print(f"{name} = {value:.6g}")
    status = "converged" if result.converged else "NOT converged (best so far written)"
    print(f"misfit={result.misfit:.6e} C^2 initial={result.initial_misfit:.6e} C^2 "
          f"evaluations={result.evaluations} {status}")
    run.manifest(seed=seed, converged=result.converged, evaluations=result.evaluations,
                 misfit_C2=result.misfit)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_dump_materials(run: _Run) -> int:
    from machtherm.pipeline import build_materials

    text = build_materials(run.config).to_csv()
    run.write("materials.csv", text)
    sys.stdout.write(text)
    run.manifest()
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "calibrate": cmd_calibrate,
    "dump-materials": cmd_dump_materials,
}


def _origin(exc: BaseException) -> str:
    """Name of the innermost package module the exception passed through."""
    tb, name = exc.__traceback__, "machtherm"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("machtherm"):
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _limit_threads(args.threads)

    import numpy as np

    from machtherm.errors import (
        AnalysisError, CalibrationError, MachthermError, SolverError,
    )

    numeric = (SolverError, AnalysisError, ArithmeticError, np.linalg.LinAlgError)
    try:
        run = _Run(args)
        return COMMANDS[args.command](run)
    except numeric as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MachthermError, CalibrationError) as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
