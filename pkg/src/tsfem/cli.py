"""Configuration-driven batch runner and study orchestration.

Verbs:
  run CONFIG              solve one case, write summary/traces/fields
  sweep STUDY             mode sweeps against the time reference, h sweeps
  mesh-gen CONFIG         generate a mesh file (and optional VTK preview)
  validate-config CONFIG  report every validation problem, exit nonzero on any

All solves are serial and deterministic; rerunning a config reproduces its
CSV outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .config import (
    CaseConfig,
    ConfigError,
    build_case,
    build_mesh,
    build_solver_config,
    load_config,
    mode_table,
    parse_config,
)
from .io import export_fields, export_mesh_vtk, export_traces
from .linsolve import SolverConfig
from .mesh import save_mesh
from .navier_stokes import NSCase, flow_report, parabolic_inflow, solve_ns
from .scalar import ScalarCase, solve_scalar
from .spectral import (
    SpectralCoeffs,
    evaluate_field_in_time,
    fourier_coefficients,
    n_coeffs,
)
from .time_domain import TimeCase, run_time_simulation
from .verification import diagnostics, refinement_report

__all__ = ["RunSummary", "run_case", "run", "sweep", "main"]


@dataclass
class RunSummary:
    kind: str
    converged: bool
    steps: int
    residuals: List[float]
    wall_time: float
    alpha: float
    beta: float
    flows: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    truncation: Dict[str, float] = field(default_factory=dict)
    field_range: Optional[List[float]] = None
    outputs: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind, "converged": bool(self.converged),
            "steps": int(self.steps),
            "residuals": [float(r) for r in self.residuals],
            "wall_time": float(self.wall_time),
            "alpha": float(self.alpha), "beta": float(self.beta),
            "flows": self.flows, "truncation": self.truncation,
            "field_range": self.field_range, "outputs": self.outputs,
        }


def _modes_as_rows(values: np.ndarray) -> List[List[float]]:
    n = (values.shape[-1] + 1) // 2
    pos = values[n - 1:]
    return [[float(v.real), float(v.imag)] for v in pos]


def _trace_times(omega: float, samples: int) -> np.ndarray:
    if omega <= 0.0:
        return np.array([0.0])
    period = 2 * np.pi / omega
    return period * np.arange(samples) / samples


def run_case(config: CaseConfig, out_dir, serial: bool = True) -> RunSummary:
    """Solve one configured case and write its artifacts.

    The output directory receives summary.yaml, traces.csv for flow cases,
    and VTK field snapshots when output.fields_t_samples is given.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError([f"output directory {out_dir} is not writable: {err}"])
    if not out_dir.is_dir():
        raise ConfigError([f"output directory {out_dir} is not a directory"])
    t0 = time.perf_counter()
    mesh = build_mesh(config.mesh)
    case, info = build_case(config, mesh)
    solver_config = build_solver_config(config.solver)
    omega = float(config.physics["omega"])
    trace_samples = int(config.output.get("trace_samples", 128))
    outputs: List[str] = []

    if isinstance(case, NSCase):
        result = solve_ns(case, mesh, solver_config)
        diag = diagnostics(case, mesh, velocity=result.state.velocity)
        groups = (list(case.neumann) + list(case.dirichlet))
        report = flow_report(result.state, mesh, groups)
        flows = {g: {"area": d.area,
                     "flow_modes": _modes_as_rows(d.flow.values),
                     "pressure_modes": _modes_as_rows(d.pressure.values)}
                 for g, d in report.items()}
        times = _trace_times(omega, trace_samples)
        columns: Dict[str, np.ndarray] = {}
        for g, d in report.items():
            columns[f"Q_{g}"] = np.array(
                [evaluate_field_in_time(d.flow.values, t, omega) for t in times])
            columns[f"P_{g}"] = np.array(
                [evaluate_field_in_time(d.pressure.values, t, omega) for t in times])
        trace_path = export_traces(times, columns, out_dir / "traces.csv")
        outputs.append(str(trace_path))
        t_samples = config.output.get("fields_t_samples")
        if t_samples:
            paths = export_fields(mesh, t_samples, omega, out_dir,
                                  velocity=result.state.velocity,
                                  pressure=result.state.pressure)
            outputs.extend(str(p) for p in paths)
        summary = RunSummary("ns", result.converged, result.steps,
                             result.residuals, time.perf_counter() - t0,
                             diag.alpha, diag.beta, flows,
                             info.get("truncation", {}), None, outputs)
    else:
        sol = solve_scalar(case, mesh, solver_config)
        diag = diagnostics(case, mesh)
        times = _trace_times(omega, trace_samples)
        recon = np.stack([evaluate_field_in_time(sol, t, omega) for t in times])
        t_samples = config.output.get("fields_t_samples")
        if t_samples:
            paths = export_fields(mesh, t_samples, omega, out_dir, scalar=sol)
            outputs.extend(str(p) for p in paths)
        summary = RunSummary("scalar", True, 1, [], time.perf_counter() - t0,
                             diag.alpha, diag.beta, {},
                             info.get("truncation", {}),
                             [float(recon.min()), float(recon.max())], outputs)

    with open(out_dir / "summary.yaml", "w") as fh:
        yaml.safe_dump(summary.to_dict(), fh, sort_keys=True)
    summary.outputs.append(str(out_dir / "summary.yaml"))
    return summary


def run(config_path, out_dir=None, serial: bool = True) -> RunSummary:
    config = load_config(config_path)
    if out_dir is None:
        out_dir = config.output.get("directory", Path(config_path).stem + "_out")
    return run_case(config, out_dir, serial=serial)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def _waveform_from_samples(samples: np.ndarray, period: float, n_fit: int):
    """Trigonometric interpolant of uniform periodic samples."""
    coeffs = fourier_coefficients(samples, n_fit)
    omega = 2 * np.pi / period

    def waveform(t):
        return evaluate_field_in_time(coeffs.values, float(t), omega)

    return waveform


def _truncation_error(samples: np.ndarray, n_modes: int) -> float:
    coeffs = fourier_coefficients(samples, n_modes)
    t = np.arange(samples.size) / samples.size
    n = np.arange(-n_modes + 1, n_modes)
    recon = (np.exp(2j * np.pi * np.outer(t, n)) @ coeffs.values).real
    return float(np.linalg.norm(samples - recon) / np.linalg.norm(samples))


def mode_sweep(study: Dict[str, Any], out_dir) -> Dict[str, Any]:
    """Spectral solves over a mode list against the time-domain reference.

    The base case must drive a parabolic inflow by flow_samples; the same
    waveform feeds the time solver, and the outlet-flow error of each
    spectral solve is tabulated against the boundary truncation error.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = CaseConfig(**study["case"])
    modes = [int(n) for n in study["modes"]]
    if len(modes) < 2:
        raise ConfigError(["study.modes needs at least two entries"])
    ref_block = dict(study.get("reference", {}))
    group = ref_block.get("group")
    if group is None:
        raise ConfigError(["study.reference.group is required"])

    inflow_name = None
    for name, bc in base.bcs.items():
        if bc.get("kind") == "parabolic_inflow" and "flow_samples" in bc:
            inflow_name = name
    if inflow_name is None:
        raise ConfigError(["mode_sweep needs a parabolic_inflow bc with flow_samples"])
    samples = np.asarray(base.bcs[inflow_name]["flow_samples"], dtype=float)

    mesh = build_mesh(base.mesh)
    phys = base.physics
    omega = float(phys["omega"])
    period = 2 * np.pi / omega
    n_fit = int(ref_block.get("n_fit", min(16, (samples.size + 2) // 4)))
    waveform = _waveform_from_samples(samples, period, n_fit)

    # unit-flux inflow profile shared by both formulations
    unit = parabolic_inflow(mesh, base.bcs[inflow_name]["group"],
                            SpectralCoeffs(1, np.array([1.0], dtype=complex)))
    profile = unit.values[:, :, 0].real
    node_index = {int(nd): i for i, nd in enumerate(unit.nodes)}

    def time_inflow(coords, t):
        del coords
        return profile * waveform(t)

    walls = []
    neumann_time = {}
    for name, bc in base.bcs.items():
        if bc.get("kind") == "noslip":
            walls.extend(bc.get("groups", [bc.get("group")]))
        if bc.get("kind") == "neumann":
            for g in ([bc["group"]] if "group" in bc else bc["groups"]):
                neumann_time[g] = lambda t: 0.0

    steps = int(ref_block.get("dt_per_cycle", 160))
    tcase = TimeCase(rho=float(phys["rho"]), mu=float(phys["mu"]), period=period,
                     n_cycles=int(ref_block.get("n_cycles", 4)), dt=period / steps,
                     dirichlet={base.bcs[inflow_name]["group"]: time_inflow},
                     walls=walls, neumann=neumann_time, c_i=phys.get("c_i"))
    tconf = SolverConfig(eps_nr=float(base.solver.get("eps_nr", 1e-3)),
                         eps_ls=float(base.solver.get("eps_ls", 0.05)),
                         max_linear_iters=int(base.solver.get("time_max_linear_iters", 3000)))
    tres = run_time_simulation(tcase, mesh, tconf, report_groups=[group],
                               ramp_steps=int(ref_block.get("ramp_steps", 10)))
    q_ref = tres.flow[group]
    t_ref = tres.last_cycle_times
    q_ref_cycle = q_ref[-t_ref.size:]

    rows = []
    for n in modes:
        cfg = CaseConfig(dict(phys, n_modes=n), base.mesh, base.bcs,
                         base.solver, {"directory": str(out_dir / f"n{n}")})
        summary = run_case(cfg, out_dir / f"n{n}")
        flow_modes = np.asarray(summary.flows[group]["flow_modes"], dtype=float)
        coeffs = SpectralCoeffs.from_positive_modes(flow_modes[:, 0] + 1j * flow_modes[:, 1])
        q_spec = np.array([evaluate_field_in_time(coeffs.values, t, omega)
                           for t in t_ref])
        err = float(np.linalg.norm(q_spec - q_ref_cycle) / np.linalg.norm(q_ref_cycle))
        rows.append({"n_modes": n, "truncation": _truncation_error(samples, n),
                     "flow_error": err, "converged": bool(summary.converged)})

    table = {"kind": "mode_sweep", "group": group, "rows": rows,
             "cycle_change": [float(c) for c in tres.cycle_change]}
    with open(out_dir / "sweep.yaml", "w") as fh:
        yaml.safe_dump(table, fh, sort_keys=True)
    export_traces(t_ref, {"Q_time": q_ref_cycle}, out_dir / "reference_trace.csv")
    return table


def h_sweep(study: Dict[str, Any], out_dir) -> Dict[str, Any]:
    """Refinement study of the 1D steady transport case against its oracle."""
    from .verification import exact_steady_advection_diffusion_1d, l2_error

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = CaseConfig(**study["case"])
    resolutions = [int(r) for r in study["resolutions"]]
    if len(resolutions) < 2:
        raise ConfigError(["study.resolutions needs at least two entries"])
    phys = base.physics
    if phys["kind"] != "scalar" or base.mesh.get("generator") != "interval":
        raise ConfigError(["h_sweep expects a scalar case on an interval mesh"])
    n_modes = int(phys["n_modes"])
    m = n_coeffs(n_modes)
    length = float(base.mesh["length"])
    u = float(np.asarray(phys.get("velocity_modes", [[0.0]]))[0][0])
    g_bc = None
    for bc in base.bcs.values():
        if bc.get("kind") == "dirichlet" and "phi_modes" in bc:
            vals = mode_table(bc["phi_modes"], n_modes, "h_sweep")
            if np.max(np.abs(vals)) > 0:
                g_bc = float(vals[n_modes - 1].real)
    if g_bc is None:
        raise ConfigError(["h_sweep needs a nonzero Dirichlet phi_modes entry"])
    exact = exact_steady_advection_diffusion_1d(u, float(phys["kappa"]), length, g_bc)

    def exact_modes(points):
        out = np.zeros((points.shape[0], m), dtype=complex)
        out[:, n_modes - 1] = exact(points[:, 0])
        return out

    errors = []
    hs = []
    for res in resolutions:
        cfg_mesh = dict(base.mesh, resolution=res)
        mesh = build_mesh(cfg_mesh)
        case, _ = build_case(CaseConfig(phys, cfg_mesh, base.bcs, base.solver), mesh)
        sol = solve_scalar(case, mesh, build_solver_config(base.solver))
        errors.append(l2_error(sol, exact_modes, mesh))
        hs.append(length / res)
    report = refinement_report(errors, hs)
    rows = [{"h": h, "error": e, "order": (None if not i else float(report.pair_orders[i - 1]))}
            for i, (h, e) in enumerate(zip(hs, errors))]
    table = {"kind": "h_sweep", "rows": rows, "order": float(report.order)}
    with open(out_dir / "sweep.yaml", "w") as fh:
        yaml.safe_dump(table, fh, sort_keys=True)
    return table


def sweep(study_path, out_dir=None) -> Dict[str, Any]:
    raw = yaml.safe_load(Path(study_path).read_text())
    if not isinstance(raw, dict) or "study" not in raw:
        raise ConfigError(["study file needs a top-level 'study' section"])
    study = raw["study"]
    if out_dir is None:
        out_dir = study.get("directory", Path(study_path).stem + "_out")
    kind = study.get("kind")
    if kind == "mode_sweep":
        return mode_sweep(study, out_dir)
    if kind == "h_sweep":
        return h_sweep(study, out_dir)
    raise ConfigError([f"unknown study kind {kind!r}"])


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tsfem", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="solve a configured case")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--serial", action="store_true", default=True,
                       help="deterministic serial execution (default)")
    p_run.add_argument("-v", "--verbose", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a study")
    p_sweep.add_argument("study")
    p_sweep.add_argument("--output-dir", default=None)

    p_mesh = sub.add_parser("mesh-gen", help="generate a mesh file")
    p_mesh.add_argument("config")
    p_mesh.add_argument("--out", required=True)
    p_mesh.add_argument("--vtk", default=None)

    p_val = sub.add_parser("validate-config", help="validate a case file")
    p_val.add_argument("config")

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            summary = run(args.config, args.output_dir, serial=args.serial)
            if args.verbose:
                print(yaml.safe_dump(summary.to_dict(), sort_keys=True))
            else:
                print(f"converged={summary.converged} steps={summary.steps} "
                      f"alpha={summary.alpha:.3g} beta={summary.beta:.3g}")
            return 0 if summary.converged else 1
        if args.verb == "sweep":
            table = sweep(args.study, args.output_dir)
            print(yaml.safe_dump(table, sort_keys=True))
            return 0
        if args.verb == "mesh-gen":
            raw = yaml.safe_load(Path(args.config).read_text())
            block = raw.get("mesh", raw) if isinstance(raw, dict) else None
            if block is None:
                raise ConfigError(["mesh-gen needs a mesh section"])
            mesh = build_mesh(block)
            save_mesh(mesh, args.out)
            if args.vtk:
                export_mesh_vtk(mesh, args.vtk)
            print(f"wrote {args.out}: {mesh.n_nodes} nodes, "
                  f"{mesh.n_elements} {mesh.elem_type} elements")
            return 0
        if args.verb == "validate-config":
            config = parse_config(Path(args.config).read_text())
            mesh = build_mesh(config.mesh)
            build_case(config, mesh)
            print("configuration is valid")
            return 0
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
