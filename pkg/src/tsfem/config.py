"""YAML case configuration: parsing, validation and case construction.

A case file has four sections: physics, mesh, bcs and solver, plus an
optional output section.  Boundary data is given either as a mode table
(list of [re, im] pairs for modes 0..N-1) or as uniform time samples over
one period, which are converted to modes with the physics-block N; the
induced truncation error is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .linsolve import SolverConfig
from .mesh import (
    Mesh,
    generate_bent_channel_tet,
    generate_box_tet,
    generate_interval,
    generate_rect_tri,
    load_mesh,
)
from .navier_stokes import NSCase, parabolic_inflow
from .scalar import ScalarCase
from .spectral import SpectralCoeffs, fourier_coefficients, n_coeffs

__all__ = ["ConfigError", "CaseConfig", "parse_config", "load_config",
           "serialize_config", "build_mesh", "build_case", "mode_table"]


class ConfigError(ValueError):
    """Carries every validation failure found in a config file."""

    def __init__(self, errors: List[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(errors))
        self.errors = errors


@dataclass
class CaseConfig:
    physics: Dict[str, Any]
    mesh: Dict[str, Any]
    bcs: Dict[str, Dict[str, Any]]
    solver: Dict[str, Any] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=dict)

    def normalized(self) -> Dict[str, Any]:
        return {"physics": dict(self.physics), "mesh": dict(self.mesh),
                "bcs": {k: dict(v) for k, v in self.bcs.items()},
                "solver": dict(self.solver), "output": dict(self.output)}


_GENERATORS = {"interval", "rect_tri", "box_tet", "bent_channel"}
_BC_KINDS = {"dirichlet", "noslip", "neumann", "parabolic_inflow"}


def parse_config(text: str) -> CaseConfig:
    raw = yaml.safe_load(text)
    errors: List[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a mapping"])
    for section in ("physics", "mesh", "bcs"):
        if section not in raw:
            errors.append(f"missing section {section!r}")
    if errors:
        raise ConfigError(errors)

    physics = dict(raw["physics"])
    kind = physics.get("kind")
    if kind not in ("ns", "scalar"):
        errors.append("physics.kind must be 'ns' or 'scalar'")
    if kind == "ns":
        for key in ("rho", "mu"):
            if key not in physics:
                errors.append(f"physics.{key} required for kind 'ns'")
    if kind == "scalar" and "kappa" not in physics:
        errors.append("physics.kappa required for kind 'scalar'")
    for key in ("omega", "n_modes"):
        if key not in physics:
            errors.append(f"physics.{key} is required")
    if physics.get("n_modes", 1) < 1:
        errors.append("physics.n_modes must be >= 1")

    mesh_block = dict(raw["mesh"])
    has_gen = "generator" in mesh_block
    has_path = "path" in mesh_block
    if has_gen == has_path:
        errors.append("mesh needs exactly one of 'generator' or 'path'")
    if has_gen and mesh_block["generator"] not in _GENERATORS:
        errors.append(f"unknown mesh generator {mesh_block['generator']!r}; "
                      f"choose from {sorted(_GENERATORS)}")

    bcs = {name: dict(v) for name, v in raw["bcs"].items()}
    for name, bc in bcs.items():
        kind_bc = bc.get("kind")
        if kind_bc not in _BC_KINDS:
            errors.append(f"bcs.{name}.kind must be one of {sorted(_BC_KINDS)}")
            continue
        if "group" not in bc and "groups" not in bc:
            errors.append(f"bcs.{name} needs 'group' or 'groups'")
        data_keys = [k for k in bc if k.endswith("_modes") or k.endswith("_samples")]
        if kind_bc == "noslip":
            if data_keys:
                errors.append(f"bcs.{name}: noslip takes no data")
        elif len(data_keys) != 1:
            errors.append(f"bcs.{name}: give exactly one of a *_modes table "
                          f"or *_samples list (got {data_keys})")

    if errors:
        raise ConfigError(errors)
    return CaseConfig(physics, mesh_block, bcs,
                      dict(raw.get("solver", {})), dict(raw.get("output", {})))


def load_config(path) -> CaseConfig:
    return parse_config(Path(path).read_text())


def serialize_config(config: CaseConfig) -> str:
    return yaml.safe_dump(config.normalized(), sort_keys=True)


def build_mesh(mesh_block: Dict[str, Any], base_dir: Path | None = None) -> Mesh:
    if "path" in mesh_block:
        path = Path(mesh_block["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_mesh(path)
    gen = mesh_block["generator"]
    if gen == "interval":
        return generate_interval(float(mesh_block["length"]),
                                 int(mesh_block["resolution"]))
    if gen == "rect_tri":
        return generate_rect_tri([float(v) for v in mesh_block["extents"]],
                                 [int(v) for v in mesh_block["resolution"]])
    if gen == "box_tet":
        return generate_box_tet([float(v) for v in mesh_block["extents"]],
                                [int(v) for v in mesh_block["resolution"]])
    if gen == "bent_channel":
        ext = [float(v) for v in mesh_block["extents"]]
        return generate_bent_channel_tet(
            ext[0], ext[1], ext[2], [int(v) for v in mesh_block["resolution"]],
            bend_angle=float(mesh_block.get("bend_angle", np.pi / 2)))
    raise ConfigError([f"unknown generator {gen!r}"])


def mode_table(entries, n_modes: int, what: str) -> np.ndarray:
    """(2N-1,) complex vector from a list of [re, im] rows for modes 0..N-1."""
    arr = np.asarray(entries, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] > n_modes or arr.shape[1] > 2:
        raise ConfigError([f"{what}: expected at most {n_modes} rows of [re, im]"])
    pos = np.zeros(n_modes, dtype=complex)
    pos[:arr.shape[0]] = arr[:, 0] + (1j * arr[:, 1] if arr.shape[1] == 2 else 0.0)
    return SpectralCoeffs.from_positive_modes(pos).values


def _bc_coeffs(bc: Dict[str, Any], key: str, n_modes: int, name: str):
    """Modes from a table or from time samples; returns (values, truncation)."""
    if f"{key}_modes" in bc:
        return mode_table(bc[f"{key}_modes"], n_modes, f"bcs.{name}"), None
    samples = np.asarray(bc[f"{key}_samples"], dtype=float)
    coeffs = fourier_coefficients(samples, n_modes)
    recon = np.zeros_like(samples)
    t = np.arange(samples.size) / samples.size
    n = np.arange(-n_modes + 1, n_modes)
    recon = (np.exp(2j * np.pi * np.outer(t, n)) @ coeffs.values).real
    scale = np.linalg.norm(samples)
    trunc = float(np.linalg.norm(samples - recon) / scale) if scale > 0 else 0.0
    return coeffs.values, trunc


def _groups_of(bc: Dict[str, Any]) -> List[str]:
    if "groups" in bc:
        return list(bc["groups"])
    return [bc["group"]]


def build_case(config: CaseConfig, mesh: Mesh):
    """Instantiate the scalar or flow case; returns (case, info dict).

    info carries the truncation error of sample-specified boundary data.
    """
    phys = config.physics
    n_modes = int(phys["n_modes"])
    m = n_coeffs(n_modes)
    errors: List[str] = []
    for name, bc in config.bcs.items():
        for g in _groups_of(bc):
            if g not in mesh.facet_groups:
                errors.append(f"bcs.{name}: facet group {g!r} not in mesh "
                              f"(available: {sorted(mesh.facet_groups)})")
    if errors:
        raise ConfigError(errors)

    info: Dict[str, Any] = {"truncation": {}}
    if phys["kind"] == "scalar":
        dirichlet = {}
        neumann = {}
        for name, bc in config.bcs.items():
            kind = bc["kind"]
            for g in _groups_of(bc):
                if kind in ("dirichlet", "noslip"):
                    if kind == "noslip":
                        dirichlet[g] = np.zeros(m, dtype=complex)
                    else:
                        vals, trunc = _bc_coeffs(bc, "phi", n_modes, name)
                        dirichlet[g] = vals
                        if trunc is not None:
                            info["truncation"][name] = trunc
                elif kind == "neumann":
                    vals, trunc = _bc_coeffs(bc, "flux", n_modes, name)
                    neumann[g] = vals
                    if trunc is not None:
                        info["truncation"][name] = trunc
                else:
                    raise ConfigError([f"bcs.{name}: kind {kind!r} not valid "
                                       "for scalar physics"])
        vel = mode_table(phys.get("velocity_modes", [[0.0, 0.0]]), n_modes,
                         "physics.velocity_modes")
        velocity = np.zeros((mesh.n_nodes, mesh.dim, m), dtype=complex)
        velocity[:, 0, :] = vel
        case = ScalarCase(
            kappa=float(phys["kappa"]), omega=float(phys["omega"]),
            n_modes=n_modes, velocity=velocity, dirichlet=dirichlet,
            neumann=neumann, c_i=phys.get("c_i"),
            backflow_beta=float(phys.get("backflow_beta", 0.0)),
            galerkin_only=bool(phys.get("galerkin_only", False)))
        return case, info

    dirichlet = {}
    walls = []
    neumann = {}
    for name, bc in config.bcs.items():
        kind = bc["kind"]
        for g in _groups_of(bc):
            if kind == "noslip":
                walls.append(g)
            elif kind == "neumann":
                vals, trunc = _bc_coeffs(bc, "h", n_modes, name)
                neumann[g] = vals
                if trunc is not None:
                    info["truncation"][name] = trunc
            elif kind == "parabolic_inflow":
                vals, trunc = _bc_coeffs(bc, "flow", n_modes, name)
                dirichlet[g] = parabolic_inflow(mesh, g, SpectralCoeffs(n_modes, vals))
                if trunc is not None:
                    info["truncation"][name] = trunc
            elif kind == "dirichlet":
                vals, trunc = _bc_coeffs(bc, "velocity", n_modes, name)
                arr = np.zeros((mesh.dim, m), dtype=complex)
                axis = int(bc.get("axis", 0))
                arr[axis] = vals
                dirichlet[g] = arr
                if trunc is not None:
                    info["truncation"][name] = trunc
    case = NSCase(rho=float(phys["rho"]), mu=float(phys["mu"]),
                  omega=float(phys["omega"]), n_modes=n_modes,
                  dirichlet=dirichlet, walls=walls, neumann=neumann,
                  c_i=phys.get("c_i"),
                  backflow_beta=float(phys.get("backflow_beta", 0.0)))
    return case, info


def build_solver_config(solver_block: Dict[str, Any]) -> SolverConfig:
    block = dict(solver_block)
    pseudo = block.get("pseudo_dt", "auto")
    if pseudo in ("auto", None):
        pseudo = None
    elif pseudo in ("inf", ".inf", "newton"):
        pseudo = np.inf
    else:
        pseudo = float(pseudo)
    return SolverConfig(
        eps_nr=float(block.get("eps_nr", 1e-3)),
        eps_ls=float(block.get("eps_ls", 0.05)),
        krylov_dim=int(block.get("krylov_dim", 100)),
        max_linear_iters=int(block.get("max_linear_iters", 10_000)),
        pseudo_dt=pseudo,
        max_steps=int(block.get("max_steps", 200)),
        c1=float(block.get("c1", 1.5)),
    )
