"""Time-spectral GLS solver for incompressible Navier-Stokes.

Unknowns per node are the velocity mode vectors u_i in C^(2N-1) per
direction and the pressure mode vector p.  The discrete residual contains
the Galerkin terms, Neumann boundary data, the least-squares penalty with
the momentum weight (-Omega N_A + A_j dN_A/dx_j) tau and the continuity
weight (1/rho) dN_A/dx_i tau, and the backflow boundary correction.

The tangent freezes the convolution matrices and tau at the current
state.  In production form the least-squares contributions to the
gradient/divergence blocks are dropped, which leaves them diagonal in the
mode index; the exact mode-coupled blocks can be requested for
verification.  Pseudo-time stepping augments the velocity diagonal block
with a mass term and performs one Newton update per step; the converged
solution is independent of the pseudo step size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from .linsolve import (
    BlockTangent,
    SolverConfig,
    block_jacobi_preconditioner,
    block_to_real,
    build_graph,
    from_real,
    gmres,
    pinned_operator,
    rhs_to_real,
)
from .mesh import Mesh, facet_quadrature, quadrature_rule, shape_values
from .scalar import LinearSolveError, default_c_i
from .spectral import (
    SpectralCoeffs,
    build_omega,
    convolution_dense,
    n_coeffs,
    negative_part_batch,
    symmetrize_modes,
    tau_from_modes,
)

__all__ = [
    "NSCase",
    "NSState",
    "NSResult",
    "NodalValues",
    "FlowReport",
    "FlowData",
    "SolverConfig",
    "assemble_ns_residual",
    "assemble_ns_tangent",
    "newton_step",
    "solve_ns",
    "residual_norm",
    "backflow_surface_matrix",
    "flow_report",
    "parabolic_inflow",
    "resolve_ns_dirichlet",
    "default_pseudo_dt",
]

_CHUNK = 2048


@dataclass(frozen=True)
class NodalValues:
    """Per-node boundary values, e.g. a scaled inflow profile."""

    nodes: np.ndarray   # (K,) node ids
    values: np.ndarray  # (K, dim, 2N-1) complex


DirichletSpec = Union[np.ndarray, Callable, NodalValues]


@dataclass
class NSCase:
    """Spectral Navier-Stokes problem definition.

    dirichlet maps facet groups to velocity data: a uniform (dim, 2N-1)
    mode array, a callable of node coordinates returning (n, dim, 2N-1),
    or precomputed NodalValues.  walls lists no-slip groups.  neumann maps
    groups to scalar mode vectors h (2N-1,) imposed as h n_i.
    """

    rho: float
    mu: float
    omega: float
    n_modes: int
    dirichlet: Dict[str, DirichletSpec] = field(default_factory=dict)
    walls: List[str] = field(default_factory=list)
    neumann: Dict[str, Union[np.ndarray, SpectralCoeffs]] = field(default_factory=dict)
    c_i: Optional[float] = None
    backflow_beta: float = 0.0

    def __post_init__(self):
        if self.rho <= 0.0 or self.mu <= 0.0:
            raise ValueError("rho and mu must be positive")
        if not 0.0 <= self.backflow_beta <= 1.0:
            raise ValueError("backflow_beta must lie in [0, 1]")

    def c_i_for(self, mesh: Mesh) -> float:
        return self.c_i if self.c_i is not None else default_c_i(mesh.elem_type)

    @property
    def nu(self) -> float:
        return self.mu / self.rho


@dataclass
class NSState:
    """Nodal spectral velocity and pressure fields."""

    velocity: np.ndarray  # (n_nodes, dim, 2N-1) complex
    pressure: np.ndarray  # (n_nodes, 2N-1) complex

    @classmethod
    def zeros(cls, n_nodes: int, dim: int, n_modes: int) -> "NSState":
        m = n_coeffs(n_modes)
        return cls(np.zeros((n_nodes, dim, m), dtype=complex),
                   np.zeros((n_nodes, m), dtype=complex))

    def copy(self) -> "NSState":
        return NSState(self.velocity.copy(), self.pressure.copy())

    def symmetrize(self) -> None:
        self.velocity[:] = 0.5 * (self.velocity + np.conj(self.velocity[..., ::-1]))
        self.pressure[:] = 0.5 * (self.pressure + np.conj(self.pressure[..., ::-1]))


@dataclass
class NSResult:
    state: NSState
    converged: bool
    residuals: List[float]
    steps: int
    linear_iters: List[int]


def _check_groups(case: NSCase, mesh: Mesh) -> None:
    for name in list(case.dirichlet) + list(case.walls) + list(case.neumann):
        if name not in mesh.facet_groups:
            raise ValueError(f"unknown facet group {name!r}")
    roles: Dict[str, str] = {}
    for kind, names in (("dirichlet", case.dirichlet), ("wall", case.walls),
                        ("neumann", case.neumann)):
        for name in names:
            if name in roles:
                raise ValueError(f"facet group {name!r} assigned to both "
                                 f"{roles[name]} and {kind}")
            roles[name] = kind


def resolve_ns_dirichlet(case: NSCase, mesh: Mesh):
    """Dirichlet node ids and (K, dim, 2N-1) values; walls override."""
    m = n_coeffs(case.n_modes)
    dim = mesh.dim
    values: Dict[int, np.ndarray] = {}

    def store(nodes, vals):
        for node, v in zip(nodes, vals):
            values[int(node)] = np.stack([symmetrize_modes(v[i]) for i in range(dim)])

    for name, data in case.dirichlet.items():
        if isinstance(data, NodalValues):
            store(data.nodes, np.asarray(data.values, dtype=complex))
            continue
        nodes = np.unique(mesh.facet_groups[name].nodes)
        if callable(data):
            vals = np.asarray(data(mesh.coords[nodes]), dtype=complex)
            if vals.shape != (nodes.size, dim, m):
                raise ValueError(f"dirichlet callable for {name!r} returned {vals.shape}")
        else:
            arr = np.asarray(data, dtype=complex)
            if arr.shape != (dim, m):
                raise ValueError(f"expected ({dim}, {m}) modes for group {name!r}")
            vals = np.tile(arr, (nodes.size, 1, 1))
        store(nodes, vals)
    for name in case.walls:
        nodes = np.unique(mesh.facet_groups[name].nodes)
        store(nodes, np.zeros((nodes.size, dim, m), dtype=complex))
    node_ids = np.array(sorted(values), dtype=int)
    vals = (np.array([values[i] for i in node_ids]) if node_ids.size
            else np.zeros((0, dim, m), dtype=complex))
    return node_ids, vals


def _neumann_modes(data, m: int) -> np.ndarray:
    if isinstance(data, SpectralCoeffs):
        data = data.values
    vals = np.asarray(data, dtype=complex)
    if vals.shape != (m,):
        raise ValueError(f"expected {m} Neumann modes, got shape {vals.shape}")
    return vals


def _facet_state_velocity(state: NSState, fq, q: int) -> np.ndarray:
    return np.einsum("a,faim->fim", fq.shape[q], state.velocity[fq.nodes])


def _assemble(case: NSCase, mesh: Mesh, state: NSState, *,
              need_residual: bool, need_tangent: bool,
              pseudo_dt: float = np.inf, exact_gd: bool = False,
              coeff_state: NSState | None = None):
    """Shared residual/tangent assembly.

    coeff_state supplies the velocity entering A_i, tau and the backflow
    operator (frozen coefficients); it defaults to state.
    """
    _check_groups(case, mesh)
    if coeff_state is None:
        coeff_state = state
    n, m = case.n_modes, n_coeffs(case.n_modes)
    dim = mesh.dim
    rho, mu = case.rho, case.mu
    c_i = case.c_i_for(mesh)
    ed = mesh.element_data()
    rule = quadrature_rule(mesh.elem_type)
    shp = shape_values(mesh.elem_type, rule.points)
    omega_mat = build_omega(n, case.omega)
    eye = np.eye(m)

    rows, cols, edge_of = build_graph(mesh.elements, mesh.n_nodes)
    n_edges = rows.shape[0]
    resid = np.zeros((mesh.n_nodes, dim + 1, m), dtype=complex) if need_residual else None
    if need_tangent:
        k_c = np.zeros((n_edges, m, m), dtype=complex)
        l_c = np.zeros((n_edges, m, m), dtype=complex)
        g_scal = np.zeros((n_edges, dim))
        d_scal = np.zeros((n_edges, dim))
        g_c = np.zeros((n_edges, dim, m, m), dtype=complex) if exact_gd else None
        d_c = np.zeros((n_edges, dim, m, m), dtype=complex) if exact_gd else None
    mass_coeff = 0.0 if not np.isfinite(pseudo_dt) else 1.5 * rho / pseudo_dt

    for start in range(0, mesh.n_elements, _CHUNK):
        sl = slice(start, min(start + _CHUNK, mesh.n_elements))
        elems = mesh.elements[sl]
        grads = ed.grads[sl]
        detj = ed.detj[sl]
        metric = ed.metric[sl]
        edges = edge_of[sl]
        nen = elems.shape[1]
        u_el = state.velocity[elems]                      # (E, nen, dim, M)
        p_el = state.pressure[elems]                      # (E, nen, M)
        uc_el = coeff_state.velocity[elems]
        grad_u = np.einsum("eaj,eaim->ejim", grads, u_el)  # d u_i / d x_j
        grad_p = np.einsum("eaj,eam->ejm", grads, p_el)
        div_u = np.einsum("eiim->em", grad_u)
        gab = np.einsum("eai,ebi->eab", grads, grads)

        for q in range(rule.n_points):
            w = rule.weights[q] * detj
            uc_q = np.einsum("a,eaim->eim", shp[q], uc_el)
            conv = convolution_dense(uc_q, n)              # (E, dim, M, M)
            tau = tau_from_modes(uc_q, metric, case.nu, c_i, n)
            a_dir = np.einsum("ead,edrc->earc", grads, conv)
            w_a = -shp[q][None, :, None, None] * omega_mat[None, None] + a_dir
            p_a = np.matmul(w_a, tau[:, None])             # (E, nen, M, M)

            if need_residual:
                u_q = np.einsum("a,eaim->eim", shp[q], u_el)
                p_q = np.einsum("a,eam->em", shp[q], p_el)
                conv_term = np.einsum("ejrc,ejic->eir", conv, grad_u)
                accel = np.einsum("rc,eic->eir", omega_mat, u_q)
                strong = rho * (accel + conv_term) + grad_p
                r_m = (rho * np.einsum("a,eir->eair", shp[q], accel + conv_term)
                       - np.einsum("eai,em->eaim", grads, p_q)
                       + mu * np.einsum("eaj,ejim->eaim", grads, grad_u)
                       + np.einsum("earc,eic->eair", p_a, strong))
                tau_r = np.einsum("erc,eic->eir", tau, strong)
                r_c = (np.einsum("a,em->eam", shp[q], div_u)
                       + np.einsum("eai,eir->ear", grads, tau_r) / rho)
                contrib = np.concatenate([r_m, r_c[:, :, None, :]], axis=2)
                np.add.at(resid, elems.ravel(),
                          (contrib * w[:, None, None, None]).reshape(-1, dim + 1, m))

            if need_tangent:
                t_b = shp[q][None, :, None, None] * omega_mat[None, None] + a_dir
                nn = np.outer(shp[q], shp[q])              # (nen, nen)
                k_el = (rho * np.einsum("ab,rc->abrc", nn, omega_mat)[None]
                        + rho * np.einsum("a,ebrc->eabrc", shp[q], a_dir)
                        + np.einsum("eab,rc->eabrc", mu * gab, eye)
                        + rho * np.matmul(p_a[:, :, None], t_b[:, None, :]))
                if mass_coeff:
                    k_el = k_el + mass_coeff * np.einsum("ab,rc->abrc", nn, eye)[None]
                np.add.at(k_c, edges.ravel(),
                          (k_el * w[:, None, None, None, None]).reshape(-1, m, m))
                l_el = np.einsum("eab,erc->eabrc", gab / rho, tau)
                np.add.at(l_c, edges.ravel(),
                          (l_el * w[:, None, None, None, None]).reshape(-1, m, m))
                g_el = -np.einsum("eai,b->eabi", grads, shp[q])
                d_el = np.einsum("a,ebj->eabj", shp[q], grads)
                np.add.at(g_scal, edges.ravel(),
                          (g_el * w[:, None, None, None]).reshape(-1, dim))
                np.add.at(d_scal, edges.ravel(),
                          (d_el * w[:, None, None, None]).reshape(-1, dim))
                if exact_gd:
                    g_ls = np.einsum("earc,ebi->eabirc", p_a, grads)
                    q_b = np.matmul(tau[:, None], t_b)
                    d_ls = np.einsum("eaj,ebrc->eabjrc", grads, q_b)
                    np.add.at(g_c, edges.ravel(),
                              (g_ls * w[:, None, None, None, None, None]).reshape(-1, dim, m, m))
                    np.add.at(d_c, edges.ravel(),
                              (d_ls * w[:, None, None, None, None, None]).reshape(-1, dim, m, m))

    if need_residual:
        for name, data in case.neumann.items():
            h_modes = _neumann_modes(data, m)
            fq = facet_quadrature(mesh, name)
            for q in range(fq.shape.shape[0]):
                r_el = -np.einsum("f,a,fi,r->fair", fq.weights[:, q], fq.shape[q],
                                  fq.normals, h_modes)
                pad = np.zeros(r_el.shape[:2] + (1, m), dtype=complex)
                np.add.at(resid, fq.nodes.ravel(),
                          np.concatenate([r_el, pad], axis=2).reshape(-1, dim + 1, m))

    if case.backflow_beta > 0.0 and case.neumann:
        _add_ns_backflow(case, mesh, state, coeff_state, rows, cols,
                         resid, k_c if need_tangent else None)

    tangent = None
    if need_tangent:
        n_half = case.n_modes
        g_diag = np.repeat(g_scal[:, :, None], n_half, axis=2).astype(complex)
        d_diag = np.repeat(d_scal[:, :, None], n_half, axis=2).astype(complex)
        tangent = BlockTangent(
            rows, cols, mesh.n_nodes, dim, n_half,
            k_real=block_to_real(k_c), l_real=block_to_real(l_c),
            g_diag=g_diag, d_diag=d_diag,
            g_full=block_to_real(g_c) + _diag_expand(g_scal, n_half) if exact_gd else None,
            d_full=block_to_real(d_c) + _diag_expand(d_scal, n_half) if exact_gd else None,
        )
    return resid, tangent


def _diag_expand(scal: np.ndarray, n_half: int) -> np.ndarray:
    out = np.zeros(scal.shape + (2 * n_half, 2 * n_half))
    idx = np.arange(2 * n_half)
    out[..., idx, idx] = scal[..., None]
    return out


def _add_ns_backflow(case, mesh, state, coeff_state, rows, cols, resid, k_c):
    n, m = case.n_modes, n_coeffs(case.n_modes)
    dim = mesh.dim
    keys = rows.astype(np.int64) * mesh.n_nodes + cols
    factor = 0.5 * case.rho * case.backflow_beta
    for name in case.neumann:
        fq = facet_quadrature(mesh, name)
        k = fq.nodes.shape[1]
        for q in range(fq.shape.shape[0]):
            uc = _facet_state_velocity(coeff_state, fq, q)
            un = np.einsum("fim,fi->fm", uc, fq.normals)
            an_neg = negative_part_batch(convolution_dense(un, n))
            if resid is not None:
                u_q = _facet_state_velocity(state, fq, q)
                term = np.einsum("frc,fic->fir", an_neg, u_q)
                r_el = -factor * np.einsum("f,a,fir->fair", fq.weights[:, q],
                                           fq.shape[q], term)
                pad = np.zeros(r_el.shape[:2] + (1, m), dtype=complex)
                np.add.at(resid, fq.nodes.ravel(),
                          np.concatenate([r_el, pad], axis=2).reshape(-1, dim + 1, m))
            if k_c is not None:
                k_el = -factor * np.einsum("f,a,b,frc->fabrc", fq.weights[:, q],
                                           fq.shape[q], fq.shape[q], an_neg)
                r = np.repeat(fq.nodes, k, axis=1).ravel()
                c = np.tile(fq.nodes, (1, k)).ravel()
                idx = np.searchsorted(keys, r.astype(np.int64) * mesh.n_nodes + c)
                np.add.at(k_c, idx, k_el.reshape(-1, m, m))


def assemble_ns_residual(case: NSCase, mesh: Mesh, state: NSState,
                         coeff_state: NSState | None = None) -> np.ndarray:
    """Momentum and continuity residuals, shape (n_nodes, dim+1, 2N-1).

    coeff_state optionally freezes A_i and tau at a different state (used
    to verify the frozen-coefficient tangent against finite differences).
    """
    resid, _ = _assemble(case, mesh, state, need_residual=True,
                         need_tangent=False, coeff_state=coeff_state)
    return resid


def assemble_ns_tangent(case: NSCase, mesh: Mesh, state: NSState,
                        pseudo_dt: float = np.inf,
                        exact_gd: bool = False) -> BlockTangent:
    """Frozen-coefficient tangent of the residual.

    With exact_gd=False (production) the least-squares contributions to
    the gradient/divergence blocks are dropped, leaving them diagonal in
    the mode index; exact_gd=True keeps them, making the tangent the exact
    derivative of the frozen-coefficient residual.  A finite pseudo_dt
    adds the mass term (N_A, 1.5 rho / pseudo_dt N_B) to the K block.
    """
    _, tangent = _assemble(case, mesh, state, need_residual=False,
                           need_tangent=True, pseudo_dt=pseudo_dt,
                           exact_gd=exact_gd)
    return tangent


def _pins_for(mesh: Mesh, n_modes: int, dir_nodes: np.ndarray) -> np.ndarray:
    pins = np.zeros((mesh.n_nodes, mesh.dim + 1, 2 * n_modes), dtype=bool)
    pins[:, :, 1] = True                 # steady imaginary slots
    pins[dir_nodes, :mesh.dim, :] = True  # prescribed velocity nodes
    return pins.ravel()


def residual_norm(residual: np.ndarray, dir_nodes: np.ndarray, dim: int) -> float:
    """Norm of the free real-mapped residual (Dirichlet momentum rows off)."""
    rr = rhs_to_real(residual).copy()
    rr[dir_nodes, :dim, :] = 0.0
    return float(np.linalg.norm(rr))


def default_pseudo_dt(case: NSCase, mesh: Mesh) -> float:
    """Pseudo step heuristic: the smallest of the case time scales.

    Roughly an order of magnitude above a physical-integration step, and
    small enough that the mass term still conditions the tangent.
    """
    ed = mesh.element_data()
    h_min = float(np.min(ed.h))
    scales = [h_min**2 * case.rho / case.mu]
    if case.omega > 0.0:
        scales.append(1.0 / case.omega)
    _, dir_vals = resolve_ns_dirichlet(case, mesh)
    if dir_vals.size:
        amp = np.abs(dir_vals).sum(axis=2)        # per node, per direction
        u_max = float(np.max(np.linalg.norm(amp, axis=1)))
        if u_max > 0.0:
            scales.append(h_min / u_max)
    return min(scales)


def newton_step(case: NSCase, mesh: Mesh, state: NSState, config: SolverConfig,
                pseudo_dt: float | None = None, skip_below: float = 0.0):
    """One linearized update y <- y - H^{-1} r at the current state.

    Returns (new_state, residual_norm_before, linear_matvecs).  The linear
    solve runs to eps_ls relative tolerance with block-Jacobi GMRES;
    Dirichlet increments are pinned to zero.  Stagnation of the linear
    solver raises LinearSolveError and leaves the state untouched.  If the
    residual norm is already at or below skip_below, no solve is run.
    """
    if pseudo_dt is None:
        pseudo_dt = config.pseudo_dt if config.pseudo_dt is not None \
            else default_pseudo_dt(case, mesh)
    dir_nodes, _ = resolve_ns_dirichlet(case, mesh)
    resid, tangent = _assemble(case, mesh, state, need_residual=True,
                               need_tangent=True, pseudo_dt=pseudo_dt)
    rnorm = residual_norm(resid, dir_nodes, mesh.dim)
    if rnorm <= skip_below:
        return state.copy(), rnorm, 0

    pins = _pins_for(mesh, case.n_modes, dir_nodes)
    rhs = -rhs_to_real(resid).ravel()
    rhs[pins] = 0.0
    op = pinned_operator(tangent.matvec, pins)
    precond = block_jacobi_preconditioner(tangent, pins)
    res = gmres(op, rhs, config.gmres_config(), precond=precond)
    if not res.converged and res.residuals[-1] >= res.residuals[0]:
        raise LinearSolveError("linear solver stagnated; step rejected",
                               res.matvecs, res.residuals[-1])
    delta = from_real(res.x.reshape(mesh.n_nodes, mesh.dim + 1, 2 * case.n_modes))
    new = state.copy()
    new.velocity += delta[:, :mesh.dim, :]
    new.pressure += delta[:, mesh.dim, :]
    new.velocity[dir_nodes] = state.velocity[dir_nodes]
    new.symmetrize()
    return new, rnorm, res.matvecs


def solve_ns(case: NSCase, mesh: Mesh, config: SolverConfig | None = None) -> NSResult:
    """Drive the spectral system to ||r|| <= eps_nr ||r0||.

    The state is initialized with the Dirichlet data on the boundary and
    zero elsewhere.  With a finite pseudo step, exactly one Newton update
    is performed per pseudo-time step; pseudo_dt=inf recovers plain
    Newton-Raphson.  If max_steps is exhausted the partial state is
    returned flagged as non-converged.
    """
    if config is None:
        config = SolverConfig()
    _check_groups(case, mesh)
    dir_nodes, dir_vals = resolve_ns_dirichlet(case, mesh)
    state = NSState.zeros(mesh.n_nodes, mesh.dim, case.n_modes)
    state.velocity[dir_nodes] = dir_vals
    pseudo_dt = config.pseudo_dt if config.pseudo_dt is not None \
        else default_pseudo_dt(case, mesh)

    residuals: List[float] = []
    lin_iters: List[int] = []
    r0 = None
    for step in range(config.max_steps):
        skip = config.eps_nr * r0 if r0 is not None else 0.0
        try:
            new_state, rnorm, mv = newton_step(case, mesh, state, config,
                                               pseudo_dt, skip_below=skip)
        except LinearSolveError as err:
            warnings.warn(str(err))
            return NSResult(state, False, residuals, step, lin_iters)
        residuals.append(rnorm)
        if r0 is None:
            r0 = rnorm
        if rnorm <= config.eps_nr * r0:
            return NSResult(state, True, residuals, step, lin_iters)
        state = new_state
        lin_iters.append(mv)
    return NSResult(state, False, residuals, config.max_steps, lin_iters)


def backflow_surface_matrix(case: NSCase, mesh: Mesh, state: NSState,
                            facet) -> np.ndarray:
    """Per-facet boundary operator (rho beta / 2) |A_n|_- at the centroid.

    Zero whenever the normal convolution matrix is positive semi-definite
    (pure outflow); otherwise negative semi-definite.
    """
    group, idx = facet
    if group not in case.neumann:
        raise ValueError(f"facet group {group!r} carries no Neumann condition")
    fq = facet_quadrature(mesh, group)
    u_mean = state.velocity[fq.nodes[idx]].mean(axis=0)   # (dim, M)
    un = np.einsum("im,i->m", u_mean, fq.normals[idx])
    an_neg = negative_part_batch(convolution_dense(un[None], case.n_modes))[0]
    return 0.5 * case.rho * case.backflow_beta * an_neg


@dataclass(frozen=True)
class FlowData:
    flow: SpectralCoeffs          # volumetric rate through the group, outward
    pressure: SpectralCoeffs      # area-averaged pressure
    area: float


FlowReport = Dict[str, FlowData]


def flow_report(state: NSState, mesh: Mesh, groups) -> FlowReport:
    """Outward volumetric flow and mean pressure modes per facet group."""
    n = (state.pressure.shape[-1] + 1) // 2
    out: FlowReport = {}
    for name in groups:
        fq = facet_quadrature(mesh, name)
        q_modes = np.zeros(n_coeffs(n), dtype=complex)
        p_modes = np.zeros(n_coeffs(n), dtype=complex)
        for q in range(fq.shape.shape[0]):
            u_q = _facet_state_velocity(state, fq, q)
            p_q = np.einsum("a,fam->fm", fq.shape[q], state.pressure[fq.nodes])
            q_modes += np.einsum("f,fim,fi->m", fq.weights[:, q], u_q, fq.normals)
            p_modes += np.einsum("f,fm->m", fq.weights[:, q], p_q)
        area = float(fq.areas.sum())
        out[name] = FlowData(SpectralCoeffs(n, symmetrize_modes(q_modes)),
                             SpectralCoeffs(n, symmetrize_modes(p_modes / area)),
                             area)
    return out


def parabolic_inflow(mesh: Mesh, group: str, flow: SpectralCoeffs,
                     planar_tol: float = 1e-6) -> NodalValues:
    """Dirichlet data with a parabolic profile carrying the given flow.

    The profile vanishes on the rim of the facet group and is scaled per
    mode so the integrated flux into the domain equals the flow modes.
    Works for convex planar inlets; a warning is issued if the group
    deviates from planarity.
    """
    fq = facet_quadrature(mesh, group)
    n_mean = fq.normals.mean(axis=0)
    n_mean /= np.linalg.norm(n_mean)
    if np.max(np.linalg.norm(fq.normals - n_mean, axis=1)) > planar_tol:
        warnings.warn(f"facet group {group!r} is not planar; "
                      "parabolic profile is approximate")
    nodes = np.unique(fq.nodes)
    coords = mesh.coords[nodes]
    centroid = np.average(fq.points.reshape(-1, mesh.dim), axis=0,
                          weights=fq.weights.ravel())
    k = fq.nodes.shape[1]
    if k == 1:
        raise ValueError("parabolic profile needs a 2D or 3D inlet")

    def in_plane(x):
        rel = x - centroid
        rel = rel - np.outer(rel @ n_mean, n_mean)
        return rel

    rel_nodes = in_plane(coords)
    if mesh.dim == 2:
        # line-segment inlet: parabola over the half-length
        rmax = np.max(np.linalg.norm(rel_nodes, axis=1))
        profile = np.maximum(0.0, 1.0 - (np.linalg.norm(rel_nodes, axis=1) / rmax) ** 2)
    else:
        # rim = edges of the facet patch that appear exactly once
        pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
        edges = np.concatenate([fq.nodes[:, list(p)] for p in pairs])
        key = np.sort(edges, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        rim_nodes = np.unique(edges[counts[inv] == 1])
        # rim radius as a function of angle around the centroid
        e1 = rel_nodes[np.argmax(np.linalg.norm(rel_nodes, axis=1))]
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(n_mean, e1)
        rim_rel = in_plane(mesh.coords[rim_nodes])
        rim_theta = np.arctan2(rim_rel @ e2, rim_rel @ e1)
        rim_r = np.linalg.norm(rim_rel, axis=1)
        order = np.argsort(rim_theta)
        rim_theta = rim_theta[order]
        rim_r = rim_r[order]
        theta_ext = np.concatenate([rim_theta - 2 * np.pi, rim_theta,
                                    rim_theta + 2 * np.pi])
        r_ext = np.tile(rim_r, 3)
        theta = np.arctan2(rel_nodes @ e2, rel_nodes @ e1)
        r_rim = np.interp(theta, theta_ext, r_ext)
        r = np.linalg.norm(rel_nodes, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(r_rim > 0, r / r_rim, 0.0)
        profile = np.maximum(0.0, 1.0 - ratio**2)

    # flux of the raw profile through the group (inward direction -n)
    node_pos = {int(nd): i for i, nd in enumerate(nodes)}
    prof_facets = profile[[node_pos[int(nd)] for nd in fq.nodes.ravel()]]
    prof_facets = prof_facets.reshape(fq.nodes.shape)
    raw_flux = 0.0
    for q in range(fq.shape.shape[0]):
        raw_flux += np.einsum("f,a,fa->", fq.weights[:, q], fq.shape[q], prof_facets)
    if raw_flux <= 0.0:
        raise ValueError(f"degenerate inflow profile on group {group!r}")

    m = n_coeffs(flow.n_modes)
    values = np.einsum("k,i,m->kim", profile / raw_flux, -n_mean, flow.values)
    return NodalValues(nodes, values.astype(complex))
