"""Conventional time-domain SUPG/PSPG Navier-Stokes reference solver.

Marches the incompressible equations with the second-order implicit
generalized-alpha method and serves as the cross-validation reference for
the spectral solver.  The stabilization parameter is the scalar

    tau = [w_hat^2 + u_i G_ij u_j + C_I nu^2 G_ij G_ij]^(-1/2)

per quadrature point, where w_hat = ||du/dt|| / ||u|| is a global
acceleration frequency; this keeps the method consistent in dt while
controlling the pressure-stabilization term at small time steps.
Convective velocity and tau are frozen within the Newton iterations of a
time step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .linsolve import (
    BlockMatrix,
    SolverConfig,
    block_jacobi_preconditioner,
    build_graph,
    gmres,
    pinned_operator,
)
from .mesh import Mesh, facet_quadrature, quadrature_rule, shape_values
from .scalar import default_c_i

__all__ = [
    "TimeCase",
    "TimeState",
    "GenAlphaConfig",
    "TimeResult",
    "time_tau",
    "omega_hat",
    "generalized_alpha_step",
    "run_time_simulation",
]

_CHUNK = 4096


@dataclass(frozen=True)
class GenAlphaConfig:
    """Generalized-alpha parameters from the spectral radius rho_inf."""

    rho_inf: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.rho_inf <= 1.0:
            raise ValueError("rho_inf must lie in [0, 1]")

    @property
    def alpha_m(self) -> float:
        return 0.5 * (3.0 - self.rho_inf) / (1.0 + self.rho_inf)

    @property
    def alpha_f(self) -> float:
        return 1.0 / (1.0 + self.rho_inf)

    @property
    def gamma(self) -> float:
        return 0.5 + self.alpha_m - self.alpha_f


@dataclass
class TimeCase:
    """Time-domain problem with T-periodic boundary data.

    dirichlet maps facet groups to callables (coords, t) -> (n, dim)
    velocities; neumann maps groups to callables t -> scalar h imposed as
    h n_i.  The boundary data must be periodic with the given period.
    """

    rho: float
    mu: float
    period: float
    n_cycles: int
    dt: float
    dirichlet: Dict[str, Callable] = field(default_factory=dict)
    walls: List[str] = field(default_factory=list)
    neumann: Dict[str, Callable] = field(default_factory=dict)
    c_i: Optional[float] = None

    def __post_init__(self):
        if self.rho <= 0 or self.mu <= 0:
            raise ValueError("rho and mu must be positive")
        if self.dt <= 0 or self.period <= 0:
            raise ValueError("dt and period must be positive")

    def c_i_for(self, mesh: Mesh) -> float:
        return self.c_i if self.c_i is not None else default_c_i(mesh.elem_type)

    @property
    def nu(self) -> float:
        return self.mu / self.rho


@dataclass
class TimeState:
    velocity: np.ndarray  # (n_nodes, dim)
    accel: np.ndarray     # (n_nodes, dim)
    pressure: np.ndarray  # (n_nodes,)
    t: float

    @classmethod
    def zeros(cls, n_nodes: int, dim: int, t: float = 0.0) -> "TimeState":
        return cls(np.zeros((n_nodes, dim)), np.zeros((n_nodes, dim)),
                   np.zeros(n_nodes), t)

    def copy(self) -> "TimeState":
        return TimeState(self.velocity.copy(), self.accel.copy(),
                         self.pressure.copy(), self.t)


def time_tau(u_gauss: np.ndarray, omega_hat_val: float, metric: np.ndarray,
             nu: float, c_i: float) -> np.ndarray:
    """Scalar stabilization parameter per quadrature point (batched)."""
    u_gauss = np.asarray(u_gauss, dtype=float)
    metric = np.asarray(metric, dtype=float)
    ugu = np.einsum("...i,...ij,...j->...", u_gauss, metric, u_gauss)
    gg = np.einsum("...ij,...ij->...", metric, metric)
    arg = omega_hat_val**2 + ugu + c_i * nu**2 * gg
    if np.any(arg <= 0.0):
        raise ValueError("stabilization argument vanished (zero velocity, "
                         "frequency and diffusivity)")
    return arg**-0.5


def omega_hat(velocity: np.ndarray, accel: np.ndarray, mesh: Mesh) -> float:
    """Global frequency estimate ||du/dt||_Omega / ||u||_Omega (0 if u = 0)."""
    rule = quadrature_rule(mesh.elem_type)
    shp = shape_values(mesh.elem_type, rule.points)
    ed = mesh.element_data()
    u_el = np.asarray(velocity)[mesh.elements]
    a_el = np.asarray(accel)[mesh.elements]
    nrm_u = 0.0
    nrm_a = 0.0
    for q in range(rule.n_points):
        w = rule.weights[q] * ed.detj
        uq = np.einsum("a,eai->ei", shp[q], u_el)
        aq = np.einsum("a,eai->ei", shp[q], a_el)
        nrm_u += np.einsum("e,ei,ei->", w, uq, uq)
        nrm_a += np.einsum("e,ei,ei->", w, aq, aq)
    if nrm_u == 0.0:
        return 0.0
    return float(np.sqrt(nrm_a / nrm_u))


def _resolve_time_dirichlet(case: TimeCase, mesh: Mesh, t: float):
    values: Dict[int, np.ndarray] = {}
    for name, data in case.dirichlet.items():
        nodes = np.unique(mesh.facet_groups[name].nodes)
        vals = np.asarray(data(mesh.coords[nodes], t), dtype=float)
        if vals.shape != (nodes.size, mesh.dim):
            raise ValueError(f"dirichlet callable for {name!r} returned {vals.shape}")
        for node, v in zip(nodes, vals):
            values[int(node)] = v
    for name in case.walls:
        for node in np.unique(mesh.facet_groups[name].nodes):
            values[int(node)] = np.zeros(mesh.dim)
    node_ids = np.array(sorted(values), dtype=int)
    vals = (np.array([values[i] for i in node_ids]) if node_ids.size
            else np.zeros((0, mesh.dim)))
    return node_ids, vals


def _assemble_time(case: TimeCase, mesh: Mesh, u_af, udot_am, pres, t_af,
                   what: float, *, need_tangent: bool,
                   alpha_m: float, fac: float):
    """SUPG/PSPG residual (and frozen-coefficient tangent) at the alpha state."""
    dim = mesh.dim
    rho, mu, nu = case.rho, case.mu, case.nu
    c_i = case.c_i_for(mesh)
    ed = mesh.element_data()
    rule = quadrature_rule(mesh.elem_type)
    shp = shape_values(mesh.elem_type, rule.points)
    rows, cols, edge_of = build_graph(mesh.elements, mesh.n_nodes)
    resid = np.zeros((mesh.n_nodes, dim + 1))
    blocks = np.zeros((rows.shape[0], dim + 1, dim + 1)) if need_tangent else None

    for start in range(0, mesh.n_elements, _CHUNK):
        sl = slice(start, min(start + _CHUNK, mesh.n_elements))
        elems = mesh.elements[sl]
        grads = ed.grads[sl]
        detj = ed.detj[sl]
        metric = ed.metric[sl]
        edges = edge_of[sl]
        u_el = u_af[elems]
        a_el = udot_am[elems]
        p_el = pres[elems]
        grad_u = np.einsum("eaj,eai->eji", grads, u_el)   # d u_i / d x_j
        grad_p = np.einsum("eaj,ea->ej", grads, p_el)
        div_u = np.einsum("eii->e", grad_u)
        gab = np.einsum("eai,ebi->eab", grads, grads)

        for q in range(rule.n_points):
            w = rule.weights[q] * detj
            uq = np.einsum("a,eai->ei", shp[q], u_el)
            aq = np.einsum("a,eai->ei", shp[q], a_el)
            pq = np.einsum("a,ea->e", shp[q], p_el)
            tau = time_tau(uq, what, metric, nu, c_i)
            adv_a = np.einsum("ej,eaj->ea", uq, grads)    # u . grad N_A
            conv = np.einsum("ej,eji->ei", uq, grad_u)
            strong = rho * (aq + conv) + grad_p
            r_m = (rho * np.einsum("a,ei->eai", shp[q], aq + conv)
                   - np.einsum("eai,e->eai", grads, pq)
                   + mu * np.einsum("eaj,eji->eai", grads, grad_u)
                   + np.einsum("ea,e,ei->eai", adv_a, tau, strong))
            r_c = (np.einsum("a,e->ea", shp[q], div_u)
                   + np.einsum("eai,e,ei->ea", grads, tau, strong) / rho)
            contrib = np.concatenate([r_m, r_c[:, :, None]], axis=2) \
                .transpose(0, 1, 2) * w[:, None, None]
            np.add.at(resid, elems.ravel(), contrib.reshape(-1, dim + 1))

            if need_tangent:
                nn = np.outer(shp[q], shp[q])
                adv_b = adv_a
                k_scal = (rho * alpha_m * nn[None]
                          + fac * (rho * np.einsum("a,eb->eab", shp[q], adv_b)
                                   + mu * gab)
                          + rho * np.einsum("ea,e,eb->eab", adv_a, tau,
                                            alpha_m * shp[q][None, :] + fac * adv_b))
                g_blk = (-np.einsum("eai,b->eabi", grads, shp[q])
                         + np.einsum("ea,e,ebi->eabi", adv_a, tau, grads))
                d_blk = (fac * np.einsum("a,ebj->eabj", shp[q], grads)
                         + np.einsum("eaj,e,eb->eabj", grads, tau,
                                     alpha_m * shp[q][None, :] + fac * adv_b))
                l_blk = np.einsum("eab,e->eab", gab, tau) / rho
                blk = np.zeros(k_scal.shape[:3] + (dim + 1, dim + 1))
                for i in range(dim):
                    blk[..., i, i] = k_scal
                    blk[..., i, dim] = g_blk[..., i]
                    blk[..., dim, i] = d_blk[..., i]
                blk[..., dim, dim] = l_blk
                np.add.at(blocks, edges.ravel(),
                          (blk * w[:, None, None, None, None]).reshape(-1, dim + 1, dim + 1))

    for name, data in case.neumann.items():
        h_val = float(data(t_af))
        fq = facet_quadrature(mesh, name)
        for q in range(fq.shape.shape[0]):
            r_el = -h_val * np.einsum("f,a,fi->fai", fq.weights[:, q], fq.shape[q],
                                      fq.normals)
            pad = np.zeros(r_el.shape[:2] + (1,))
            np.add.at(resid, fq.nodes.ravel(),
                      np.concatenate([r_el, pad], axis=2).reshape(-1, dim + 1))

    tangent = BlockMatrix(rows, cols, blocks, mesh.n_nodes) if need_tangent else None
    return resid, tangent


def _pins_for(mesh: Mesh, dir_nodes: np.ndarray) -> np.ndarray:
    pins = np.zeros((mesh.n_nodes, mesh.dim + 1), dtype=bool)
    pins[dir_nodes, :mesh.dim] = True
    return pins.ravel()


def generalized_alpha_step(case: TimeCase, mesh: Mesh, state: TimeState,
                           config: SolverConfig | None = None,
                           gen_alpha: GenAlphaConfig | None = None,
                           max_newton: int = 10,
                           dirichlet_scale: float = 1.0):
    """Advance one implicit step; returns (new_state, converged, n_newton).

    Newton sub-iterations (at most max_newton) reduce the residual to
    eps_nr relative to its value at the start of the step.  The Dirichlet
    velocity is imposed strongly at t_{n+1} with a rate-consistent
    boundary acceleration; dirichlet_scale ramps the data during start-up.
    """
    if config is None:
        config = SolverConfig(eps_ls=0.05)
    if gen_alpha is None:
        gen_alpha = GenAlphaConfig()
    am, af, gamma = gen_alpha.alpha_m, gen_alpha.alpha_f, gen_alpha.gamma
    dt = case.dt
    t_new = state.t + dt
    dim = mesh.dim

    dir_nodes, dir_vals = _resolve_time_dirichlet(case, mesh, t_new)
    dir_vals = dirichlet_scale * dir_vals
    pins = _pins_for(mesh, dir_nodes)

    # predictor: constant velocity, consistent boundary acceleration
    accel = (gamma - 1.0) / gamma * state.accel
    vel_new = state.velocity + dt * ((1 - gamma) * state.accel + gamma * accel)
    pres = state.pressure.copy()
    if dir_nodes.size:
        accel[dir_nodes] = (state.accel[dir_nodes]
                            + (dir_vals - state.velocity[dir_nodes]
                               - dt * state.accel[dir_nodes]) / (gamma * dt))
        vel_new[dir_nodes] = dir_vals

    r0 = None
    converged = False
    iters = 0
    for it in range(max_newton):
        iters = it + 1
        u_af = state.velocity + af * (vel_new - state.velocity)
        udot_am = state.accel + am * (accel - state.accel)
        what = omega_hat(u_af, udot_am, mesh)
        t_af = state.t + af * dt
        resid, tangent = _assemble_time(case, mesh, u_af, udot_am, pres, t_af,
                                        what, need_tangent=True,
                                        alpha_m=am, fac=af * gamma * dt)
        rr = resid.copy()
        rr[dir_nodes, :dim] = 0.0
        rnorm = float(np.linalg.norm(rr))
        if r0 is None:
            r0 = rnorm
        if rnorm <= config.eps_nr * r0 or r0 == 0.0:
            converged = True
            break
        rhs = -rr.ravel()
        rhs[pins] = 0.0
        op = pinned_operator(tangent.matvec, pins)
        precond = block_jacobi_preconditioner(tangent, pins)
        res = gmres(op, rhs, config.gmres_config(), precond=precond)
        delta = res.x.reshape(mesh.n_nodes, dim + 1)
        accel = accel + delta[:, :dim]
        pres = pres + delta[:, dim]
        vel_new = state.velocity + dt * ((1 - gamma) * state.accel + gamma * accel)
        if dir_nodes.size:
            vel_new[dir_nodes] = dir_vals
    else:
        converged = False

    new = TimeState(vel_new, accel, pres, t_new)
    return new, converged, iters


@dataclass
class TimeResult:
    times: np.ndarray
    flow: Dict[str, np.ndarray]       # outward flow trace per group
    pressure: Dict[str, np.ndarray]   # area-averaged pressure trace
    cycle_change: List[float]         # L2 change of flow traces between cycles
    last_cycle_times: np.ndarray
    last_cycle_states: List[TimeState]
    newton_failures: int


def _flow_trace(state: TimeState, mesh: Mesh, groups):
    out_q = {}
    out_p = {}
    for name in groups:
        fq = facet_quadrature(mesh, name)
        qsum = 0.0
        psum = 0.0
        for q in range(fq.shape.shape[0]):
            uq = np.einsum("a,fai->fi", fq.shape[q], state.velocity[fq.nodes])
            pq = fq.shape[q] @ state.pressure[fq.nodes].T
            qsum += np.einsum("f,fi,fi->", fq.weights[:, q], uq, fq.normals)
            psum += fq.weights[:, q] @ pq
        out_q[name] = qsum
        out_p[name] = psum / fq.areas.sum()
    return out_q, out_p


def run_time_simulation(case: TimeCase, mesh: Mesh,
                        config: SolverConfig | None = None,
                        gen_alpha: GenAlphaConfig | None = None,
                        report_groups=None, ramp_steps: int = 10,
                        keep_last_cycle: bool = True) -> TimeResult:
    """March n_cycles periods and report cycle-resolved outlet traces.

    The state starts from rest with the Dirichlet data ramped over the
    first ramp_steps steps to avoid an impulsive start; the transient is
    discarded through cycle-to-cycle convergence, reported as the relative
    L2 change of the flow traces between consecutive cycles.
    """
    if case.n_cycles < 2:
        raise ValueError("need at least two cycles to assess convergence")
    if config is None:
        config = SolverConfig(eps_ls=0.05)
    steps_per_cycle = int(round(case.period / case.dt))
    if abs(steps_per_cycle * case.dt - case.period) > 1e-10 * case.period:
        raise ValueError("dt must divide the period")
    if report_groups is None:
        report_groups = list(case.neumann)

    state = TimeState.zeros(mesh.n_nodes, mesh.dim)
    times = []
    traces_q = {g: [] for g in report_groups}
    traces_p = {g: [] for g in report_groups}
    failures = 0
    last_states: List[TimeState] = []
    last_times: List[float] = []
    total = case.n_cycles * steps_per_cycle
    for step in range(total):
        scale = min(1.0, (step + 1) / ramp_steps) if ramp_steps else 1.0
        state, ok, _ = generalized_alpha_step(case, mesh, state, config,
                                              gen_alpha, dirichlet_scale=scale)
        if not ok:
            failures += 1
        qs, ps = _flow_trace(state, mesh, report_groups)
        times.append(state.t)
        for g in report_groups:
            traces_q[g].append(qs[g])
            traces_p[g].append(ps[g])
        if keep_last_cycle and step >= total - steps_per_cycle:
            last_states.append(state.copy())
            last_times.append(state.t)

    cycle_change = []
    for c in range(1, case.n_cycles):
        num = 0.0
        den = 0.0
        for g in report_groups:
            arr = np.asarray(traces_q[g])
            prev = arr[(c - 1) * steps_per_cycle:c * steps_per_cycle]
            curr = arr[c * steps_per_cycle:(c + 1) * steps_per_cycle]
            num += np.sum((curr - prev) ** 2)
            den += np.sum(curr**2)
        cycle_change.append(float(np.sqrt(num / den)) if den > 0 else 0.0)

    return TimeResult(np.asarray(times),
                      {g: np.asarray(v) for g, v in traces_q.items()},
                      {g: np.asarray(v) for g, v in traces_p.items()},
                      cycle_change, np.asarray(last_times), last_states, failures)
