"""Steady channel flow: develop a Poiseuille profile and report flows.

A parabolic inflow is prescribed on the left edge of a rectangle with
no-slip walls and a traction-free outlet.  One steady spectral solve
(a single mode at zero frequency) recovers the parabolic profile; the
flow report confirms mass conservation between inlet and outlet.
"""

import numpy as np

from tsfem.linsolve import SolverConfig
from tsfem.mesh import generate_rect_tri
from tsfem.navier_stokes import NSCase, flow_report, solve_ns

height, u_max = 1.0, 1.0
mesh = generate_rect_tri((1.0, height), (6, 32))


def inflow(coords):
    vals = np.zeros((coords.shape[0], 2, 1), dtype=complex)
    y = coords[:, 1]
    vals[:, 0, 0] = u_max * 4 * y * (height - y) / height**2
    return vals


case = NSCase(rho=1.0, mu=0.1, omega=0.0, n_modes=1,
              dirichlet={"xmin": inflow}, walls=["ymin", "ymax"],
              neumann={"xmax": np.zeros(1, dtype=complex)})
config = SolverConfig(eps_nr=1e-7, eps_ls=1e-5, pseudo_dt=np.inf, max_steps=40)
result = solve_ns(case, mesh, config)
print(f"converged in {result.steps} Newton steps; residuals:")
print("  " + " ".join(f"{r:.1e}" for r in result.residuals))

sel = np.isclose(mesh.coords[:, 1], 0.5) & (mesh.coords[:, 0] > 0.25)
u_center = result.state.velocity[sel, 0, 0].real
print(f"centerline velocity: {u_center.mean():.4f} (exact {u_max})")

report = flow_report(result.state, mesh, ["xmin", "xmax"])
q_in = report["xmin"].flow.mode(0).real
q_out = report["xmax"].flow.mode(0).real
print(f"flow in {-q_in:.5f}, out {q_out:.5f}; exact {2 * u_max * height / 3:.5f}")
print(f"mass defect: {abs(q_in + q_out) / abs(q_out):.2e}")
