"""Pulsatile channel flow versus the closed-form oscillatory profiles.

The channel is driven purely by pressure-mode data on the open ends, so
each velocity mode satisfies a one-dimensional boundary-layer equation
with a known solution.  At Womersley number 10 the oscillatory modes
form wall layers much thinner than the channel; the spectral solve
captures them on a mesh that keeps the element Womersley number below 1.
"""

import numpy as np

from tsfem.linsolve import SolverConfig
from tsfem.mesh import generate_rect_tri
from tsfem.navier_stokes import NSCase, solve_ns
from tsfem.spectral import SpectralCoeffs, n_coeffs
from tsfem.verification import diagnostics, l2_error, oscillatory_channel_exact

rho, mu, b = 1.0, 0.01, 1.0
womersley = 10.0
omega = womersley**2 * mu / (rho * b**2)
n_modes = 3
m = n_coeffs(n_modes)
length = 0.2
grad = np.array([-0.002, 0.00067 + 0.00033j, 0.00033 - 0.00017j])

mesh = generate_rect_tri((length, 2 * b), (4, 80))
h_in = SpectralCoeffs.from_positive_modes(length * grad).values
case = NSCase(rho=rho, mu=mu, omega=omega, n_modes=n_modes,
              dirichlet={}, walls=["ymin", "ymax"],
              neumann={"xmin": h_in, "xmax": np.zeros(m, dtype=complex)})
beta = diagnostics(case, mesh, velocity=np.zeros((mesh.n_nodes, 2, m), complex)).beta
print(f"Womersley number {womersley}, element Womersley number {beta:.2f}")

config = SolverConfig(eps_nr=1e-5, eps_ls=1e-4, krylov_dim=200,
                      max_linear_iters=30_000, pseudo_dt=np.inf, max_steps=30)
result = solve_ns(case, mesh, config)
print(f"converged: {result.converged} in {result.steps} steps")

exact = oscillatory_channel_exact(grad, rho, mu, b, n_modes, omega)
print("\nper-mode relative L2 error of the axial velocity:")
for mode in range(n_modes):
    def only(vals, mo=mode):
        keep = np.zeros_like(vals)
        keep[:, n_modes - 1 + mo] = vals[:, n_modes - 1 + mo]
        if mo:
            keep[:, n_modes - 1 - mo] = vals[:, n_modes - 1 - mo]
        return keep

    err = l2_error(only(result.state.velocity[:, 0, :]),
                   lambda p, mo=mode: only(exact(p[:, 1] - b), mo), mesh)
    ref = l2_error(np.zeros((mesh.n_nodes, m), complex),
                   lambda p, mo=mode: only(exact(p[:, 1] - b), mo), mesh)
    print(f"  mode {mode}: {err / ref:.3%}")

# print the mode-1 profile along a vertical line for a quick look
x_col = np.isclose(mesh.coords[:, 0], 0.0)
y = mesh.coords[x_col, 1]
order = np.argsort(y)
num = result.state.velocity[x_col, 0, n_modes][order]
ref = exact(y[order] - b)[:, n_modes]
print("\n  y       |u1| computed   |u1| exact")
for i in range(0, len(y), 8):
    print(f"  {y[order][i]:5.2f}   {abs(num[i]):.5f}       {abs(ref[i]):.5f}")
