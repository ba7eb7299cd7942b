"""Time-spectral Galerkin/least-squares finite elements for periodic flow.

Subpackages:
  spectral      Fourier-mode arithmetic, convolution and stabilization matrices
  mesh          simplex meshes, generators, shape functions, quadrature
  linsolve      real-mapped block systems, GMRES, preconditioning
  scalar        spectral convection-diffusion solver
  navier_stokes spectral incompressible Navier-Stokes solver
  time_domain   conventional time-domain reference solver
  verification  analytic oracles, error norms, diagnostics
  config, cli   case configuration and the batch runner
"""

from .spectral import (
    SpectralCoeffs,
    ConvolutionMatrix,
    fourier_coefficients,
    evaluate_in_time,
    build_convolution,
    build_omega,
    hermitian_eig,
    matrix_inv_sqrt,
    matrix_negative_part,
    compute_tau,
)
from .mesh import (
    Mesh,
    generate_interval,
    generate_rect_tri,
    generate_box_tet,
    generate_bent_channel_tet,
    load_mesh,
    save_mesh,
)
from .linsolve import GmresConfig, SolverConfig, gmres, block_jacobi_preconditioner

__version__ = "0.1.0"
