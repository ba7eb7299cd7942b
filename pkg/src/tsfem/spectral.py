"""Fourier-mode arithmetic for time-periodic fields.

A real T-periodic signal f(t) is represented by the truncated series

    f(t) = sum_{|n| < N} f_n exp(i n w t),        w = 2*pi/T,

with conjugate symmetry f_{-n} = conj(f_n), so only the N modes
n = 0..N-1 are independent.  Coefficient vectors are stored densely with
length M = 2N-1 and index order n = -N+1, ..., 0, ..., N-1.

Multiplication of two such series maps to a Hermitian Toeplitz
convolution matrix that is band-restricted to |m - n| < N, which keeps
products inside the resolved spectrum (no aliasing).  The stabilization
matrix for the solvers is an inverse matrix square root of a Hermitian
positive-definite combination of convolution matrices and the element
metric tensor; it is evaluated through a dense Hermitian eigensolve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "SpectralCoeffs",
    "ConvolutionMatrix",
    "EigenDecomposition",
    "fourier_coefficients",
    "evaluate_in_time",
    "build_convolution",
    "build_omega",
    "hermitian_eig",
    "matrix_inv_sqrt",
    "matrix_negative_part",
    "compute_tau",
    "convolution_dense",
    "tau_from_modes",
    "symmetrize_modes",
    "check_conjugate_symmetry",
]

_SYM_TOL = 1e-10


def n_coeffs(n_modes: int) -> int:
    """Length of the dense coefficient vector, M = 2N - 1."""
    return 2 * n_modes - 1


def mode_index(n: int, n_modes: int) -> int:
    """Array index of mode n in the dense ordering n = -N+1..N-1."""
    return n + n_modes - 1


def check_conjugate_symmetry(values: np.ndarray, tol: float = _SYM_TOL) -> float:
    """Return the relative conjugate-symmetry defect of a coefficient vector.

    values[-n] must equal conj(values[n]); the defect is measured in the
    max norm relative to the coefficient magnitude (0 for a zero vector).
    """
    values = np.asarray(values)
    scale = np.max(np.abs(values))
    if scale == 0.0:
        return 0.0
    defect = np.max(np.abs(values - np.conj(values[::-1])))
    return float(defect / scale)


def symmetrize_modes(values: np.ndarray) -> np.ndarray:
    """Project a coefficient vector onto exact conjugate symmetry."""
    values = np.asarray(values, dtype=complex)
    return 0.5 * (values + np.conj(values[::-1]))


@dataclass(frozen=True)
class SpectralCoeffs:
    """Dense Fourier coefficient vector of a real periodic quantity.

    values has length 2*n_modes - 1 ordered n = -N+1..N-1 and satisfies
    values[-n] = conj(values[n]) exactly (enforced at construction).
    """

    n_modes: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (n_coeffs(self.n_modes),):
            raise ValueError(
                f"expected {n_coeffs(self.n_modes)} coefficients, got shape {vals.shape}"
            )
        defect = check_conjugate_symmetry(vals)
        if defect > _SYM_TOL:
            raise ValueError(f"conjugate symmetry violated (defect {defect:.3e})")
        object.__setattr__(self, "values", symmetrize_modes(vals))

    @classmethod
    def zeros(cls, n_modes: int) -> "SpectralCoeffs":
        return cls(n_modes, np.zeros(n_coeffs(n_modes), dtype=complex))

    @classmethod
    def from_positive_modes(cls, pos: Sequence[complex]) -> "SpectralCoeffs":
        """Build from the independent modes n = 0..N-1 (mode 0 imag discarded)."""
        pos = np.asarray(pos, dtype=complex)
        n_modes = pos.shape[0]
        vals = np.concatenate([np.conj(pos[:0:-1]), [pos[0].real], pos[1:]])
        return cls(n_modes, vals)

    def mode(self, n: int) -> complex:
        return complex(self.values[mode_index(n, self.n_modes)])

    @property
    def positive_modes(self) -> np.ndarray:
        return self.values[self.n_modes - 1:].copy()

    def __len__(self) -> int:
        return self.values.shape[0]


def fourier_coefficients(samples: np.ndarray, n_modes: int) -> SpectralCoeffs:
    """Fourier coefficients of uniform real samples over one period.

    The samples must cover exactly one period without repeating the end
    point; the coefficients are the discrete sums

        f_n = (1/S) sum_k samples[k] exp(-2*pi*i*n*k/S),

    which is the rectangle rule for (1/T) int f(t) exp(-i n w t) dt and
    is spectrally accurate on a periodic grid.  Conjugate symmetry is
    exact by computing n >= 0 only and mirroring.

    Parameters
    ----------
    samples : (S,) real array, S >= 2*(2*n_modes - 1)
    n_modes : number of independent modes N
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    n_samp = samples.shape[0]
    if n_samp < 2 * n_coeffs(n_modes):
        raise ValueError(
            f"need at least {2 * n_coeffs(n_modes)} samples for N={n_modes}, got {n_samp}"
        )
    k = np.arange(n_samp)
    n = np.arange(n_modes)
    phase = np.exp(-2j * np.pi * np.outer(n, k) / n_samp)
    pos = phase @ samples / n_samp
    return SpectralCoeffs.from_positive_modes(pos)


def evaluate_in_time(coeffs: SpectralCoeffs, t, omega: float):
    """Reconstruct the real signal sum_n values[n] exp(i n w t) at time(s) t.

    The imaginary residue of the complex sum vanishes by conjugate
    symmetry; only the real part is returned.
    """
    t = np.asarray(t, dtype=float)
    n = np.arange(-coeffs.n_modes + 1, coeffs.n_modes)
    phase = np.exp(1j * omega * np.multiply.outer(t, n))
    out = (phase @ coeffs.values).real
    return float(out) if out.ndim == 0 else out


def evaluate_field_in_time(values: np.ndarray, t: float, omega: float) -> np.ndarray:
    """Real time reconstruction of a mode array with trailing axis 2N-1."""
    values = np.asarray(values, dtype=complex)
    n_modes = (values.shape[-1] + 1) // 2
    n = np.arange(-n_modes + 1, n_modes)
    return (values @ np.exp(1j * omega * n * t)).real


def _band_indices(n_modes: int):
    """Index matrix r-c+N-1 and the band mask |r-c| < N for dense fills."""
    m = n_coeffs(n_modes)
    diff = np.subtract.outer(np.arange(m), np.arange(m))
    mask = np.abs(diff) < n_modes
    idx = np.clip(diff + n_modes - 1, 0, m - 1)  # out-of-band entries zeroed below
    return idx, mask


def convolution_dense(values: np.ndarray, n_modes: int) -> np.ndarray:
    """Dense band-restricted Toeplitz matrix A_mn = u_{m-n}, |m-n| < N.

    values may carry leading batch dimensions; the result appends (M, M).
    """
    values = np.asarray(values, dtype=complex)
    idx, mask = _band_indices(n_modes)
    dense = values[..., idx]
    dense[..., ~mask] = 0.0
    return dense


@dataclass(frozen=True)
class ConvolutionMatrix:
    """Hermitian Toeplitz multiplication operator built from velocity modes.

    Only the 2N-1 generating entries u_{-N+1}..u_{N-1} are stored; the
    dense form is A_mn = u_{m-n} inside the band |m-n| < N and zero
    outside, which makes the operator alias-free and Hermitian.
    """

    n_modes: int
    entries: np.ndarray = field(repr=False)

    def dense(self) -> np.ndarray:
        return convolution_dense(self.entries, self.n_modes)


def build_convolution(u_modes: SpectralCoeffs) -> ConvolutionMatrix:
    """Convolution matrix of a spectral velocity component."""
    return ConvolutionMatrix(u_modes.n_modes, u_modes.values.copy())


def build_omega(n_modes: int, omega: float) -> np.ndarray:
    """Diagonal frequency matrix Omega_mm = i*m*omega (skew-Hermitian)."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    n = np.arange(-n_modes + 1, n_modes)
    return np.diag(1j * n * omega)


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(matrix: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition H = V diag(L) V^H of a Hermitian matrix.

    Eigenvalues are real and ascending, V is unitary.  Input that is not
    Hermitian within 1e-10 relative is rejected.
    """
    matrix = np.asarray(matrix, dtype=complex)
    scale = np.linalg.norm(matrix)
    defect = np.linalg.norm(matrix - matrix.conj().T)
    if scale > 0 and defect > 1e-10 * scale:
        raise ValueError(f"matrix is not Hermitian (defect {defect / scale:.3e})")
    w, v = np.linalg.eigh(matrix)
    return EigenDecomposition(w, v)


def matrix_inv_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Inverse matrix square root of a Hermitian positive-definite matrix."""
    w, v = hermitian_eig(matrix)
    if w[0] <= 0.0:
        raise ValueError(f"matrix is not positive definite (min eigenvalue {w[0]:.6e})")
    out = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def matrix_negative_part(matrix: np.ndarray) -> np.ndarray:
    """Negative part |H|_- = (H - |H|)/2, clipping eigenvalues at zero.

    The clip threshold is exactly zero so the result vanishes identically
    for positive semi-definite input.
    """
    w, v = hermitian_eig(matrix)
    w_neg = np.minimum(w, 0.0)
    if not np.any(w_neg < 0.0):
        return np.zeros_like(np.asarray(matrix, dtype=complex))
    out = (v * w_neg) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def negative_part_batch(matrices: np.ndarray) -> np.ndarray:
    """Batched matrix_negative_part over stacked Hermitian matrices."""
    w, v = np.linalg.eigh(matrices)
    w_neg = np.minimum(w, 0.0)
    out = np.einsum("...rk,...k,...ck->...rc", v, w_neg, np.conj(v))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def tau_from_modes(u_modes: np.ndarray, metric: np.ndarray, kappa: float,
                   c_i: float, n_modes: int) -> np.ndarray:
    """Stabilization matrices tau = [A_i G_ij A_j + C_I k^2 G_ij G_ij I]^{-1/2}.

    Batched over quadrature points: u_modes has shape (..., dim, 2N-1) and
    metric (..., dim, dim); the result is (..., 2N-1, 2N-1) Hermitian
    positive definite.
    """
    u_modes = np.asarray(u_modes, dtype=complex)
    metric = np.asarray(metric, dtype=float)
    conv = convolution_dense(u_modes, n_modes)
    arg = np.einsum("...ij,...irs,...jst->...rt", metric, conv, conv)
    gg = np.einsum("...ij,...ij->...", metric, metric)
    m = n_coeffs(n_modes)
    arg[..., np.arange(m), np.arange(m)] += (c_i * kappa**2 * gg)[..., None]
    arg = 0.5 * (arg + np.conj(np.swapaxes(arg, -1, -2)))
    w, v = np.linalg.eigh(arg)
    if np.any(w[..., 0] <= 0.0):
        raise ValueError(
            "singular stabilization argument (zero velocity with kappa = 0?); "
            f"min eigenvalue {np.min(w):.6e}"
        )
    tau = np.einsum("...rk,...k,...ck->...rc", v, w**-0.5, np.conj(v))
    return 0.5 * (tau + np.conj(np.swapaxes(tau, -1, -2)))


def compute_tau(conv, metric: np.ndarray, kappa: float, c_i: float) -> np.ndarray:
    """Stabilization matrix at a single quadrature point.

    Parameters
    ----------
    conv : sequence of ConvolutionMatrix (or dense generating vectors),
        one per spatial direction
    metric : (dim, dim) symmetric positive-definite metric tensor
    kappa : diffusivity, >= 0
    c_i : element-type constant weighting the diffusive limit
    """
    mats = list(conv)
    n_modes = mats[0].n_modes if isinstance(mats[0], ConvolutionMatrix) else None
    if n_modes is None:
        raise TypeError("conv must contain ConvolutionMatrix instances")
    metric = np.asarray(metric, dtype=float)
    dim = len(mats)
    if metric.shape != (dim, dim):
        raise ValueError(f"metric shape {metric.shape} does not match {dim} directions")
    if np.linalg.norm(metric - metric.T) > 1e-12 * np.linalg.norm(metric):
        raise ValueError("metric tensor must be symmetric")
    if np.linalg.eigvalsh(metric)[0] <= 0.0:
        raise ValueError("metric tensor must be positive definite")
    u = np.stack([m.entries for m in mats])
    return tau_from_modes(u[None], metric[None], kappa, c_i, n_modes)[0]
