"""Piecewise-linear finite elements on (0, 1) with homogeneous Dirichlet data.

Everything downstream (noise projection, time stepping, energy
functionals) is built on four objects defined here:

* ``Mesh1D``          -- a uniform grid with the boundary nodes removed,
* ``FemOperators``    -- the tridiagonal mass matrix M and stiffness matrix S,
* ``SpectralDecomp``  -- the generalized eigenpairs of the pencil (S, M),
  through which all operator functions (cos, sin, fractional powers of the
  discrete Laplacian) are evaluated exactly,
* ``FemFunction``     -- a plain coefficient vector in the interior hat basis
  (an alias for ``np.ndarray``; a trailing axis may carry independent
  samples, every routine here broadcasts over it).

Quadrature is 3-point Gauss per cell throughout (exact for quintics).
Cells may be split at known breakpoints so that piecewise-smooth data
(e.g. indicator functions) are integrated without smearing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalFailure

# Coefficient vector in the interior hat basis; shape (N,) or (N, samples).
FemFunction = np.ndarray

#: order of the per-cell Gauss rule used for every quadrature in the package
QUADRATURE_POINTS = 3

_GAUSS_X = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS_W = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh of (0, 1); only the n_cells - 1 interior nodes are kept."""

    n_cells: int
    h: float
    nodes: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.n_cells - 1


@dataclass(frozen=True)
class FemOperators:
    """Mass and stiffness matrices plus a reusable Cholesky factor of M."""

    mass: np.ndarray
    stiffness: np.ndarray
    mass_factor: tuple

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve M x = rhs (rhs may carry a trailing sample axis)."""
        return scipy.linalg.cho_solve(self.mass_factor, rhs)


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenpairs of S v = lambda M v with M-orthonormal eigenvectors.

    ``to_modal`` is Phi^T M, so coefficients in the eigenbasis are
    ``a = to_modal @ v`` and reconstruction is ``v = eigenvectors @ a``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    to_modal: np.ndarray


def build_mesh(n_cells: int) -> Mesh1D:
    """Uniform mesh with n_cells cells; requires n_cells >= 2."""
    if n_cells < 2:
        raise ValueError(f"n_cells must be >= 2, got {n_cells}")
    h = 1.0 / n_cells
    nodes = np.arange(1, n_cells) * h
    return Mesh1D(n_cells=n_cells, h=h, nodes=nodes)


def assemble(mesh: Mesh1D) -> FemOperators:
    """Mass and stiffness matrices of the interior hat basis.

    Interior stencils are (h/6, 2h/3, h/6) for M and (-1/h, 2/h, -1/h)
    for S; both matrices are symmetric positive definite.
    """
    n = mesh.n_dofs
    h = mesh.h
    mass = (
        np.diag(np.full(n, 2.0 * h / 3.0))
        + np.diag(np.full(n - 1, h / 6.0), 1)
        + np.diag(np.full(n - 1, h / 6.0), -1)
    )
    stiffness = (
        np.diag(np.full(n, 2.0 / h))
        + np.diag(np.full(n - 1, -1.0 / h), 1)
        + np.diag(np.full(n - 1, -1.0 / h), -1)
    )
    factor = scipy.linalg.cho_factor(mass)
    return FemOperators(mass=mass, stiffness=stiffness, mass_factor=factor)


def eig_pencil(ops: FemOperators) -> SpectralDecomp:
    """Full generalized symmetric eigendecomposition of (S, M).

    Eigenvalues come back ascending and eigenvectors M-orthonormal, which
    makes phi(Lambda_h) v = Phi diag(phi(lambda)) Phi^T M v exact in the
    eigenbasis.
    """
    try:
        lam, phi = scipy.linalg.eigh(ops.stiffness, ops.mass)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalFailure(f"generalized eigensolver failed: {exc}") from exc
    return SpectralDecomp(eigenvalues=lam, eigenvectors=phi, to_modal=phi.T @ ops.mass)


def _scale_modes(values: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Multiply modal coefficients by per-mode values, sample-axis aware."""
    if coeffs.ndim == 2:
        return values[:, None] * coeffs
    return values * coeffs


def apply_operator_function(
    decomp: SpectralDecomp, phi: Callable[[np.ndarray], np.ndarray], v: FemFunction
) -> FemFunction:
    """Evaluate phi(Lambda_h) v through the cached eigendecomposition."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != decomp.eigenvalues.shape[0]:
        raise ValueError(
            f"dimension mismatch: operator has {decomp.eigenvalues.shape[0]} modes, "
            f"vector has leading dimension {v.shape[0]}"
        )
    a = decomp.to_modal @ v
    vals = np.asarray(phi(decomp.eigenvalues), dtype=float)
    return decomp.eigenvectors @ _scale_modes(vals, a)


def discrete_norm(decomp: SpectralDecomp, v: FemFunction, alpha: float):
    """The norm || Lambda_h^(alpha/2) v || computed modally.

    alpha = 0 is the M-weighted L2 norm, alpha = 1 gives sqrt(v^T S v).
    Returns a scalar, or one value per sample if v carries a sample axis.
    """
    a = decomp.to_modal @ np.asarray(v, dtype=float)
    weights = decomp.eigenvalues**alpha
    total = np.einsum("i...,i...->...", _scale_modes(weights, a), a)
    return np.sqrt(total)


def cell_quadrature(
    mesh: Mesh1D, breakpoints: Sequence[float] = ()
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points and weights covering (0, 1), three per smooth piece.

    ``breakpoints`` lists abscissae where the integrand is allowed to be
    non-smooth; cells containing one are split there so the rule keeps its
    accuracy on piecewise-smooth integrands.
    """
    edges = np.arange(mesh.n_cells + 1) * mesh.h
    cuts = [c for c in breakpoints if 0.0 < c < 1.0]
    pieces = np.unique(np.concatenate([edges, np.asarray(cuts, dtype=float)]))
    left, right = pieces[:-1], pieces[1:]
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    x = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    w = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return x, w


def hat_matrix(mesh: Mesh1D, x: np.ndarray) -> np.ndarray:
    """Values of every interior hat function at the points x, shape (len(x), N)."""
    return np.clip(1.0 - np.abs(x[:, None] - mesh.nodes[None, :]) / mesh.h, 0.0, None)


def l2_project(
    mesh: Mesh1D,
    ops: FemOperators,
    u: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (),
) -> FemFunction:
    """L2-orthogonal projection: solve M c = b with b_i = integral of u * hat_i."""
    x, w = cell_quadrature(mesh, breakpoints)
    b = hat_matrix(mesh, x).T @ (w * np.asarray(u(x), dtype=float))
    return ops.mass_solve(b)


def ritz_project(
    mesh: Mesh1D,
    ops: FemOperators,
    u: Callable[[np.ndarray], np.ndarray],
    u_prime: Callable[[np.ndarray], np.ndarray] | None,
) -> FemFunction:
    """Energy-orthogonal (Ritz) projection: solve S c = b, b_i = (u', hat_i').

    The derivative must be supplied; for data without one, fall back to
    ``l2_project`` explicitly at the call site.
    """
    if u_prime is None:
        raise ValueError("ritz_project requires the derivative of u; use l2_project for rough data")
    x, w = cell_quadrature(mesh)
    # hat_i' is +1/h on the cell left of node i and -1/h on the right one
    per_cell = (w * np.asarray(u_prime(x), dtype=float)).reshape(mesh.n_cells, QUADRATURE_POINTS).sum(axis=1)
    b = (per_cell[:-1] - per_cell[1:]) / mesh.h
    return scipy.linalg.solve(ops.stiffness, b, assume_a="pos")


def nested_interpolation(coarse: Mesh1D, fine: Mesh1D) -> np.ndarray:
    """Matrix taking coarse coefficients to their values at the fine nodes.

    Exact for piecewise-linear functions whenever the coarse nodes are a
    subset of the fine ones, which is what the integer-ratio check enforces.
    """
    if fine.n_cells % coarse.n_cells != 0:
        raise ValueError(
            f"meshes are not nested: {fine.n_cells} cells is not a multiple of {coarse.n_cells}"
        )
    return hat_matrix(coarse, fine.nodes)
