"""Energy and norm functionals evaluated along trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ObservableSet:
    """Selection of quantities to record at every step."""

    hamiltonian: bool = False
    l2_norm_u1: bool = False
    l2_norm_u2: bool = False
    energy_seminorm: bool = False
    modal_energies: int = 0

    def __post_init__(self):
        if not any(
            (self.hamiltonian, self.l2_norm_u1, self.l2_norm_u2, self.energy_seminorm)
        ) and self.modal_energies <= 0:
            raise ValueError("at least one observable must be selected")

    def names(self) -> tuple[str, ...]:
        out = []
        if self.hamiltonian:
            out.append("hamiltonian")
        if self.l2_norm_u1:
            out.append("l2_norm_u1")
        if self.l2_norm_u2:
            out.append("l2_norm_u2")
        if self.energy_seminorm:
            out.append("energy_seminorm")
        out.extend(f"modal_energy_{j}" for j in range(1, self.modal_energies + 1))
        return tuple(out)


def _quadratic(v, mat):
    return np.einsum("i...,i...->...", v, mat @ v)


def hamiltonian(state, dp):
    """H = 1/2 ||u2||^2 + 1/2 ||Lambda^(1/2) u1||^2 + integral of V(u1).

    The stiffness quadratic form is exact for the gradient term; V(u1) is
    integrated by the same per-cell Gauss rule as every other nonlinearity.
    Returns a scalar, or one value per sample.
    """
    if dp.problem.V is None:
        raise ValueError(f"problem {dp.problem.name!r} has no potential V; hamiltonian undefined")
    kinetic = 0.5 * _quadratic(state.u2, dp.ops.mass)
    elastic = 0.5 * _quadratic(state.u1, dp.ops.stiffness)
    potential = dp.quad_w @ dp.problem.V(dp.interp @ state.u1)
    return kinetic + elastic + potential


def modal_energies(state, dp, m: int):
    """Per-mode energies 1/2 (lambda_j a_j^2 + b_j^2) for the first m modes."""
    a = dp.decomp.to_modal @ state.u1
    b = dp.decomp.to_modal @ state.u2
    lam = dp.decomp.eigenvalues
    if a.ndim == 2:
        return 0.5 * (lam[:m, None] * a[:m] ** 2 + b[:m] ** 2)
    return 0.5 * (lam[:m] * a[:m] ** 2 + b[:m] ** 2)


def record_observables(state, dp, obs: ObservableSet) -> dict:
    out = {}
    if obs.hamiltonian:
        out["hamiltonian"] = hamiltonian(state, dp)
    if obs.l2_norm_u1:
        out["l2_norm_u1"] = np.sqrt(_quadratic(state.u1, dp.ops.mass))
    if obs.l2_norm_u2:
        out["l2_norm_u2"] = np.sqrt(_quadratic(state.u2, dp.ops.mass))
    if obs.energy_seminorm:
        out["energy_seminorm"] = np.sqrt(_quadratic(state.u1, dp.ops.stiffness))
    if obs.modal_energies > 0:
        energies = modal_energies(state, dp, obs.modal_energies)
        for j in range(obs.modal_energies):
            out[f"modal_energy_{j + 1}"] = energies[j]
    return out


def expected_observable_path(samples):
    """Pointwise mean and standard error across sample series.

    ``samples`` is an array (or list of equal-length series) with the sample
    axis first.  With fewer than two samples the standard error is undefined
    and returned as NaNs.
    """
    try:
        arr = np.asarray(samples, dtype=float)
    except ValueError:
        raise ValueError("all observable series must have equal length") from None
    if arr.ndim == 1:
        arr = arr[None, :]
    mean = arr.mean(axis=0)
    if arr.shape[0] < 2:
        return mean, np.full_like(mean, np.nan)
    stderr = arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    return mean, stderr
