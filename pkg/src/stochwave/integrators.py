"""One-step maps for the semidiscrete wave system and a trajectory driver.

All schemes act on ``State(u1, u2)`` where the fields are hat-basis
coefficient vectors, optionally with a trailing sample axis so a whole
Monte-Carlo batch advances through the same code path.

The trigonometric scheme propagates the linear part exactly through the
spectral decomposition; drift and noise loads are filtered by the same
one-step propagator, i.e. multiplied by the blocks
[Lambda_h^{-1/2} S_h(k); C_h(k)].  The four Maruyama-type schemes (forward,
semi-implicit and backward Euler, Crank-Nicolson) share the cached shifted
factorizations of M + c S held by ``DiscreteProblem``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from . import noise as noise_mod
from .errors import NumericalFailure
from .fem import (
    FemFunction,
    Mesh1D,
    SpectralDecomp,
    assemble,
    cell_quadrature,
    eig_pencil,
    hat_matrix,
    l2_project,
    ritz_project,
)
from .noise import NoiseIncrement, NoiseModel
from .problems import ProblemSpec

SCHEMES = ("stm", "em", "sem", "bem", "cnm")
SCHEME_LABELS = {"stm": "STM", "em": "EM", "sem": "SEM", "bem": "BEM", "cnm": "CNM"}


@dataclass
class State:
    """Position/velocity coefficient pair; shapes must agree."""

    u1: FemFunction
    u2: FemFunction

    def __post_init__(self):
        if np.shape(self.u1) != np.shape(self.u2):
            raise ValueError("u1 and u2 must have identical shapes")

    def copy(self) -> "State":
        return State(self.u1.copy(), self.u2.copy())


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    k: float
    bem_tol: float = 1e-12
    bem_max_iter: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.k <= 0:
            raise ValueError("step size k must be positive")


class DiscreteProblem:
    """A problem bound to one mesh: operators, spectrum, quadrature, caches.

    Everything precomputed here is immutable after construction except the
    two factorization/trig caches, which are filled lazily per step size and
    only read during stepping; sharing one instance across concurrently
    running sample batches is safe as long as the caches are warmed first
    (the experiment drivers step sequentially, so this never matters there).
    """

    def __init__(self, problem: ProblemSpec, mesh: Mesh1D, noise_model: NoiseModel | None = None):
        self.problem = problem
        self.mesh = mesh
        self.ops = assemble(mesh)
        self.decomp = eig_pencil(self.ops)
        self.noise = (
            noise_model
            if noise_model is not None
            else problem.noise.resolve(mesh.n_dofs)
        )
        x, w = cell_quadrature(mesh)
        self.quad_x = x
        self.quad_w = w
        P = hat_matrix(mesh, x)
        self.interp = P                      # (nq, N): nodal -> quadrature values
        self.load = (P * w[:, None]).T       # (N, nq): quadrature values -> load vector
        J = self.noise.variances.shape[0]
        self.sine_at_quad = np.sqrt(2.0) * np.sin(np.outer(x, np.arange(1, J + 1) * np.pi))
        self.sine_loads = noise_mod.sine_hat_load_matrix(mesh, J) if J else np.zeros((mesh.n_dofs, 0))
        self._shift_cache: dict[float, tuple] = {}
        self._trig_cache: dict[float, tuple] = {}

    # -- setup ---------------------------------------------------------------

    def initial_state(self) -> State:
        p = self.problem
        if p.u0_projector == "ritz":
            u1 = ritz_project(self.mesh, self.ops, p.u0, p.u0_prime)
        else:
            u1 = l2_project(self.mesh, self.ops, p.u0, p.u0_breakpoints)
        if p.v0_projector == "ritz":
            u2 = ritz_project(self.mesh, self.ops, p.v0, p.v0_prime)
        else:
            u2 = l2_project(self.mesh, self.ops, p.v0, p.v0_breakpoints)
        return State(u1, u2)

    def tiled_initial_state(self, n_samples: int) -> State:
        s = self.initial_state()
        return State(np.tile(s.u1[:, None], (1, n_samples)), np.tile(s.u2[:, None], (1, n_samples)))

    # -- linear algebra helpers ----------------------------------------------

    def mass_solve(self, rhs):
        return self.ops.mass_solve(rhs)

    def laplacian(self, v):
        """Lambda_h v, i.e. solve M w = S v."""
        return self.ops.mass_solve(self.ops.stiffness @ v)

    def shifted_solve(self, c: float, rhs):
        """Solve (M + c S) x = rhs with a factorization cached per c."""
        factor = self._shift_cache.get(c)
        if factor is None:
            try:
                factor = scipy.linalg.cho_factor(self.ops.mass + c * self.ops.stiffness)
            except scipy.linalg.LinAlgError as exc:
                raise NumericalFailure(f"factorization of M + {c:g} S failed: {exc}") from exc
            self._shift_cache[c] = factor
        return scipy.linalg.cho_solve(factor, rhs)

    def trig(self, k: float) -> tuple:
        """(cos, sin/sqrt(lam), sqrt(lam)*sin) of k sqrt(lam) per eigenmode."""
        cached = self._trig_cache.get(k)
        if cached is None:
            root = np.sqrt(self.decomp.eigenvalues)
            cosv = np.cos(k * root)
            sinv = np.sin(k * root)
            cached = (cosv, sinv / root, root * sinv)
            self._trig_cache[k] = cached
        return cached

    # -- load assembly ---------------------------------------------------------

    def drift_load_raw(self, u1):
        """Galerkin load of f(u1): b_i = integral f(u1(x)) hat_i(x), or None if f = 0."""
        if self.problem.f_is_zero:
            return None
        return self.load @ self.problem.f(self.interp @ u1)

    def noise_load_raw(self, u1, inc: Optional[NoiseIncrement]):
        """Load of g(u1) dW; closed-form sine-hat integrals when g = 1."""
        if inc is None or inc.spectral_coeffs.shape[0] == 0:
            return None
        if self.problem.g_is_identity:
            return self.sine_loads @ inc.spectral_coeffs
        field = self.sine_at_quad @ inc.spectral_coeffs
        return self.load @ (self.problem.g(self.interp @ u1) * field)

    def m_norm(self, v) -> float:
        """Mass-weighted L2 norm; for batched input the largest over samples."""
        vals = np.einsum("i...,i...->...", v, self.ops.mass @ v)
        return float(np.sqrt(np.max(vals)))


def evaluate_rhs(dp: DiscreteProblem, u1: FemFunction):
    """Nodal drift load P_h f(u1) and a closure applying P_h(g(u1) dW).

    Both follow the Galerkin route: assemble the load by quadrature (or the
    closed-form sine integrals for additive noise), then mass-solve.
    """
    raw = dp.drift_load_raw(u1)
    loadf = dp.mass_solve(raw) if raw is not None else np.zeros_like(u1)

    def g_action(inc: Optional[NoiseIncrement]) -> FemFunction:
        raw_g = dp.noise_load_raw(u1, inc)
        return dp.mass_solve(raw_g) if raw_g is not None else np.zeros_like(u1)

    return loadf, g_action


def _combined_raw(dp, u1, k, inc):
    """k * load(f) + load(g dW) as a raw (pre mass-solve) vector, or None."""
    bf = dp.drift_load_raw(u1)
    bg = dp.noise_load_raw(u1, inc)
    if bf is None and bg is None:
        return None
    if bf is None:
        return bg
    if bg is None:
        return k * bf
    return k * bf + bg


def _scale(vals, arr):
    return vals[:, None] * arr if arr.ndim == 2 else vals * arr


def _require_finite(state: State, scheme: str) -> State:
    if not (np.all(np.isfinite(state.u1)) and np.all(np.isfinite(state.u2))):
        raise NumericalFailure(f"non-finite state after {scheme} step")
    return state


def stm_step(state: State, k: float, dp: DiscreteProblem, inc: Optional[NoiseIncrement] = None) -> State:
    """Trigonometric step: exact linear rotation plus filtered loads.

    In eigencoordinates, with l the modal coefficients of the combined load
    k P_h f(u1) + P_h(g(u1) dW):

        a+ = cos a + sin/sqrt(lam) b + sin/sqrt(lam) l
        b+ = -sqrt(lam) sin a + cos b + cos l
    """
    cosv, sin_over, sin_times = dp.trig(k)
    dec = dp.decomp
    a = dec.to_modal @ state.u1
    b = dec.to_modal @ state.u2
    raw = _combined_raw(dp, state.u1, k, inc)
    a_new = _scale(cosv, a) + _scale(sin_over, b)
    b_new = -_scale(sin_times, a) + _scale(cosv, b)
    if raw is not None:
        l = dec.eigenvectors.T @ raw  # modal coefficients of the mass-solved load
        a_new += _scale(sin_over, l)
        b_new += _scale(cosv, l)
    return _require_finite(State(dec.eigenvectors @ a_new, dec.eigenvectors @ b_new), "stm")


def em_step(state: State, k: float, dp: DiscreteProblem, inc: Optional[NoiseIncrement] = None) -> State:
    """Forward Euler step; expected to blow up once k sqrt(lam_max) is large."""
    with np.errstate(over="ignore", invalid="ignore"):
        loadf, g_action = evaluate_rhs(dp, state.u1)
        u1 = state.u1 + k * state.u2
        u2 = state.u2 - k * dp.laplacian(state.u1) + k * loadf + g_action(inc)
    return _require_finite(State(u1, u2), "em")


def sem_step(state: State, k: float, dp: DiscreteProblem, inc: Optional[NoiseIncrement] = None) -> State:
    """Semi-implicit Euler: implicit in the wave part, explicit in f and g."""
    bf = dp.drift_load_raw(state.u1)
    bg = dp.noise_load_raw(state.u1, inc)
    rhs = dp.ops.mass @ (state.u1 + k * state.u2)
    if bf is not None:
        rhs = rhs + k * k * bf
    if bg is not None:
        rhs = rhs + k * bg
    u1 = dp.shifted_solve(k * k, rhs)
    u2 = state.u2 - k * dp.laplacian(u1)
    if bf is not None:
        u2 = u2 + k * dp.mass_solve(bf)
    if bg is not None:
        u2 = u2 + dp.mass_solve(bg)
    return _require_finite(State(u1, u2), "sem")


def bem_step(
    state: State,
    k: float,
    dp: DiscreteProblem,
    inc: Optional[NoiseIncrement] = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> State:
    """Backward Euler with the drift resolved by fixed-point iteration.

    Successive iterates must approach each other below ``tol`` in the
    M-norm; f globally Lipschitz and k moderate make the map a contraction.
    """
    bg = dp.noise_load_raw(state.u1, inc)
    cg = dp.mass_solve(bg) if bg is not None else None
    rhs_base = dp.ops.mass @ (state.u1 + k * state.u2)

    def sweep(y1):
        bf = dp.drift_load_raw(y1)
        rhs = rhs_base
        if bf is not None:
            rhs = rhs + k * k * bf
        if bg is not None:
            rhs = rhs + k * bg
        u1 = dp.shifted_solve(k * k, rhs)
        u2 = state.u2 - k * dp.laplacian(u1)
        if bf is not None:
            u2 = u2 + k * dp.mass_solve(bf)
        if cg is not None:
            u2 = u2 + cg
        return u1, u2

    y1, y2 = sweep(state.u1)
    for _ in range(max_iter):
        y1_next, y2_next = sweep(y1)
        diff = np.sqrt(dp.m_norm(y1_next - y1) ** 2 + dp.m_norm(y2_next - y2) ** 2)
        y1, y2 = y1_next, y2_next
        if diff < tol:
            return _require_finite(State(y1, y2), "bem")
    raise NumericalFailure(
        f"bem fixed-point iteration did not converge within {max_iter} sweeps "
        f"(last residual {diff:.3e}, tol {tol:.1e})"
    )


def cnm_step(state: State, k: float, dp: DiscreteProblem, inc: Optional[NoiseIncrement] = None) -> State:
    """Crank-Nicolson in the wave part, Maruyama treatment of f and g."""
    bf = dp.drift_load_raw(state.u1)
    bg = dp.noise_load_raw(state.u1, inc)
    r1 = state.u1 + 0.5 * k * state.u2
    r2 = state.u2 - 0.5 * k * dp.laplacian(state.u1)
    if bf is not None:
        r2 = r2 + k * dp.mass_solve(bf)
    if bg is not None:
        r2 = r2 + dp.mass_solve(bg)
    u1 = dp.shifted_solve(0.25 * k * k, dp.ops.mass @ r1 + 0.5 * k * (dp.ops.mass @ r2))
    u2 = r2 - 0.5 * k * dp.laplacian(u1)
    return _require_finite(State(u1, u2), "cnm")


STEP_FUNCTIONS = {
    "stm": stm_step,
    "em": em_step,
    "sem": sem_step,
    "cnm": cnm_step,
}


def make_step(config: SchemeConfig):
    """Bind a scheme configuration to its one-step map."""
    if config.scheme == "bem":
        return lambda state, dp, inc: bem_step(
            state, config.k, dp, inc, tol=config.bem_tol, max_iter=config.bem_max_iter
        )
    fn = STEP_FUNCTIONS[config.scheme]
    return lambda state, dp, inc: fn(state, config.k, dp, inc)


def integrate(
    dp: DiscreteProblem,
    config: SchemeConfig,
    n_steps: int,
    path: Optional[Iterable[NoiseIncrement]] = None,
    record=None,
    state0: Optional[State] = None,
):
    """Advance n_steps from the projected initial data along a noise path.

    ``path`` yields one increment per step (None for a noise-free run).
    With ``record`` (an ObservableSet) the selected observables are stored
    at every step including t = 0, and the result is ``(state, series)``
    where series maps observable names to arrays with leading time axis.
    """
    from .observables import record_observables  # one-way import, kept local

    state = state0.copy() if state0 is not None else dp.initial_state()
    step = make_step(config)
    it = iter(path) if path is not None else None
    series = None
    if record is not None:
        first = record_observables(state, dp, record)
        series = {key: [val] for key, val in first.items()}
    for n in range(n_steps):
        if it is None:
            inc = None
        else:
            try:
                inc = next(it)
            except StopIteration:
                raise ValueError(f"noise path exhausted after {n} of {n_steps} steps") from None
        try:
            state = step(state, dp, inc)
        except NumericalFailure as exc:
            raise NumericalFailure(f"{exc} (step {n})") from None
        if record is not None:
            vals = record_observables(state, dp, record)
            for key, val in vals.items():
                series[key].append(val)
    if record is not None:
        out = {key: np.asarray(vals) for key, vals in series.items()}
        out["time"] = np.arange(n_steps + 1) * config.k
        return state, out
    return state
