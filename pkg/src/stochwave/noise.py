"""Q-Wiener increments in the Dirichlet sine basis and their FEM projection.

The driving noise is expanded as W(t) = sum_j sqrt(q_j) e_j beta_j(t) with
e_j(x) = sqrt(2) sin(j pi x) and lambda_j = (j pi)^2.  Three covariance
families are supported: ``white`` (q_j = 1), ``power`` (q_j = lambda_j^-s)
and ``off`` (no noise, realized as an empty expansion).

Increments are sampled per (sample, step) from counter-based Philox
streams, so any sub-path is reproducible from the master seed alone and
coarse-step increments are exact sums of the fine ones they cover.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import zeta

from .fem import FemFunction, FemOperators, Mesh1D

#: relative tail mass below which a power-law expansion is considered converged
TAIL_FRACTION = 1e-8

_KINDS = ("white", "power", "off")


@dataclass(frozen=True)
class NoiseModel:
    """Covariance spectrum q_j on the first J Dirichlet sine modes."""

    kind: str
    J: int
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind != "off" and self.J < 1:
            raise ValueError("truncation J must be a positive integer")
        if self.kind == "power" and self.s < 0:
            raise ValueError("power-law exponent s must be nonnegative")

    @property
    def variances(self) -> np.ndarray:
        """Per-mode variances q_j, j = 1..J."""
        if self.kind == "off":
            return np.zeros(0)
        if self.kind == "white":
            return np.ones(self.J)
        return (np.arange(1, self.J + 1) * np.pi) ** (-2.0 * self.s)

    def is_trace_class(self) -> bool:
        """Whether sum_j q_j stays finite as the truncation grows."""
        if self.kind == "off":
            return True
        if self.kind == "white":
            return False
        return 2.0 * self.s > 1.0


def white(J: int) -> NoiseModel:
    return NoiseModel(kind="white", J=J)


def power(s: float, J: int) -> NoiseModel:
    return NoiseModel(kind="power", J=J, s=s)


def off() -> NoiseModel:
    return NoiseModel(kind="off", J=0)


@dataclass(frozen=True)
class NoiseSpec:
    """A covariance family before the truncation has been fixed.

    Experiments resolve a spec against a mesh: an explicit J wins,
    otherwise ``default_truncation`` picks one.
    """

    kind: str = "white"
    s: float = 0.0
    J: int | None = None

    def resolve(self, n_dofs: int) -> NoiseModel:
        J = self.J if self.J is not None else default_truncation(self.kind, self.s, n_dofs)
        if self.kind == "off":
            return off()
        return NoiseModel(kind=self.kind, J=J, s=self.s)

    def label(self) -> str:
        if self.kind == "power":
            return f"power:{self.s:g}"
        return self.kind


def parse_noise_spec(text: str, J: int | None = None) -> NoiseSpec:
    """Parse 'white', 'off' or 'power:<s>' into a NoiseSpec."""
    text = text.strip().lower()
    if text in ("white", "off"):
        return NoiseSpec(kind=text, J=J)
    if text.startswith("power:"):
        try:
            s = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"malformed noise spec {text!r}; expected power:<s>") from None
        return NoiseSpec(kind="power", s=s, J=J)
    raise ValueError(f"unknown noise spec {text!r}; expected white, off or power:<s>")


def default_truncation(kind: str, s: float, n_dofs: int) -> int:
    """Default expansion length for a mesh with ``n_dofs`` interior nodes.

    White (and non-trace-class power) noise is truncated at the finest
    scale the mesh resolves.  Trace-class power noise keeps enough modes
    that the dropped tail is below TAIL_FRACTION of the full trace.
    """
    if kind == "off":
        return 0
    if kind == "white" or 2.0 * s <= 1.0:
        return n_dofs
    total = float(zeta(2.0 * s))
    # crude integral bound for the scan ceiling, then take the exact minimum
    guess = int(((TAIL_FRACTION * total) * (2.0 * s - 1.0)) ** (-1.0 / (2.0 * s - 1.0))) + 2
    j = np.arange(1, 2 * guess + 1000, dtype=float)
    tail = total - np.cumsum(j ** (-2.0 * s))
    return int(np.argmax(tail < TAIL_FRACTION * total)) + 1


@dataclass(frozen=True)
class NoiseIncrement:
    """One Wiener increment: raw normals xi and scaled coefficients.

    ``spectral_coeffs`` equals sqrt(q_j dt) xi_j mode by mode (zero wherever
    q_j = 0); shape (J,) or (J, samples).
    """

    xi: np.ndarray
    dt: float
    spectral_coeffs: np.ndarray


def sample_increment(model: NoiseModel, dt: float, rng: np.random.Generator) -> NoiseIncrement:
    """Draw one increment over a step of length dt from the given stream."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = rng.standard_normal(model.variances.shape[0])
    coeffs = np.sqrt(model.variances * dt) * xi
    return NoiseIncrement(xi=xi, dt=dt, spectral_coeffs=coeffs)


_load_cache: dict[tuple[int, int], np.ndarray] = {}


def sine_hat_load_matrix(mesh: Mesh1D, J: int) -> np.ndarray:
    """Closed-form loads b[i, j] = integral of e_j * hat_i, shape (N, J).

    For a hat of width h centred at x_i the integral against sin(c x) is
    sin(c x_i) * 2 (1 - cos(c h)) / (h c^2); no quadrature error enters the
    noise covariance through these.
    """
    key = (mesh.n_cells, J)
    cached = _load_cache.get(key)
    if cached is not None:
        return cached
    c = np.arange(1, J + 1) * np.pi
    amp = np.sqrt(2.0) * 2.0 * (1.0 - np.cos(c * mesh.h)) / (mesh.h * c**2)
    out = np.sin(np.outer(mesh.nodes, c)) * amp
    _load_cache[key] = out
    return out


def project_increment(mesh: Mesh1D, ops: FemOperators, inc: NoiseIncrement) -> FemFunction:
    """L2 projection of the increment onto the FEM space (mass solve)."""
    coeffs = inc.spectral_coeffs
    if coeffs.shape[0] == 0:
        shape = (mesh.n_dofs,) if coeffs.ndim == 1 else (mesh.n_dofs, coeffs.shape[1])
        return np.zeros(shape)
    b = sine_hat_load_matrix(mesh, coeffs.shape[0]) @ coeffs
    return ops.mass_solve(b)


def trace_projected(model: NoiseModel, mesh: Mesh1D, ops: FemOperators) -> float:
    """Tr(P_h Q P_h) = sum_j q_j ||P_h e_j||^2 over the truncated expansion."""
    q = model.variances
    if q.shape[0] == 0:
        return 0.0
    b = sine_hat_load_matrix(mesh, q.shape[0])
    c = ops.mass_solve(b)
    return float(np.sum(q * np.einsum("ij,ij->j", b, c)))


class IncrementStreams:
    """Counter-based Gaussian streams keyed by (sample, step).

    ``draw(sample, step, n)`` returns the output of a Philox generator with
    key = master_seed and counter = [0, 0, step, sample]; distinct pairs use
    disjoint counter ranges and are therefore independent, and any pair can
    be regenerated in any order.  A single bit-generator object is reused by
    rewriting its counter, which is bit-identical to constructing a fresh
    one (asserted in the test suite).  Instances are not thread-safe; give
    each worker its own.
    """

    def __init__(self, master_seed: int):
        if master_seed < 0:
            raise ValueError("master seed must be a nonnegative integer")
        self.master_seed = int(master_seed)
        self._bitgen = np.random.Philox(key=self.master_seed)
        self._gen = np.random.Generator(self._bitgen)

    def draw(self, sample: int, step: int, n: int) -> np.ndarray:
        if sample < 0 or step < 0:
            raise ValueError("sample and step indices must be nonnegative")
        state = self._bitgen.state
        state["state"]["counter"][:] = (0, 0, step, sample)
        state["buffer_pos"] = 4  # discard any buffered block from the previous counter
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._gen.standard_normal(n)


@dataclass(frozen=True)
class PathCoupling:
    """Deterministic noise paths on a finest temporal grid.

    Holds no sampled data: the xi block of fine step n for sample id s is a
    pure function of (master_seed, s, n), so the same object can hand out
    increments at any step size that is an integer multiple of finest_dt,
    and the coarse coefficients are exact sums of the fine ones.
    """

    model: NoiseModel
    master_seed: int
    finest_dt: float
    n_fine: int
    samples: tuple[int, ...]

    def increments(self, step: float) -> Iterator[NoiseIncrement]:
        return coupled_increments(self, step)


def coupled_increments(coupling: PathCoupling, step: float) -> Iterator[NoiseIncrement]:
    """Yield increments of length ``step`` assembled from the fine grid.

    ``step`` must be an integer multiple of the coupling's finest_dt and
    must tile its horizon exactly.
    """
    ratio = step / coupling.finest_dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, m):
        raise ValueError(f"step {step} is not an integer multiple of finest_dt {coupling.finest_dt}")
    if coupling.n_fine % m != 0:
        raise ValueError(f"{coupling.n_fine} fine steps cannot be tiled by blocks of {m}")
    q = coupling.model.variances
    J = q.shape[0]
    scale = np.sqrt(q * coupling.finest_dt)
    streams = IncrementStreams(coupling.master_seed)
    n_samples = len(coupling.samples)
    for coarse in range(coupling.n_fine // m):
        coeffs = np.zeros((J, n_samples))
        xi_sum = np.zeros((J, n_samples))
        for sub in range(m):
            fine_index = coarse * m + sub
            for col, sid in enumerate(coupling.samples):
                xi = streams.draw(sid, fine_index, J)
                xi_sum[:, col] += xi
                coeffs[:, col] += scale * xi
        yield NoiseIncrement(xi=xi_sum / np.sqrt(m), dt=step, spectral_coeffs=coeffs)
