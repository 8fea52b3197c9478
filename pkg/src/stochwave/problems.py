"""Problem catalog: nonlinearities, initial data and default noise.

Each ``ProblemSpec`` fixes f, g, the optional potential V with f = -V',
initial fields with the projector to use for each, and a default noise
family.  The four built-ins cover the standard experiment set: the
hyperbolic Anderson model, sine-Gordon with additive or multiplicative
white noise, and the plain linear wave equation with additive noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .noise import NoiseSpec

#: grid and step for the finite-difference check tying f to V
_FD_GRID = np.linspace(-3.0, 3.0, 13)
_FD_EPS = 1e-5
_FD_TOL = 1e-6


@dataclass(frozen=True)
class ProblemSpec:
    """Scalar drift f, diffusion g, initial data and noise defaults.

    ``f_is_zero`` and ``g_is_identity`` flag the structural special cases
    (no drift; additive noise) that integrators exploit: additive noise
    loads use the closed-form sine-hat integrals instead of quadrature.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    f_is_zero: bool
    g_is_identity: bool
    u0: Callable[[np.ndarray], np.ndarray]
    v0: Callable[[np.ndarray], np.ndarray]
    V: Callable[[np.ndarray], np.ndarray] | None = None
    u0_prime: Callable[[np.ndarray], np.ndarray] | None = None
    v0_prime: Callable[[np.ndarray], np.ndarray] | None = None
    u0_projector: str = "ritz"
    v0_projector: str = "l2"
    u0_breakpoints: tuple[float, ...] = ()
    v0_breakpoints: tuple[float, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    T_default: float = 1.0
    regularity_beta: float | None = None

    def __post_init__(self):
        if self.u0_projector not in ("ritz", "l2") or self.v0_projector not in ("ritz", "l2"):
            raise ValueError("projector choices must be 'ritz' or 'l2'")
        if self.u0_projector == "ritz" and self.u0_prime is None:
            raise ValueError(f"problem {self.name!r}: Ritz projection of u0 needs u0_prime")
        if self.V is not None:
            _check_potential(self.name, self.f, self.V)

    def with_noise(self, noise: NoiseSpec) -> "ProblemSpec":
        beta = _beta_bound(self.name, noise)
        return replace(self, noise=noise, regularity_beta=beta)


def _check_potential(name, f, V):
    """Require f = -V' to finite-difference accuracy on a sample grid."""
    fd = (V(_FD_GRID + _FD_EPS) - V(_FD_GRID - _FD_EPS)) / (2.0 * _FD_EPS)
    err = np.max(np.abs(f(_FD_GRID) + fd))
    if err > _FD_TOL:
        raise ValueError(f"problem {name!r}: f does not match -V' (max deviation {err:.3e})")


def _beta_bound(name: str, noise: NoiseSpec) -> float | None:
    """Supremum of the admissible regularity index for the built-ins.

    For the multiplicative problems with Q = Lambda^-s the bound is
    s + 1/2 (strictly below); white noise corresponds to s = 0.  The
    additive sine-Gordon/linear problems with trace-class Q = Lambda^-s,
    s > 1/2, support beta = 2 at s = 2 and we record min(2s, 2).
    """
    if name in ("anderson", "sine-gordon-multiplicative"):
        s = noise.s if noise.kind == "power" else 0.0
        return s + 0.5
    if noise.kind == "white":
        return 0.5
    if noise.kind == "power":
        return min(2.0 * noise.s, 2.0)
    return None


def _indicator(a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    def v0(x):
        x = np.asarray(x, dtype=float)
        return ((x >= a) & (x <= b)).astype(float)

    return v0


_ZERO = lambda u: np.zeros_like(np.asarray(u, dtype=float))
_ONE = lambda u: np.ones_like(np.asarray(u, dtype=float))
_IDENT = lambda u: np.asarray(u, dtype=float)


def anderson(noise: NoiseSpec | None = None) -> ProblemSpec:
    """Hyperbolic Anderson model: f = 0, g(u) = u, smooth sine data, T = 1."""
    noise = noise if noise is not None else NoiseSpec(kind="white")
    spec = ProblemSpec(
        name="anderson",
        f=_ZERO,
        g=_IDENT,
        f_is_zero=True,
        g_is_identity=False,
        u0=lambda x: np.sin(2.0 * np.pi * x),
        u0_prime=lambda x: 2.0 * np.pi * np.cos(2.0 * np.pi * x),
        v0=lambda x: np.sin(3.0 * np.pi * x),
        noise=noise,
        T_default=1.0,
    )
    return spec.with_noise(noise)


def sine_gordon_additive(noise: NoiseSpec | None = None) -> ProblemSpec:
    """Sine-Gordon with additive noise: f = -sin, g = 1, kicked-string data.

    The initial velocity is the indicator of [1/4, 3/4] (projected in L2;
    Ritz is undefined for discontinuous data) and u0 = 0.  V(u) = 1 - cos u
    normalizes V(0) = 0 so the initial energy is exactly half the squared
    velocity norm.
    """
    noise = noise if noise is not None else NoiseSpec(kind="white")
    spec = ProblemSpec(
        name="sine-gordon-additive",
        f=lambda u: -np.sin(u),
        g=_ONE,
        f_is_zero=False,
        g_is_identity=True,
        V=lambda u: 1.0 - np.cos(u),
        u0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        u0_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        v0=_indicator(0.25, 0.75),
        v0_breakpoints=(0.25, 0.75),
        u0_projector="ritz",
        v0_projector="l2",
        noise=noise,
        T_default=0.5,
    )
    return spec.with_noise(noise)


def sine_gordon_multiplicative(noise: NoiseSpec | None = None) -> ProblemSpec:
    """Sine-Gordon with multiplicative noise g(u) = u and smooth sine data."""
    noise = noise if noise is not None else NoiseSpec(kind="white")
    spec = ProblemSpec(
        name="sine-gordon-multiplicative",
        f=lambda u: -np.sin(u),
        g=_IDENT,
        f_is_zero=False,
        g_is_identity=False,
        V=lambda u: 1.0 - np.cos(u),
        u0=lambda x: np.sin(2.0 * np.pi * x),
        u0_prime=lambda x: 2.0 * np.pi * np.cos(2.0 * np.pi * x),
        v0=lambda x: np.sin(3.0 * np.pi * x),
        noise=noise,
        T_default=0.5,
    )
    return spec.with_noise(noise)


def linear_additive(
    noise: NoiseSpec | None = None,
    u0: Callable[[np.ndarray], np.ndarray] | None = None,
    u0_prime: Callable[[np.ndarray], np.ndarray] | None = None,
    v0: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ProblemSpec:
    """Linear wave equation with additive noise: f = 0, g = 1, V = 0.

    Initial data default to zero; smooth caller-supplied fields may bring a
    derivative to enable Ritz projection of u0.
    """
    noise = noise if noise is not None else NoiseSpec(kind="power", s=2.0)
    spec = ProblemSpec(
        name="linear-additive",
        f=_ZERO,
        g=_ONE,
        f_is_zero=True,
        g_is_identity=True,
        V=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        u0=u0 if u0 is not None else lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        u0_prime=u0_prime,
        v0=v0 if v0 is not None else lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        u0_projector="ritz" if u0_prime is not None else "l2",
        noise=noise,
        T_default=5.0,
    )
    return spec.with_noise(noise)


_BUILTINS = {
    "anderson": anderson,
    "sine-gordon-additive": sine_gordon_additive,
    "sine-gordon-multiplicative": sine_gordon_multiplicative,
    "linear-additive": linear_additive,
}


def problem_names() -> tuple[str, ...]:
    return tuple(_BUILTINS)


def get_problem(name: str, noise: NoiseSpec | None = None) -> ProblemSpec:
    """Look a problem up by name, optionally overriding its noise."""
    if name in _CUSTOM:
        spec = _CUSTOM[name]
        return spec.with_noise(noise) if noise is not None else spec
    try:
        factory = _BUILTINS[name]
    except KeyError:
        known = ", ".join(list(_BUILTINS) + list(_CUSTOM))
        raise ValueError(f"unknown problem {name!r}; known: {known}") from None
    return factory(noise)


_CUSTOM: dict[str, ProblemSpec] = {}


def register_custom_problem(fields: dict) -> ProblemSpec:
    """Build a problem from expression strings and register it by name.

    Recognized keys: name (required), f, g, V (in the variable u; defaults
    f=0, g=1), u0, u0_prime, v0 (in x; default 0), T.  Registration makes
    the problem addressable by name from experiment configs, which keeps
    configs serializable across worker processes.
    """
    from .expr import is_constant_one, parse_expression

    if "name" not in fields:
        raise ValueError("custom problem needs a 'name' field")
    name = str(fields["name"])
    f_text = str(fields.get("f", "0"))
    g_text = str(fields.get("g", "1"))
    zero = lambda a: np.zeros_like(np.asarray(a, dtype=float))
    u0_prime = (
        parse_expression(str(fields["u0_prime"]), "x") if "u0_prime" in fields else None
    )
    spec = ProblemSpec(
        name=name,
        f=parse_expression(f_text, "u"),
        g=parse_expression(g_text, "u"),
        f_is_zero=f_text.strip() == "0",
        g_is_identity=is_constant_one(g_text),
        V=parse_expression(str(fields["V"]), "u") if "V" in fields else None,
        u0=parse_expression(str(fields["u0"]), "x") if "u0" in fields else zero,
        u0_prime=u0_prime,
        v0=parse_expression(str(fields["v0"]), "x") if "v0" in fields else zero,
        u0_projector="ritz" if u0_prime is not None else "l2",
        T_default=float(fields.get("T", 1.0)),
    )
    _CUSTOM[name] = spec
    return spec
