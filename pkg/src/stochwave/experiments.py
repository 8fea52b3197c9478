"""Monte-Carlo drivers: convergence studies and expected-energy drift runs.

Samples are independent work units identified by a global index; all noise
is derived from (master seed, sample index, fine-step index), so results do
not depend on how samples are grouped into batches.  Batches advance as
matrix-valued states (one column per sample).  Reductions operate on
per-sample arrays assembled in index order, which makes merging partial
batches exact.

Set the environment variable STOCHWAVE_WORKERS to spread batches over a
process pool; per-sample statistics are identical up to floating-point
reassociation in the batched matrix products (<= 1e-12 relative).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__ as _version
from .errors import NumericalFailure
from .fem import QUADRATURE_POINTS, build_mesh, nested_interpolation
from .integrators import (
    SCHEME_LABELS,
    SCHEMES,
    DiscreteProblem,
    SchemeConfig,
    State,
    make_step,
)
from .noise import NoiseSpec, PathCoupling, trace_projected
from .observables import ObservableSet, record_observables
from .problems import get_problem

WORKERS_ENV = "STOCHWAVE_WORKERS"


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """Ordinary least squares y = slope * x + intercept with RMS residual.

    Callers pass log2-resolutions and log2-errors; at least three finite
    points are required.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("fit_slope expects two equally long 1-d sequences")
    if xs.size < 3:
        raise ValueError(f"slope fit needs at least 3 points, got {xs.size}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("slope fit requires finite values")
    A = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    residual = float(np.sqrt(np.mean((ys - slope * xs - intercept) ** 2)))
    return SlopeFit(slope=float(slope), intercept=float(intercept), residual=residual)


@dataclass(frozen=True)
class ConvergenceConfig:
    """Ladder study in space or time; resolutions are dyadic exponents.

    For spatial mode the ladder lists mesh levels (h = 2^-level) and the
    reference mesh is 2^-h_exact_level; every run uses k = 2^-k_exact_level.
    For temporal mode the ladder lists step levels, the mesh is fixed at
    2^-h_exact_level and the reference integrates at 2^-k_exact_level.
    """

    problem: str
    mode: str
    ladder: tuple[int, ...]
    h_exact_level: int
    k_exact_level: int
    T: float
    M: int
    seed: int
    schemes: tuple[str, ...] = ("stm",)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    velocity_errors: bool = False

    def __post_init__(self):
        if self.mode not in ("spatial", "temporal"):
            raise ValueError("mode must be 'spatial' or 'temporal'")
        if not self.ladder:
            raise ValueError("resolution ladder must not be empty")
        if self.M < 2:
            raise ValueError("sample count M must be at least 2")
        if self.T <= 0:
            raise ValueError("T must be positive")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")
        ref = self.h_exact_level if self.mode == "spatial" else self.k_exact_level
        if ref <= max(self.ladder):
            raise ValueError("the reference resolution must be strictly finer than the ladder")


@dataclass(frozen=True)
class TraceConfig:
    """Expected-energy drift run; requires an additive-noise problem."""

    problem: str
    h: float
    k: float
    T: float
    M: int
    seed: int
    schemes: tuple[str, ...] = ("stm", "sem", "cnm")
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(kind="power", s=2.0))

    def __post_init__(self):
        if self.h <= 0 or self.k <= 0 or self.T <= 0:
            raise ValueError("h, k and T must be positive")
        if self.M < 2:
            raise ValueError("sample count M must be at least 2")
        n = round(1.0 / self.h)
        if n < 2 or abs(n * self.h - 1.0) > 1e-9:
            raise ValueError(f"h={self.h} does not tile (0, 1) into at least two cells")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")


@dataclass
class ExperimentResult:
    """Tabular outcome plus fit footers and full provenance."""

    kind: str
    config: dict
    columns: tuple[str, ...]
    rows: list[tuple]
    footers: list[dict]
    provenance: dict


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _sample_ranges(M: int, workers: int) -> list[tuple[int, int]]:
    n_chunks = min(workers, M)
    bounds = np.linspace(0, M, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_chunks(fn, cfg, M: int) -> list:
    workers = _worker_count()
    ranges = _sample_ranges(M, workers)
    if workers == 1 or len(ranges) == 1:
        return [fn(cfg, r) for r in ranges]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * len(ranges), ranges))


def _error_stats(sq_errors: np.ndarray) -> tuple[float, float]:
    """Mean-square error as sqrt(E[e^2]) with a delta-method standard error."""
    mean_sq = float(np.mean(sq_errors))
    err = float(np.sqrt(mean_sq))
    if sq_errors.size < 2 or err == 0.0:
        return err, 0.0
    with np.errstate(over="ignore"):  # blown-up rungs can overflow the variance
        se_sq = float(np.std(sq_errors, ddof=1) / np.sqrt(sq_errors.size))
    return err, se_sq / (2.0 * err)


def _provenance(seed: int, J: int, extra: dict | None = None) -> dict:
    out = {
        "tool_version": _version,
        "seed": seed,
        "noise_truncation": J,
        "quadrature_order": QUADRATURE_POINTS,
    }
    if extra:
        out.update(extra)
    return out


def _reduce_convergence(cfg, chunks, resolution, finer_first: bool):
    """Assemble error rows and slope footers from per-chunk squared errors.

    A rung whose squared errors are missing or non-finite (a blown-up
    scheme, or a squared norm that itself overflowed) is reported as
    diverged and excluded from its fit.  With velocity errors enabled a
    second set of rows and footers labeled '<SCHEME>-u2' is produced.
    """
    rows, footers = [], []
    components = [(0, "")] + ([(1, "-u2")] if cfg.velocity_errors else [])
    order = sorted(cfg.ladder) if finer_first else sorted(cfg.ladder, reverse=True)
    for scheme in cfg.schemes:
        for comp, suffix in components:
            label = SCHEME_LABELS[scheme] + suffix
            res_vals, errs, diverged = [], [], []
            for level in order:
                parts = [c[(scheme, level)] for c in chunks]
                r = resolution(level)
                sq = (
                    None
                    if any(p is None for p in parts)
                    else np.concatenate([p[comp] for p in parts])
                )
                if sq is None or not np.all(np.isfinite(sq)):
                    rows.append((r, label, float("nan"), float("nan")))
                    diverged.append(level)
                    continue
                err, se = _error_stats(sq)
                rows.append((r, label, err, se))
                res_vals.append(r)
                errs.append(err)
            footer = {"scheme": label}
            if diverged:
                footer["diverged_levels"] = list(diverged)
            if len(res_vals) >= 3 and all(e > 0 for e in errs):
                fit = fit_slope(np.log2(res_vals), np.log2(errs))
                footer.update(slope=fit.slope, intercept=fit.intercept, residual=fit.residual)
            else:
                footer.update(slope=float("nan"))
            footers.append(footer)
    return rows, footers


# -- spatial convergence -------------------------------------------------------


def _spatial_chunk(cfg: ConvergenceConfig, sample_range: tuple[int, int]) -> dict:
    lo, hi = sample_range
    samples = tuple(range(lo, hi))
    problem = get_problem(cfg.problem, cfg.noise)
    ref_mesh = build_mesh(2**cfg.h_exact_level)
    model = cfg.noise.resolve(ref_mesh.n_dofs)
    k = 2.0**-cfg.k_exact_level
    n_steps = int(round(cfg.T / k))
    coupling = PathCoupling(
        model=model, master_seed=cfg.seed, finest_dt=k, n_fine=n_steps, samples=samples
    )
    ref_dp = DiscreteProblem(problem, ref_mesh, model)
    ref_cfg = SchemeConfig(scheme="stm", k=k)
    ref_state = _run_batch(ref_dp, ref_cfg, n_steps, coupling)
    out: dict = {}
    for level in cfg.ladder:
        mesh = build_mesh(2**level)
        dp = DiscreteProblem(problem, mesh, model)
        lift = nested_interpolation(mesh, ref_mesh)
        for scheme in cfg.schemes:
            try:
                state = _run_batch(dp, SchemeConfig(scheme=scheme, k=k), n_steps, coupling)
            except NumericalFailure:
                out[(scheme, level)] = None
                continue
            d1 = lift @ state.u1 - ref_state.u1
            sq = np.einsum("ib,ib->b", d1, ref_dp.ops.mass @ d1)
            if cfg.velocity_errors:
                d2 = lift @ state.u2 - ref_state.u2
                sq_v = np.einsum("ib,ib->b", d2, ref_dp.ops.mass @ d2)
                out[(scheme, level)] = (sq, sq_v)
            else:
                out[(scheme, level)] = (sq, None)
    return out


def _run_batch(dp: DiscreteProblem, scheme_cfg: SchemeConfig, n_steps: int, coupling: PathCoupling) -> State:
    state = dp.tiled_initial_state(len(coupling.samples))
    step = make_step(scheme_cfg)
    for inc in coupling.increments(scheme_cfg.k):
        state = step(state, dp, inc)
    return state


def run_spatial_convergence(cfg: ConvergenceConfig) -> ExperimentResult:
    """Mean-square spatial errors against a fine-mesh reference trajectory.

    Every resolution is driven by the same spectral noise coefficients; the
    coarse solution is lifted to the reference mesh (exact for nested
    piecewise-linear spaces) and measured in its mass norm.
    """
    if cfg.mode != "spatial":
        raise ValueError("config mode must be 'spatial'")
    ref_dofs = 2**cfg.h_exact_level - 1
    model = cfg.noise.resolve(ref_dofs)
    chunks = _map_chunks(_spatial_chunk, cfg, cfg.M)
    rows, footers = _reduce_convergence(cfg, chunks, resolution=lambda lev: 2.0**-lev, finer_first=False)
    return ExperimentResult(
        kind="convergence",
        config=_config_dict(cfg),
        columns=("resolution", "scheme", "ms_error", "stderr"),
        rows=rows,
        footers=footers,
        provenance=_provenance(cfg.seed, model.variances.shape[0]),
    )


# -- temporal convergence --------------------------------------------------------


def _temporal_chunk(cfg: ConvergenceConfig, sample_range: tuple[int, int]) -> dict:
    lo, hi = sample_range
    samples = tuple(range(lo, hi))
    problem = get_problem(cfg.problem, cfg.noise)
    mesh = build_mesh(2**cfg.h_exact_level)
    model = cfg.noise.resolve(mesh.n_dofs)
    dp = DiscreteProblem(problem, mesh, model)
    k_fine = 2.0**-cfg.k_exact_level
    n_fine = int(round(cfg.T / k_fine))
    coupling = PathCoupling(
        model=model, master_seed=cfg.seed, finest_dt=k_fine, n_fine=n_fine, samples=samples
    )
    ref = _run_batch(dp, SchemeConfig(scheme="stm", k=k_fine), n_fine, coupling)
    out: dict = {}
    for level in cfg.ladder:
        k = 2.0**-level
        n_steps = int(round(cfg.T / k))
        for scheme in cfg.schemes:
            try:
                state = _run_batch(dp, SchemeConfig(scheme=scheme, k=k), n_steps, coupling)
            except NumericalFailure:
                out[(scheme, level)] = None
                continue
            d1 = state.u1 - ref.u1
            sq = np.einsum("ib,ib->b", d1, dp.ops.mass @ d1)
            if cfg.velocity_errors:
                d2 = state.u2 - ref.u2
                out[(scheme, level)] = (sq, np.einsum("ib,ib->b", d2, dp.ops.mass @ d2))
            else:
                out[(scheme, level)] = (sq, None)
    return out


def run_temporal_convergence(cfg: ConvergenceConfig) -> ExperimentResult:
    """Mean-square errors at T against the trigonometric reference in k.

    The mesh is fixed; each ladder step consumes coarse increments that are
    exact sums of the reference's fine ones.  A scheme that produces a
    non-finite state at some resolution is reported as diverged there and
    left out of its slope fit.
    """
    if cfg.mode != "temporal":
        raise ValueError("config mode must be 'temporal'")
    model = cfg.noise.resolve(2**cfg.h_exact_level - 1)
    chunks = _map_chunks(_temporal_chunk, cfg, cfg.M)
    rows, footers = _reduce_convergence(cfg, chunks, resolution=lambda lev: 2.0**-lev, finer_first=True)
    return ExperimentResult(
        kind="convergence",
        config=_config_dict(cfg),
        columns=("resolution", "scheme", "ms_error", "stderr"),
        rows=rows,
        footers=footers,
        provenance=_provenance(cfg.seed, model.variances.shape[0]),
    )


# -- trace formula ---------------------------------------------------------------


def _trace_chunk(cfg: TraceConfig, sample_range: tuple[int, int]) -> dict:
    lo, hi = sample_range
    samples = tuple(range(lo, hi))
    problem = get_problem(cfg.problem, cfg.noise)
    mesh = build_mesh(round(1.0 / cfg.h))
    model = cfg.noise.resolve(mesh.n_dofs)
    dp = DiscreteProblem(problem, mesh, model)
    n_steps = int(round(cfg.T / cfg.k))
    coupling = PathCoupling(
        model=model, master_seed=cfg.seed, finest_dt=cfg.k, n_fine=n_steps, samples=samples
    )
    obs = ObservableSet(hamiltonian=True)
    steps = {s: make_step(SchemeConfig(scheme=s, k=cfg.k)) for s in cfg.schemes}
    states = {s: dp.tiled_initial_state(len(samples)) for s in cfg.schemes}
    H = {s: np.empty((n_steps + 1, len(samples))) for s in cfg.schemes}
    alive = {s: True for s in cfg.schemes}
    for s in cfg.schemes:
        H[s][0] = record_observables(states[s], dp, obs)["hamiltonian"]
    with np.errstate(over="ignore", invalid="ignore"):
        for n, inc in enumerate(coupling.increments(cfg.k)):
            for s in cfg.schemes:
                if not alive[s]:
                    H[s][n + 1] = np.nan
                    continue
                try:
                    states[s] = steps[s](states[s], dp, inc)
                    H[s][n + 1] = record_observables(states[s], dp, obs)["hamiltonian"]
                except NumericalFailure:
                    alive[s] = False
                    H[s][n + 1 :] = np.nan
    return {s: H[s] for s in cfg.schemes}


def run_trace(cfg: TraceConfig) -> ExperimentResult:
    """Expected Hamiltonian along each scheme, with the exact drift target.

    All schemes see identical increments.  The footer records each scheme's
    least-squares drift slope over the full window next to the target
    slope Tr(P_h Q P_h) / 2; the expected-energy drift of the underlying
    equation is only tractable for additive noise, so multiplicative
    problems are rejected.
    """
    problem = get_problem(cfg.problem, cfg.noise)
    if not problem.g_is_identity:
        raise ValueError(
            f"problem {cfg.problem!r} has multiplicative noise; the expected-energy "
            "drift has no closed-form target, so trace runs require g = 1"
        )
    mesh = build_mesh(round(1.0 / cfg.h))
    model = cfg.noise.resolve(mesh.n_dofs)
    dp = DiscreteProblem(problem, mesh, model)
    target = 0.5 * trace_projected(model, mesh, dp.ops)
    n_steps = int(round(cfg.T / cfg.k))
    times = np.arange(n_steps + 1) * cfg.k
    chunks = _map_chunks(_trace_chunk, cfg, cfg.M)
    rows, footers = [], []
    for scheme in cfg.schemes:
        allH = np.concatenate([c[scheme] for c in chunks], axis=1)  # (n_steps+1, M)
        mean = allH.mean(axis=1)
        stderr = allH.std(axis=1, ddof=1) / np.sqrt(allH.shape[1])
        label = SCHEME_LABELS[scheme]
        rows.extend((float(t), label, float(m), float(se)) for t, m, se in zip(times, mean, stderr))
        footer = {"scheme": label, "target_slope": target}
        if np.all(np.isfinite(mean)):
            fit = fit_slope(times, mean)
            footer.update(slope=fit.slope, intercept=fit.intercept, residual=fit.residual)
        else:
            footer.update(slope=float("nan"), diverged=True)
        footers.append(footer)
    return ExperimentResult(
        kind="trace",
        config=_config_dict(cfg),
        columns=("time", "scheme", "mean_H", "stderr_H"),
        rows=rows,
        footers=footers,
        provenance=_provenance(cfg.seed, model.variances.shape[0], {"trace_projected": 2.0 * target}),
    )


# -- single trajectory -------------------------------------------------------------


def run_single(
    problem_name: str,
    scheme: str,
    h: float,
    k: float,
    T: float,
    seed: int,
    observables: ObservableSet,
    noise: NoiseSpec | None = None,
) -> ExperimentResult:
    """One sample path with observables recorded at every step."""
    problem = get_problem(problem_name, noise)
    mesh = build_mesh(round(1.0 / h))
    model = problem.noise.resolve(mesh.n_dofs)
    dp = DiscreteProblem(problem, mesh, model)
    n_steps = int(round(T / k))
    coupling = PathCoupling(
        model=model, master_seed=seed, finest_dt=k, n_fine=n_steps, samples=(0,)
    )
    from .integrators import integrate

    state0 = dp.tiled_initial_state(1)
    _, series = integrate(
        dp,
        SchemeConfig(scheme=scheme, k=k),
        n_steps,
        coupling.increments(k),
        record=observables,
        state0=state0,
    )
    names = observables.names()
    rows = []
    for i, t in enumerate(series["time"]):
        rows.append((float(t),) + tuple(float(np.ravel(series[n][i])[0]) for n in names))
    cfg = {
        "experiment": "single-run",
        "problem": problem_name,
        "scheme": scheme,
        "h": h,
        "k": k,
        "T": T,
        "M": 1,
        "seed": seed,
        "noise": problem.noise.label(),
        "J": model.variances.shape[0],
        "observables": list(names),
    }
    return ExperimentResult(
        kind="single-run",
        config=cfg,
        columns=("time",) + names,
        rows=rows,
        footers=[],
        provenance=_provenance(seed, model.variances.shape[0]),
    )


def _config_dict(cfg) -> dict:
    if isinstance(cfg, ConvergenceConfig):
        return {
            "experiment": "convergence-space" if cfg.mode == "spatial" else "convergence-time",
            "mode": cfg.mode,
            "problem": cfg.problem,
            "ladder": list(cfg.ladder),
            "h_exact_level": cfg.h_exact_level,
            "k_exact_level": cfg.k_exact_level,
            "T": cfg.T,
            "M": cfg.M,
            "seed": cfg.seed,
            "schemes": [SCHEME_LABELS[s] for s in cfg.schemes],
            "noise": cfg.noise.label(),
            "J": cfg.noise.J,
            "velocity_errors": cfg.velocity_errors,
        }
    if isinstance(cfg, TraceConfig):
        return {
            "experiment": "trace",
            "problem": cfg.problem,
            "h": cfg.h,
            "k": cfg.k,
            "T": cfg.T,
            "M": cfg.M,
            "seed": cfg.seed,
            "schemes": [SCHEME_LABELS[s] for s in cfg.schemes],
            "noise": cfg.noise.label(),
            "J": cfg.noise.J,
        }
    raise TypeError(f"unsupported config type {type(cfg)!r}")
