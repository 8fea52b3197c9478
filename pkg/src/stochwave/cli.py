"""Command-line entry point.

Subcommands mirror the experiment drivers: ``convergence-space``,
``convergence-time``, ``trace`` and ``single-run``.  Every run writes one
result file with the full configuration echoed in its header; rerunning
with the echoed seed reproduces the output numerically.  ``--plot``
renders a figure next to the output file when the separate
``stochwave-plots`` package is installed.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from .errors import NumericalFailure
from .experiments import (
    ConvergenceConfig,
    TraceConfig,
    run_single,
    run_spatial_convergence,
    run_temporal_convergence,
    run_trace,
)
from .integrators import SCHEMES
from .noise import NoiseSpec, parse_noise_spec
from .observables import ObservableSet
from .problems import problem_names, register_custom_problem
from .resultfile import write_result

_PAPER_M = 2500


def _parse_levels(text: str) -> tuple[int, ...]:
    """'2:6' -> (2,3,4,5,6); '2,3,5' -> (2,3,5)."""
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(","))


def _parse_schemes(text: str) -> tuple[str, ...]:
    out = tuple(s.strip().lower() for s in text.split(","))
    for s in out:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}; known: {', '.join(SCHEMES)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochwave",
        description="Finite-element / trigonometric-integrator simulation of the "
        "semilinear stochastic wave equation on (0, 1).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_problem, default_M):
        p.add_argument("--problem", default=None, help=f"one of {', '.join(problem_names())} or a custom name from --config (default {default_problem})")
        p.add_argument("--noise", default=None, help="white | off | power:<s>")
        p.add_argument("--J", type=int, default=None, help="noise truncation override")
        p.add_argument("--T", type=float, default=None, help="end time")
        p.add_argument("--M", type=int, default=None, help=f"Monte-Carlo sample count (default {default_M})")
        p.add_argument("--seed", type=int, default=None, help="master seed (echoed; drawn from entropy if omitted)")
        p.add_argument("--schemes", default=None, help="comma list from: " + ",".join(SCHEMES))
        p.add_argument("--output", "-o", default=None, help="result file path")
        p.add_argument("--config", default=None, help="JSON file with defaults and optional inline problem")
        p.add_argument("--paper-scale", action="store_true", help="use the full-size experiment parameters")
        p.add_argument("--plot", action="store_true", help="render a figure next to the output (needs stochwave-plots)")

    p = sub.add_parser("convergence-space", help="spatial mean-square convergence study")
    common(p, "anderson", 200)
    p.add_argument("--levels", default=None, help="ladder of mesh levels, e.g. 2:6 (h = 2^-level)")
    p.add_argument("--h-exact-level", type=int, default=None, help="reference mesh level")
    p.add_argument("--k-exact-level", type=int, default=None, help="time-step level used everywhere")
    p.add_argument("--velocity-errors", action="store_true", help="also report velocity errors")

    p = sub.add_parser("convergence-time", help="temporal mean-square convergence study")
    common(p, "sine-gordon-additive", 200)
    p.add_argument("--k-levels", default=None, help="ladder of step levels, e.g. 4:8 (k = 2^-level)")
    p.add_argument("--k-exact-level", type=int, default=None, help="reference step level")
    p.add_argument("--h-level", type=int, default=None, help="mesh level used everywhere")
    p.add_argument("--velocity-errors", action="store_true", help="also report velocity errors")

    p = sub.add_parser("trace", help="expected-energy drift run")
    common(p, "sine-gordon-additive", 2000)
    p.add_argument("--h", type=float, default=None, help="mesh width (1/h must be an integer)")
    p.add_argument("--k", type=float, default=None, help="time step")

    p = sub.add_parser("single-run", help="one trajectory with recorded observables")
    common(p, "sine-gordon-additive", 1)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--scheme", default="stm")
    p.add_argument(
        "--observables",
        default="hamiltonian",
        help="comma list: hamiltonian,l2_norm_u1,l2_norm_u2,energy_seminorm,modal:<m>",
    )
    return parser


def _load_config_file(args) -> dict:
    if not args.config:
        return {}
    data = json.loads(Path(args.config).read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    inline = data.pop("problem_spec", None)
    if inline is not None:
        spec = register_custom_problem(inline)
        data.setdefault("problem", spec.name)
    return data


def _setting(args, file_cfg, key, default):
    """CLI flag wins, then config file, then the default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in file_cfg:
        return file_cfg[key]
    return default


def _resolve_noise(args, file_cfg, default: str) -> NoiseSpec:
    text = _setting(args, file_cfg, "noise", default)
    J = _setting(args, file_cfg, "J", None)
    return parse_noise_spec(text, J)


def _resolve_seed(args, file_cfg) -> int:
    seed = _setting(args, file_cfg, "seed", None)
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed drawn from entropy: {seed}", file=sys.stderr)
    return int(seed)


def _observable_set(text: str) -> ObservableSet:
    flags = {"hamiltonian": False, "l2_norm_u1": False, "l2_norm_u2": False, "energy_seminorm": False}
    modal = 0
    for part in text.split(","):
        part = part.strip()
        if part.startswith("modal:"):
            modal = int(part.split(":", 1)[1])
        elif part in flags:
            flags[part] = True
        else:
            raise ValueError(f"unknown observable {part!r}")
    return ObservableSet(modal_energies=modal, **flags)


def _run(args) -> tuple:
    file_cfg = _load_config_file(args)
    seed = _resolve_seed(args, file_cfg)
    command = args.command

    if command == "convergence-space":
        paper = args.paper_scale
        cfg = ConvergenceConfig(
            problem=_setting(args, file_cfg, "problem", "anderson"),
            mode="spatial",
            ladder=_parse_levels(_setting(args, file_cfg, "levels", "2:8" if paper else "2:6")),
            h_exact_level=int(_setting(args, file_cfg, "h_exact_level", 9 if paper else 8)),
            k_exact_level=int(_setting(args, file_cfg, "k_exact_level", 9)),
            T=float(_setting(args, file_cfg, "T", 1.0)),
            M=int(_setting(args, file_cfg, "M", _PAPER_M if paper else 200)),
            seed=seed,
            schemes=_parse_schemes(_setting(args, file_cfg, "schemes", "stm")),
            noise=_resolve_noise(args, file_cfg, "white"),
            velocity_errors=bool(getattr(args, "velocity_errors", False) or file_cfg.get("velocity_errors", False)),
        )
        return run_spatial_convergence(cfg), _setting(args, file_cfg, "output", "convergence_space.csv")

    if command == "convergence-time":
        paper = args.paper_scale
        cfg = ConvergenceConfig(
            problem=_setting(args, file_cfg, "problem", "sine-gordon-additive"),
            mode="temporal",
            ladder=_parse_levels(_setting(args, file_cfg, "k_levels", "4:8")),
            h_exact_level=int(_setting(args, file_cfg, "h_level", 9 if paper else 6)),
            k_exact_level=int(_setting(args, file_cfg, "k_exact_level", 11)),
            T=float(_setting(args, file_cfg, "T", 0.5)),
            M=int(_setting(args, file_cfg, "M", _PAPER_M if paper else 200)),
            seed=seed,
            schemes=_parse_schemes(_setting(args, file_cfg, "schemes", "stm,sem,cnm")),
            noise=_resolve_noise(args, file_cfg, "white"),
            velocity_errors=bool(getattr(args, "velocity_errors", False) or file_cfg.get("velocity_errors", False)),
        )
        return run_temporal_convergence(cfg), _setting(args, file_cfg, "output", "convergence_time.csv")

    if command == "trace":
        paper = args.paper_scale
        cfg = TraceConfig(
            problem=_setting(args, file_cfg, "problem", "sine-gordon-additive"),
            h=float(_setting(args, file_cfg, "h", 0.1)),
            k=float(_setting(args, file_cfg, "k", 0.01)),
            T=float(_setting(args, file_cfg, "T", 5.0)),
            M=int(_setting(args, file_cfg, "M", _PAPER_M if paper else 2000)),
            seed=seed,
            schemes=_parse_schemes(_setting(args, file_cfg, "schemes", "stm,em,sem,bem,cnm")),
            noise=_resolve_noise(args, file_cfg, "power:2"),
        )
        return run_trace(cfg), _setting(args, file_cfg, "output", "trace.csv")

    if command == "single-run":
        result = run_single(
            problem_name=_setting(args, file_cfg, "problem", "sine-gordon-additive"),
            scheme=str(_setting(args, file_cfg, "scheme", "stm")).lower(),
            h=float(_setting(args, file_cfg, "h", 0.1)),
            k=float(_setting(args, file_cfg, "k", 0.01)),
            T=float(_setting(args, file_cfg, "T", 5.0)),
            seed=seed,
            observables=_observable_set(_setting(args, file_cfg, "observables", "hamiltonian")),
            noise=_resolve_noise(args, file_cfg, "power:2"),
        )
        return result, _setting(args, file_cfg, "output", "single_run.csv")

    raise ValueError(f"unknown command {command!r}")


def _maybe_plot(args, csv_path: Path) -> None:
    if not args.plot:
        return
    try:
        from stochwave_plots import render_result_file
    except ImportError:
        raise ValueError(
            "--plot needs the stochwave-plots package (pip install ./plots)"
        ) from None
    image = csv_path.with_suffix(".png")
    render_result_file(str(csv_path), str(image))
    print(f"wrote {image}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result, output = _run(args)
        path = write_result(result, output)
        print(f"wrote {path}")
        for footer in result.footers:
            print("  " + json.dumps(footer, sort_keys=True))
        _maybe_plot(args, path)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
