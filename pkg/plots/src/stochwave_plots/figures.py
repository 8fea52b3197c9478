"""The two figure kinds: log-log convergence and expected-energy drift.

Guide lines and the analytic target line carry ``gid`` tags
('guide-slope-<s>', 'target-line') so tests, and anyone post-processing
the figures, can find them in the artist tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csvio import CONVERGENCE_COLUMNS, TRACE_COLUMNS, ResultData, load_result, require_schema

_SCHEME_COLORS = {
    "STM": "tab:blue",
    "SEM": "tab:orange",
    "CNM": "tab:green",
    "EM": "tab:red",
    "BEM": "tab:purple",
}


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[str, ...]
    kind: str  # 'loglog-convergence' | 'energy-drift'
    output: str
    reference_slopes: tuple[float, ...] = ()
    title: str | None = None

    def __post_init__(self):
        if self.kind not in ("loglog-convergence", "energy-drift"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _color_for(scheme: str, fallback_index: int):
    base = scheme.split("-")[0]
    return _SCHEME_COLORS.get(base, f"C{fallback_index}")


def _curve_label(data: ResultData, scheme: str, multi: bool) -> str:
    if not multi:
        return scheme
    noise = data.config.get("noise", "")
    return f"{scheme} ({noise})" if noise else scheme


def plot_convergence(spec: PlotSpec):
    """Log2-log2 error curves with error bars and dotted reference slopes.

    Reference lines are anchored at the coarsest data point of the first
    scheme of the first input file.
    """
    datasets = [load_result(p) for p in spec.inputs]
    for data in datasets:
        require_schema(data, "convergence", CONVERGENCE_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    anchor = None
    idx = 0
    for data in datasets:
        for scheme in data.schemes():
            xs, ys, es = data.series(scheme)
            if not xs:
                continue
            lx, ly = np.log2(xs), np.log2(ys)
            # symmetric log-error bars from the absolute standard errors
            bars = np.array(es) / (np.array(ys) * np.log(2.0))
            ax.errorbar(
                lx, ly, yerr=bars,
                marker="o", markersize=4, capsize=2,
                color=_color_for(scheme, idx),
                label=_curve_label(data, scheme, len(datasets) > 1),
            )
            if anchor is None:
                coarse = int(np.argmax(lx))
                anchor = (lx[coarse], ly[coarse])
            idx += 1
    if anchor is None:
        raise ValueError("no finite data to plot")
    all_x = np.concatenate(
        [np.log2(data.series(s)[0]) for data in datasets for s in data.schemes() if data.series(s)[0]]
    )
    span = np.array([all_x.min(), all_x.max()])
    for s in spec.reference_slopes:
        ax.plot(
            span, anchor[1] + s * (span - anchor[0]),
            linestyle=":", color="0.4", linewidth=1.2,
            gid=f"guide-slope-{s:g}", label=f"slope {s:g}",
        )
    ax.set_xlabel("log2(resolution)")
    ax.set_ylabel("log2(mean-square error)")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, spec.output)
    return fig


def plot_energy(spec: PlotSpec):
    """Expected Hamiltonian traces plus the straight drift target line.

    The target is H(0) + t * target_slope with the slope taken from the
    file's fit footers.
    """
    datasets = [load_result(p) for p in spec.inputs]
    for data in datasets:
        require_schema(data, "trace", TRACE_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    target_drawn = False
    idx = 0
    for data in datasets:
        for scheme in data.schemes():
            ts, hs, es = data.series(scheme)
            ax.plot(ts, hs, color=_color_for(scheme, idx),
                    label=_curve_label(data, scheme, len(datasets) > 1), linewidth=1.2)
            es = np.asarray(es)
            if np.any(es > 0):
                ax.fill_between(ts, np.asarray(hs) - es, np.asarray(hs) + es,
                                color=_color_for(scheme, idx), alpha=0.15, linewidth=0)
            if not target_drawn:
                footer = data.footer_for(scheme)
                target = footer.get("target_slope")
                if target is not None:
                    t = np.asarray(ts)
                    ax.plot(
                        t, hs[0] + target * t,
                        linestyle="--", color="black", linewidth=1.0,
                        gid="target-line", label="drift target",
                    )
                    target_drawn = True
            idx += 1
    ax.set_xlabel("t")
    ax.set_ylabel("expected energy")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, spec.output)
    return fig


def render_result_file(input_path: str, output_path: str, reference_slopes=(), title=None):
    """Render one result file, inferring the figure kind from its header."""
    data = load_result(input_path)
    kind = "energy-drift" if data.kind == "trace" else "loglog-convergence"
    spec = PlotSpec(
        inputs=(input_path,), kind=kind, output=output_path,
        reference_slopes=tuple(reference_slopes), title=title,
    )
    if kind == "energy-drift":
        return plot_energy(spec)
    return plot_convergence(spec)


def _save(fig, output: str) -> None:
    path = Path(output)
    if path.parent and not path.parent.exists():
        raise ValueError(f"output directory {path.parent} does not exist")
    fig.savefig(path, dpi=150)
    plt.close(fig)
