"""Static SVG charts of a sweep report.

Output is byte-stable: the SVG id salt is fixed and no date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .filters import FilterKind  # noqa: E402
from .sweep import THD_LIMIT_PCT  # noqa: E402

_RC = {"svg.hashsalt": "flyback-mi", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write plot {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _efficiency(rows, kind: FilterKind, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for r1 in sorted({r.r1_ohm for r in rows}):
        pts = sorted((r.p_out_w, r.efficiency) for r in rows if r.r1_ohm == r1)
        ax.plot([p for p, _ in pts], [e for _, e in pts], "o-", label=f"r1 = {r1:g} Ω")
    ax.set_xlabel("output power (W)")
    ax.set_ylabel("efficiency")
    ax.set_title(f"{kind.value} filter")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def _thd_bars(rows, path: Path) -> Path:
    kinds = sorted({r.filter_kind for r in rows}, key=lambda k: k.value)
    fig, axes = plt.subplots(len(kinds), 1, figsize=(6.5, 2.6 * len(kinds)), squeeze=False)
    for ax, kind in zip(axes[:, 0], kinds):
        sel = sorted((r for r in rows if r.filter_kind is kind),
                     key=lambda r: (r.r1_ohm, r.p_target_w))
        r1s = sorted({r.r1_ohm for r in sel})
        powers = sorted({r.p_target_w for r in sel})
        width = 0.8 / len(r1s)
        x = np.arange(len(powers))
        for j, r1 in enumerate(r1s):
            by_p = {r.p_target_w: r.thd_pct for r in sel if r.r1_ohm == r1}
            ax.bar(x + (j - (len(r1s) - 1) / 2) * width,
                   [by_p.get(p, np.nan) for p in powers], width, label=f"r1 = {r1:g} Ω")
        ax.axhline(THD_LIMIT_PCT, color="k", lw=0.8, ls="--")
        ax.set_xticks(x, [f"{p:g} W" for p in powers])
        ax.set_ylabel("THD (%)")
        ax.set_title(f"{kind.value} filter grid-current THD")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def render_plots(rows, destination) -> list[Path]:
    """Write ``efficiency_<filter>.svg`` per filter and ``thd.svg``.

    Failed rows are skipped. Returns the written paths.
    """
    good = [r for r in rows if r.ok]
    if not good:
        raise ValueError("no successful rows to plot")
    out = Path(destination)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create plot directory {out}: {exc}") from exc
    paths = []
    with plt.rc_context(_RC):
        for kind in sorted({r.filter_kind for r in good}, key=lambda k: k.value):
            sel = [r for r in good if r.filter_kind is kind]
            paths.append(_efficiency(sel, kind, out / f"efficiency_{kind.value.lower()}.svg"))
        paths.append(_thd_bars(good, out / "thd.svg"))
    return paths
