"""Figure rendering for the report path: each figure is written as a PNG
next to its long-format CSV."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_POLICY_STYLE = {"basic": ("tab:red", "o"),
                 "e2e": ("tab:orange", "s"),
                 "elastic": ("tab:green", "^")}

_FIG_LABELS = {
    "latency": ("Mean end-to-end latency", "latency [ms]"),
    "availability": ("Communication service availability", "Pr(A > 0.99)"),
    "qos": ("Emergency packets meeting QoS", "fraction meeting QoS"),
}


def render_figure(rows: list[dict], figure: str, path: str) -> None:
    title, ylabel = _FIG_LABELS[figure]
    slice_types = sorted({r["slice_type"] for r in rows})
    fig, axes = plt.subplots(1, len(slice_types), sharey=True,
                             figsize=(4.5 * len(slice_types), 3.6), squeeze=False)
    for ax, st in zip(axes[0], slice_types):
        for policy, (color, marker) in _POLICY_STYLE.items():
            pts = [(r["active_fraction"], r["value"], r["ci95"])
                   for r in rows if r["policy"] == policy and r["slice_type"] == st]
            if not pts:
                continue
            pts.sort()
            xs = [p[0] * 100 for p in pts]
            ys = [p[1] for p in pts]
            es = [p[2] if p[2] == p[2] else 0.0 for p in pts]
            ax.errorbar(xs, ys, yerr=es, color=color, marker=marker,
                        capsize=2, label=policy)
        ax.set_title(st)
        ax.set_xlabel("active RGs [%]")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel(ylabel)
    axes[0][0].legend()
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
