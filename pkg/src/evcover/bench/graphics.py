"""Plan rendering: DOT text and matplotlib figures."""

from __future__ import annotations

import math

import numpy as np

from ..instance import PlanningInstance, StationPlan


def _quote(text: str, newline: bool = False) -> str:
    text = text.replace("\\", "\\\\").replace('"', '\\"')
    return '"' + (text.replace("\n", "\\n") if newline else text) + '"'


def export_plan_graphics(instance: PlanningInstance, plan: StationPlan | None = None) -> str:
    """Undirected DOT graph; open sites get ``selected=true`` and their unit count."""
    ids = instance.node_ids
    labels = instance.network.labels
    opened = set(plan.open) if plan is not None else set()
    counts = dict(plan.counts) if plan is not None else {}
    lines = ["graph plan {", "  node [shape=circle];"]
    if plan is not None:
        lines.insert(1, f"  label={_quote(f'{plan.method}: {plan.node_count} sites')};")
    for k, node_id in enumerate(ids):
        text = labels[k] if labels and labels[k] else str(node_id)
        attrs = []
        if node_id in opened:
            c = counts.get(node_id)
            if c:
                text = f"{text}\nx={c}"
            attrs += ["selected=true", "style=filled", "fillcolor=\"#f4a259\""]
        attrs.insert(0, f"label={_quote(text, newline=True)}")
        lines.append(f"  n{node_id} [{', '.join(attrs)}];")
    for u, v, w in instance.network.arcs:
        lines.append(f"  n{ids[u]} -- n{ids[v]} [label={_quote(f'{w:g}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _layout(instance: PlanningInstance) -> np.ndarray:
    if instance.network.positions is not None:
        return np.asarray(instance.network.positions, dtype=float)
    n = instance.n
    cols = max(1, math.ceil(math.sqrt(n)))
    return np.array([(k % cols, -(k // cols)) for k in range(n)], dtype=float)


def plot_plan(instance: PlanningInstance, plan: StationPlan, path, title: str | None = None):
    """Draw the network with open sites highlighted and sized by unit count."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pos = _layout(instance)
    x = plan.count_vector(instance) if plan.counts else plan.open_vector(instance)
    y = plan.open_vector(instance) > 0
    fig, ax = plt.subplots(figsize=(6, 6))
    for u, v, _ in instance.network.arcs:
        ax.plot(pos[[u, v], 0], pos[[u, v], 1], color="0.75", lw=0.8, zorder=1)
    ax.scatter(pos[~y, 0], pos[~y, 1], s=30, color="0.55", zorder=2, label="closed")
    ax.scatter(pos[y, 0], pos[y, 1], s=40 + 25 * x[y], color="#d1495b", zorder=3, label="open")
    if instance.n <= 60:
        for k, node_id in enumerate(instance.node_ids):
            ax.annotate(str(node_id), pos[k], fontsize=7, ha="center", va="center",
                        xytext=(0, 9), textcoords="offset points")
    ax.set_title(title or f"{plan.method}: {plan.node_count} sites, "
                          f"attractiveness {plan.attractiveness:g}, cost {plan.cost:g}")
    ax.set_aspect("equal")
    ax.axis("off")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_benchmark(rows, path):
    """Two panels per instance: open-site counts and attractiveness per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(rows)
    names = [r.instance for r in rows]
    idx = np.arange(len(rows))
    width = 0.27
    series = (("H", "nh", "ah", "#00798c"), ("E1", "ne1", "ae1", "#edae49"),
              ("E2", "ne2", "ae2", "#d1495b"))
    fig, axes = plt.subplots(2, 1, figsize=(max(6, 0.45 * len(rows) + 2), 7), sharex=True)
    for i, (label, nk, ak, color) in enumerate(series):
        nv = [np.nan if getattr(r, nk) is None else getattr(r, nk) for r in rows]
        av = [np.nan if getattr(r, ak) is None else getattr(r, ak) for r in rows]
        axes[0].bar(idx + (i - 1) * width, nv, width, label=label, color=color)
        axes[1].bar(idx + (i - 1) * width, av, width, label=label, color=color)
    axes[0].set_ylabel("open sites")
    axes[1].set_ylabel("attractiveness")
    axes[1].set_yscale("symlog")
    axes[0].legend(fontsize=8)
    axes[1].set_xticks(idx)
    axes[1].set_xticklabels(names, rotation=70, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
