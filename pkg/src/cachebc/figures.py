"""Figure rendering for the report commands.

Each report command can drop a PNG next to its delimited output; the CSV
stays the primary, plot-ready artifact. Uses the Agg backend so rendering
works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_sweep(rows: list[dict], axis: str, path: str) -> None:
    """Delivery-time and DoF curves along the sweep axis."""
    xs = [float(r[axis]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for key, label in [("T_simple", "T simple"), ("T_best", "T best"), ("T_lower", "T lower")]:
        ys = [r[key] for r in rows]
        pts = [(x, float(y)) for x, y in zip(xs, ys) if y is not None]
        if pts:
            ax1.plot(*zip(*pts), marker="o", label=label)
    ax1.set_xlabel(axis)
    ax1.set_ylabel("normalized delivery time")
    ax1.legend()
    ax1.grid(True, alpha=0.3)

    for key, label in [("dof", "dof"), ("dof_log", "dof (log approx)")]:
        ys = [r.get(key) for r in rows]
        pts = [(x, float(y)) for x, y in zip(xs, ys) if y is not None]
        if pts:
            ax2.plot(*zip(*pts), marker="o", label=label)
    ax2.set_xlabel(axis)
    ax2.set_ylabel("per-user DoF")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    if axis == "gamma" and len(xs) > 1 and min(xs) > 0 and max(xs) / min(xs) > 50:
        ax1.set_xscale("log")
        ax2.set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_gap_scan(per_K, K_min: int, path: str) -> None:
    """Worst gap per user count, against the bound of 4."""
    ks = list(range(K_min, K_min + len(per_K)))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ks, per_K, lw=1.2)
    ax.axhline(4.0, color="red", ls="--", label="bound 4")
    ax.set_xlabel("K")
    ax.set_ylabel("max T_best / T_lower over (Gamma, alpha)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_csit_load(entries: list[dict], path: str) -> None:
    """Delayed-feedback load of the cache-aided scheme vs no caching vs ZF."""
    labels = [e["label"] for e in entries]
    values = [float(e["value"]) for e in entries]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(labels, values)
    ax.set_ylabel("normalized feedback load")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
