"""PNG figures for reports (matplotlib, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def discrepancy_figure(report, path, label: str = "A") -> None:
    """Worst box discrepancy against n, with the fitted c/n curve."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ns = np.array(report.n_values, dtype=float)
    ax.loglog(ns, np.maximum(report.worst, 1e-12), "o-", ms=3, label=f"worst discrepancy ({label})")
    if report.fitted_c > 0:
        ax.loglog(ns, report.fitted_c / ns, "--", color="gray", label=f"c/n, c={report.fitted_c:.3g}")
    ax.set_xlabel("n")
    ax.set_ylabel("discrepancy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def _grid_image(ambient, layers) -> np.ndarray:
    img = np.zeros((ambient.sides[1], ambient.sides[0]), dtype=float)
    for value, pts in layers:
        for p in pts:
            img[p[1], p[0]] = value
    return img


def sets_figure(ambient, A, B, path) -> None:
    """A, B and their overlap on a planar ambient."""
    if ambient.d != 2:
        raise ValueError("sets_figure needs a planar ambient")
    A = {tuple(p[:2]) for p in A}
    B = {tuple(p[:2]) for p in B}
    img = _grid_image(ambient, [(1, A - B), (2, B - A), (3, A & B)])
    cmap = matplotlib.colors.ListedColormap(["white", "#1f77b4", "#ff7f0e", "#2ca02c"])
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(img, origin="lower", cmap=cmap, vmin=0, vmax=3, interpolation="nearest")
    ax.set_title("A (blue), B (orange), both (green)", fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    _save(fig, path)


def pieces_figure(pieces, path) -> None:
    """Source pieces coloured by index; arrows for the ten largest moves."""
    amb = pieces.ambient
    if amb.d != 2:
        raise ValueError("pieces_figure needs a planar ambient")
    img = np.full((amb.sides[1], amb.sides[0]), np.nan)
    for i, (_, pts) in enumerate(pieces.pieces):
        for p in pts:
            img[p[1], p[0]] = i % 20
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(img, origin="lower", cmap="tab20", vmin=0, vmax=19, interpolation="nearest")
    ax.set_title(f"{len(pieces.pieces)} pieces", fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    _save(fig, path)


def flow_figure(flow, path) -> None:
    """Quiver plot of a planar flow (outgoing components per point)."""
    amb = flow.ambient
    if amb.d != 2:
        raise ValueError("flow_figure needs a planar ambient")
    U = np.zeros((amb.sides[1], amb.sides[0]))
    V = np.zeros_like(U)
    for (p, axis), v in flow.items():
        (U if axis == 0 else V)[p[1], p[0]] += float(v)
    Y, X = np.mgrid[0:amb.sides[1], 0:amb.sides[0]]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.quiver(X, Y, U, V, angles="xy", scale_units="xy", scale=max(1.0, float(flow.sup_norm())))
    ax.set_aspect("equal")
    ax.set_title(f"flow, sup norm {flow.sup_norm()}", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def coverage_figure(family, path) -> None:
    """Per-stage coverage of a nested family."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sizes = [len(s) for s in family.stages]
    ax.bar(range(len(sizes)), sizes, color="#1f77b4")
    ax.set_xlabel("stage")
    ax.set_ylabel("cubes")
    ax.set_title(f"coverage {family.coverage:.4f}, bound {family.bound:.4f}", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
