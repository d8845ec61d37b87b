"""Render report figures to PNG files alongside the delimited outputs.

Every renderer takes already-computed report data (never recomputes) and
writes a single PNG; the Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _band_spans(edges):
    return [(edges[2 * k], edges[2 * k + 1]) for k in range(len(edges) // 2)]


def _shade_bands(ax, edges):
    for lo, hi in _band_spans(edges):
        ax.axvspan(lo, hi, color="0.85", zorder=0)


def spectrum_figure(doc: dict, path: str):
    """Bands as bars on the real axis, Dirichlet points, eigenvalues."""
    fig, ax = plt.subplots(figsize=(7, 2.2))
    for lo, hi in _band_spans(doc["edges"]):
        ax.plot([lo, hi], [0, 0], lw=6, color="tab:blue", solid_capstyle="butt")
    if doc["dirichlet"]:
        ax.plot(doc["dirichlet"], [0] * len(doc["dirichlet"]), "kd", ms=5,
                label="Dirichlet")
    if doc["eigenvalues"]:
        ax.plot(doc["eigenvalues"], [0] * len(doc["eigenvalues"]), "rx", ms=8,
                mew=2, label="eigenvalues")
    ax.set_yticks([])
    ax.set_xlabel(r"$\lambda$")
    ax.set_title(f"spectrum (genus {doc['genus']})")
    if doc["dirichlet"] or doc["eigenvalues"]:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def alpha_figure(rows, path: str, with_alpha: bool = True):
    """|alpha| (or |det|) per grid point and the identity gap on a log scale."""
    ok = [(vals, s) for vals, s in rows if s == "ok"]
    idx = [i for i, (_, s) in enumerate(rows) if s == "ok"]
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    if ok:
        if with_alpha:
            mod = [math.hypot(v[2], v[3]) for v, _ in ok]
            gap = [max(v[6], 1e-18) for v, _ in ok]
            axes[0].set_ylabel(r"$|\alpha(z)|$")
            axes[1].semilogy(idx, gap, ".-", color="tab:red")
            axes[1].set_ylabel("relative identity gap")
        else:
            mod = [math.hypot(v[2], v[3]) for v, _ in ok]
            axes[0].set_ylabel(r"$|\det|$")
            phase = [math.atan2(v[3], v[2]) for v, _ in ok]
            axes[1].plot(idx, phase, ".-", color="tab:red")
            axes[1].set_ylabel("arg det")
        axes[0].plot(idx, mod, ".-", color="tab:blue")
    axes[1].set_xlabel("grid point index")
    n_bad = sum(1 for _, s in rows if s != "ok")
    axes[0].set_title(f"{len(rows)} grid points, {n_bad} skipped")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def shift_figure(profile, path: str):
    """Spectral shift profile with band shading and plateau levels."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    _shade_bands(ax, [e for lo, hi in
                      [(b[0], b[1]) for b in profile.bands] for e in (lo, hi)])
    order = np.argsort(profile.grid)
    ax.plot(np.asarray(profile.grid)[order], np.asarray(profile.xi)[order],
            ".", ms=3, color="tab:blue")
    for lo, hi, val in profile.plateaus:
        ax.plot([lo, hi], [val, val], lw=2, color="tab:orange")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\xi(\lambda)$")
    ax.set_title("spectral shift")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def traces_figure(doc: dict, path: str):
    """Trace values by route and the spread between routes."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    routes = ("direct", "recursion", "moment")
    marks = {"direct": "o", "recursion": "s", "moment": "^"}
    for route in routes:
        vals = doc[route]["taus"]
        orders = np.arange(1, len(vals) + 1)
        axes[0].plot(orders, vals, marks[route] + "-", label=route, ms=5,
                     alpha=0.8)
    axes[0].set_ylabel(r"$\tau_j$")
    axes[0].legend(fontsize=8)
    direct = doc["direct"]["taus"]
    for route in ("recursion", "moment"):
        vals = doc[route]["taus"]
        m = min(len(vals), len(direct))
        dev = [abs(vals[j] - direct[j]) / max(abs(direct[j]), 1e-300)
               for j in range(m)]
        axes[1].semilogy(np.arange(1, m + 1), [max(d, 1e-18) for d in dev],
                         marks[route] + "-", label=f"{route} vs direct", ms=5)
    axes[1].set_xlabel("order j")
    axes[1].set_ylabel("relative deviation")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def evolve_figure(report, path: str):
    """Conserved quantities along the flow and their drift from t=0."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(report.times, report.A, "o-", label="A(t)")
    for j in range(report.orders):
        axes[0].plot(report.times, report.taus[:, j], ".-",
                     label=rf"$\tau_{{{j + 1}}}(t)$")
    axes[0].set_ylabel("value")
    axes[0].legend(fontsize=8, ncol=2)
    axes[1].semilogy(report.times,
                     np.maximum(np.abs(report.A - report.A[0]), 1e-18),
                     "o-", label="A drift")
    for j in range(report.orders):
        axes[1].semilogy(report.times,
                         np.maximum(np.abs(report.taus[:, j]
                                           - report.taus[0, j]), 1e-18),
                         ".-", label=rf"$\tau_{{{j + 1}}}$ drift")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("|X(t) - X(0)|")
    axes[1].legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
