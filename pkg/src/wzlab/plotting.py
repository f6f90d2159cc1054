"""Figures for the region datasets, rendered with the Agg backend.

PNG metadata is stripped of the software/version stamp so identical data give
byte-identical files.
"""

from collections import defaultdict
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 7,
    "lines.linewidth": 1.3,
    "savefig.dpi": 120,
}
PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=PNG_META)
    plt.close(fig)


def _finite(v):
    return v is not None and not (isinstance(v, float) and math.isnan(v))


def plot_rate_g(rows, asymptotic, path, title=""):
    """Rate bound versus ``G`` for each ``(n, eps)``; ``rows`` are region CSV tuples."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        curves = defaultdict(list)
        for n, eps, _d, g, rate, regime, _delta in rows:
            if regime == "finite" and _finite(rate):
                curves[(n, eps)].append((g, rate))
        for (n, eps), pts in sorted(curves.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=f"n={n}, eps={eps}")
        if asymptotic:
            pts = sorted(asymptotic)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "k--", label="asymptotic")
        ax.set_xlabel("generalization error G")
        ax.set_ylabel("rate (bits/symbol)")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)


def plot_dg(rows, path, title=""):
    """Smallest ``G`` versus ``D`` at fixed rates; ``rows`` are ``(n, eps, D, G, R)``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        curves = defaultdict(list)
        for n, eps, d, g, rate in rows:
            if _finite(g):
                curves[(rate, n, eps)].append((d, g))
        for (rate, n, eps), pts in sorted(curves.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=f"R={rate}, n={n}, eps={eps}")
        ax.set_xlabel("distortion D")
        ax.set_ylabel("minimal generalization error G")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)


def plot_asymptotic(rd_rows, rag_rows, path):
    """Wyner-Ziv rate curve and root-loss bounds side by side."""
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
        a1.plot([r[0] for r in rd_rows], [r[1] for r in rd_rows], label="R_WZ(D)")
        a1.set_xlabel("distortion D")
        a1.set_ylabel("rate (bits/symbol)")
        a1.legend()
        rates = [r[0] for r in rag_rows]
        a2.plot(rates, [r[2] for r in rag_rows], label="upper bound")
        a2.plot(rates, [r[1] for r in rag_rows], "--", label="lower bound")
        a2.plot(rates, [r[3] for r in rag_rows], ":", marker=".", label="test channel")
        a2.set_xlabel("rate (bits/symbol)")
        a2.set_ylabel("root generalization error")
        a2.legend()
        _save(fig, path)
