"""Static figures written next to the CSV outputs (headless Agg backend)."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".png", dir=path.parent)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120, metadata=_META)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def _reference(ax, t, anchor, slope, label):
    ax.loglog(t, anchor * (t / t[0]) ** slope, "--", lw=1, label=label)


def plot_decay(series_list, path, *, fit=None, references=(-0.5, -0.25)):
    """Log-log decay curves with dashed power-law guides anchored at the first sample."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for s in series_list:
        ax.loglog(s.times, s.values, "o-", ms=3, lw=1, label=s.observable)
    s0 = series_list[0]
    t = s0.times[s0.times > 0]
    v0 = s0.values[s0.times > 0][0]
    for p in references:
        _reference(ax, t, v0, p, f"t^{p:g}")
    if fit is not None:
        tt = np.geomspace(*fit.window, 50)
        ax.loglog(tt, np.exp(fit.intercept) * tt**fit.slope, "k-", lw=1.5,
                  label=f"fit slope {fit.slope:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_envelope(table, path):
    """Ratio of band sup to envelope against t, one line per band."""
    rows = np.array([r for r in table.rows])
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for N in np.unique(rows[:, 0]):
        sel = rows[:, 0] == N
        ax.loglog(rows[sel, 1], rows[sel, 4], "o-", ms=3, label=f"N={N:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("band sup / envelope")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_fbi(lambdas, abs_i, path, *, sigma=None):
    lam = np.asarray(lambdas)
    a = np.asarray(abs_i)
    fig, ax = plt.subplots(figsize=(6, 4.2))
    pos = a > 0
    ax.semilogy(lam[pos] ** 2, a[pos], "o-", ms=3, label="|I(lambda)|")
    if sigma is not None and pos.any():
        x = lam[pos] ** 2
        ax.semilogy(x, a[pos][0] * np.exp(-sigma * (x - x[0])), "--", label=f"sigma={sigma:.3g}")
    ax.set_xlabel("lambda^2")
    ax.set_ylabel("|I|")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
