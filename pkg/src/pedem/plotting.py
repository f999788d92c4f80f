"""Report figures.  Output format follows the file extension (svg, png, pdf)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "svg.hashsalt": "pedem",  # stable element ids between runs
})


def error_over_distance(bins, path, title=None):
    """Mean absolute error per distance bin, with the sample count underneath."""
    fig, (ax, axc) = plt.subplots(2, 1, figsize=(5.0, 3.6), sharex=True,
                                  gridspec_kw={"height_ratios": [3, 1]})
    if bins:
        mid = np.array([(b.low + b.high) / 2 for b in bins])
        err = np.array([b.mean_e_abs for b in bins])
        cnt = np.array([b.count for b in bins])
        width = bins[0].high - bins[0].low
        ax.plot(mid, err, marker="o", lw=1.2, color="tab:red")
        axc.bar(mid, cnt, width=0.8 * width, color="0.6")
    ax.set_ylabel("mean $e_{abs}$ [m]")
    ax.grid(alpha=0.3)
    axc.set_ylabel("count")
    axc.set_xlabel("ground-truth distance [m]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def topdown(pairs, path, title=None):
    """Bird's-eye view of matched ground truth against the estimates."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if pairs:
        gt = np.array([p.truth for p in pairs])
        pr = np.array([p.predicted for p in pairs])
        org = np.array([p.origin for p in pairs])
        ax.plot(org[:, 0], org[:, 1], ".", ms=2, color="k", label="ego")
        ax.plot(gt[:, 0], gt[:, 1], ".", ms=3, color="tab:green", label="ground truth")
        ax.plot(pr[:, 0], pr[:, 1], ".", ms=3, color="tab:red", alpha=0.6, label="estimate")
        ax.legend(loc="best", fontsize=7)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
