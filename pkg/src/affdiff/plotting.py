"""Matplotlib figures written next to the JSON/CSV outputs of the CLI.

All figures go through the non-interactive Agg backend and are saved
without timestamps so repeated runs produce identical files.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}
MODE_COLORS = {"euclidean": "tab:blue", "equi-affine": "tab:red"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def spectrum_figure(values, path, label=None, reference=None):
    """Eigenvalues against their index; ``reference`` overlays a second spectrum."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.plot(np.arange(len(values)), values, ".-", lw=0.8, ms=3, label=label or "spectrum",
                color=MODE_COLORS.get(label, "k"))
        if reference is not None:
            ref_label, ref_values = reference
            ax.plot(np.arange(len(ref_values)), ref_values, ".--", lw=0.8, ms=3, label=ref_label,
                    color=MODE_COLORS.get(ref_label, "0.5"))
        ax.set_xlabel("index i")
        ax.set_ylabel(r"$\lambda_i$")
        ax.legend(frameon=False)
        return _save(fig, path)


def hks_figure(desc, path):
    """Distribution of HKS values at each time scale."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for j, t in enumerate(desc.scales):
            v = desc.values[:, j]
            ax.hist(v, bins=40, histtype="step", label=f"t={t:.4g}")
        ax.set_xlabel(r"$h_t(x,x)$")
        ax.set_ylabel("vertices")
        ax.legend(frameon=False)
        return _save(fig, path)


def retrieval_figure(reports, path):
    """mAP against (cumulative) strength, one panel per transform class."""
    transforms = sorted({tr for rep in reports for tr in rep["per_transform"]})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(transforms), figsize=(3.2 * len(transforms), 3.0),
                                 squeeze=False)
        for ax, tr in zip(axes[0], transforms):
            for rep in reports:
                row = rep["per_transform"].get(tr, {})
                xs = [float(s) for s in row]
                ax.plot(xs, [100 * v for v in row.values()], "o-", ms=3,
                        color=MODE_COLORS.get(rep["mode"], "k"), label=rep["mode"])
            ax.set_title(tr)
            ax.set_xlabel(r"strength $\leq$")
            ax.set_ylabel("mAP (%)")
            ax.set_ylim(0, 105)
        axes[0][0].legend(frameon=False, loc="lower left")
        return _save(fig, path)


def symmetry_figure(candidates, path):
    """Sorted signature energies, lowest first."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * len(candidates)), 3.2))
        labels = [c.signs_str() for c in candidates]
        ax.bar(np.arange(len(candidates)), [c.energy for c in candidates], color="0.4")
        ax.set_xticks(np.arange(len(candidates)))
        ax.set_xticklabels(labels, rotation=90, family="monospace")
        ax.set_ylabel("E(s)")
        return _save(fig, path)


def stress_figure(stress, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.hist(np.asarray(stress), bins=40, color="0.4")
        ax.set_xlabel(r"$|d_X - d_Y|$")
        ax.set_ylabel("pairs")
        return _save(fig, path)
