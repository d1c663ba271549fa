"""Figure output: log-magnitude spectrogram images and evaluation bar charts."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.image as mpimg  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DB_RANGE = 80.0
CMAP = "magma"

golden_ratio = (math.sqrt(5) - 1.0) / 2.0

params = {
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def log_magnitude(values, floor_db=-DB_RANGE):
    """20*log10|X| relative to the grid maximum, floored at ``floor_db``."""
    mag = np.abs(np.asarray(values))
    ref = mag.max() if mag.size and mag.max() > 0 else 1.0
    db = 20.0 * np.log10(np.maximum(mag / ref, 10.0 ** (floor_db / 20.0)))
    return db


def save_spectrogram(values, path, vmin=-DB_RANGE, vmax=0.0):
    """Write a (K, F) grid as a PNG with exactly K x F pixels (time across,
    frequency up)."""
    img = log_magnitude(values, vmin).T
    mpimg.imsave(path, img, cmap=CMAP, vmin=vmin, vmax=vmax, origin="lower")
    return path


def save_panel_grid(panels, path, ncols=3):
    """panels: list of (title, (K, F) grid) drawn as one figure."""
    n = len(panels)
    ncols = min(ncols, n)
    nrows = math.ceil(n / ncols)
    with plt.rc_context(params):
        width = 2.6 * ncols
        fig, axes = plt.subplots(nrows, ncols, figsize=(width, width * golden_ratio * nrows / ncols),
                                 squeeze=False)
        for ax in axes.flat[n:]:
            ax.axis("off")
        for ax, (title, grid) in zip(axes.flat, panels):
            ax.imshow(log_magnitude(grid).T, origin="lower", aspect="auto", cmap=CMAP,
                      vmin=-DB_RANGE, vmax=0.0)
            ax.set_title(title)
            ax.set_xticks([])
            ax.set_yticks([])
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_band_report(report, path):
    """Grouped bars of mean SI-SNR (noisy vs enhanced) per SNR band."""
    agg = report["aggregates_by_band"]
    bands = [b for b in agg if b != "all"] or list(agg)
    x = np.arange(len(bands))
    with plt.rc_context(params):
        fig, ax = plt.subplots(figsize=(4.0, 4.0 * golden_ratio))
        ax.bar(x - 0.2, [agg[b]["si_snr_noisy"] for b in bands], 0.4, label="noisy")
        ax.bar(x + 0.2, [agg[b]["si_snr_enhanced"] for b in bands], 0.4, label="enhanced")
        ax.set_xticks(x)
        ax.set_xticklabels(bands)
        ax.set_xlabel("input SNR band (dB)")
        ax.set_ylabel("SI-SNR (dB)")
        ax.axhline(0.0, color="k", lw=0.5)
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return path
