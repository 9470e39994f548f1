"""Image and figure output (PNG only)."""

import numpy as np
from PIL import Image


def save_png(image: np.ndarray, path):
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def tile(images, columns: int, pad: int = 2, fill: int = 255) -> np.ndarray:
    """Grid of equally sized (H, W, 3) uint8 images, row-major."""
    images = list(images)
    if not images:
        raise ValueError("no images to tile")
    h, w, _ = images[0].shape
    columns = max(1, min(columns, len(images)))
    rows = -(-len(images) // columns)
    out = np.full((rows * h + (rows + 1) * pad, columns * w + (columns + 1) * pad, 3), fill, dtype=np.uint8)
    for i, img in enumerate(images):
        r, c = divmod(i, columns)
        y, x = pad + r * (h + pad), pad + c * (w + pad)
        out[y:y + h, x:x + w] = img
    return out


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_curves(curves: dict, path, xlabel: str = "training step", ylabel: str = "evaluation return",
                title: str | None = None):
    """``curves`` maps a label to ``(xs, ys)``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (xs, ys) in curves.items():
        ax.plot(xs, ys, marker="o", ms=3, label=str(label))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100)
    plt.close(fig)


def plot_variance(curves: dict, path, title: str | None = None):
    """Sorted latent standard deviations, one line per label."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in curves.items():
        ax.plot(np.arange(len(ys)), ys, label=str(label))
    ax.set_xlabel("latent dimension (sorted)")
    ax.set_ylabel("output standard deviation")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100)
    plt.close(fig)
