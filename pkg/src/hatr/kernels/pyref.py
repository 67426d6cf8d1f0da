"""Pure-numpy reference kernels for conv/pool data movement.

Same contracts as the compiled backend in ``_ckernels.pyx``; this module is
the fallback selected when the extension is unavailable (or forced via the
``HATR_KERNELS=python`` environment variable).

Layouts are channels-last: images are [n, h, w, c] float64, C-contiguous.
"""

import numpy as np

BACKEND = "python"


def im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, oh: int, ow: int) -> np.ndarray:
    """Extract conv patches from a padded batch.

    xp: [n, hp, wp, c]  ->  [n*oh*ow, kh*kw*c]
    """
    n, hp, wp, c = xp.shape
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    # windows: [n, hp-kh+1, wp-kw+1, c, kh, kw] -> stride and reorder
    windows = windows[:, ::sh, ::sw][:, :oh, :ow]
    cols = windows.transpose(0, 1, 2, 4, 5, 3)  # [n, oh, ow, kh, kw, c]
    return np.ascontiguousarray(cols).reshape(n * oh * ow, kh * kw * c)


def col2im(
    cols: np.ndarray,
    n: int,
    hp: int,
    wp: int,
    c: int,
    kh: int,
    kw: int,
    sh: int,
    sw: int,
    oh: int,
    ow: int,
) -> np.ndarray:
    """Scatter-add patches back onto the padded image grid (adjoint of im2col)."""
    out = np.zeros((n, hp, wp, c), dtype=np.float64)
    patches = cols.reshape(n, oh, ow, kh, kw, c)
    for i in range(kh):
        for j in range(kw):
            out[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :] += patches[:, :, :, i, j, :]
    return out


def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pool. Returns (pooled, idx) with idx in {0,1,2,3}.

    idx encodes the in-window offset 2*di+dj of the max; ties resolve to the
    first window position in row-major order, matching the compiled kernel.
    """
    n, h, w, c = x.shape
    quads = np.stack(
        (x[:, 0::2, 0::2, :], x[:, 0::2, 1::2, :], x[:, 1::2, 0::2, :], x[:, 1::2, 1::2, :]),
        axis=-1,
    )  # [n, h/2, w/2, c, 4]
    idx = quads.argmax(axis=-1).astype(np.uint8)
    out = np.take_along_axis(quads, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(g: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    n, oh, ow, c = g.shape
    dx = np.zeros((n, oh * 2, ow * 2, c), dtype=np.float64)
    for k in range(4):
        di, dj = divmod(k, 2)
        sel = idx == k
        target = dx[:, di::2, dj::2, :]
        target[sel] = g[sel]
    return dx
