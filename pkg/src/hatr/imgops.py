"""Plain-array image utilities: resize, rotate, warp, blur.

These operate on float64 [h, w] arrays outside the autodiff graph; they
serve the synthetic generator and inference preprocessing. All sampling is
bilinear with zero fill outside the source, and fully deterministic.
"""

from __future__ import annotations

import numpy as np


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with pixel-center alignment. Identity sizes still copy."""
    h, w = img.shape
    if h < 1 or w < 1 or out_h < 1 or out_w < 1:
        raise ValueError(f"degenerate resize {img.shape} -> ({out_h}, {out_w})")
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = img[np.ix_(y0, x0)]
    b = img[np.ix_(y0, x1)]
    c = img[np.ix_(y1, x0)]
    d = img[np.ix_(y1, x1)]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def _sample_bilinear(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample img at fractional (rows, cols); zero outside the frame."""
    h, w = img.shape
    inside = (rows > -1.0) & (rows < h) & (cols > -1.0) & (cols < w)
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    val = (
        img[r0, c0] * (1 - fr) * (1 - fc)
        + img[r0, c1] * (1 - fr) * fc
        + img[r1, c0] * fr * (1 - fc)
        + img[r1, c1] * fr * fc
    )
    return np.where(inside, val, 0.0)


def rotate(img: np.ndarray, degrees: float, out_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Rotate content about the center; positive angle turns it counter-clockwise
    as displayed (row axis pointing down). Exact no-op at 0 degrees."""
    if degrees == 0.0 and (out_shape is None or out_shape == img.shape):
        return img.copy()
    h, w = img.shape
    if out_shape is None:
        rad = abs(np.deg2rad(degrees))
        oh = int(np.ceil(h * np.cos(rad) + w * np.sin(rad))) + 2
        ow = int(np.ceil(w * np.cos(rad) + h * np.sin(rad))) + 2
    else:
        oh, ow = out_shape
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rr, cc = np.meshgrid(np.arange(oh, dtype=np.float64), np.arange(ow, dtype=np.float64), indexing="ij")
    dy = rr - (oh - 1) / 2.0
    dx = cc - (ow - 1) / 2.0
    # inverse map: source point = R(theta) . (output offset), raster coords
    src_r = cos_t * dy + sin_t * dx + (h - 1) / 2.0
    src_c = -sin_t * dy + cos_t * dx + (w - 1) / 2.0
    return _sample_bilinear(img, src_r, src_c)


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 matrix H with H @ [dst, 1] ~ [src, 1] for the four given (x, y) pairs.

    Built for inverse sampling: pass corners of the source and where they
    should land, get the output->input map.
    """
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise ValueError("need exactly four (x, y) point pairs")
    rows = []
    rhs = []
    for (sx, sy), (dx, dy) in zip(src, dst):
        rows.append([dx, dy, 1, 0, 0, 0, -dx * sx, -dy * sx])
        rhs.append(sx)
        rows.append([0, 0, 0, dx, dy, 1, -dx * sy, -dy * sy])
        rhs.append(sy)
    coeff = np.linalg.solve(np.asarray(rows, dtype=np.float64), np.asarray(rhs, dtype=np.float64))
    return np.append(coeff, 1.0).reshape(3, 3)


def warp_perspective(img: np.ndarray, h_out_to_in: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Apply a homography by inverse mapping; coordinates are (x, y)."""
    oh, ow = out_shape
    rr, cc = np.meshgrid(np.arange(oh, dtype=np.float64), np.arange(ow, dtype=np.float64), indexing="ij")
    ones = np.ones_like(rr)
    pts = np.stack([cc, rr, ones])  # (x, y, 1)
    mapped = np.tensordot(h_out_to_in, pts, axes=1)
    src_c = mapped[0] / mapped[2]
    src_r = mapped[1] / mapped[2]
    return _sample_bilinear(img, src_r, src_c)


def box_blur(img: np.ndarray, radius: int) -> np.ndarray:
    """Separable box filter with edge clamping; radius 0 is a copy."""
    if radius < 0:
        raise ValueError("blur radius must be >= 0")
    if radius == 0:
        return img.copy()
    k = 2 * radius + 1
    out = np.pad(img, ((radius, radius), (0, 0)), mode="edge")
    out = np.cumsum(out, axis=0)
    out = np.vstack([out[k - 1 : k], out[k:] - out[:-k]]) / k
    out = np.pad(out, ((0, 0), (radius, radius)), mode="edge")
    out = np.cumsum(out, axis=1)
    out = np.hstack([out[:, k - 1 : k], out[:, k:] - out[:, :-k]]) / k
    return out
