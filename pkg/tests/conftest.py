import numpy as np
import pytest


def checker(h, w, block=1):
    """0/1 checkerboard of the given block size, single channel values."""
    yy, xx = np.mgrid[0:h, 0:w]
    return (((yy // block) + (xx // block)) % 2).astype(np.float64)


def rgb(img2d):
    """Stack a 2-D array into an (H, W, 3) image."""
    return np.repeat(np.asarray(img2d, dtype=np.float64)[:, :, None], 3, axis=2)


def texture_mosaic(size=256, seed=5, n_sites=260):
    """Voronoi mosaic: flat random-color cells with sharp boundaries."""
    rng = np.random.default_rng(seed)
    sites = rng.uniform(0, size, size=(n_sites, 2))
    colors = rng.uniform(0.05, 0.95, size=(n_sites, 3))
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    idx = np.zeros((size, size), dtype=np.int64)
    best = np.full((size, size), np.inf)
    for k in range(n_sites):
        d = (y - sites[k, 0]) ** 2 + (x - sites[k, 1]) ** 2
        mask = d < best
        idx[mask] = k
        best[mask] = d[mask]
    return colors[idx]


def texture_bricks(size=256, seed=7):
    """Staggered bricks with mortar lines, per-brick shading, mild grain."""
    rng = np.random.default_rng(seed)
    bh, bw, mortar = 14, 30, 2
    img = np.zeros((size, size, 3))
    shades = rng.uniform(0.25, 0.85, size=(size // bh + 2, size // bw + 3, 3))
    for row in range(size // bh + 1):
        offset = (row % 2) * (bw // 2)
        for col in range(-1, size // bw + 2):
            y0, x0 = row * bh, col * bw + offset
            y1, x1 = min(y0 + bh - mortar, size), min(x0 + bw - mortar, size)
            y0, x0 = max(y0, 0), max(x0, 0)
            if y0 < y1 and x0 < x1:
                img[y0:y1, x0:x1] = shades[row, col + 1]
    img += rng.uniform(-0.02, 0.02, size=img.shape)
    return np.clip(img, 0, 1)


def texture_stripes(size=256, seed=9):
    """Patchwork of hard-edged gratings at mixed angles and pitches."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((size, size, 3))
    cell = 64
    for by in range(size // cell):
        for bx in range(size // cell):
            theta = rng.uniform(0, np.pi)
            pitch = rng.uniform(6, 14)
            phase = rng.uniform(0, pitch)
            t = (x * np.cos(theta) + y * np.sin(theta) + phase) % pitch
            wave = (t < pitch / 2).astype(np.float64)
            c0 = rng.uniform(0.1, 0.45, 3)
            c1 = rng.uniform(0.55, 0.9, 3)
            sl = np.s_[by * cell : (by + 1) * cell, bx * cell : (bx + 1) * cell]
            img[sl] = c0 + (c1 - c0) * wave[sl][:, :, None]
    return img


TEXTURES = {
    "mosaic": texture_mosaic,
    "bricks": texture_bricks,
    "stripes": texture_stripes,
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
