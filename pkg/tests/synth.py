"""Synthetic dermoscopy-like fixtures."""
from pathlib import Path

import numpy as np
from PIL import Image

SKIN = (222, 184, 160)
LESION = (92, 58, 44)


def square_lesion(size=64, side=31, offset=None, skin=SKIN, lesion=LESION, noise=0, seed=0):
    """``size x size`` skin image with a dark ``side x side`` square lesion."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = skin
    if offset is None:
        offset = ((size - side) // 2, (size - side) // 2)
    x0, y0 = offset
    img[y0:y0 + side, x0:x0 + side] = lesion
    if noise:
        g = np.random.default_rng(seed)
        img = np.clip(img.astype(int) + g.integers(-noise, noise + 1, img.shape), 0, 255)
        img = img.astype(np.uint8)
    mask = np.zeros((size, size), dtype=bool)
    mask[y0:y0 + side, x0:x0 + side] = True
    return img, mask


def write_case(directory, image_id, img, mask=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(directory / f"{image_id}.jpg", quality=95)
    if mask is not None:
        Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(
            directory / f"{image_id}_segmentation.png"
        )


def corpus(directory, n=6, size=64, seed=0):
    """``n`` square-lesion cases with varied position and size."""
    g = np.random.default_rng(seed)
    for i in range(n):
        side = int(g.integers(21, 33))
        x0 = int(g.integers(4, size - side - 4))
        y0 = int(g.integers(4, size - side - 4))
        img, mask = square_lesion(size, side, (x0, y0))
        write_case(directory, f"ISIC_{i:07d}", img, mask)
