"""Pure-Python implementations of the hot inner loops.

Used when the compiled ``_ckernels`` extension is unavailable or when
``DERMSEG_PURE=1`` is set. Signatures and results match the extension.
"""
from collections import deque

import numpy as np

_OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def flood_fill(img, seed_y, seed_x, tol, connectivity, moving):
    h, w = img.shape[:2]
    px = img.reshape(-1, 3).tolist()
    offsets = _OFFSETS_4 if connectivity == 4 else _OFFSETS_8
    visited = bytearray(h * w)
    start = seed_y * w + seed_x
    visited[start] = 1
    queue = deque([start])
    ref = px[start]
    while queue:
        idx = queue.popleft()
        y, x = divmod(idx, w)
        if moving:
            ref = px[idx]
        r0, g0, b0 = ref
        for dy, dx in offsets:
            ny = y + dy
            nx = x + dx
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            nidx = ny * w + nx
            if visited[nidx]:
                continue
            r, g, b = px[nidx]
            if abs(r - r0) <= tol and abs(g - g0) <= tol and abs(b - b0) <= tol:
                visited[nidx] = 1
                queue.append(nidx)
    return np.frombuffer(bytes(visited), dtype=np.uint8).reshape(h, w).astype(bool)


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    # smaller root wins, so each root is the first-encountered label
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


def label_components(mask, connectivity):
    h, w = mask.shape
    fg = mask.reshape(-1).tolist()
    prov = [0] * (h * w)
    parent = [0]
    if connectivity == 4:
        back = ((-1, 0), (0, -1))
    else:
        back = ((-1, -1), (-1, 0), (-1, 1), (0, -1))
    for y in range(h):
        row = y * w
        for x in range(w):
            if not fg[row + x]:
                continue
            current = 0
            for dy, dx in back:
                ny = y + dy
                nx = x + dx
                if ny < 0 or nx < 0 or nx >= w:
                    continue
                lab = prov[ny * w + nx]
                if lab == 0:
                    continue
                if current == 0:
                    current = lab
                elif lab != current:
                    _union(parent, current, lab)
            if current == 0:
                current = len(parent)
                parent.append(current)
            prov[row + x] = current
    final = [0] * len(parent)
    n = 0
    for lab in range(1, len(parent)):
        root = _find(parent, lab)
        if root == lab:
            n += 1
            final[lab] = n
        else:
            final[lab] = final[root]
    out = np.array([final[p] for p in prov], dtype=np.int32).reshape(h, w)
    return out, n


def kmeans_assign(pixels, centroids):
    n = pixels.shape[0]
    k = centroids.shape[0]
    best = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int32)
    for j in range(k):
        diff = pixels - centroids[j]
        d = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]
        closer = d < best
        best[closer] = d[closer]
        labels[closer] = j
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    sums = np.empty((k, 3))
    for c in range(3):
        sums[:, c] = np.bincount(labels, weights=pixels[:, c], minlength=k)
    inertia = float(np.add.reduce(best))
    return labels, inertia, sums, counts


def median_fill(img, mask, radius):
    h, w = mask.shape
    out = img.copy()
    ys, xs = np.nonzero(mask)
    keep = ~mask
    for y, x in zip(ys.tolist(), xs.tolist()):
        r = radius
        while True:
            y0, y1 = max(0, y - r), min(h, y + r + 1)
            x0, x1 = max(0, x - r), min(w, x + r + 1)
            sel = keep[y0:y1, x0:x1]
            if sel.any():
                break
            r += radius
        vals = np.sort(img[y0:y1, x0:x1][sel], axis=0)
        out[y, x] = vals[(vals.shape[0] - 1) // 2]
    return out
