# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot inner loops (see ``_pykernels`` for the
reference Python versions)."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport abs as iabs

cnp.import_array()

cdef int[8] DY8 = [-1, -1, -1, 0, 0, 1, 1, 1]
cdef int[8] DX8 = [-1, 0, 1, -1, 1, -1, 0, 1]
cdef int[4] DY4 = [-1, 0, 0, 1]
cdef int[4] DX4 = [0, -1, 1, 0]


def flood_fill(const cnp.uint8_t[:, :, ::1] img, Py_ssize_t seed_y, Py_ssize_t seed_x,
               int tol, int connectivity, bint moving):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, idx, y, x, ny, nx
    cdef int nb = 4 if connectivity == 4 else 8
    cdef int i, dy, dx, r0, g0, b0
    r0 = img[seed_y, seed_x, 0]
    g0 = img[seed_y, seed_x, 1]
    b0 = img[seed_y, seed_x, 2]
    out[seed_y, seed_x] = 1
    queue[tail] = seed_y * w + seed_x
    tail += 1
    while head < tail:
        idx = queue[head]
        head += 1
        y = idx // w
        x = idx - y * w
        if moving:
            r0 = img[y, x, 0]
            g0 = img[y, x, 1]
            b0 = img[y, x, 2]
        for i in range(nb):
            if nb == 4:
                dy = DY4[i]
                dx = DX4[i]
            else:
                dy = DY8[i]
                dx = DX8[i]
            ny = y + dy
            nx = x + dx
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            if out[ny, nx]:
                continue
            if (iabs(<int>img[ny, nx, 0] - r0) <= tol
                    and iabs(<int>img[ny, nx, 1] - g0) <= tol
                    and iabs(<int>img[ny, nx, 2] - b0) <= tol):
                out[ny, nx] = 1
                queue[tail] = ny * w + nx
                tail += 1
    return out_arr.view(np.bool_)


cdef inline Py_ssize_t _find(cnp.int32_t[::1] parent, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t root = i, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = <cnp.int32_t>root
        i = nxt
    return root


cdef inline void _union(cnp.int32_t[::1] parent, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t ra = _find(parent, a), rb = _find(parent, b)
    if ra < rb:
        parent[rb] = <cnp.int32_t>ra
    elif rb < ra:
        parent[ra] = <cnp.int32_t>rb


def label_components(mask, int connectivity):
    cdef const cnp.uint8_t[:, ::1] fg = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = fg.shape[0], w = fg.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] out_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] prov = out_arr
    # worst case: every other pixel starts a label
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = parent_arr
    cdef Py_ssize_t y, x, nlab = 1, lab, current, root
    cdef int n = 0
    with nogil:
        for y in range(h):
            for x in range(w):
                if not fg[y, x]:
                    continue
                current = 0
                if connectivity == 8 and y > 0 and x > 0 and prov[y - 1, x - 1]:
                    current = prov[y - 1, x - 1]
                if y > 0 and prov[y - 1, x]:
                    lab = prov[y - 1, x]
                    if current == 0:
                        current = lab
                    elif lab != current:
                        _union(parent, current, lab)
                if connectivity == 8 and y > 0 and x + 1 < w and prov[y - 1, x + 1]:
                    lab = prov[y - 1, x + 1]
                    if current == 0:
                        current = lab
                    elif lab != current:
                        _union(parent, current, lab)
                if x > 0 and prov[y, x - 1]:
                    lab = prov[y, x - 1]
                    if current == 0:
                        current = lab
                    elif lab != current:
                        _union(parent, current, lab)
                if current == 0:
                    current = nlab
                    parent[nlab] = <cnp.int32_t>nlab
                    nlab += 1
                prov[y, x] = <cnp.int32_t>current
    cdef cnp.ndarray[cnp.int32_t, ndim=1] final_arr = np.zeros(nlab, dtype=np.int32)
    cdef cnp.int32_t[::1] final = final_arr
    with nogil:
        for lab in range(1, nlab):
            root = _find(parent, lab)
            if root == lab:
                n += 1
                final[lab] = n
            else:
                final[lab] = final[root]
        for y in range(h):
            for x in range(w):
                prov[y, x] = final[prov[y, x]]
    return out_arr, n


def kmeans_assign(const double[:, ::1] pixels, const double[:, ::1] centroids):
    cdef Py_ssize_t n = pixels.shape[0], k = centroids.shape[0], i, j
    cdef cnp.ndarray[cnp.int32_t, ndim=1] labels_arr = np.zeros(n, dtype=np.int32)
    cdef cnp.int32_t[::1] labels = labels_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sums_arr = np.zeros((k, 3), dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef double inertia = 0.0, best, d, d0, d1, d2
    cdef Py_ssize_t arg
    with nogil:
        for i in range(n):
            best = 1e300
            arg = 0
            for j in range(k):
                d0 = pixels[i, 0] - centroids[j, 0]
                d1 = pixels[i, 1] - centroids[j, 1]
                d2 = pixels[i, 2] - centroids[j, 2]
                d = d0 * d0 + d1 * d1 + d2 * d2
                if d < best:
                    best = d
                    arg = j
            labels[i] = <cnp.int32_t>arg
            inertia += best
            counts[arg] += 1
            sums[arg, 0] += pixels[i, 0]
            sums[arg, 1] += pixels[i, 1]
            sums[arg, 2] += pixels[i, 2]
    return labels_arr, inertia, sums_arr, counts_arr


def median_fill(const cnp.uint8_t[:, :, ::1] img, mask, int radius):
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] out_arr = np.array(img, dtype=np.uint8, copy=True)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef cnp.int64_t[3][256] hist
    cdef Py_ssize_t y, x, yy, xx, y0, y1, x0, x1, cnt, target, acc
    cdef int r, c, v
    with nogil:
        for y in range(h):
            for x in range(w):
                if not m[y, x]:
                    continue
                r = radius
                while True:
                    y0 = y - r if y - r > 0 else 0
                    y1 = y + r + 1 if y + r + 1 < h else h
                    x0 = x - r if x - r > 0 else 0
                    x1 = x + r + 1 if x + r + 1 < w else w
                    for c in range(3):
                        for v in range(256):
                            hist[c][v] = 0
                    cnt = 0
                    for yy in range(y0, y1):
                        for xx in range(x0, x1):
                            if not m[yy, xx]:
                                cnt += 1
                                hist[0][img[yy, xx, 0]] += 1
                                hist[1][img[yy, xx, 1]] += 1
                                hist[2][img[yy, xx, 2]] += 1
                    if cnt > 0:
                        break
                    r += radius
                # lower median: the value at sorted position (cnt - 1) // 2
                target = (cnt - 1) // 2
                for c in range(3):
                    acc = 0
                    for v in range(256):
                        acc += hist[c][v]
                        if acc > target:
                            out[y, x, c] = <cnp.uint8_t>v
                            break
    return out_arr
