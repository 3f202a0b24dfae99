"""Hot numeric kernels.

Every kernel has a pure-numpy implementation and, when numba is importable,
an ``@njit`` twin with the same signature.  The active backend is chosen once
at import time from the ``INCAVG_BACKEND`` environment variable
(``numba`` or ``numpy``); the default is numba when available.

Both implementations stay importable (``NUMPY_KERNELS`` / ``NUMBA_KERNELS``)
so tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# ---------------------------------------------------------------------------
# numpy implementations


def _np_controls_support(values, dirs):
    # values: (n, nu, d), dirs: (N, d) -> (n, N)
    return np.einsum("nud,kd->nuk", values, dirs).max(axis=1)


def _np_controls_support_mean(values, dirs):
    return _np_controls_support(values, dirs).mean(axis=0)


def _np_polygon_vertices(h, dirs):
    # vertex k = intersection of support lines k and k+1 (cyclic)
    a = dirs
    b = np.roll(dirs, -1, axis=0)
    hb = np.roll(h, -1)
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    vx = (h * b[:, 1] - hb * a[:, 1]) / det
    vy = (a[:, 0] * hb - b[:, 0] * h) / det
    return np.column_stack((vx, vy))


def _np_edge_lengths(h, dirs):
    # signed length of the edge lying on support line k
    verts = _np_polygon_vertices(h, dirs)
    tang = np.column_stack((-dirs[:, 1], dirs[:, 0]))
    prev = np.roll(verts, 1, axis=0)
    return np.einsum("kd,kd->k", tang, verts - prev)


def _np_clip_polygon(h, dirs, radius):
    poly = radius * np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    for k in range(dirs.shape[0]):
        if poly.shape[0] == 0:
            break
        # same arithmetic as the numba kernel, so on-line vertices classify identically
        s = poly[:, 0] * dirs[k, 0] + poly[:, 1] * dirs[k, 1] - h[k]
        nxt = np.roll(poly, -1, axis=0)
        s_nxt = np.roll(s, -1)
        out = []
        for i in range(poly.shape[0]):
            if s[i] <= 0.0:
                out.append(poly[i])
            if (s[i] <= 0.0) != (s_nxt[i] <= 0.0):
                lam = s[i] / (s[i] - s_nxt[i])
                out.append(poly[i] + lam * (nxt[i] - poly[i]))
        poly = np.array(out).reshape(-1, 2)
    return poly


def _np_nearest_on_polygon(verts, v):
    n = verts.shape[0]
    if n == 1:
        return verts[0].copy()
    a = verts
    b = np.roll(verts, -1, axis=0)
    ab = b - a
    den = np.einsum("kd,kd->k", ab, ab)
    lam = np.where(den > 0.0, np.einsum("kd,kd->k", v - a, ab) / np.where(den > 0.0, den, 1.0), 0.0)
    lam = np.clip(lam, 0.0, 1.0)
    cand = a + lam[:, None] * ab
    dist = np.einsum("kd,kd->k", cand - v, cand - v)
    # argmin returns the lowest index on exact ties
    return cand[np.argmin(dist)]


def _np_argmax_vertex(verts, ell):
    # same arithmetic as the compiled loop so near-ties resolve identically
    return int(np.argmax(verts[:, 0] * ell[0] + verts[:, 1] * ell[1]))


NUMPY_KERNELS = types.SimpleNamespace(
    controls_support=_np_controls_support,
    controls_support_mean=_np_controls_support_mean,
    polygon_vertices=_np_polygon_vertices,
    edge_lengths=_np_edge_lengths,
    clip_polygon=_np_clip_polygon,
    nearest_on_polygon=_np_nearest_on_polygon,
    argmax_vertex=_np_argmax_vertex,
)


# ---------------------------------------------------------------------------
# numba implementations

NUMBA_KERNELS = None

if numba is not None:
    njit = numba.njit(cache=True, nogil=True)

    @njit
    def _nb_controls_support(values, dirs):
        n, nu, d = values.shape
        nd = dirs.shape[0]
        out = np.empty((n, nd))
        for i in range(n):
            for k in range(nd):
                best = -np.inf
                for j in range(nu):
                    s = 0.0
                    for c in range(d):
                        s += values[i, j, c] * dirs[k, c]
                    if s > best:
                        best = s
                out[i, k] = best
        return out

    @njit
    def _nb_controls_support_mean(values, dirs):
        n, nu, d = values.shape
        nd = dirs.shape[0]
        acc = np.zeros(nd)
        for i in range(n):
            for k in range(nd):
                best = -np.inf
                for j in range(nu):
                    s = 0.0
                    for c in range(d):
                        s += values[i, j, c] * dirs[k, c]
                    if s > best:
                        best = s
                acc[k] += best
        return acc / n

    @njit
    def _nb_polygon_vertices(h, dirs):
        n = dirs.shape[0]
        out = np.empty((n, 2))
        for k in range(n):
            j = (k + 1) % n
            a0, a1 = dirs[k, 0], dirs[k, 1]
            b0, b1 = dirs[j, 0], dirs[j, 1]
            det = a0 * b1 - a1 * b0
            out[k, 0] = (h[k] * b1 - h[j] * a1) / det
            out[k, 1] = (a0 * h[j] - b0 * h[k]) / det
        return out

    @njit
    def _nb_edge_lengths(h, dirs):
        verts = _nb_polygon_vertices(h, dirs)
        n = dirs.shape[0]
        out = np.empty(n)
        for k in range(n):
            p = (k - 1) % n
            out[k] = -dirs[k, 1] * (verts[k, 0] - verts[p, 0]) + dirs[k, 0] * (
                verts[k, 1] - verts[p, 1]
            )
        return out

    @njit
    def _nb_clip_polygon(h, dirs, radius):
        cap = dirs.shape[0] + 8
        poly = np.empty((cap, 2))
        buf = np.empty((cap, 2))
        poly[0, 0], poly[0, 1] = radius, radius
        poly[1, 0], poly[1, 1] = -radius, radius
        poly[2, 0], poly[2, 1] = -radius, -radius
        poly[3, 0], poly[3, 1] = radius, -radius
        m = 4
        for k in range(dirs.shape[0]):
            if m == 0:
                break
            cnt = 0
            for i in range(m):
                j = (i + 1) % m
                si = poly[i, 0] * dirs[k, 0] + poly[i, 1] * dirs[k, 1] - h[k]
                sj = poly[j, 0] * dirs[k, 0] + poly[j, 1] * dirs[k, 1] - h[k]
                if si <= 0.0:
                    buf[cnt, 0] = poly[i, 0]
                    buf[cnt, 1] = poly[i, 1]
                    cnt += 1
                if (si <= 0.0) != (sj <= 0.0):
                    lam = si / (si - sj)
                    buf[cnt, 0] = poly[i, 0] + lam * (poly[j, 0] - poly[i, 0])
                    buf[cnt, 1] = poly[i, 1] + lam * (poly[j, 1] - poly[i, 1])
                    cnt += 1
            for i in range(cnt):
                poly[i, 0] = buf[i, 0]
                poly[i, 1] = buf[i, 1]
            m = cnt
        return poly[:m].copy()

    @njit
    def _nb_nearest_on_polygon(verts, v):
        n = verts.shape[0]
        out = np.empty(2)
        if n == 1:
            out[0] = verts[0, 0]
            out[1] = verts[0, 1]
            return out
        best = np.inf
        for k in range(n):
            j = (k + 1) % n
            ax, ay = verts[k, 0], verts[k, 1]
            dx, dy = verts[j, 0] - ax, verts[j, 1] - ay
            den = dx * dx + dy * dy
            lam = 0.0
            if den > 0.0:
                lam = ((v[0] - ax) * dx + (v[1] - ay) * dy) / den
                lam = min(max(lam, 0.0), 1.0)
            cx, cy = ax + lam * dx, ay + lam * dy
            dist = (cx - v[0]) ** 2 + (cy - v[1]) ** 2
            if dist < best:
                best = dist
                out[0] = cx
                out[1] = cy
        return out

    @njit
    def _nb_argmax_vertex(verts, ell):
        best = -np.inf
        idx = 0
        for k in range(verts.shape[0]):
            s = verts[k, 0] * ell[0] + verts[k, 1] * ell[1]
            if s > best:
                best = s
                idx = k
        return idx

    NUMBA_KERNELS = types.SimpleNamespace(
        controls_support=_nb_controls_support,
        controls_support_mean=_nb_controls_support_mean,
        polygon_vertices=_nb_polygon_vertices,
        edge_lengths=_nb_edge_lengths,
        clip_polygon=_nb_clip_polygon,
        nearest_on_polygon=_nb_nearest_on_polygon,
        argmax_vertex=_nb_argmax_vertex,
    )


def _select_backend():
    wanted = os.environ.get("INCAVG_BACKEND", "").strip().lower()
    if wanted not in ("", "numba", "numpy"):
        raise ValueError(f"INCAVG_BACKEND must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy" or NUMBA_KERNELS is None:
        return "numpy", NUMPY_KERNELS
    return "numba", NUMBA_KERNELS


BACKEND, K = _select_backend()
