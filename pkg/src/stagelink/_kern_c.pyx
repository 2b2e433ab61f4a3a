# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of _kern_py. Same functions, same numeric contracts.

Scalar arithmetic follows the exact operation order of the pure backend so
the two stay bit-compatible for products, normalization, FK and A* (libm
sqrt/acos/sin are shared with the math module).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, acos, sin, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q):
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double n = sqrt(qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2] + qv[3] * qv[3])
    out = np.empty(4)
    cdef double[:] o = out
    o[0] = qv[0] / n
    o[1] = qv[1] / n
    o[2] = qv[2] / n
    o[3] = qv[3] / n
    return out


cdef inline void _mul(double* a, double* b, double* out) nogil:
    out[0] = a[3] * b[0] + b[3] * a[0] + a[1] * b[2] - a[2] * b[1]
    out[1] = a[3] * b[1] + b[3] * a[1] + a[2] * b[0] - a[0] * b[2]
    out[2] = a[3] * b[2] + b[3] * a[2] + a[0] * b[1] - a[1] * b[0]
    out[3] = a[3] * b[3] - a[0] * b[0] - a[1] * b[1] - a[2] * b[2]


cdef inline void _normalize(double* q) nogil:
    cdef double n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    q[0] /= n
    q[1] /= n
    q[2] /= n
    q[3] /= n


def quat_mul(a, b):
    cdef double[:] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty(4)
    cdef double[:] o = out
    _mul(&av[0], &bv[0], &o[0])
    return out


def quat_conjugate(q):
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    out = np.empty(4)
    cdef double[:] o = out
    o[0] = -qv[0]
    o[1] = -qv[1]
    o[2] = -qv[2]
    o[3] = qv[3]
    return out


cdef inline void _rotate(double* q, double* v, double* out) nogil:
    cdef double tx = 2.0 * (q[1] * v[2] - q[2] * v[1])
    cdef double ty = 2.0 * (q[2] * v[0] - q[0] * v[2])
    cdef double tz = 2.0 * (q[0] * v[1] - q[1] * v[0])
    out[0] = v[0] + q[3] * tx + (q[1] * tz - q[2] * ty)
    out[1] = v[1] + q[3] * ty + (q[2] * tx - q[0] * tz)
    out[2] = v[2] + q[3] * tz + (q[0] * ty - q[1] * tx)


def quat_rotate(q, v):
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(3)
    cdef double[:] o = out
    _rotate(&qv[0], &vv[0], &o[0])
    return out


cdef int _slerp(double* a, double* b, double t, double* out) nogil:
    # Returns into out; mirrors _kern_py.quat_slerp including fast paths.
    cdef double bx = b[0], by = b[1], bz = b[2], bw = b[3]
    cdef double dot = a[0] * bx + a[1] * by + a[2] * bz + a[3] * bw
    cdef double theta0, sin0, s0, s1
    cdef int i
    if dot < 0.0:
        bx = -bx
        by = -by
        bz = -bz
        bw = -bw
        dot = -dot
    if t <= 0.0:
        out[0] = a[0]; out[1] = a[1]; out[2] = a[2]; out[3] = a[3]
        return 0
    if t >= 1.0:
        out[0] = bx; out[1] = by; out[2] = bz; out[3] = bw
        return 0
    if bx == a[0] and by == a[1] and bz == a[2] and bw == a[3]:
        out[0] = a[0]; out[1] = a[1]; out[2] = a[2]; out[3] = a[3]
        return 0
    if dot > 0.9995:
        out[0] = a[0] + t * (bx - a[0])
        out[1] = a[1] + t * (by - a[1])
        out[2] = a[2] + t * (bz - a[2])
        out[3] = a[3] + t * (bw - a[3])
        _normalize(out)
        return 0
    if dot > 1.0:
        dot = 1.0
    elif dot < -1.0:
        dot = -1.0
    theta0 = acos(dot)
    sin0 = sin(theta0)
    s0 = sin((1.0 - t) * theta0) / sin0
    s1 = sin(t * theta0) / sin0
    out[0] = s0 * a[0] + s1 * bx
    out[1] = s0 * a[1] + s1 * by
    out[2] = s0 * a[2] + s1 * bz
    out[3] = s0 * a[3] + s1 * bw
    _normalize(out)
    return 0


def quat_slerp(a, b, t):
    cdef double[:] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty(4)
    cdef double[:] o = out
    _slerp(&av[0], &bv[0], t, &o[0])
    return out


def quat_mul_batch(a, b):
    cdef double[:, :] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, :] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], j
    out = np.empty((n, 4))
    cdef double[:, :] o = out
    for j in range(n):
        _mul(&av[j, 0], &bv[j, 0], &o[j, 0])
    return out


def quat_normalize_batch(q):
    cdef double[:, :] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0], j
    out = np.empty((n, 4))
    cdef double[:, :] o = out
    for j in range(n):
        o[j, 0] = qv[j, 0]
        o[j, 1] = qv[j, 1]
        o[j, 2] = qv[j, 2]
        o[j, 3] = qv[j, 3]
        _normalize(&o[j, 0])
    return out


def slerp_batch(a, b, double t):
    cdef double[:, :] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, :] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], j
    out = np.empty((n, 4))
    cdef double[:, :] o = out
    for j in range(n):
        _slerp(&av[j, 0], &bv[j, 0], t, &o[j, 0])
    return out


def fk(parents, bind_offsets, bind_rotations, local_rotations, root_translation):
    cdef long[:] par = np.ascontiguousarray(parents, dtype=np.int64)
    cdef double[:, :] offs = np.ascontiguousarray(bind_offsets, dtype=np.float64)
    cdef double[:, :] binds = np.ascontiguousarray(bind_rotations, dtype=np.float64)
    cdef double[:, :] locs = np.ascontiguousarray(local_rotations, dtype=np.float64)
    cdef double[:] rt = np.ascontiguousarray(root_translation, dtype=np.float64)
    cdef Py_ssize_t n = par.shape[0], j
    cdef long p
    pos = np.empty((n, 3))
    rot = np.empty((n, 4))
    cdef double[:, :] pv = pos
    cdef double[:, :] rv = rot
    cdef double lr[4]
    cdef double dp[3]
    pv[0, 0] = rt[0]
    pv[0, 1] = rt[1]
    pv[0, 2] = rt[2]
    _mul(&binds[0, 0], &locs[0, 0], &rv[0, 0])
    _normalize(&rv[0, 0])
    for j in range(1, n):
        p = par[j]
        _mul(&binds[j, 0], &locs[j, 0], lr)
        _normalize(lr)
        _mul(&rv[p, 0], lr, &rv[j, 0])
        _normalize(&rv[j, 0])
        _rotate(&rv[p, 0], &offs[j, 0], dp)
        pv[j, 0] = pv[p, 0] + dp[0]
        pv[j, 1] = pv[p, 1] + dp[1]
        pv[j, 2] = pv[p, 2] + dp[2]
    return pos, rot


# ---------------------------------------------------------------------------
# Grid A*

cdef struct HeapEntry:
    double f
    double h
    long idx


cdef inline bint _heap_less(HeapEntry a, HeapEntry b) nogil:
    if a.f != b.f:
        return a.f < b.f
    if a.h != b.h:
        return a.h < b.h
    return a.idx < b.idx


cdef void _heap_push(HeapEntry* heap, Py_ssize_t* size, HeapEntry item) nogil:
    cdef Py_ssize_t i = size[0], parent
    cdef HeapEntry tmp
    heap[i] = item
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _heap_less(heap[i], heap[parent]):
            tmp = heap[parent]
            heap[parent] = heap[i]
            heap[i] = tmp
            i = parent
        else:
            break


cdef HeapEntry _heap_pop(HeapEntry* heap, Py_ssize_t* size) nogil:
    cdef HeapEntry top = heap[0]
    cdef HeapEntry tmp
    cdef Py_ssize_t i = 0, child
    size[0] -= 1
    heap[0] = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and _heap_less(heap[child + 1], heap[child]):
            child += 1
        if _heap_less(heap[child], heap[i]):
            tmp = heap[i]
            heap[i] = heap[child]
            heap[child] = tmp
            i = child
        else:
            break
    return top


cdef int _DX[8]
cdef int _DZ[8]
_DX[0] = 1; _DZ[0] = 0
_DX[1] = -1; _DZ[1] = 0
_DX[2] = 0; _DZ[2] = 1
_DX[3] = 0; _DZ[3] = -1
_DX[4] = 1; _DZ[4] = 1
_DX[5] = 1; _DZ[5] = -1
_DX[6] = -1; _DZ[6] = 1
_DX[7] = -1; _DZ[7] = -1


def astar_grid(walkable, long width, long height, long start, long goal, debug=False):
    """See _kern_py.astar_grid; the debug flag is ignored here."""
    cdef unsigned char[:] w = np.ascontiguousarray(walkable, dtype=np.uint8)
    if not w[start] or not w[goal]:
        return None
    cdef long ncells = width * height
    cdef double sqrt2 = sqrt(2.0)
    cdef long gx = goal % width
    cdef long gz = goal // width
    cdef double* g = <double*> malloc(ncells * sizeof(double))
    cdef long* came = <long*> malloc(ncells * sizeof(long))
    cdef unsigned char* closed = <unsigned char*> malloc(ncells)
    # Lazy-deletion heap: each improvement pushes, worst case ~8 per cell.
    cdef HeapEntry* heap = <HeapEntry*> malloc((8 * ncells + 8) * sizeof(HeapEntry))
    if g == NULL or came == NULL or closed == NULL or heap == NULL:
        free(g); free(came); free(closed); free(heap)
        raise MemoryError()
    cdef Py_ssize_t heap_size = 0
    cdef long i, idx, ix, iz, nx, nz, nidx, k, dxs, dzs
    cdef double gc, step, ng, nh, h0
    cdef HeapEntry top, entry
    cdef bint found = False
    for i in range(ncells):
        g[i] = INFINITY
        came[i] = -1
        closed[i] = 0
    cdef long sx = start % width
    cdef long sz = start // width
    h0 = sqrt(<double>((sx - gx) * (sx - gx) + (sz - gz) * (sz - gz)))
    g[start] = 0.0
    entry.f = h0
    entry.h = h0
    entry.idx = start
    _heap_push(heap, &heap_size, entry)
    while heap_size > 0:
        top = _heap_pop(heap, &heap_size)
        idx = top.idx
        if closed[idx]:
            continue
        closed[idx] = 1
        if idx == goal:
            found = True
            break
        ix = idx % width
        iz = idx // width
        gc = g[idx]
        for k in range(8):
            dxs = _DX[k]
            dzs = _DZ[k]
            nx = ix + dxs
            nz = iz + dzs
            if nx < 0 or nx >= width or nz < 0 or nz >= height:
                continue
            nidx = nz * width + nx
            if not w[nidx]:
                continue
            if dxs != 0 and dzs != 0:
                if not w[iz * width + nx] or not w[nz * width + ix]:
                    continue
                step = sqrt2
            else:
                step = 1.0
            ng = gc + step
            if ng < g[nidx]:
                g[nidx] = ng
                came[nidx] = idx
                nh = sqrt(<double>((nx - gx) * (nx - gx) + (nz - gz) * (nz - gz)))
                entry.f = ng + nh
                entry.h = nh
                entry.idx = nidx
                _heap_push(heap, &heap_size, entry)
    if not found:
        free(g); free(came); free(closed); free(heap)
        return None
    path = []
    idx = goal
    while idx != -1:
        path.append(idx)
        idx = came[idx]
    path.reverse()
    cdef long n_orth = 0, n_diag = 0, a, b
    for i in range(1, len(path)):
        a = path[i]
        b = path[i - 1]
        dxs = a % width - b % width
        dzs = a // width - b // width
        if dxs != 0 and dzs != 0:
            n_diag += 1
        else:
            n_orth += 1
    free(g); free(came); free(closed); free(heap)
    return path, n_orth, n_diag
