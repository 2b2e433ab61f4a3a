"""Pure-Python/numpy implementations of the hot kernels.

Same contracts as the compiled backend in ``_kern_c``; see ``kernels`` for
how one of the two gets selected at import time.

Quaternions are float64 arrays laid out (x, y, z, w); Hamilton product; unit
quaternions rotate column vectors the usual way (v' = q v q*).
"""

import heapq
import math

import numpy as np

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


def quat_mul(a, b):
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + bw * ax + ay * bz - az * by,
            aw * by + bw * ay + az * bx - ax * bz,
            aw * bz + bw * az + ax * by - ay * bx,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_conjugate(q):
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q, v):
    # v' = v + 2 q.w (q.xyz x v) + 2 q.xyz x (q.xyz x v)
    qx, qy, qz, qw = q
    tx = 2.0 * (qy * v[2] - qz * v[1])
    ty = 2.0 * (qz * v[0] - qx * v[2])
    tz = 2.0 * (qx * v[1] - qy * v[0])
    return np.array(
        [
            v[0] + qw * tx + (qy * tz - qz * ty),
            v[1] + qw * ty + (qz * tx - qx * tz),
            v[2] + qw * tz + (qx * ty - qy * tx),
        ]
    )


def quat_slerp(a, b, t):
    """Shortest-arc slerp. Endpoints are returned exactly (no renormalize)."""
    dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    if dot < 0.0:
        b = -b
        dot = -dot
    if t <= 0.0:
        return a.copy()
    if t >= 1.0:
        return b.copy()
    if b[0] == a[0] and b[1] == a[1] and b[2] == a[2] and b[3] == a[3]:
        return a.copy()
    if dot > 0.9995:
        out = a + t * (b - a)
        return quat_normalize(out)
    theta0 = math.acos(min(1.0, max(-1.0, dot)))
    sin0 = math.sin(theta0)
    s0 = math.sin((1.0 - t) * theta0) / sin0
    s1 = math.sin(t * theta0) / sin0
    return quat_normalize(s0 * a + s1 * b)


def quat_mul_batch(a, b):
    """Row-wise Hamilton product of two (J, 4) arrays; no renormalization."""
    ax, ay, az, aw = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bx, by, bz, bw = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    out = np.empty_like(a)
    out[:, 0] = aw * bx + bw * ax + ay * bz - az * by
    out[:, 1] = aw * by + bw * ay + az * bx - ax * bz
    out[:, 2] = aw * bz + bw * az + ax * by - ay * bx
    out[:, 3] = aw * bw - ax * bx - ay * by - az * bz
    return out


def quat_normalize_batch(q):
    norms = np.sqrt(np.sum(q * q, axis=1))
    return q / norms[:, None]


def slerp_batch(a, b, t):
    """Row-wise shortest-arc slerp with scalar t.

    Rows where the (sign-adjusted) inputs are bit-identical come back
    untouched, so blending a pose with itself is exact.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[0]
    out = np.empty_like(a)
    for j in range(n):
        out[j] = quat_slerp(a[j], b[j], t)
    return out


def fk(parents, bind_offsets, bind_rotations, local_rotations, root_translation):
    """World transforms for a topologically sorted joint chain.

    parents[0] must be -1 (root). Returns (positions (J,3), rotations (J,4)).
    """
    n = len(parents)
    pos = np.empty((n, 3))
    rot = np.empty((n, 4))
    pos[0] = root_translation
    rot[0] = quat_normalize(quat_mul(bind_rotations[0], local_rotations[0]))
    for j in range(1, n):
        p = parents[j]
        lr = quat_normalize(quat_mul(bind_rotations[j], local_rotations[j]))
        rot[j] = quat_normalize(quat_mul(rot[p], lr))
        pos[j] = pos[p] + quat_rotate(rot[p], bind_offsets[j])
    return pos, rot


_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


def astar_grid(walkable, width, height, start, goal, debug=False):
    """A* over a uint8 occupancy grid, 8-connected, no corner cutting.

    walkable: flat row-major array, index = iz * width + ix. start/goal are
    flat cell indices. Step costs are 1 (orthogonal) and sqrt(2) (diagonal)
    in cell units; ties broken by lower heuristic, then row-major index.

    Returns (path_indices list root..goal, n_orth, n_diag) or None when no
    route exists. The caller derives the metric cost from the step counts so
    that equal-cost paths always report bit-identical totals.
    """
    if not walkable[start] or not walkable[goal]:
        return None
    ncells = width * height
    sqrt2 = math.sqrt(2.0)
    gx = goal % width
    gz = goal // width
    g = [math.inf] * ncells
    came = [-1] * ncells
    closed = bytearray(ncells)
    sx = start % width
    sz = start // width
    h0 = math.sqrt((sx - gx) ** 2 + (sz - gz) ** 2)
    g[start] = 0.0
    heap = [(h0, h0, start)]
    expanded = [] if debug else None
    while heap:
        f, hh, idx = heapq.heappop(heap)
        if closed[idx]:
            continue
        closed[idx] = 1
        if debug:
            expanded.append(idx)
        if idx == goal:
            path = []
            cur = idx
            while cur != -1:
                path.append(cur)
                cur = came[cur]
            path.reverse()
            n_orth = 0
            n_diag = 0
            for k in range(1, len(path)):
                dx = abs(path[k] % width - path[k - 1] % width)
                dz = abs(path[k] // width - path[k - 1] // width)
                if dx and dz:
                    n_diag += 1
                else:
                    n_orth += 1
            if debug:
                _assert_admissible(expanded, g, goal, width)
            return path, n_orth, n_diag
        ix = idx % width
        iz = idx // width
        gc = g[idx]
        for dx, dz in _NEIGHBORS:
            nx = ix + dx
            nz = iz + dz
            if nx < 0 or nx >= width or nz < 0 or nz >= height:
                continue
            nidx = nz * width + nx
            if not walkable[nidx]:
                continue
            if dx and dz:
                if not walkable[iz * width + nx] or not walkable[nz * width + ix]:
                    continue
                step = sqrt2
            else:
                step = 1.0
            ng = gc + step
            if ng < g[nidx]:
                g[nidx] = ng
                came[nidx] = idx
                nh = math.sqrt((nx - gx) ** 2 + (nz - gz) ** 2)
                heapq.heappush(heap, (ng + nh, nh, nidx))
    return None


def _assert_admissible(expanded, g, goal, width):
    # With an admissible heuristic A* only settles nodes with f = g + h not
    # exceeding the optimal cost; a violation flags a broken heuristic (or a
    # broken search).
    ggoal = g[goal]
    gx = goal % width
    gz = goal // width
    for idx in expanded:
        h = math.sqrt((idx % width - gx) ** 2 + (idx // width - gz) ** 2)
        if g[idx] + h > ggoal + 1e-9:
            raise AssertionError(
                f"inadmissible expansion at cell {idx}: f={g[idx] + h} > C*={ggoal}"
            )
