"""Exact maximum-likelihood search over finite PAM product grids.

Model: y = A s + noise with s_i = 2 u_i - (m_i - 1), u_i in {0..m_i-1}
(unit-spaced PAM scaled to spacing 2, zero mean).  Both the exhaustive and
the depth-first sphere (Schnorr-Euchner) search return the exact argmin of
||y - A s||^2 over the grid; on ties each keeps the first candidate in its
own scan order, which coincides for generic (noise-perturbed) inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

_CHUNK = 1 << 14


def _symbols_from_indices(flat, levels):
    """Mixed-radix decode of flat indices into PAM symbol rows."""
    k = len(levels)
    out = np.empty((flat.size, k))
    rem = flat.copy()
    for i in range(k - 1, -1, -1):
        m = levels[i]
        u = rem % m
        rem //= m
        out[:, i] = 2 * u - (m - 1)
    return out


def exhaustive_search(A, y, levels):
    """Argmin by full enumeration (chunked); returns the index vector u."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    levels = [int(m) for m in levels]
    total = math.prod(levels)
    best_d = math.inf
    best_flat = -1
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        s = _symbols_from_indices(flat, levels)
        d = np.sum((y[None, :] - s @ A.T) ** 2, axis=1)
        j = int(np.argmin(d))
        if d[j] < best_d:
            best_d = float(d[j])
            best_flat = int(flat[j])
    u = []
    rem = best_flat
    for m in reversed(levels):
        u.append(rem % m)
        rem //= m
    return np.array(u[::-1], dtype=int)


def sphere_search(A, y, levels, max_nodes=None):
    """Schnorr-Euchner depth-first search with box constraints (exact ML).

    With `max_nodes` set, enumeration stops after that many visited nodes
    and the best candidate found so far is returned; the first leaf (the
    box-constrained Babai point) is always reached first, so a result
    exists whenever max_nodes >= the number of levels.  Near-capacity
    inputs - in particular observations whitened under a wrong subtraction
    - can otherwise make the exact search enumerate astronomically many
    points.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    levels = [int(m) for m in levels]
    k = len(levels)
    if A.shape[1] != k:
        raise ValidationError("levels length must match the column count")
    if A.shape[0] < k:
        raise ValidationError("underdetermined search model")
    # Work in index coordinates: s = 2u - (m-1), so y' = y + A (m-1) and the
    # columns pick up a factor 2.
    offset = np.array([float(m - 1) for m in levels])
    y_eff = y + A @ offset
    B = 2.0 * A
    q_mat, r_mat = np.linalg.qr(B)
    signs = np.sign(np.diag(r_mat))
    signs[signs == 0] = 1.0
    r_mat = signs[:, None] * r_mat
    ytil = (q_mat * signs[None, :]).T @ y_eff
    diag = np.diag(r_mat)
    if np.any(diag <= 0):
        raise ValidationError("search model is rank deficient")

    best_d = math.inf
    best_u = None
    u = np.zeros(k, dtype=int)       # current in-range candidate per level
    zz = np.zeros(k, dtype=int)      # zig-zag cursor (may leave the box)
    step = np.zeros(k, dtype=int)    # pending zig-zag delta
    remaining = np.zeros(k, dtype=int)  # unvisited in-range values per level
    center = np.zeros(k)
    pdist = np.zeros(k + 1)

    def enter(i):
        resid = ytil[i] - r_mat[i, i + 1:] @ u[i + 1:]
        center[i] = resid / diag[i]
        u0 = int(round(center[i]))
        u0 = max(0, min(levels[i] - 1, u0))
        u[i] = u0
        zz[i] = u0
        step[i] = 1 if center[i] >= u0 else -1
        remaining[i] = levels[i] - 1

    def advance(i):
        # Move to the next candidate in non-decreasing |u - center| order,
        # skipping zig-zag positions that fall outside {0..m-1}.
        if remaining[i] == 0:
            return False
        while True:
            zz[i] += step[i]
            step[i] = -step[i] - (1 if step[i] > 0 else -1)
            if 0 <= zz[i] < levels[i]:
                u[i] = zz[i]
                remaining[i] -= 1
                return True

    i = k - 1
    enter(i)
    nodes = 0
    while True:
        nodes += 1
        if max_nodes is not None and nodes > max_nodes and best_u is not None:
            break
        d = pdist[i + 1] + (diag[i] * (center[i] - u[i])) ** 2
        if d < best_d and i > 0:
            pdist[i] = d
            i -= 1
            enter(i)
            continue
        if d < best_d:
            best_d = d
            best_u = u.copy()
        # Later siblings at this level sit at least as far from the center,
        # so whether this node was pruned or recorded, the level is done.
        i += 1
        while i < k and not advance(i):
            i += 1
        if i == k:
            break
    if best_u is None:
        raise ValidationError("sphere search found no lattice point")
    return best_u


def ml_search(A, y, levels, exhaustive_bit_limit=24, max_nodes=None):
    """Exact ML index vector; exhausts small grids, sphere-searches big ones.

    `max_nodes` bounds the sphere enumeration (see sphere_search); the
    exhaustive route ignores it, so results below the bit limit are always
    the unconstrained argmin.
    """
    bits = sum(math.log2(m) for m in levels if m > 1)
    if bits <= exhaustive_bit_limit:
        return exhaustive_search(A, y, levels)
    return sphere_search(A, y, levels, max_nodes=max_nodes)
