"""Independent reference computations used by the tests.

Nothing here calls the analytic derivative or root-finding code under test.
"""

import numpy as np
from scipy.optimize import least_squares


def central_jacobian(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * step))
    return np.column_stack(cols) if np.ndim(cols[0]) else np.array(cols)


def rel_err(a, b, floor=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), floor))


def grid_scan(g_batch, lo, hi, nodes=400):
    """Evaluate ``|g|`` on a ``nodes x nodes`` grid and pick out candidate roots.

    A node is a candidate when it is a local minimum of ``|g|`` over its 3x3
    neighbourhood and ``|g| < 1.5 * L * h``, where ``L`` is the largest
    difference quotient to an axis neighbour and ``h`` the larger grid step.
    That threshold bounds ``|g|`` at the node nearest to any root to first
    order.
    """
    xs = np.linspace(lo[0], hi[0], nodes)
    ys = np.linspace(lo[1], hi[1], nodes)
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    P = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    G = g_batch(P).reshape(nodes, nodes, 2)
    N = np.linalg.norm(G, axis=-1)

    L = np.zeros_like(N)
    for axis, h in ((0, hx), (1, hy)):
        d = np.linalg.norm(np.diff(G, axis=axis), axis=-1) / h
        pad = [(0, 0), (0, 0)]
        pad[axis] = (1, 0)
        L = np.maximum(L, np.pad(d, pad))
        pad[axis] = (0, 1)
        L = np.maximum(L, np.pad(d, pad))
    tau = 1.5 * L * max(hx, hy)

    padded = np.pad(N, 1, constant_values=np.inf)
    neigh = np.stack([padded[1 + di:nodes + 1 + di, 1 + dj:nodes + 1 + dj]
                      for di in (-1, 0, 1) for dj in (-1, 0, 1)])
    local_min = N <= neigh.min(axis=0)
    cand = np.argwhere(local_min & (N < tau))
    return {"xs": xs, "ys": ys, "h": np.array([hx, hy]), "N": N, "tau": tau, "candidates": cand}


def polish_root(g, x0, tol):
    """Minimize |g| from ``x0`` with scipy's trust-region least squares."""
    res = least_squares(g, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    return res.x, float(np.linalg.norm(g(res.x)))


def check_against_grid(g_batch, g, lo, hi, reported, nodes=400, accept=1e-8):
    """Compare reported equilibria with a brute-force grid scan.

    Returns a list of human-readable problems; empty means agreement.
    """
    scan = grid_scan(g_batch, lo, hi, nodes)
    xs, ys, h, N, tau = scan["xs"], scan["ys"], scan["h"], scan["N"], scan["tau"]
    problems = []
    reported = np.asarray(reported, dtype=float).reshape(-1, 2)

    for x in reported:
        i = int(np.clip(np.round((x[0] - lo[0]) / h[0]), 0, nodes - 1))
        j = int(np.clip(np.round((x[1] - lo[1]) / h[1]), 0, nodes - 1))
        sl = (slice(max(i - 1, 0), i + 2), slice(max(j - 1, 0), j + 2))
        if not np.any(N[sl] < tau[sl]):
            problems.append(f"no small-residual grid cell near reported root {x}")

    for i, j in scan["candidates"]:
        node = np.array([xs[i], ys[j]])
        if reported.size and np.any(np.all(np.abs(reported - node) <= 2 * h, axis=1)):
            continue
        # could be a shallow non-root minimum; confirm independently
        root, r = polish_root(g, node, accept)
        if r < accept * (1 + np.linalg.norm(root)) and np.all(root >= lo) and np.all(root <= hi):
            if not (reported.size and np.any(np.linalg.norm(reported - root, axis=1) < 2 * h.max())):
                problems.append(f"grid scan found an unreported root near {root} (|g| = {r:.2e})")
    return problems
