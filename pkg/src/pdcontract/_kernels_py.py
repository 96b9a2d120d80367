"""Pure-Python implementations of the hot kernels.

These are the fallback when the compiled ``_kernels`` extension is not
available, and the reference the compiled versions are tested against.

The eigensolver here uses the parallel (round-robin) ordering of Jacobi
rotations: each round applies ``n // 2`` disjoint rotations at once as a
single orthogonal matrix, which keeps the Python-level loop short.
"""
import numpy as np


def _round_robin(n):
    """Yield lists of disjoint index pairs covering every pair once per sweep."""
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S, tol=1e-15, max_sweeps=100):
    """Symmetric eigendecomposition by Jacobi rotations.

    Parameters
    ----------
    S : (n, n) array_like
        Symmetric matrix. Only exact symmetry is assumed; callers symmetrize.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm drops below
        ``tol * ||S||_F``.
    max_sweeps : int
        Hard cap on sweeps.

    Returns
    -------
    w : (n,) ndarray
        Eigenvalues in ascending order.
    V : (n, n) ndarray
        Orthonormal eigenvectors as columns, ordered like ``w``.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    if n < 2:
        return np.diagonal(A).copy(), V
    frob = np.linalg.norm(A)
    rounds = _round_robin(n)
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A[offmask] ** 2))
        if off <= tol * frob or off == 0.0:
            break
        for pairs in rounds:
            p = np.array([pq[0] for pq in pairs])
            q = np.array([pq[1] for pq in pairs])
            apq = A[p, q]
            active = np.abs(apq) >= 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            J = np.eye(n)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            A[p, q] = 0.0
            A[q, p] = 0.0
            V = V @ J
    w = np.diagonal(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def rk4_affine(A, b_nodes, b_mid, z0, steps, limit=1e9):
    """Classical RK4 for ``z' = A z + b(t)`` on a precomputed grid.

    Parameters
    ----------
    A : (d, d) ndarray
    b_nodes : (N + 1, d) ndarray
        Forcing evaluated at the grid nodes.
    b_mid : (N, d) ndarray
        Forcing evaluated at the step midpoints.
    z0 : (d,) ndarray
    steps : (N,) ndarray
        Step lengths.
    limit : float
        Any state component exceeding this magnitude aborts the run.

    Returns
    -------
    states : (N + 1, d) ndarray
        Rows past a failure are undefined.
    failed_at : int
        ``-1`` on success, otherwise the index of the last valid row.
    """
    A = np.asarray(A, dtype=np.float64)
    N = len(steps)
    out = np.empty((N + 1, A.shape[0]))
    z = np.array(z0, dtype=np.float64)
    out[0] = z
    for i in range(N):
        h = steps[i]
        k1 = A @ z + b_nodes[i]
        k2 = A @ (z + 0.5 * h * k1) + b_mid[i]
        k3 = A @ (z + 0.5 * h * k2) + b_mid[i]
        k4 = A @ (z + h * k3) + b_nodes[i + 1]
        z = z + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > limit:
            return out, i
        out[i + 1] = z
    return out, -1
