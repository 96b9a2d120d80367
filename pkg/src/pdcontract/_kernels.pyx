# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: cyclic Jacobi eigensolver and affine RK4 stepping.

Signatures and results match ``_kernels_py`` exactly; see that module for
the reference description of each routine.
"""
import numpy as np

from libc.math cimport sqrt, fabs, hypot, isfinite


def jacobi_eigh(S, double tol=1e-15, int max_sweeps=100):
    cdef Py_ssize_t n = S.shape[0]
    A_arr = np.array(S, dtype=np.float64, order="C", copy=True)
    V_arr = np.eye(n)
    cdef double[:, ::1] a = A_arr
    cdef double[:, ::1] v = V_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, frob, apq, tau, t, c, s, akp, akq
    cdef double tiny = 1e-300

    frob = 0.0
    for p in range(n):
        for q in range(n):
            frob += a[p, q] * a[p, q]
    frob = sqrt(frob)

    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        if sqrt(off) <= tol * frob or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) < tiny:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + hypot(1.0, tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq

    w = np.diagonal(A_arr).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V_arr[:, order]


def rk4_affine(A, b_nodes, b_mid, z0, steps, double limit=1e9):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] bn = np.ascontiguousarray(b_nodes, dtype=np.float64)
    cdef double[:, ::1] bm = np.ascontiguousarray(b_mid, dtype=np.float64)
    cdef double[::1] h_arr = np.ascontiguousarray(steps, dtype=np.float64)
    cdef Py_ssize_t d = a.shape[0]
    cdef Py_ssize_t N = h_arr.shape[0]
    out_arr = np.empty((N + 1, d))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] k1 = np.empty(d)
    cdef double[::1] k2 = np.empty(d)
    cdef double[::1] k3 = np.empty(d)
    cdef double[::1] k4 = np.empty(d)
    cdef double[::1] tmp = np.empty(d)
    cdef Py_ssize_t i, r, c
    cdef double h, acc, val

    z_init = np.asarray(z0, dtype=np.float64)
    for r in range(d):
        out[0, r] = z_init[r]

    for i in range(N):
        h = h_arr[i]
        for r in range(d):
            acc = bn[i, r]
            for c in range(d):
                acc += a[r, c] * out[i, c]
            k1[r] = acc
        for r in range(d):
            tmp[r] = out[i, r] + 0.5 * h * k1[r]
        for r in range(d):
            acc = bm[i, r]
            for c in range(d):
                acc += a[r, c] * tmp[c]
            k2[r] = acc
        for r in range(d):
            tmp[r] = out[i, r] + 0.5 * h * k2[r]
        for r in range(d):
            acc = bm[i, r]
            for c in range(d):
                acc += a[r, c] * tmp[c]
            k3[r] = acc
        for r in range(d):
            tmp[r] = out[i, r] + h * k3[r]
        for r in range(d):
            acc = bn[i + 1, r]
            for c in range(d):
                acc += a[r, c] * tmp[c]
            k4[r] = acc
        for r in range(d):
            val = out[i, r] + h * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]) / 6.0
            if not isfinite(val) or fabs(val) > limit:
                return out_arr, i
            out[i + 1, r] = val
    return out_arr, -1
