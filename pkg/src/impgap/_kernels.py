"""Compiled kernels for the explicit Euler scheme of the extended system.

State rows are ``(y0, y_1..y_n, nu)``.  The drift table has variables
``(t, x, a)`` and the impulse table has variables ``(t, x)`` with component
``i * m + j`` holding row ``i`` of field ``g_j``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def poly_eval(comp, coef, exps, dim, z, val, jac, want_jac):
    nv = z.shape[0]
    for i in range(dim):
        val[i] = 0.0
        if want_jac:
            for j in range(nv):
                jac[i, j] = 0.0
    for k in range(coef.shape[0]):
        term = coef[k]
        for j in range(nv):
            e = exps[k, j]
            if e != 0:
                term *= z[j] ** e
        val[comp[k]] += term
        if want_jac:
            for j in range(nv):
                e = exps[k, j]
                if e == 0:
                    continue
                g = coef[k] * e
                for l in range(nv):
                    el = exps[k, l]
                    if l == j:
                        el -= 1
                    if el != 0:
                        g *= z[l] ** el
                jac[comp[k], j] += g


@njit(cache=True)
def forward(z0, ds, w0, w, r, alpha, fc, fco, fe, gc, gco, ge, n, m):
    M = ds.shape[0]
    q = alpha.shape[1]
    Z = np.empty((M + 1, n + 2))
    Z[0, :] = z0
    varf = np.empty(1 + n + q)
    varg = np.empty(1 + n)
    fval = np.empty(n)
    fjac = np.empty((n, 1 + n + q))
    gval = np.empty(n * m)
    gjac = np.empty((n * m, 1 + n))
    for k in range(M):
        for c in range(1 + n):
            varf[c] = Z[k, c]
            varg[c] = Z[k, c]
        for l in range(q):
            varf[1 + n + l] = alpha[k, l]
        poly_eval(fc, fco, fe, n, varf, fval, fjac, False)
        poly_eval(gc, gco, ge, n * m, varg, gval, gjac, False)
        Z[k + 1, 0] = Z[k, 0] + ds[k] * w0[k]
        for i in range(n):
            acc = fval[i] * w0[k]
            for j in range(m):
                acc += gval[i * m + j] * w[k, j]
            Z[k + 1, 1 + i] = Z[k, 1 + i] + ds[k] * acc
        Z[k + 1, n + 1] = Z[k, n + 1] + ds[k] * r[k]
    return Z


@njit(cache=True)
def backward(Z, ds, w0, w, r, alpha, gZ, fc, fco, fe, gc, gco, ge, n, m):
    """Reverse sweep: sensitivities of ``sum_k gZ[k] . Z[k]`` to every input."""
    M = ds.shape[0]
    q = alpha.shape[1]
    lam = np.empty((M + 1, n + 2))
    lam[M, :] = gZ[M, :]
    g_w0 = np.empty(M)
    g_w = np.empty((M, m))
    g_r = np.empty(M)
    g_alpha = np.empty((M, q))
    g_ds = np.empty(M)
    varf = np.empty(1 + n + q)
    varg = np.empty(1 + n)
    fval = np.empty(n)
    fjac = np.empty((n, 1 + n + q))
    gval = np.empty(n * m)
    gjac = np.empty((n * m, 1 + n))
    for k in range(M - 1, -1, -1):
        for c in range(1 + n):
            varf[c] = Z[k, c]
            varg[c] = Z[k, c]
        for l in range(q):
            varf[1 + n + l] = alpha[k, l]
        poly_eval(fc, fco, fe, n, varf, fval, fjac, True)
        poly_eval(gc, gco, ge, n * m, varg, gval, gjac, True)
        nxt = lam[k + 1]
        h = k
        drift = 0.0
        for i in range(n):
            drift += nxt[1 + i] * fval[i]
        rate = nxt[0] * w0[h] + drift * w0[h] + nxt[n + 1] * r[h]
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += nxt[1 + i] * gval[i * m + j]
            g_w[h, j] = ds[h] * acc
            rate += acc * w[h, j]
        g_ds[h] = rate
        g_w0[h] = ds[h] * (nxt[0] + drift)
        g_r[h] = ds[h] * nxt[n + 1]
        for l in range(q):
            acc = 0.0
            for i in range(n):
                acc += nxt[1 + i] * fjac[i, 1 + n + l]
            g_alpha[h, l] = ds[h] * w0[h] * acc
        for c in range(n + 2):
            lam[k, c] = gZ[k, c] + nxt[c]
        for c in range(1 + n):
            acc = 0.0
            for i in range(n):
                d = w0[h] * fjac[i, c]
                for j in range(m):
                    d += w[h, j] * gjac[i * m + j, c]
                acc += nxt[1 + i] * d
            lam[k, c] += ds[h] * acc
    return lam, g_w0, g_w, g_r, g_alpha, g_ds
