"""Compiled inner loops for the stochastic trainers.

Each function advances a trainer over a chunk of pre-drawn sample indices,
updating the iterates in place. No arrays are allocated inside the loops.
A negative return value ``-(i + 1)`` reports a non-finite iterate at chunk
position ``i``.
"""

import math

from numba import njit


@njit(cache=True, nogil=True)
def sgtsvm_chunk(X1, X2, idx1, idx2, etas, c1, c2, c3, c4, tol, early_stop,
                 w1, w2, b, conv, delta1, delta2, stats,
                 record, hist_w1, hist_w2, hist_b):
    n = X1.shape[1]
    for it in range(idx1.shape[0]):
        i = idx1[it]
        k = idx2[it]
        eta = etas[it]
        d1 = 0.0
        d2 = 0.0
        if conv[0] == 0:
            # half 1: proximal to positives, hinge on negatives
            s = 0.0
            h = 0.0
            for j in range(n):
                s += w1[j] * X1[i, j]
                h += w1[j] * X2[k, j]
            s += b[0]
            h = 1.0 + h + b[0]
            cs = c1 * s
            ch = c2 if h > 0.0 else 0.0
            g2 = 0.0
            u2 = 0.0
            for j in range(n):
                g = w1[j] + cs * X1[i, j] + ch * X2[k, j]
                w1[j] -= eta * g
                g2 += g * g
                u2 += w1[j] * w1[j]
            gb = b[0] + cs + ch
            b[0] -= eta * gb
            d1 = eta * math.sqrt(g2) + eta * abs(gb)
            if not (math.isfinite(d1) and math.isfinite(b[0])):
                return -(it + 1)
            stats[0] = max(stats[0], math.sqrt(u2 + b[0] * b[0]))
            stats[1] = max(stats[1], math.sqrt(g2 + gb * gb))
            if early_stop and d1 < tol:
                conv[0] = 1
        if conv[1] == 0:
            # half 2: proximal to negatives, hinge on positives
            s = 0.0
            h = 0.0
            for j in range(n):
                s += w2[j] * X2[k, j]
                h += w2[j] * X1[i, j]
            s += b[1]
            h = 1.0 - h - b[1]
            cs = c3 * s
            ch = c4 if h > 0.0 else 0.0
            g2 = 0.0
            u2 = 0.0
            for j in range(n):
                g = w2[j] + cs * X2[k, j] - ch * X1[i, j]
                w2[j] -= eta * g
                g2 += g * g
                u2 += w2[j] * w2[j]
            gb = b[1] + cs - ch
            b[1] -= eta * gb
            d2 = eta * math.sqrt(g2) + eta * abs(gb)
            if not (math.isfinite(d2) and math.isfinite(b[1])):
                return -(it + 1)
            stats[2] = max(stats[2], math.sqrt(u2 + b[1] * b[1]))
            stats[3] = max(stats[3], math.sqrt(g2 + gb * gb))
            if early_stop and d2 < tol:
                conv[1] = 1
        delta1[it] = d1
        delta2[it] = d2
        if record:
            for j in range(n):
                hist_w1[it, j] = w1[j]
                hist_w2[it, j] = w2[j]
            hist_b[it, 0] = b[0]
            hist_b[it, 1] = b[1]
        if conv[0] == 1 and conv[1] == 1:
            return it + 1
    return idx1.shape[0]


@njit(cache=True, nogil=True)
def pegasos_chunk(X, y, idx, etas, c, tol, with_bias, early_stop,
                  w, b, conv, delta, record, hist_w, hist_b):
    n = X.shape[1]
    for it in range(idx.shape[0]):
        i = idx[it]
        eta = etas[it]
        yi = y[i]
        s = 0.0
        for j in range(n):
            s += w[j] * X[i, j]
        if with_bias:
            s += b[0]
        act = c * yi if 1.0 - yi * s > 0.0 else 0.0
        g2 = 0.0
        for j in range(n):
            g = w[j] - act * X[i, j]
            w[j] -= eta * g
            g2 += g * g
        d = eta * math.sqrt(g2)
        if with_bias:
            gb = -act
            b[0] -= eta * gb
            d += eta * abs(gb)
        if not (math.isfinite(d) and math.isfinite(b[0])):
            return -(it + 1)
        delta[it] = d
        if record:
            for j in range(n):
                hist_w[it, j] = w[j]
            hist_b[it] = b[0]
        if early_stop and d < tol:
            conv[0] = 1
            return it + 1
    return idx.shape[0]
