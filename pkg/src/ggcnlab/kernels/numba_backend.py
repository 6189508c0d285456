"""Jitted twins of the numpy kernels.

Accumulation order matches numpy_backend exactly: plain edge loops in index
order, so both backends produce bit-identical float64 results.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def edge_cosine(feat, src, dst, delta):
    n, dim = feat.shape
    n_edges = src.shape[0]
    norms = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(dim):
            s += feat[i, j] * feat[i, j]
        norms[i] = np.sqrt(s)
    cos = np.empty(n_edges, dtype=np.float64)
    for e in range(n_edges):
        a = src[e]
        b = dst[e]
        num = 0.0
        for j in range(dim):
            num += feat[a, j] * feat[b, j]
        den = norms[a] * norms[b]
        if den < delta:
            den = delta
        cos[e] = num / den
    return cos, norms


@njit(cache=True)
def edge_cosine_grad(gout, feat, src, dst, delta, cos, norms):
    n, dim = feat.shape
    n_edges = src.shape[0]
    dfeat = np.zeros((n, dim), dtype=np.float64)
    # pass structure mirrors the numpy backend's four add.at calls
    for e in range(n_edges):
        a = src[e]
        b = dst[e]
        prod = norms[a] * norms[b]
        den = prod if prod >= delta else delta
        g = gout[e] / den
        for j in range(dim):
            dfeat[a, j] += g * feat[b, j]
    for e in range(n_edges):
        a = src[e]
        b = dst[e]
        prod = norms[a] * norms[b]
        den = prod if prod >= delta else delta
        g = gout[e] / den
        for j in range(dim):
            dfeat[b, j] += g * feat[a, j]
    for e in range(n_edges):
        a = src[e]
        prod = norms[a] * norms[dst[e]]
        if prod >= delta:
            ns2 = norms[a] * norms[a]
            ca = gout[e] * cos[e] / ns2 if ns2 > 0.0 else 0.0
            for j in range(dim):
                dfeat[a, j] -= ca * feat[a, j]
    for e in range(n_edges):
        b = dst[e]
        prod = norms[src[e]] * norms[b]
        if prod >= delta:
            nd2 = norms[b] * norms[b]
            cb = gout[e] * cos[e] / nd2 if nd2 > 0.0 else 0.0
            for j in range(dim):
                dfeat[b, j] -= cb * feat[b, j]
    return dfeat


@njit(cache=True)
def edge_aggregate(feat, weights, src, dst, n):
    dim = feat.shape[1]
    n_edges = src.shape[0]
    out = np.zeros((n, dim), dtype=np.float64)
    for e in range(n_edges):
        w = weights[e]
        a = src[e]
        b = dst[e]
        for j in range(dim):
            out[b, j] += w * feat[a, j]
    return out


@njit(cache=True)
def edge_aggregate_grad(gout, feat, weights, src, dst):
    n, dim = feat.shape
    n_edges = src.shape[0]
    dfeat = np.zeros((n, dim), dtype=np.float64)
    dweights = np.empty(n_edges, dtype=np.float64)
    for e in range(n_edges):
        w = weights[e]
        a = src[e]
        b = dst[e]
        acc = 0.0
        for j in range(dim):
            dfeat[a, j] += w * gout[b, j]
            acc += gout[b, j] * feat[a, j]
        dweights[e] = acc
    return dfeat, dweights


@njit(cache=True)
def signed_trials_aggregate(feats, signs, weights, src, dst):
    trials, n, dim = feats.shape
    n_edges = src.shape[0]
    out = np.zeros((trials, n, dim), dtype=np.float64)
    for t in range(trials):
        for e in range(n_edges):
            w = signs[t, e] * weights[e]
            a = src[e]
            b = dst[e]
            for j in range(dim):
                out[t, b, j] += w * feats[t, a, j]
    return out


@njit(cache=True)
def edge_messages_aggregate(msgs, weights, dst, n):
    trials, n_edges, dim = msgs.shape
    out = np.zeros((trials, n, dim), dtype=np.float64)
    for t in range(trials):
        for e in range(n_edges):
            w = weights[e]
            b = dst[e]
            for j in range(dim):
                out[t, b, j] += w * msgs[t, e, j]
    return out
