"""Pure-numpy implementations of the hot per-edge / per-trial kernels.

Reference semantics for the numba backend: every function here defines the
accumulation order the jitted twin reproduces (np.add.at applies updates
sequentially in index order, matching an explicit edge loop). Reductions that
numpy routes through einsum may differ from the jitted loops in the last ulp.
"""

import numpy as np


def edge_cosine(feat, src, dst, delta):
    """Per-directed-edge cosine similarity with clamped denominator.

    Returns (cos, row_norms) where cos[e] = <f_src, f_dst> / max(|f_src||f_dst|, delta).
    """
    norms = np.sqrt(np.einsum("ij,ij->i", feat, feat))
    num = np.einsum("ij,ij->i", feat[src], feat[dst])
    den = np.maximum(norms[src] * norms[dst], delta)
    return num / den, norms


def edge_cosine_grad(gout, feat, src, dst, delta, cos, norms):
    """Gradient of edge_cosine w.r.t. feat.

    Where the denominator is clamped the norm-product is a constant, so only
    the bilinear numerator contributes.
    """
    dfeat = np.zeros_like(feat)
    prod = norms[src] * norms[dst]
    clamped = prod < delta
    den = np.maximum(prod, delta)
    g_over_den = gout / den

    # numerator term: d<a,b>/da = b
    np.add.at(dfeat, src, g_over_den[:, None] * feat[dst])
    np.add.at(dfeat, dst, g_over_den[:, None] * feat[src])

    # denominator term, absent where clamped; guard zero norms
    live = ~clamped
    if np.any(live):
        src_l, dst_l = src[live], dst[live]
        coeff = gout[live] * cos[live]
        ns2 = norms[src_l] ** 2
        nd2 = norms[dst_l] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ca = np.where(ns2 > 0.0, coeff / ns2, 0.0)
            cb = np.where(nd2 > 0.0, coeff / nd2, 0.0)
        np.add.at(dfeat, src_l, -ca[:, None] * feat[src_l])
        np.add.at(dfeat, dst_l, -cb[:, None] * feat[dst_l])
    return dfeat


def edge_aggregate(feat, weights, src, dst, n):
    """Weighted neighbor sum: out[i] = sum over edges e with dst=i of w_e * feat[src_e]."""
    out = np.zeros((n, feat.shape[1]), dtype=np.float64)
    np.add.at(out, dst, weights[:, None] * feat[src])
    return out


def edge_aggregate_grad(gout, feat, weights, src, dst):
    """Gradients of edge_aggregate w.r.t. (feat, weights)."""
    dfeat = np.zeros_like(feat)
    np.add.at(dfeat, src, weights[:, None] * gout[dst])
    dweights = np.einsum("ij,ij->i", gout[dst], feat[src])
    return dfeat, dweights


def signed_trials_aggregate(feats, signs, weights, src, dst):
    """Per-trial signed neighbor aggregation plus renormalized self term.

    feats:   (trials, n, dim) sampled features
    signs:   (trials, n_edges) +-1 per directed edge and trial
    weights: (n_edges,) static edge weights 1/sqrt((d_dst+1)(d_src+1))
    Returns (trials, n, dim) with out[t, i] = feats[t, i]/(d_i+1) already excluded;
    caller adds the self term. Only the neighbor sum happens here.
    """
    trials, n, dim = feats.shape
    out = np.zeros_like(feats)
    w = signs * weights[None, :]
    np.add.at(out, (slice(None), dst), w[:, :, None] * feats[:, src, :])
    return out


def edge_messages_aggregate(msgs, weights, dst, n):
    """Per-trial sum of weighted per-edge messages into the receiving node.

    msgs:    (trials, n_edges, dim) one sampled message per directed edge
    weights: (n_edges,) static edge weights
    Returns (trials, n, dim) with out[t, dst_e] += w_e * msgs[t, e]. The self
    term stays with the caller, as in signed_trials_aggregate.
    """
    trials, n_edges, dim = msgs.shape
    out = np.zeros((trials, n, dim), dtype=np.float64)
    np.add.at(out, (slice(None), dst), weights[None, :, None] * msgs)
    return out
