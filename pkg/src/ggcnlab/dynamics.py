"""Propagation dynamics: closed-form drift/variance factors for one-hop
feature aggregation and the Monte-Carlo samplers that verify them.

The linear theory tracks the expectation of a node's features after repeated
application of the normalized adjacency. Features are class-conditional:
label 0 draws around +mu, label 1 around -mu, coordinatewise variance sigma.
The drift factor gamma multiplies E(f_i^0); its sign and magnitude sort nodes
into three regimes (toward the opposite class, contracting, expanding).
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels, streams
from ._parallel import thread_map
from .errors import InvalidDegreeError, InvalidDiscountError, InvalidRangeError, IsolatedNodeError
from .graph import RENORMALIZED, node_homophily, normalize, relative_degrees


class DriftCase(enum.Enum):
    """Regimes of the one-hop drift factor."""

    LOW_HOMOPHILY = 1  # gamma <= 1/2; expectation may cross to the other class
    CONTRACT = 2       # gamma in (1/2, 1]
    EXPAND = 3         # gamma > 1


def _check_degree(d):
    if d < 1:
        raise InvalidDegreeError(d)


def gamma_initial(h, d, rbar):
    """One-hop drift factor and its regime from homophily, degree, and mean
    relative degree: gamma = ((2h-1) d rbar + 1)/(d+1).

    The regime comes from the factor's own interval. h <= 0.5 always lands in
    LOW_HOMOPHILY and rbar > 1/(2h-1) always lands in EXPAND; in between,
    a small enough rbar can push the factor to 1/2 or below even at h > 0.5,
    and such nodes behave like the low-homophily regime, so they are
    classified by value rather than by the h threshold.
    """
    _check_degree(d)
    if not 0.0 <= h <= 1.0:
        raise InvalidRangeError(f"homophily must be in [0,1], got {h}")
    if rbar <= 0.0:
        raise InvalidRangeError(f"mean relative degree must be > 0, got {rbar}")
    gamma = ((2.0 * h - 1.0) * d * rbar + 1.0) / (d + 1.0)
    if gamma <= 0.5:
        case = DriftCase.LOW_HOMOPHILY
    elif gamma <= 1.0:
        case = DriftCase.CONTRACT
    else:
        case = DriftCase.EXPAND
    return gamma, case


def gamma_developing(h_eff, d, rbar, gamma_prev):
    """Drift factor after a further hop, scaling a positive accumulated factor
    by the same expression evaluated at the current effective homophily.
    """
    _check_degree(d)
    if gamma_prev <= 0.0:
        raise InvalidDiscountError(gamma_prev)
    return ((2.0 * h_eff - 1.0) * d * rbar + 1.0) / (d + 1.0) * gamma_prev


def gamma_signed(e, d, rbar):
    """Drift factor under signed messages with per-message error rate e:
    gamma = ((1-2e) d rbar + 1)/(d+1). Homophily does not appear. Regime
    classification follows the factor's interval, as in gamma_initial.
    """
    _check_degree(d)
    if not 0.0 <= e <= 1.0:
        raise InvalidRangeError(f"error rate must be in [0,1], got {e}")
    if rbar <= 0.0:
        raise InvalidRangeError(f"mean relative degree must be > 0, got {rbar}")
    gamma = ((1.0 - 2.0 * e) * d * rbar + 1.0) / (d + 1.0)
    if gamma <= 0.5:
        case = DriftCase.LOW_HOMOPHILY
    elif gamma <= 1.0:
        case = DriftCase.CONTRACT
    else:
        case = DriftCase.EXPAND
    return gamma, case


def variance_factor(g, i):
    """Factor multiplying the feature variance after one renormalized hop,
    assuming independent node features:
    (1/(d_i+1)) (1/(d_i+1) + sum over neighbors of 1/(d_j+1)). Always <= 1/2.
    """
    if g.degrees[i] == 0:
        raise IsolatedNodeError(i)
    dp1 = g.degrees.astype(np.float64) + 1.0
    nbr = g.neighbors(i)
    return float((1.0 / dp1[i]) * (1.0 / dp1[i] + np.sum(1.0 / dp1[nbr])))


def variance_factors(g):
    """variance_factor for every node, vectorized."""
    iso = np.flatnonzero(g.degrees == 0)
    if iso.size:
        raise IsolatedNodeError(int(iso[0]))
    dp1 = g.degrees.astype(np.float64) + 1.0
    nbr_sum = np.bincount(g.dst, weights=1.0 / dp1[g.src], minlength=g.n)
    return (1.0 / dp1) * (1.0 / dp1 + nbr_sum)


@dataclass(frozen=True)
class ClassFeatureModel:
    """Class-conditional feature distribution: label 0 has mean mu, label 1
    has mean -mu; sigma is the coordinatewise variance."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64).ravel())
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=np.float64).ravel())
        if self.sigma.shape != self.mu.shape:
            raise InvalidRangeError("mu and sigma must have the same length")
        if np.any(self.sigma < 0.0) or not np.all(np.isfinite(self.mu)):
            raise InvalidRangeError("sigma must be >= 0 and mu finite")

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class GammaReport:
    gamma: np.ndarray
    case: np.ndarray  # of DriftCase
    layer: int


@dataclass(frozen=True)
class McEstimate:
    """Per-node, per-coordinate sample mean and variance over trials."""

    mean: np.ndarray
    variance: np.ndarray
    trials: int

    @property
    def standard_error(self):
        return np.sqrt(self.variance / self.trials)


def label_signs(labels):
    """Class axis orientation: +1 for label 0, -1 for label 1."""
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidRangeError("sampling oracles require binary labels {0,1}")
    return np.where(labels == 0, 1.0, -1.0)


def classify_cases(g, labels):
    """Per-node one-hop drift factor and regime from empirical homophily and
    relative-degree statistics."""
    h = node_homophily(g, labels).per_node_h
    rbar = relative_degrees(g).rbar
    d = g.degrees
    gamma = np.empty(g.n)
    case = np.empty(g.n, dtype=object)
    for i in range(g.n):
        gamma[i], case[i] = gamma_initial(float(h[i]), int(d[i]), float(rbar[i]))
    return GammaReport(gamma=gamma, case=case, layer=1)


def _merge_moments(acc, count, mean, m2):
    if acc is None:
        return [count, mean.copy(), m2.copy()]
    na, mean_a, m2_a = acc
    tot = na + count
    delta = mean - mean_a
    mean_a += delta * (count / tot)
    m2_a += m2 + delta * delta * (na * count / tot)
    acc[0] = tot
    return acc


def _chunk_moments(x):
    """(count, mean, M2) along axis 0."""
    count = x.shape[0]
    mean = x.mean(axis=0)
    m2 = np.einsum("t...,t...->...", x - mean, x - mean)
    return count, mean, m2


def _finalize(acc, trials):
    count, mean, m2 = acc
    assert count == trials
    variance = m2 / (trials - 1) if trials > 1 else np.zeros_like(m2)
    return McEstimate(mean=mean, variance=variance, trials=trials)


def _chunk_ranges(trials, chunk):
    return [(t0, min(t0 + chunk, trials)) for t0 in range(0, trials, chunk)]


def _chunk_size(words_per_trial):
    # ~32 MB of raw words per chunk; fixed function of the problem size only,
    # so chunk boundaries (and hence the merged result) never depend on the
    # worker count.
    return max(1, int(4_000_000 // max(1, words_per_trial)))


def _sample_features(plan, t0, t1, signs, model, extra_words=0):
    """Feature tensor (t1-t0, n, dim) for the trial window, plus leftover raw
    words (one row per trial) when extra_words > 0."""
    n = signs.shape[0]
    dim = model.dim
    raw = plan.raw(t0, t1)
    feat_words = raw[:, : 2 * n * dim]
    z = streams.normals(feat_words).reshape(t1 - t0, n, dim)
    base = signs[:, None] * model.mu[None, :]
    feats = base[None, :, :] + z * np.sqrt(model.sigma)[None, None, :]
    if extra_words:
        return feats, raw[:, 2 * n * dim : 2 * n * dim + extra_words]
    return feats


def _per_node_homophily(g, signs):
    """Fraction of same-sign neighbors per node; 0 where there are none."""
    same = (signs[g.src] == signs[g.dst]).astype(np.float64)
    return np.bincount(g.dst, weights=same, minlength=g.n) / np.maximum(g.degrees, 1)


def mc_propagate(g, labels, model, scheme=RENORMALIZED, trials=100_000, seed=0):
    """Sampling oracle for one application of the normalized adjacency.

    Per trial, each directed edge delivers a fresh class-conditional feature
    draw whose class agrees with the receiving node's with probability h_i
    (the receiver's same-label neighbor fraction), independently per edge;
    the self term keeps the node's own class. Per-node means converge to the
    closed-form drift factor times the class mean on any graph; the exact
    variance is propagate_variances.

    Deterministic for fixed (seed, trials) regardless of worker count.
    """
    signs = label_signs(labels)
    a = normalize(g, scheme).matrix
    self_w = np.ascontiguousarray(np.diag(a))
    w = np.ascontiguousarray(a[g.dst, g.src])
    h_edge = _per_node_homophily(g, signs)[g.dst]
    n_edges = g.src.shape[0]
    node_words = 2 * g.n * model.dim
    edge_words = 2 * n_edges * model.dim
    words = node_words + edge_words + n_edges
    plan = streams.TrialPlan(seed, words)
    sd = np.sqrt(model.sigma)
    base = signs[:, None] * model.mu[None, :]
    mu_dst = base[g.dst]  # message mean when the sampled classes agree

    def run(rng):
        t0, t1 = rng
        raw = plan.raw(t0, t1)
        chunk = t1 - t0
        z_self = streams.normals(raw[:, :node_words]).reshape(chunk, g.n, model.dim)
        z_edge = streams.normals(
            raw[:, node_words : node_words + edge_words]
        ).reshape(chunk, n_edges, model.dim)
        offset = node_words + edge_words
        u = streams.uniforms(raw[:, offset : offset + n_edges])
        agree = np.where(u < h_edge[None, :], 1.0, -1.0)
        msgs = agree[:, :, None] * mu_dst[None, :, :] + z_edge * sd[None, None, :]
        out = kernels.edge_messages_aggregate(msgs, w, g.dst, g.n)
        out += self_w[None, :, None] * (base[None, :, :] + z_self * sd[None, None, :])
        return _chunk_moments(out)

    acc = None
    for count, mean, m2 in thread_map(run, _chunk_ranges(trials, _chunk_size(words))):
        acc = _merge_moments(acc, count, mean, m2)
    return _finalize(acc, trials)


def propagate_variances(g, labels, model, scheme=RENORMALIZED):
    """Exact (n, dim) per-node variance of the mc_propagate sampling model:
    the feature-noise term variance_factors * sigma plus the class-mixture
    term 4 h_i (1 - h_i) mu^2 weighted by the squared off-diagonal weights.
    The mixture term vanishes on pure neighborhoods (h_i in {0, 1}) and is
    negligible when |mu| << sigma.
    """
    signs = label_signs(labels)
    a = normalize(g, scheme).matrix
    sq = a * a
    total = sq.sum(axis=1)
    offdiag = total - np.diag(sq)
    h = _per_node_homophily(g, signs)
    churn = 4.0 * h * (1.0 - h) * offdiag
    return total[:, None] * model.sigma[None, :] + churn[:, None] * (model.mu**2)[None, :]


def mc_signed(g, labels, model, e, trials=100_000, seed=0):
    """Signed-message analogue of mc_propagate: each neighbor message is
    negated correctly (same-class kept, different-class flipped) with
    probability 1-e and treated oppositely with probability e, independently
    per directed edge and trial. Self term uses the renormalized weight.
    """
    if not 0.0 <= e <= 1.0:
        raise InvalidRangeError(f"error rate must be in [0,1], got {e}")
    signs = label_signs(labels)
    same = np.where(signs[g.src] == signs[g.dst], 1.0, -1.0)
    dp1 = g.degrees.astype(np.float64) + 1.0
    w = 1.0 / np.sqrt(dp1[g.dst] * dp1[g.src])
    dinv = 1.0 / dp1
    n_edges = g.src.shape[0]
    words = 2 * g.n * model.dim + n_edges
    plan = streams.TrialPlan(seed, words)

    def run(rng):
        t0, t1 = rng
        feats, edge_raw = _sample_features(plan, t0, t1, signs, model, n_edges)
        u = streams.uniforms(edge_raw)
        err_sign = np.where(u < e, -1.0, 1.0)
        c = err_sign * same[None, :]
        out = kernels.signed_trials_aggregate(feats, c, w, g.src, g.dst)
        out += feats * dinv[None, :, None]
        return _chunk_moments(out)

    acc = None
    for count, mean, m2 in thread_map(run, _chunk_ranges(trials, _chunk_size(words))):
        acc = _merge_moments(acc, count, mean, m2)
    return _finalize(acc, trials)


@dataclass(frozen=True)
class DepthTrace:
    """Per-layer outcomes of repeated aggregation on sampled features.

    flip_rate[l-1, i]: fraction of trials where node i's class-axis sign at
    layer l disagrees with its label sign. mean_eff_h[l-1, i]: mean effective
    homophily of node i at layer l. onset: first layer whose mean effective
    homophily over all nodes drops to 0.5 or below, or None.
    """

    flip_rate: np.ndarray
    mean_eff_h: np.ndarray
    trials: int

    @property
    def onset(self):
        per_layer = self.mean_eff_h.mean(axis=1)
        hit = np.flatnonzero(per_layer <= 0.5)
        return int(hit[0]) + 1 if hit.size else None


def simulate_depth(g, labels, model, layers, trials=10_000, seed=0, scheme=RENORMALIZED):
    """Iterate the normalized adjacency on sampled features and track, per
    layer, sign-flip rates against the label sign and effective homophily."""
    if layers < 1:
        raise InvalidRangeError(f"layers must be >= 1, got {layers}")
    iso = np.flatnonzero(g.degrees == 0)
    if iso.size:
        raise IsolatedNodeError(int(iso[0]))
    signs = label_signs(labels)
    a = normalize(g, scheme).matrix
    words = 2 * g.n * model.dim
    plan = streams.TrialPlan(seed, words)

    def run(rng):
        t0, t1 = rng
        feats = _sample_features(plan, t0, t1, signs, model)
        flips = np.zeros((layers, g.n))
        effh = np.zeros((layers, g.n))
        for l in range(1, layers + 1):
            feats = np.matmul(a, feats)
            proj = np.dot(feats, model.mu)  # (T, n)
            s = np.where(proj >= 0.0, 1.0, -1.0)
            flips[l - 1] = (s != signs[None, :]).sum(axis=0)
            # sum over trials of per-node same-sign neighbor fractions
            agree = (s[:, g.src] == s[:, g.dst]).sum(axis=0).astype(np.float64)
            effh[l - 1] = np.bincount(g.dst, weights=agree, minlength=g.n) / g.degrees
        return flips, effh

    flips = np.zeros((layers, g.n))
    effh = np.zeros((layers, g.n))
    for f, h in thread_map(run, _chunk_ranges(trials, _chunk_size(words))):
        flips += f
        effh += h
    return DepthTrace(flip_rate=flips / trials, mean_eff_h=effh / trials, trials=trials)
