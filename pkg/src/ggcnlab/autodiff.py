"""Dense 2-D float64 tensors with reverse-mode automatic differentiation.

A Tape is an append-only list of nodes in topological order; backward walks it
once in reverse. Tensors are immutable views onto tape nodes (or untracked
constants). Primitives cover exactly what the layers and trainer need; a few
graph-structured operations (edge cosine, weighted edge aggregation) are fused
with hand-derived gradients and dispatch to the active kernel backend.
"""

import numpy as np

from . import kernels
from .errors import (
    EmptyMaskError,
    NondeterministicError,
    NonScalarLossError,
    ShapeMismatchError,
)


def _as_matrix(value):
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"tensors are 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values rejected at tensor boundary")
    return a


class Tape:
    """Append-only record of operations for one backward pass."""

    def __init__(self):
        self._parents = []
        self._backward = []

    def __len__(self):
        return len(self._parents)

    def _append(self, value, parents, backward_fn):
        self._parents.append(parents)
        self._backward.append(backward_fn)
        return Tensor(value, self, len(self._parents) - 1)

    def tensor(self, value):
        """Track a leaf (parameter); gradients accumulate at leaves."""
        return self._append(_as_matrix(value).copy(), (), None)


class Tensor:
    """Immutable 2-D float64 value, optionally bound to a tape node."""

    __slots__ = ("value", "tape", "node_id")

    def __init__(self, value, tape=None, node_id=None):
        self.value = value
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self):
        return self.value.shape

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scalar_mul(self, other)

    __rmul__ = __mul__


def constant(value):
    """Untracked tensor; participates in ops but receives no gradient."""
    return Tensor(_as_matrix(value).copy())


def _tape_of(*tensors):
    tape = None
    for t in tensors:
        if t is not None and t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ValueError("operands live on different tapes")
            tape = t.tape
    return tape


def _emit(tape, value, parent_tensors, backward_fn):
    if tape is None:
        return Tensor(value)
    parents = tuple(
        t.node_id if (t is not None and t.tape is not None) else None
        for t in parent_tensors
    )
    return tape._append(value, parents, backward_fn)


def _require_same_shape(op, a, b):
    if a.value.shape != b.value.shape:
        raise ShapeMismatchError(op, a.value.shape, b.value.shape)


# ---------------------------------------------------------------------------
# arithmetic primitives


def matmul(a, b):
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatchError("matmul", a.value.shape, b.value.shape)
    tape = _tape_of(a, b)
    av, bv = a.value, b.value
    need_a = a.tape is not None
    need_b = b.tape is not None

    def bwd(g):
        return (
            g @ bv.T if need_a else None,
            av.T @ g if need_b else None,
        )

    return _emit(tape, av @ bv, (a, b), bwd)


def add(a, b):
    _require_same_shape("add", a, b)
    return _emit(_tape_of(a, b), a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b):
    _require_same_shape("sub", a, b)
    return _emit(_tape_of(a, b), a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b):
    _require_same_shape("mul", a, b)
    av, bv = a.value, b.value
    return _emit(_tape_of(a, b), av * bv, (a, b), lambda g: (g * bv, g * av))


def add_bias(a, b):
    """Add a 1 x C bias row to every row of an n x C tensor."""
    if b.value.shape != (1, a.value.shape[1]):
        raise ShapeMismatchError("add_bias", a.value.shape, b.value.shape)

    def bwd(g):
        return g, g.sum(axis=0, keepdims=True)

    return _emit(_tape_of(a, b), a.value + b.value, (a, b), bwd)


def scalar_mul(a, s):
    """Multiply by a python float or a 1 x 1 tensor (learned scalar)."""
    if not isinstance(s, Tensor):
        sv = float(s)
        return _emit(_tape_of(a), a.value * sv, (a,), lambda g: (g * sv,))
    if s.value.shape != (1, 1):
        raise ShapeMismatchError("scalar_mul", a.value.shape, s.value.shape)
    av, sv = a.value, float(s.value[0, 0])

    def bwd(g):
        return g * sv, np.array([[float(np.sum(g * av))]])

    return _emit(_tape_of(a, s), av * sv, (a, s), bwd)


def transpose(a):
    return _emit(_tape_of(a), a.value.T.copy(), (a,), lambda g: (g.T,))


def sum_all(a):
    """Reduce every entry to a 1 x 1 scalar."""
    shape = a.value.shape
    return _emit(
        _tape_of(a),
        np.array([[float(a.value.sum())]]),
        (a,),
        lambda g: (np.full(shape, float(g[0, 0])),),
    )


def select_rows(a, mask):
    """Keep the rows where mask is true, preserving order."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (a.value.shape[0],):
        raise ShapeMismatchError("select_rows", a.value.shape, mask.shape)
    if not mask.any():
        raise EmptyMaskError("row selection")
    shape = a.value.shape

    def bwd(g):
        out = np.zeros(shape)
        out[mask] = g
        return (out,)

    return _emit(_tape_of(a), a.value[mask].copy(), (a,), bwd)


def gather_rows(a, idx):
    """Rows a[idx] with repeats allowed; gradient scatter-adds back."""
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.value.shape

    def bwd(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _emit(_tape_of(a), a.value[idx].copy(), (a,), bwd)


def ediv(a, b):
    """Elementwise division of same-shape tensors."""
    _require_same_shape("ediv", a, b)
    av, bv = a.value, b.value

    def bwd(g):
        return g / bv, -g * av / (bv * bv)

    return _emit(_tape_of(a, b), av / bv, (a, b), bwd)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a):
    av = a.value
    return _emit(_tape_of(a), np.maximum(av, 0.0), (a,), lambda g: (g * (av > 0.0),))


def elu(a):
    av = a.value
    neg = np.minimum(av, 0.0)  # clamp before exp so the dead branch cannot overflow
    out = np.where(av > 0.0, av, np.expm1(neg))
    dvdx = np.where(av >= 0.0, 1.0, np.exp(neg))  # derivative at 0 defined as 1
    return _emit(_tape_of(a), out, (a,), lambda g: (g * dvdx,))


def _sigmoid(x):
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def softplus(a):
    av = a.value
    return _emit(
        _tape_of(a), np.logaddexp(0.0, av), (a,), lambda g: (g * _sigmoid(av),)
    )


def log(a):
    av = a.value
    return _emit(_tape_of(a), np.log(av), (a,), lambda g: (g / av,))


def clamp_min(a, delta):
    """max(a, delta); gradient passes where a >= delta, zero where clamped."""
    av = a.value
    live = av >= delta
    return _emit(_tape_of(a), np.maximum(av, delta), (a,), lambda g: (g * live,))


def row_softmax(a):
    av = a.value
    shifted = av - av.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        dot = np.sum(g * out, axis=1, keepdims=True)
        return (out * (g - dot),)

    return _emit(_tape_of(a), out, (a,), bwd)


def scalar_softmax(a):
    """Softmax over every entry of a small parameter tensor (any 2-D shape)."""
    av = a.value
    flat = av - av.max()
    e = np.exp(flat)
    out = e / e.sum()

    def bwd(g):
        dot = float(np.sum(g * out))
        return (out * (g - dot),)

    return _emit(_tape_of(a), out, (a,), bwd)


def row_l2_norm(a):
    """Per-row Euclidean norm as an n x 1 tensor; zero rows get zero grad."""
    av = a.value
    norms = np.sqrt(np.einsum("ij,ij->i", av, av)).reshape(-1, 1)

    def bwd(g):
        safe = np.where(norms > 0.0, norms, 1.0)
        return (g / safe * np.where(norms > 0.0, av, 0.0),)

    return _emit(_tape_of(a), norms.copy(), (a,), bwd)


def dropout(a, p, training, rng):
    """Inverted dropout: scale kept entries by 1/(1-p) at train time."""
    if not training or p == 0.0:
        return _emit(_tape_of(a), a.value.copy(), (a,), lambda g: (g,))
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {p}")
    keep = (rng.random(a.value.shape) >= p) / (1.0 - p)
    return _emit(_tape_of(a), a.value * keep, (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# fused losses and normalizers


def cross_entropy_masked(logits, labels, mask):
    """Mean negative log softmax probability of the true class over masked rows."""
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    n, c = logits.value.shape
    if labels.shape != (n,) or mask.shape != (n,):
        raise ShapeMismatchError("cross_entropy_masked", (n, c), labels.shape)
    if not mask.any():
        raise EmptyMaskError("loss mask")
    idx = np.flatnonzero(mask)
    lv = logits.value[idx]
    shifted = lv - lv.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    picked = logp[np.arange(idx.size), labels[idx]]
    loss = -picked.mean()

    def bwd(g):
        p = np.exp(logp)
        p[np.arange(idx.size), labels[idx]] -= 1.0
        out = np.zeros((n, c))
        out[idx] = p * (float(g[0, 0]) / idx.size)
        return (out,)

    return _emit(_tape_of(logits), np.array([[loss]]), (logits,), bwd)


def batch_norm(a, gamma, beta, state, training, eps=1e-5, momentum=0.1):
    """Column-wise standardization with learnable scale/shift.

    state is a dict with running "mean" and "var" rows, updated in place at
    train time and read at eval time.
    """
    av = a.value
    n, c = av.shape
    if gamma.value.shape != (1, c) or beta.value.shape != (1, c):
        raise ShapeMismatchError("batch_norm", av.shape, gamma.value.shape)
    if training:
        mu = av.mean(axis=0, keepdims=True)
        var = av.var(axis=0, keepdims=True)
        state["mean"] = (1.0 - momentum) * state["mean"] + momentum * mu
        state["var"] = (1.0 - momentum) * state["var"] + momentum * var
    else:
        mu, var = state["mean"], state["var"]
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (av - mu) * inv_std
    out = xhat * gamma.value + beta.value
    gv = gamma.value

    def bwd(g):
        dgamma = (g * xhat).sum(axis=0, keepdims=True)
        dbeta = g.sum(axis=0, keepdims=True)
        if training:
            gx = g * gv
            da = inv_std * (
                gx
                - gx.mean(axis=0, keepdims=True)
                - xhat * (gx * xhat).mean(axis=0, keepdims=True)
            )
        else:
            da = g * gv * inv_std
        return da, dgamma, dbeta

    return _emit(_tape_of(a, gamma, beta), out, (a, gamma, beta), bwd)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Row-wise standardization across features with learnable scale/shift."""
    av = a.value
    n, c = av.shape
    if gamma.value.shape != (1, c) or beta.value.shape != (1, c):
        raise ShapeMismatchError("layer_norm", av.shape, gamma.value.shape)
    mu = av.mean(axis=1, keepdims=True)
    var = av.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (av - mu) * inv_std
    out = xhat * gamma.value + beta.value
    gv = gamma.value

    def bwd(g):
        dgamma = (g * xhat).sum(axis=0, keepdims=True)
        dbeta = g.sum(axis=0, keepdims=True)
        gx = g * gv
        da = inv_std * (
            gx
            - gx.mean(axis=1, keepdims=True)
            - xhat * (gx * xhat).mean(axis=1, keepdims=True)
        )
        return da, dgamma, dbeta

    return _emit(_tape_of(a, gamma, beta), out, (a, gamma, beta), bwd)


# ---------------------------------------------------------------------------
# fused graph operations (kernel-backed)


def edge_cosine(feat, src, dst, delta=1e-9):
    """Cosine similarity of feature rows per directed edge, as an m x 1 tensor.

    The norm product in the denominator is clamped below at delta so zero rows
    are safe; the clamped branch contributes no denominator gradient.
    """
    fv = feat.value
    cos, norms = kernels.edge_cosine(fv, src, dst, delta)

    def bwd(g):
        return (kernels.edge_cosine_grad(g[:, 0], fv, src, dst, delta, cos, norms),)

    return _emit(_tape_of(feat), cos.reshape(-1, 1).copy(), (feat,), bwd)


def edge_aggregate(feat, weights, src, dst, n):
    """Weighted neighbor sum out[i] = sum over edges e into i of w_e feat[src_e].

    feat is n x d, weights is m x 1 aligned with (src, dst).
    """
    fv = feat.value
    wv = weights.value
    if wv.shape != (len(src), 1):
        raise ShapeMismatchError("edge_aggregate", wv.shape, (len(src), 1))
    out = kernels.edge_aggregate(fv, wv[:, 0], src, dst, n)
    need_w = weights.tape is not None

    def bwd(g):
        dfeat, dw = kernels.edge_aggregate_grad(g, fv, wv[:, 0], src, dst)
        return dfeat, dw.reshape(-1, 1) if need_w else None

    return _emit(_tape_of(feat, weights), out, (feat, weights), bwd)


# ---------------------------------------------------------------------------
# backward pass and verification


class Gradients:
    """Per-leaf gradient lookup produced by backward()."""

    def __init__(self, grads):
        self._grads = grads

    def of(self, tensor):
        if tensor.tape is None or tensor.node_id is None:
            raise ValueError("gradient requested for an untracked tensor")
        g = self._grads[tensor.node_id]
        if g is None:
            return np.zeros_like(tensor.value)
        return g


def backward(tape, loss):
    """Reverse-mode sweep from a scalar loss; returns Gradients."""
    if loss.tape is not tape or loss.node_id is None:
        raise ValueError("loss does not belong to this tape")
    if loss.value.shape != (1, 1):
        raise NonScalarLossError(loss.value.shape)
    grads = [None] * len(tape)
    grads[loss.node_id] = np.ones((1, 1))
    for nid in range(loss.node_id, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        fn = tape._backward[nid]
        if fn is None:
            continue
        parents = tape._parents[nid]
        for pid, pg in zip(parents, fn(g)):
            if pid is None or pg is None:
                continue
            if grads[pid] is None:
                grads[pid] = pg.copy()
            else:
                grads[pid] += pg
    return Gradients(grads)


def grad_check(f, params, h=1e-5):
    """Compare analytic gradients of a scalar function against central
    finite differences.

    f(tape, leaves) must build and return a scalar loss tensor from the list
    of leaf tensors created from params. Returns the max over all coordinates
    of |analytic - central| / max(1, |analytic|). Raises Nondeterministic if
    two evaluations of f disagree (e.g. dropout left enabled).
    """
    params = [_as_matrix(p) for p in params]

    def run(values):
        tape = Tape()
        leaves = [tape.tensor(v) for v in values]
        loss = f(tape, leaves)
        return tape, leaves, loss

    tape, leaves, loss = run(params)
    _, _, loss2 = run(params)
    if loss.value[0, 0] != loss2.value[0, 0]:
        raise NondeterministicError()
    grads = backward(tape, loss)
    analytic = [grads.of(leaf) for leaf in leaves]

    worst = 0.0
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            bumped = [q.copy() for q in params]
            bumped[k][idx] = p[idx] + h
            up = run(bumped)[2].value[0, 0]
            bumped[k][idx] = p[idx] - h
            down = run(bumped)[2].value[0, 0]
            central = (up - down) / (2.0 * h)
            a = analytic[k][idx]
            rel = abs(a - central) / max(1.0, abs(a))
            if rel > worst:
                worst = rel
    return worst
