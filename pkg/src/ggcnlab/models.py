"""Model assembly: parameter initialization and whole-network forwards.

Architectures:
  mlp   2-layer perceptron on raw features (graph ignored).
  gcn   stacked graph convolutions, relu between, bare logits at the end.
  base  input projection, depth residual convolution blocks (gated layer with
        whatever mechanism flags the config sets), linear head.
  ggcn  base with signs, degree correction, and decay all enabled.

forward() returns the logits, the parameter leaves for the optimizer, and
per-propagation-layer input captures (the representation entering each
propagation step, eval semantics) used by the homophily estimators.
"""

import numpy as np

from . import autodiff as ad
from . import layers


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _block_params(rng, dim, config):
    p = {
        "W": _glorot(rng, dim, dim),
        "b": np.zeros((1, dim)),
        "alpha": np.full((1, 1), 2.0),
        "beta": np.zeros((3, 1)),
    }
    if config.use_degree_correction:
        p["lam0"] = np.full((1, 1), 0.5)
        p["lam1"] = np.zeros((1, 1))
    if config.norm is not None:
        p["norm_gamma"] = np.ones((1, dim))
        p["norm_beta"] = np.zeros((1, dim))
    return p


def init_params(config, dim_in, n_classes, rng):
    """Fresh parameter arrays for the configured architecture."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    h = config.hidden_dim
    if config.arch == "mlp":
        return [{
            "W0": _glorot(rng, dim_in, h),
            "b0": np.zeros((1, h)),
            "W1": _glorot(rng, h, n_classes),
            "b1": np.zeros((1, n_classes)),
        }]
    if config.arch == "gcn":
        dims = [dim_in] + [h] * (config.depth - 1) + [n_classes]
        out = []
        for i in range(config.depth):
            p = {"W": _glorot(rng, dims[i], dims[i + 1])}
            if config.norm is not None and i < config.depth - 1:
                p["norm_gamma"] = np.ones((1, dims[i + 1]))
                p["norm_beta"] = np.zeros((1, dims[i + 1]))
            out.append(p)
        return out
    # base / ggcn: projection, depth blocks, head
    out = [{"W": _glorot(rng, dim_in, h), "b": np.zeros((1, h))}]
    for _ in range(config.depth):
        out.append(_block_params(rng, h, config))
    out.append({"W": _glorot(rng, h, n_classes), "b": np.zeros((1, n_classes))})
    return out


def init_norm_states(config, params):
    """Running-statistics slots aligned with params (batch norm only)."""
    states = []
    for p in params:
        if config.norm == layers.NORM_BATCH and "norm_gamma" in p:
            width = p["norm_gamma"].shape[1]
            states.append({"mean": np.zeros((1, width)), "var": np.ones((1, width))})
        else:
            states.append(None)
    return states


def head_transform(config, params):
    """(W, b) of the final linear classification map (b may be None)."""
    last = params[-1]
    return last["W"], last.get("b")


def _norm_fn(config, leaf, state, training):
    def fn(x):
        return layers.norm_modifier(
            x, config.norm, leaf["norm_gamma"], leaf["norm_beta"],
            state=state, training=training,
        )
    return fn


def forward(tape, config, params, consts, features, training=False, rng=None,
            norm_states=None):
    """Build the forward graph on the tape.

    Returns (logits, leaves, captures): leaves mirror params as tape tensors;
    captures[k] is the (pre-dropout) input to propagation step k+1 as a plain
    array, empty for the mlp.
    """
    leaves = [{k: tape.tensor(v) for k, v in layer.items()} for layer in params]
    if norm_states is None:
        norm_states = [None] * len(params)
    f = ad.constant(features)
    captures = []

    if config.arch == "mlp":
        return layers.mlp2(f, leaves[0], config.dropout_p, training, rng), leaves, captures

    if config.arch == "gcn":
        for i in range(config.depth):
            captures.append(f.value.copy())
            final = i == config.depth - 1
            f = ad.dropout(f, config.dropout_p, training, rng)
            norm_fn = None
            if config.norm is not None and not final:
                norm_fn = _norm_fn(config, leaves[i], norm_states[i], training)
            f = layers.gcn_layer(f, consts, leaves[i]["W"],
                                 activate=not final, norm_fn=norm_fn)
        return f, leaves, captures

    # base / ggcn
    f = ad.dropout(f, config.dropout_p, training, rng)
    f = layers.linear_transform(f, leaves[0]["W"], leaves[0]["b"])
    for l in range(1, config.depth + 1):
        captures.append(f.value.copy())
        f = ad.dropout(f, config.dropout_p, training, rng)
        f = layers.ggcn_layer(
            f, consts, leaves[l], l, config,
            training=training, norm_state=norm_states[l], residual=True,
        )
    f = ad.dropout(f, config.dropout_p, training, rng)
    logits = layers.linear_transform(f, leaves[-1]["W"], leaves[-1]["b"])
    return logits, leaves, captures
