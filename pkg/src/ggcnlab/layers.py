"""Forward computation graphs for the node-classification layers.

Four families: a 2-layer MLP, vanilla graph convolution, a residual base layer
(graph convolution + bias + Elu + skip connection), and the gated layer that
adds signed messages, degree correction, and decaying aggregation on top of
the base design. Optional batch/layer normalization slots in right before the
nonlinearity. All forwards consume and produce autodiff tensors.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DimChangeWithResidualError, InvalidRangeError, IoError
from .graph import RENORMALIZED, normalize, relative_degrees

NORM_BATCH = "batch"
NORM_LAYER = "layer"

SIGN_COSINE = "cosine"    # divide by max(|f_i| |f_j|, delta)
SIGN_PRODUCT = "product"  # divide by max(|f_i|^2 |f_j|^2, delta)

DELTA = 1e-9


@dataclass(frozen=True)
class DecaySchedule:
    """Residual-update coefficient: ln(eta / l^k + 1) from layer l0 on, 1 before."""

    eta: float = 0.5
    k: float = 3.0
    l0: int = 1

    def __post_init__(self):
        if self.eta < 0.0:
            raise InvalidRangeError(f"eta must be >= 0, got {self.eta}")

    def eta_hat(self, layer):
        if layer < self.l0:
            return 1.0
        return math.log(self.eta / layer ** self.k + 1.0)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture selector plus the mechanism flags of the gated layer.

    arch "ggcn" is the full model (signs, degree correction, decay all on);
    arch "base" takes any flag subset, which is the ablation lattice.
    """

    arch: str
    depth: int = 2
    hidden_dim: int = 16
    dropout_p: float = 0.0
    use_sign: bool = False
    use_degree_correction: bool = False
    use_decay: bool = False
    norm: str = None
    decay: DecaySchedule = field(default_factory=DecaySchedule)
    sign_mode: str = SIGN_COSINE

    def __post_init__(self):
        if self.arch not in ("mlp", "gcn", "base", "ggcn"):
            raise InvalidRangeError(f"unknown arch {self.arch!r}")
        if self.norm not in (None, NORM_BATCH, NORM_LAYER):
            raise InvalidRangeError(f"unknown norm {self.norm!r}")
        if self.sign_mode not in (SIGN_COSINE, SIGN_PRODUCT):
            raise InvalidRangeError(f"unknown sign_mode {self.sign_mode!r}")
        if self.arch == "ggcn":
            object.__setattr__(self, "use_sign", True)
            object.__setattr__(self, "use_degree_correction", True)
            object.__setattr__(self, "use_decay", True)
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidRangeError(f"dropout_p must be in [0,1), got {self.dropout_p}")
        if self.depth < 1 or self.hidden_dim < 1:
            raise InvalidRangeError("depth and hidden_dim must be >= 1")


class GraphConsts:
    """Per-graph constants shared by every layer forward.

    a_dense: normalized adjacency with self loops, as an untracked tensor.
    a_edge:  its off-diagonal entries per directed edge (m x 1).
    d_inv:   diagonal entries 1/(d_i+1) (n x 1).
    inv_r_minus_1: 1/r_ij - 1 per directed edge (i = dst, j = src).
    """

    def __init__(self, g, scheme=RENORMALIZED):
        self.n = g.n
        self.src = g.src
        self.dst = g.dst
        self._g = g
        self.a_dense = ad.constant(normalize(g, scheme).matrix)
        dp1 = g.degrees.astype(np.float64) + 1.0
        self.a_edge = ad.constant(
            (1.0 / np.sqrt(dp1[g.dst] * dp1[g.src])).reshape(-1, 1)
        )
        self.d_inv = (1.0 / dp1).reshape(-1, 1)
        self._inv_r_minus_1 = None

    @property
    def inv_r_minus_1(self):
        # needs every degree >= 1, so derived on first use only
        if self._inv_r_minus_1 is None:
            r_edge = relative_degrees(self._g).r_edge
            self._inv_r_minus_1 = ad.constant((1.0 / r_edge - 1.0).reshape(-1, 1))
        return self._inv_r_minus_1

    def d_inv_tile(self, cols):
        return ad.constant(np.broadcast_to(self.d_inv, (self.n, cols)))


def linear_transform(f, w, b=None):
    """f @ w plus an optional broadcast bias row."""
    out = ad.matmul(f, w)
    return ad.add_bias(out, b) if b is not None else out


def norm_modifier(h, kind, gamma, beta, state=None, training=False):
    """Standardize pre-activations across nodes (batch) or features (layer)."""
    if kind == NORM_BATCH:
        return ad.batch_norm(h, gamma, beta, state, training)
    if kind == NORM_LAYER:
        return ad.layer_norm(h, gamma, beta)
    raise InvalidRangeError(f"unknown norm kind {kind!r}")


def gcn_layer(f, consts, w, activate=True, norm_fn=None):
    """relu(A f w) with the normalized adjacency; activation off for logits."""
    h = ad.matmul(consts.a_dense, ad.matmul(f, w))
    if norm_fn is not None:
        h = norm_fn(h)
    return ad.relu(h) if activate else h


def base_layer(f, consts, w, b, norm_fn=None):
    """f + elu(A f w + b): the residual convolution the ablations build on."""
    if w.value.shape[0] != w.value.shape[1]:
        raise DimChangeWithResidualError(*w.value.shape)
    h = ad.add_bias(ad.matmul(consts.a_dense, ad.matmul(f, w)), b)
    if norm_fn is not None:
        h = norm_fn(h)
    return ad.add(f, ad.elu(h))


def mlp2(f, params, dropout_p, training, rng):
    """dropout -> linear -> elu -> dropout -> linear."""
    h = ad.dropout(f, dropout_p, training, rng)
    h = linear_transform(h, params["W0"], params["b0"])
    h = ad.elu(h)
    h = ad.dropout(h, dropout_p, training, rng)
    return linear_transform(h, params["W1"], params["b1"])


def degree_correction(consts, lam0, lam1):
    """Per-edge softplus(lam0 (1/r_ij - 1) + lam1) as an m x 1 tensor."""
    scaled = ad.scalar_mul(consts.inv_r_minus_1, lam0)
    return ad.softplus(ad.add_bias(scaled, lam1))


def sign_split(fhat, consts, delta=DELTA, mode=SIGN_COSINE):
    """Per-edge feature similarity split into nonnegative and nonpositive
    parts. Cosine mode divides by the clamped norm product; product mode
    divides by the clamped squared-norm product instead.
    """
    cos = ad.edge_cosine(fhat, consts.src, consts.dst, delta)
    if mode == SIGN_PRODUCT:
        norms = ad.row_l2_norm(fhat)
        prod = ad.mul(ad.gather_rows(norms, consts.src), ad.gather_rows(norms, consts.dst))
        num = ad.mul(cos, ad.clamp_min(prod, delta))
        s = ad.ediv(num, ad.clamp_min(ad.mul(prod, prod), delta))
    else:
        s = cos
    s_pos = ad.relu(s)
    return s_pos, ad.sub(s, s_pos)


def ggcn_layer(f, consts, params, layer_index, config, training=False,
               norm_state=None, residual=True):
    """One gated propagation step.

    core = alpha_hat (beta0 fhat + beta1 agg_pos + beta2 agg_neg), where the
    aggregations run over signed, degree-corrected edge weights; the update is
    f + eta_hat sigma(core) with residual (plain sigma(core) without).
    """
    w, b = params["W"], params["b"]
    if residual and w.value.shape[0] != w.value.shape[1]:
        raise DimChangeWithResidualError(*w.value.shape)
    fhat = linear_transform(f, w, b)

    beta_hat = ad.scalar_softmax(params["beta"])  # (3, 1)
    b0 = ad.select_rows(beta_hat, [True, False, False])
    b1 = ad.select_rows(beta_hat, [False, True, False])
    b2 = ad.select_rows(beta_hat, [False, False, True])
    alpha_hat = ad.softplus(params["alpha"])

    tau = None
    if config.use_degree_correction:
        tau = degree_correction(consts, params["lam0"], params["lam1"])

    if config.use_sign:
        s_pos, s_neg = sign_split(fhat, consts, mode=config.sign_mode)
        w_pos = ad.mul(s_pos, consts.a_edge)
        w_neg = ad.mul(s_neg, consts.a_edge)
        if tau is not None:
            w_pos = ad.mul(w_pos, tau)
            w_neg = ad.mul(w_neg, tau)
        agg_pos = ad.edge_aggregate(fhat, w_pos, consts.src, consts.dst, consts.n)
        agg_neg = ad.edge_aggregate(fhat, w_neg, consts.src, consts.dst, consts.n)
        core = ad.add(
            ad.add(ad.scalar_mul(fhat, b0), ad.scalar_mul(agg_pos, b1)),
            ad.scalar_mul(agg_neg, b2),
        )
    else:
        w_edge = consts.a_edge if tau is None else ad.mul(tau, consts.a_edge)
        agg = ad.add(
            ad.edge_aggregate(fhat, w_edge, consts.src, consts.dst, consts.n),
            ad.mul(fhat, consts.d_inv_tile(fhat.value.shape[1])),
        )
        core = ad.add(ad.scalar_mul(fhat, b0), ad.scalar_mul(agg, b1))

    core = ad.scalar_mul(core, alpha_hat)
    if config.norm is not None:
        core = norm_modifier(
            core, config.norm, params["norm_gamma"], params["norm_beta"],
            state=norm_state, training=training,
        )
    act = ad.elu(core)
    if config.use_decay:
        act = ad.scalar_mul(act, config.decay.eta_hat(layer_index))
    return ad.add(f, act) if residual else act


def save_checkpoint(params, path):
    """Write a list of per-layer {name: array} maps as flat JSON."""
    payload = {
        str(i): {k: np.asarray(v).tolist() for k, v in layer.items()}
        for i, layer in enumerate(params)
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    return [
        {k: np.asarray(v, dtype=np.float64) for k, v in payload[key].items()}
        for key in sorted(payload, key=int)
    ]
