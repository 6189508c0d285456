"""Supervised node-classification training: Adam with early stopping on
validation accuracy, plus depth sweeps and the mechanism ablation grid.
"""

import copy
import time
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import models
from ._parallel import thread_map
from .errors import DivergedLossError, EmptyMaskError
from .graph import empirical_effective_homophily
from .layers import GraphConsts, ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 0.0
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8


@dataclass
class RunResult:
    test_accuracy: float
    best_val_accuracy: float
    best_epoch: int
    per_layer_effective_homophily: list
    wall_time: float
    params: list
    predictions: np.ndarray
    captures: list


class AdamState:
    """First/second moment accumulators mirroring the parameter structure."""

    def __init__(self, params):
        self.t = 0
        self.m = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]
        self.v = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]


def adam_step(params, grads, state, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update, in place. Weight decay enters as the
    gradient contribution weight_decay * w."""
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for layer, glayer, m, v in zip(params, grads, state.m, state.v):
        for k, w in layer.items():
            g = glayer[k] + weight_decay * w
            m[k] = b1 * m[k] + (1.0 - b1) * g
            v[k] = b2 * v[k] + (1.0 - b2) * g * g
            w -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)


def accuracy(logits, labels, mask):
    """Fraction of masked nodes whose argmax logit matches the label; argmax
    ties resolve to the lowest class index."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("accuracy mask")
    preds = np.argmax(logits[mask], axis=1)
    return float(np.mean(preds == np.asarray(labels)[mask]))


def _masks(n, split):
    out = []
    for idx in (split["train"], split["val"], split["test"]):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(idx, dtype=np.int64)] = True
        out.append(m)
    return out


def _grad_arrays(grads, leaves):
    return [{k: grads.of(t) for k, t in layer.items()} for layer in leaves]


def per_layer_homophily(g, labels, captures, head_w, head_b):
    """Classifier-based effective homophily per propagation layer: classify
    each capture with the final linear map and measure the fraction of
    correctly classified same-label neighbors. None where widths mismatch."""
    out = []
    for cap in captures:
        if cap.shape[1] != head_w.shape[0]:
            out.append(None)
            continue
        logits = cap @ head_w
        if head_b is not None:
            logits = logits + head_b
        correct = np.argmax(logits, axis=1) == np.asarray(labels)
        out.append(float(empirical_effective_homophily(g, labels, correct).mean()))
    return out


def train(model_config, dataset, split, config=TrainConfig()):
    """Early-stopped training run; restores the parameters of the best
    validation epoch (ties to the earliest) and reports its test accuracy."""
    t_start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    labels = dataset.labels
    n_classes = int(labels.max()) + 1
    train_mask, val_mask, test_mask = _masks(dataset.graph.n, split)

    consts = None
    if model_config.arch != "mlp":
        consts = GraphConsts(dataset.graph)
    params = models.init_params(model_config, dataset.features.shape[1], n_classes, rng)
    norm_states = models.init_norm_states(model_config, params)
    opt = AdamState(params)

    best = {"val": -1.0, "epoch": 0, "params": None, "norm_states": None}
    for epoch in range(1, config.max_epochs + 1):
        tape = ad.Tape()
        logits, leaves, _ = models.forward(
            tape, model_config, params, consts, dataset.features,
            training=True, rng=rng, norm_states=norm_states,
        )
        loss = ad.cross_entropy_masked(logits, labels, train_mask)
        if not np.isfinite(loss.value[0, 0]):
            raise DivergedLossError(epoch)
        grads = ad.backward(tape, loss)
        adam_step(params, _grad_arrays(grads, leaves), opt,
                  config.lr, config.weight_decay, config.betas, config.eps)

        eval_tape = ad.Tape()
        eval_logits, _, _ = models.forward(
            eval_tape, model_config, params, consts, dataset.features,
            training=False, norm_states=norm_states,
        )
        val_acc = accuracy(eval_logits.value, labels, val_mask)
        if val_acc > best["val"]:
            best.update(
                val=val_acc, epoch=epoch,
                params=copy.deepcopy(params),
                norm_states=copy.deepcopy(norm_states),
            )
        if epoch - best["epoch"] >= config.patience:
            break

    params = best["params"] if best["params"] is not None else params
    norm_states = best["norm_states"] if best["norm_states"] is not None else norm_states
    final_tape = ad.Tape()
    final_logits, _, captures = models.forward(
        final_tape, model_config, params, consts, dataset.features,
        training=False, norm_states=norm_states,
    )
    eff_h = []
    if model_config.arch != "mlp":
        head_w, head_b = models.head_transform(model_config, params)
        head_b_val = head_b if head_b is None else np.asarray(head_b)
        eff_h = per_layer_homophily(
            dataset.graph, labels, captures, np.asarray(head_w), head_b_val
        )
    return RunResult(
        test_accuracy=accuracy(final_logits.value, labels, test_mask),
        best_val_accuracy=best["val"],
        best_epoch=best["epoch"],
        per_layer_effective_homophily=eff_h,
        wall_time=time.perf_counter() - t_start,
        params=params,
        predictions=np.argmax(final_logits.value, axis=1),
        captures=captures,
    )


def depth_sweep(model_config, dataset, splits, depths, config=TrainConfig()):
    """Mean and sample stdev of test accuracy per depth over the splits, plus
    the depth with the best mean. Dict keyed 'rows' and 'best_depth'."""
    cells = [(d, s) for d in depths for s in range(len(splits))]

    def run(cell):
        d, s = cell
        mc = replace(model_config, depth=d)
        tc = replace(config, seed=config.seed + s)
        return train(mc, dataset, splits[s], tc).test_accuracy

    accs = thread_map(run, cells)
    by_depth = {d: [] for d in depths}
    for (d, _), a in zip(cells, accs):
        by_depth[d].append(a)
    rows = []
    for d in depths:
        xs = np.asarray(by_depth[d])
        std = float(xs.std(ddof=1)) if xs.size > 1 else 0.0
        rows.append({"depth": d, "mean": float(xs.mean()), "stdev": std,
                     "accuracies": [float(x) for x in xs]})
    best = max(rows, key=lambda r: r["mean"])["depth"]
    return {"rows": rows, "best_depth": int(best)}


ABLATION_CELLS = (
    ("base", False, False),
    ("+deg", False, True),
    ("+sign", True, False),
    ("+sign,deg", True, True),
)


def ablation_grid(dataset, splits, depths, config=TrainConfig(), hidden_dim=16,
                  dropout_p=0.0):
    """Depth sweeps for the four mechanism combinations on the residual base
    architecture (decay off throughout)."""
    out = {}
    for label, use_sign, use_deg in ABLATION_CELLS:
        mc = ModelConfig(
            arch="base", hidden_dim=hidden_dim, dropout_p=dropout_p,
            use_sign=use_sign, use_degree_correction=use_deg, use_decay=False,
        )
        out[label] = depth_sweep(mc, dataset, splits, depths, config)
    return out
