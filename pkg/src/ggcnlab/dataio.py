"""Dataset file formats, stratified splits, and synthetic generation with
controllable homophily, degree distribution, and class-conditional features.

Formats (bit-exact round trip):
  edges.tsv     one "u<TAB>v" per line, 0-indexed, u < v, sorted
  features.csv  row i = comma-separated floats for node i (shortest repr)
  labels.txt    one integer per line
  splits.json   {"train": [...], "val": [...], "test": [...]}
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import ClassFeatureModel
from .errors import (
    ClassTooSmallError,
    InconsistentCountsError,
    InfeasibleSpecError,
    InvalidRangeError,
    IoError,
    ParseError,
    TargetHomophilyUnreachableError,
)
from .graph import build_graph

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class LabeledDataset:
    graph: object
    features: np.ndarray
    labels: np.ndarray
    names: list = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        n = self.graph.n
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise InconsistentCountsError(
                f"graph has {n} nodes, features {self.features.shape[0]} rows, "
                f"labels {self.labels.shape[0]} entries"
            )
        if np.any(self.labels < 0):
            raise InvalidRangeError("labels must be nonnegative")

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1

    @property
    def isolated(self):
        return np.flatnonzero(self.graph.degrees == 0)


# ---------------------------------------------------------------------------
# loading and saving


def _read_lines(path):
    try:
        with open(path) as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def load_dataset(dirpath):
    """Read edges.tsv / features.csv / labels.txt from a directory."""
    d = Path(dirpath)
    labels = []
    lpath = d / "labels.txt"
    for no, line in enumerate(_read_lines(lpath), 1):
        if not line.strip():
            continue
        try:
            labels.append(int(line))
        except ValueError:
            raise ParseError(lpath, no, f"expected an integer label, got {line!r}")

    feats = []
    fpath = d / "features.csv"
    arity = None
    for no, line in enumerate(_read_lines(fpath), 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if arity is None:
            arity = len(parts)
        elif len(parts) != arity:
            raise ParseError(fpath, no, f"expected {arity} values, got {len(parts)}")
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError(fpath, no, f"bad float in {line!r}")
        if not all(np.isfinite(row)):
            raise ParseError(fpath, no, "non-finite feature value")
        feats.append(row)

    if len(feats) != len(labels):
        raise InconsistentCountsError(
            f"{len(feats)} feature rows vs {len(labels)} labels"
        )
    n = len(labels)

    edges = []
    epath = d / "edges.tsv"
    for no, line in enumerate(_read_lines(epath), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(epath, no, f"expected 'u<TAB>v', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(epath, no, f"bad node index in {line!r}")

    g = build_graph(edges, n)
    return LabeledDataset(graph=g, features=np.asarray(feats), labels=np.asarray(labels))


def save_dataset(ds, dirpath):
    d = Path(dirpath)
    try:
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "edges.tsv", "w") as fh:
            for u, v in ds.graph.edges:
                fh.write(f"{u}\t{v}\n")
        with open(d / "features.csv", "w") as fh:
            for row in ds.features:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        with open(d / "labels.txt", "w") as fh:
            for y in ds.labels:
                fh.write(f"{y}\n")
    except OSError as exc:
        raise IoError(f"cannot write dataset to {d}: {exc}") from exc


# ---------------------------------------------------------------------------
# splits


def validate_split(split, n):
    seen = set()
    for part in ("train", "val", "test"):
        idx = split[part]
        for i in idx:
            if not 0 <= i < n:
                raise InvalidRangeError(f"split index {i} out of range for n={n}")
            if i in seen:
                raise InvalidRangeError(f"split index {i} appears in two parts")
            seen.add(i)
    return split


def load_splits(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read splits {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg)
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for item in items:
        for part in ("train", "val", "test"):
            if part not in item:
                raise ParseError(path, 0, f"missing split part {part!r}")
        out.append({p: [int(i) for i in item[p]] for p in ("train", "val", "test")})
    return out


def save_splits(splits, path):
    payload = splits if isinstance(splits, list) else [splits]
    try:
        with open(path, "w") as fh:
            json.dump(payload if len(payload) > 1 else payload[0], fh, sort_keys=True)
    except OSError as exc:
        raise IoError(f"cannot write splits {path}: {exc}") from exc


def generate_splits(dataset, ratios=(0.48, 0.32, 0.20), seeds=range(10)):
    """Per-class stratified splits at the given ratios; rounding leftover
    goes to test. One split per seed."""
    if sum(ratios) > 1.0 + 1e-12:
        raise InvalidRangeError(f"ratios sum to {sum(ratios)} > 1")
    labels = dataset.labels
    classes = np.unique(labels)
    for c in classes:
        size = int(np.sum(labels == c))
        if size < 3:
            raise ClassTooSmallError(int(c), size)
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        split = {"train": [], "val": [], "test": []}
        for c in classes:
            idx = np.flatnonzero(labels == c)
            rng.shuffle(idx)
            n_c = idx.size
            k_train = max(1, int(round(ratios[0] * n_c)))
            k_val = max(1, int(round(ratios[1] * n_c)))
            if k_train + k_val >= n_c:
                k_val = max(1, n_c - k_train - 1)
            split["train"].extend(int(i) for i in idx[:k_train])
            split["val"].extend(int(i) for i in idx[k_train:k_train + k_val])
            split["test"].extend(int(i) for i in idx[k_train + k_val:])
        for part in split:
            split[part].sort()
        out.append(validate_split(split, dataset.graph.n))
    return out


def convert_split_masks(masks):
    """Boolean mask arrays {train_mask, val_mask, test_mask} to index lists."""
    out = {}
    for part in ("train", "val", "test"):
        m = np.asarray(masks[f"{part}_mask"], dtype=bool)
        out[part] = [int(i) for i in np.flatnonzero(m)]
    return out


def load_split_masks(path):
    """Read mask-style split files: .npz arrays or JSON boolean lists."""
    p = Path(path)
    try:
        if p.suffix == ".npz":
            with np.load(p) as z:
                masks = {k: z[k] for k in ("train_mask", "val_mask", "test_mask")}
        else:
            with open(p) as fh:
                raw = json.load(fh)
            masks = {k: np.asarray(raw[k])
                     for k in ("train_mask", "val_mask", "test_mask")}
    except OSError as exc:
        raise IoError(f"cannot read split masks {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.msg)
    except KeyError as exc:
        raise InconsistentCountsError(f"split masks {path} lack {exc}")
    return convert_split_masks(masks)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class SynthSpec:
    """Binary-label synthetic dataset request.

    degree_model: ("regular", d) or ("powerlaw", exponent, dmin, dmax).
    Labels are split evenly between the two classes.
    """

    n: int
    target_h: float
    degree_model: tuple
    feature_model: ClassFeatureModel
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target_h <= 1.0:
            raise InvalidRangeError(f"target_h must be in [0,1], got {self.target_h}")
        if self.n < 4:
            raise InvalidRangeError("need n >= 4")


def _degree_sequence(spec, rng):
    kind = spec.degree_model[0]
    if kind == "regular":
        d = int(spec.degree_model[1])
        if d < 1 or d >= spec.n:
            raise InfeasibleSpecError(f"regular degree {d} impossible for n={spec.n}")
        if (spec.n * d) % 2:
            raise InfeasibleSpecError(f"n*d = {spec.n * d} is odd")
        return np.full(spec.n, d, dtype=np.int64)
    if kind == "powerlaw":
        _, exponent, dmin, dmax = spec.degree_model
        dmin, dmax = int(dmin), int(dmax)
        if not 1 <= dmin <= dmax < spec.n:
            raise InfeasibleSpecError(f"bad powerlaw bounds [{dmin},{dmax}] for n={spec.n}")
        support = np.arange(dmin, dmax + 1)
        w = support.astype(np.float64) ** (-float(exponent))
        deg = rng.choice(support, size=spec.n, p=w / w.sum())
        if deg.sum() % 2:
            # bump one node inside the bounds to make the stub count even
            room = np.flatnonzero(deg < dmax)
            if room.size:
                deg[rng.choice(room)] += 1
            else:
                deg[rng.choice(np.flatnonzero(deg > dmin))] -= 1
        return deg.astype(np.int64)
    raise InvalidRangeError(f"unknown degree model {kind!r}")


def _havel_hakimi(degrees):
    """Simple graph realizing the degree sequence, or None if not graphical."""
    n = len(degrees)
    remaining = [(int(d), i) for i, d in enumerate(degrees)]
    edges = set()
    for _ in range(n):
        remaining.sort(reverse=True)
        d, u = remaining[0]
        if d == 0:
            break
        if d > len(remaining) - 1:
            return None
        remaining[0] = (0, u)
        for k in range(1, d + 1):
            dv, v = remaining[k]
            if dv == 0:
                return None
            remaining[k] = (dv - 1, v)
            edges.add((min(u, v), max(u, v)))
    return edges


def _double_edge_swaps(edges, rng, attempts):
    """Degree-preserving randomization; mutates the edge set in place."""
    edge_list = list(edges)
    m = len(edge_list)
    if m < 2:
        return edge_list
    for _ in range(attempts):
        i, j = rng.integers(0, m, size=2)
        if i == j:
            continue
        a, b = edge_list[i]
        c, d = edge_list[j]
        if rng.random() < 0.5:
            c, d = d, c
        if len({a, b, c, d}) < 4:
            continue
        e1 = (min(a, d), max(a, d))
        e2 = (min(c, b), max(c, b))
        if e1 in edges or e2 in edges:
            continue
        edges.discard(edge_list[i])
        edges.discard(edge_list[j])
        edges.add(e1)
        edges.add(e2)
        edge_list[i] = e1
        edge_list[j] = e2
    return edge_list


def _graph_h(edges, labels, degrees, n):
    same = np.zeros(n)
    for u, v in edges:
        if labels[u] == labels[v]:
            same[u] += 1
            same[v] += 1
    return float(np.mean(same / degrees))


def _drive_homophily(edges, labels, degrees, n, target, rng, tol=0.04,
                     max_batches=400):
    """Degree-preserving swaps steering the node-mean homophily to target."""
    edge_list = list(edges)
    m = len(edge_list)
    best_gap = np.inf
    best_h = None
    total = 0
    for _ in range(max_batches):
        h = _graph_h(edges, labels, degrees, n)
        gap = abs(h - target)
        if gap < best_gap:
            best_gap, best_h = gap, h
        if gap <= tol:
            return
        want_same = h < target
        accepted = 0
        # each improving swap moves roughly two edges between the same- and
        # cross-label pools (h step about 2/m), so cap the batch at what the
        # remaining gap needs; a fixed quota would step over the tolerance
        quota = max(1, min(m // 8, int(gap * m / 2 * 0.75)))
        for _ in range(60 * max(quota, 8)):
            total += 1
            i, j = rng.integers(0, m, size=2)
            if i == j:
                continue
            a, b = edge_list[i]
            c, d = edge_list[j]
            if rng.random() < 0.5:
                c, d = d, c
            if len({a, b, c, d}) < 4:
                continue
            old = (labels[a] == labels[b]) + (labels[c] == labels[d])
            new = (labels[a] == labels[d]) + (labels[c] == labels[b])
            improving = (new > old) if want_same else (new < old)
            # neutral swaps diffuse the wiring so later batches do not stall
            # on a frozen arrangement; they leave the homophily unchanged
            if not improving and not (new == old and rng.random() < 0.05):
                continue
            e1 = (min(a, d), max(a, d))
            e2 = (min(c, b), max(c, b))
            if e1 in edges or e2 in edges:
                continue
            edges.discard(edge_list[i])
            edges.discard(edge_list[j])
            edges.add(e1)
            edges.add(e2)
            edge_list[i] = e1
            edge_list[j] = e2
            if improving:
                accepted += 1
                if accepted >= quota:
                    break
        if accepted == 0:
            break
    h = _graph_h(edges, labels, degrees, n)
    if abs(h - target) <= tol:
        return
    raise TargetHomophilyUnreachableError(target, best_h if best_h is not None else h, total)


def generate_synthetic(spec):
    """Binary-label graph with the requested degree model and homophily,
    plus class-conditional features. Deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2:] = 1
    rng.shuffle(labels)

    degrees = _degree_sequence(spec, rng)
    edges = _havel_hakimi(degrees)
    if edges is None:
        raise InfeasibleSpecError("degree sequence is not graphical")
    _double_edge_swaps(edges, rng, attempts=10 * len(edges))
    _drive_homophily(edges, labels, degrees, n, spec.target_h, rng)

    g = build_graph(sorted(edges), n)
    model = spec.feature_model
    signs = np.where(labels == 0, 1.0, -1.0)
    z = rng.standard_normal((n, model.dim))
    features = signs[:, None] * model.mu[None, :] + z * np.sqrt(model.sigma)[None, :]
    return LabeledDataset(graph=g, features=features, labels=labels)


# ---------------------------------------------------------------------------
# reports


def save_report(payload, path):
    """Schema-versioned JSON with sorted keys; floats use shortest repr."""
    body = dict(payload)
    body["schema_version"] = SCHEMA_VERSION
    try:
        with open(path, "w") as fh:
            json.dump(body, fh, sort_keys=True, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def save_table_csv(rows, columns, path):
    """Write dict rows in a declared column order."""
    try:
        with open(path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(str(row[c]) for c in columns) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write table {path}: {exc}") from exc
