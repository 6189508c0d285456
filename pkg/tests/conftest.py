import numpy as np
import pytest

from ggcnlab.dataio import LabeledDataset, SynthSpec, generate_splits, generate_synthetic
from ggcnlab.dynamics import ClassFeatureModel
from ggcnlab.graph import build_graph


def random_graph(rng, n=6, p=0.5):
    """Connected-ish random simple graph; every node gets at least one edge."""
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    for u in range(n):
        if not any(u in e for e in edges):
            v = (u + 1) % n
            edges.add((min(u, v), max(u, v)))
    return build_graph(sorted(edges), n)


@pytest.fixture
def small_graph():
    # path 0-1-2 plus triangle 2-3-4, and a pendant 5
    return build_graph([(0, 1), (1, 2), (2, 3), (3, 4), (2, 4), (4, 5)], 6)


@pytest.fixture
def tiny_dataset():
    spec = SynthSpec(
        n=60, target_h=0.7, degree_model=("regular", 4),
        feature_model=ClassFeatureModel(mu=[1.0, 0.5], sigma=[1.0, 1.0]),
        seed=3,
    )
    return generate_synthetic(spec)


@pytest.fixture
def tiny_splits(tiny_dataset):
    return generate_splits(tiny_dataset, seeds=range(2))
