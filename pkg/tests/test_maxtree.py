import random

import pytest

from byzstab import build_system, builtin_metric
from byzstab.maxtree import (
    EnumerationBudgetExceeded,
    brute_force_maximizable,
    find_maximum_metric_tree,
    grow_maximum_metric_tree,
)
from byzstab.metrics import non_monotonic_example, two_fixed_point_example
from byzstab.oracle import mu_from
from byzstab.system import random_system

from conftest import metric_for


def _tree_values(system, parent):
    metric = system.metric
    out = {system.root: metric.mr}

    def value(v):
        if v not in out:
            out[v] = metric.met(value(parent[v]), system.weight(v, parent[v]))
        return out[v]

    return [value(v) for v in system.processes]


@pytest.mark.parametrize("name", ["SP", "F", "R", "BFS", "MET"])
def test_maximizable_metrics_always_have_trees(name):
    metric = metric_for(name)
    rng = random.Random(name)
    for _ in range(40):
        s = random_system(metric, rng.randint(2, 7), rng)
        tree = find_maximum_metric_tree(s)
        assert tree is not None
        assert _tree_values(s, tree) == mu_from(s, s.root)
        assert grow_maximum_metric_tree(s) is not None


def test_non_monotonic_counterexample():
    m = non_monotonic_example()
    # y reaches 2 straight from r, but x (a leaf behind y) only gets 1
    # when y sits at 1 via z, because met(1, a) = 1 beats met(2, a) = 0
    s = build_system(
        ["r", "x", "y", "z"],
        [("r", "y", "b"), ("r", "z", "c"), ("z", "y", "b"), ("y", "x", "a")],
        m,
    )
    assert mu_from(s, 0) == [2, 1, 2, 2]
    assert find_maximum_metric_tree(s) is None
    assert grow_maximum_metric_tree(s) is None
    result = brute_force_maximizable(m, trials=200)
    assert not result and result.counterexample is not None


def test_enumeration_and_growth_agree():
    rng = random.Random(8)
    for factory in (non_monotonic_example, two_fixed_point_example):
        m = factory()
        for _ in range(60):
            s = random_system(m, rng.randint(2, 6), rng)
            assert (find_maximum_metric_tree(s) is None) == (grow_maximum_metric_tree(s) is None)


def test_limits():
    with pytest.raises(ValueError):
        brute_force_maximizable(builtin_metric("MET"), max_nodes=9)
    s = random_system(builtin_metric("SP"), 8, random.Random(2), density=1.0)
    with pytest.raises(EnumerationBudgetExceeded):
        find_maximum_metric_tree(s, budget=3)
    assert brute_force_maximizable(builtin_metric("MET"), trials=30).trials == 30
