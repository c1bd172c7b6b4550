import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from byzstab import builtin_metric, check_properties, table_metric
from byzstab.analysis import check_spec, compute_area
from byzstab.engine import make_daemon, run
from byzstab.io import decode_value, encode_value
from byzstab.metrics import MetricError
from byzstab.oracle import mu_brute_force_from, mu_from
from byzstab.protocol import NeighborView, ProcessState, ProcessView, local_rule
from byzstab.system import random_configuration, random_system

from conftest import BUILTINS, metric_for

METRICS = {name: metric_for(name) for name in BUILTINS}

seeds = st.integers(min_value=0, max_value=2**32 - 1)
builtin_names = st.sampled_from(BUILTINS)


@st.composite
def systems(draw, max_n=8, max_byz=2):
    metric = METRICS[draw(builtin_names)]
    n = draw(st.integers(2, max_n))
    byz = draw(st.integers(0, min(max_byz, n - 1)))
    return random_system(metric, n, random.Random(draw(seeds)), byzantine=byz)


@settings(max_examples=150, deadline=None)
@given(systems())
def test_mu_oracles_agree(system):
    for root in (system.root, *system.byzantine):
        assert mu_from(system, root) == mu_brute_force_from(system, root)


@settings(max_examples=150, deadline=None)
@given(systems())
def test_area_inclusions(system):
    s_b = compute_area(system, "S_B").members
    star = compute_area(system, "S_B_star").members
    assert star <= s_b and system.root not in star


@settings(max_examples=60, deadline=None)
@given(systems(max_n=9, max_byz=0), seeds, st.sampled_from(["central-fair", "distributed-fair", "synchronous"]))
def test_fault_free_convergence(system, seed, daemon):
    initial = random_configuration(system, seed)
    trace = run(system, initial, make_daemon(daemon), max_steps=50 * system.n * 4 * system.n, seed=seed)
    assert trace.metadata["stop_reason"] == "quiescent"
    assert all(check_spec(system, trace.final, v) for v in system.processes)


@st.composite
def views(draw):
    metric = METRICS[draw(builtin_names)]
    k = draw(st.integers(1, 5))
    nbrs = tuple(
        NeighborView(i, draw(st.sampled_from(metric.values)), draw(st.sampled_from(metric.weights)), draw(st.integers(0, 6)))
        for i in range(k)
    )
    state = ProcessState(draw(st.none() | st.integers(0, k - 1)), draw(st.sampled_from(metric.values)), draw(st.integers(0, 6)))
    return metric, ProcessView(state, nbrs, False)


@settings(max_examples=300, deadline=None)
@given(views(), st.none() | st.integers(1, 6))
def test_local_rule_takes_a_best_candidate(case, bound):
    metric, view = case
    new = local_rule(metric, view, bound)
    cands = [nb for nb in view.neighbors if bound is None or nb.hops < bound]
    if not cands:
        assert (new.prnt, new.level, new.hops) == (view.state.prnt, view.state.level, bound)
        return
    best = max(metric.rank(metric.met(nb.level, nb.weight)) for nb in cands)
    chosen = view.neighbors[new.prnt]
    assert chosen in cands
    assert new.level == metric.met(chosen.level, chosen.weight)
    assert metric.rank(new.level) == best
    # applying the rule again to an unchanged neighbourhood is a no-op
    again = ProcessView(new, view.neighbors, False)
    assert local_rule(metric, again, bound) == new


@st.composite
def tables(draw):
    nm = draw(st.integers(1, 5))
    nw = draw(st.integers(1, 4))
    rows = [[draw(st.integers(0, nm - 1)) for _ in range(nw)] for _ in range(nm)]
    return nm, nw, rows


@settings(max_examples=300, deadline=None)
@given(tables())
def test_property_report_is_consistent(t):
    nm, nw, rows = t
    try:
        metric = table_metric("h", list(range(nm)), list(range(nw)), rows, nm - 1)
    except MetricError:
        return
    r = check_properties(metric)
    assert r.maximizable == (r.bounded and r.monotonic)
    if r.strongly_maximizable:
        assert r.maximizable
        assert nm == 1 or (r.strictly_decreasing and len(r.fixed_points) == 1)
    if r.strictly_decreasing:
        assert r.bounded


@given(st.fractions(min_value=0, max_value=1))
def test_fraction_codec_round_trip(x):
    r = builtin_metric("R")
    assert decode_value(r, encode_value(Fraction(x))) == x
