from fractions import Fraction

import pytest

from byzstab import builtin_metric, check_properties, table_metric
from byzstab.metrics import (
    MetricError,
    non_monotonic_example,
    reachable_values,
    two_fixed_point_example,
    utility_chain,
)


def test_shortest_path_basics():
    sp = builtin_metric("SP")
    assert sp.mr == 0
    assert sp.met(7, 5) == 12
    assert sp.less(12, 7)
    assert sp.best([3, 9, 1]) == 1
    assert not sp.domain_exhaustive
    assert sp.is_value(10**6) and not sp.is_value(-1)


def test_flow_needs_finite_mr():
    with pytest.raises(MetricError):
        builtin_metric("F")
    assert builtin_metric("F(4)").mr == 4
    assert builtin_metric("F", 4).met(3, 1) == 1


def test_reliability_uses_exact_fractions():
    r = builtin_metric("R", denominator=4)
    assert r.met(Fraction(1, 2), Fraction(3, 4)) == Fraction(3, 8)
    assert r.is_value(Fraction(3, 8))
    assert not r.is_value(Fraction(3, 2))


def test_met_values():
    met = builtin_metric("MET")
    assert [met.met(m, 1) for m in met.values] == [0, 0, 1, 2]
    report = check_properties(met)
    assert report.fixed_points == frozenset({0})
    assert report.strictly_decreasing


def test_nc_is_a_single_value():
    nc = builtin_metric("NC")
    assert nc.values == (0,)
    assert check_properties(nc).strongly_maximizable


def test_bfs_has_no_fixed_point_in_window():
    report = check_properties(builtin_metric("BFS"))
    assert report.fixed_points == frozenset()
    assert report.strictly_decreasing
    assert not report.strongly_maximizable


def test_unknown_builtin():
    with pytest.raises(MetricError):
        builtin_metric("XYZ")


def test_non_monotonic_example_is_bounded_only():
    report = check_properties(non_monotonic_example())
    assert report.bounded
    assert not report.monotonic
    assert not report.maximizable
    assert "non_monotonic" in report.witnesses


def test_two_fixed_points():
    report = check_properties(two_fixed_point_example())
    assert report.fixed_points == frozenset({0, 1})
    assert report.strictly_decreasing
    assert not report.strongly_maximizable


def test_table_metric_rejects_bad_tables():
    with pytest.raises(MetricError):
        table_metric("bad", [0, 1], ["w"], [[0]], 1)
    with pytest.raises(MetricError):
        table_metric("bad", [0, 1], ["w"], [[0], [5]], 1)
    with pytest.raises(MetricError, match="utility"):
        # 0 is listed but never produced from mr
        table_metric("bad", [0, 1], ["w"], [[0], [1]], 1)
    with pytest.raises(MetricError, match="not maximal"):
        table_metric("bad", [0, 1], ["w"], [[0], [0]], 0)


def test_descending_table_order():
    m = table_metric("d", [5, 7], ["w"], [[7], [7]], 5, order="desc")
    # listed greatest first: 5 above 7
    assert m.less(7, 5)
    report = check_properties(m)
    assert report.maximizable and report.fixed_points == frozenset({7})


def test_unbounded_table_is_reported():
    m = table_metric("u", [0, 1], ["up", "down"], [[1, 0], [1, 0]], 1)
    report = check_properties(m)
    assert not report.bounded and not report.maximizable
    assert report.witnesses["unbounded"] == (0, "up", 1)


def test_utility_chain_is_shortest_and_decreasing():
    sp = builtin_metric("SP")
    values, weights = utility_chain(sp, 5)
    assert values == [0, 5] and weights == [5]
    met = builtin_metric("MET")
    values, weights = utility_chain(met, 0)
    assert values == [3, 2, 1, 0]
    assert utility_chain(met, 99) is None


def test_reachable_values_cover_all_builtins():
    for name in ("SP", "R", "NC", "BFS", "MET", "F(6)"):
        m = builtin_metric(name)
        assert reachable_values(m) == set(m.values)


def test_report_dict_encodes_fractions():
    from byzstab.io import encode_value

    d = check_properties(builtin_metric("R", denominator=3)).to_dict(encode_value)
    assert d["fixed_points"] == ["0/1"]
    assert d["maximizable"] is True
