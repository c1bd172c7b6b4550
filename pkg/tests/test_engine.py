import io
import json
import random

import pytest

from byzstab import ProcessState, build_system, builtin_metric
from byzstab.engine import (
    CentralDaemon,
    DistributedDaemon,
    EngineError,
    ScriptedSchedule,
    ScriptedWrites,
    SynchronousDaemon,
    concat_traces,
    fairness_violations,
    make_adversary,
    make_daemon,
    read_trace,
    run,
    step,
    write_trace,
)
from byzstab.protocol import TreeProtocol
from byzstab.system import Configuration, random_configuration, random_system

SP = builtin_metric("SP")
PROTOCOL = TreeProtocol()


def _noisy_run(seed, daemon="distributed-fair", steps=300):
    rng = random.Random(seed)
    system = random_system(SP, rng.randint(3, 8), rng, byzantine=rng.randint(0, 2))
    initial = random_configuration(system, rng)
    return run(system, initial, make_daemon(daemon), make_adversary("random-writes", p=0.3),
               max_steps=steps, stop="max-steps", seed=seed)


@pytest.mark.parametrize("daemon", ["central-fair", "distributed-fair", "synchronous", "central-adversarial"])
def test_frame_condition(daemon):
    for seed in range(20):
        trace = _noisy_run(seed, daemon)
        system = trace.system
        configs = trace.configs
        for i, s in enumerate(trace.steps):
            before, after = configs[i], configs[i + 1]
            for v in system.processes:
                if v in s.activated:
                    assert after[v] == PROTOCOL.rule(system, before, v)
                elif v in s.byz_writes:
                    assert after[v] == s.byz_writes[v]
                else:
                    assert after[v] == before[v]
            assert set(s.changed) == set(before.diff(after))
            if "central" in daemon:
                assert len(s.activated) <= 1


@pytest.mark.parametrize("daemon", ["central-fair", "distributed-fair", "synchronous"])
def test_fair_daemons_respect_the_window(daemon):
    for seed in range(20):
        trace = _noisy_run(seed, daemon, steps=500)
        assert fairness_violations(trace) == []


def test_adversarial_central_daemon_picks_lowest_id():
    d = make_daemon("central-adversarial")
    d.reset(random_system(SP, 4, random.Random(0)))
    assert d.choose([3, 1, 2], random.Random(0)) == (1,)


def test_distributed_daemon_picks_nonempty_subsets():
    d = DistributedDaemon()
    d.reset(random_system(SP, 6, random.Random(0)))
    rng = random.Random(2)
    for _ in range(100):
        got = d.choose([1, 2, 4], rng)
        assert got and set(got) <= {1, 2, 4}
    assert SynchronousDaemon().choose([1, 2], rng) == (1, 2)


def test_runs_are_reproducible():
    a, b = _noisy_run(9), _noisy_run(9)
    assert a.configs == b.configs and a.metadata == b.metadata
    assert _noisy_run(10).configs != a.configs


def test_quiescent_run_stops_and_counts_rounds():
    rng = random.Random(4)
    system = random_system(SP, 6, rng)
    trace = run(system, random_configuration(system, rng), CentralDaemon(), seed=1)
    meta = trace.metadata
    assert meta["stop_reason"] == "quiescent"
    assert 1 <= meta["rounds"] <= meta["steps"]
    assert not any(PROTOCOL.enabled(system, trace.final, v) for v in system.processes)


def test_step_validation():
    s = build_system(["r", "a", "b"], [("r", "a", 1), ("a", "b", 1)], SP, byzantine=["b"])
    c = Configuration((ProcessState(None, 0), ProcessState(None, 9), ProcessState(None, 0)))
    with pytest.raises(EngineError):
        step(s, c, [2])
    with pytest.raises(EngineError):
        step(s, c, [1], {1: ProcessState(None, 0)})
    after = step(s, c, [1], {2: ProcessState(1, 3)})
    assert after[1] == ProcessState(0, 1, 1) and after[2] == ProcessState(1, 3)


def test_scripted_run():
    s = build_system(["r", "a", "b"], [("r", "a", 1), ("a", "b", 1)], SP, byzantine=["b"])
    c = Configuration((ProcessState(None, 0), ProcessState(None, 9), ProcessState(None, 0)))
    trace = run(s, c, ScriptedSchedule([[1], [0], [1]]), ScriptedWrites([{}, {2: ProcessState(None, 5)}]),
                stop="max-steps", max_steps=10)
    assert trace.metadata["stop_reason"] == "schedule-exhausted"
    assert [st.activated for st in trace.steps] == [(1,), (0,), (1,)]
    assert trace.config_at(2)[2] == ProcessState(None, 5)


def test_unknown_kinds():
    with pytest.raises(EngineError):
        make_daemon("lazy")
    with pytest.raises(EngineError):
        make_adversary("chaos")
    with pytest.raises(EngineError):
        make_adversary("mirror-root")


def test_concat_requires_aligned_segments():
    a = _noisy_run(1, steps=10)
    b = _noisy_run(2, steps=10)
    with pytest.raises(ValueError):
        concat_traces([a, b])
    joined = concat_traces([a])
    assert joined.configs == a.configs


@pytest.mark.parametrize("snapshot_every", [0, 1, 7, 100])
def test_jsonl_replay(snapshot_every):
    for seed in range(5):
        trace = _noisy_run(seed, steps=120)
        buf = io.StringIO()
        write_trace(trace, buf, snapshot_every)
        replayed = [c for _, _, c in read_trace(buf.getvalue().splitlines())]
        assert replayed == trace.configs


def test_jsonl_replay_with_fractions():
    r = builtin_metric("R", denominator=4)
    rng = random.Random(5)
    system = random_system(r, 5, rng, byzantine=1)
    trace = run(system, random_configuration(system, rng), make_daemon("central-fair"),
                make_adversary("random-writes"), max_steps=60, stop="max-steps")
    buf = io.StringIO()
    write_trace(trace, buf, 10)
    assert [c for _, _, c in read_trace(buf.getvalue().splitlines())] == trace.configs


def test_corrupted_snapshot_is_detected():
    trace = _noisy_run(3, steps=20)
    buf = io.StringIO()
    write_trace(trace, buf, 5)
    lines = buf.getvalue().splitlines()
    idx = next(i for i, line in enumerate(lines) if '"snapshot"' in line)
    rec = json.loads(lines[idx])
    first = next(iter(rec["states"]))
    rec["states"][first]["level"] = 999
    lines[idx] = json.dumps(rec)
    with pytest.raises(ValueError, match="snapshot"):
        list(read_trace(lines))
