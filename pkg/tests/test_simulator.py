import random

import pytest

from stabconn.graph import parse_graph
from stabconn.oracle import ground_truth
from stabconn.protocol import BOTTOM, ProcessorState, Register, ROOT_PATH
from stabconn.simulator import (
    Configuration,
    FaultSpec,
    FaultTargetError,
    POST_STABILIZATION,
    default_max_rounds,
    init_arbitrary,
    inject_fault,
    is_legitimate,
    make_scheduler,
    round_boundaries,
    run,
    step,
)


def stabilized_configuration(g, gt):
    """A fully consistent legitimate configuration (registers, locals, pcs)."""
    return Configuration(
        g,
        [
            ProcessorState(
                register=reg,
                path=reg.path,
                count=reg.count,
                n_in=0,
                n_out=0,
                read_path=[gt.registers[w - 1].path for w in g.neighbors(v)],
                read_count=[gt.registers[w - 1].count for w in g.neighbors(v)],
                read_bcc=[gt.registers[w - 1].bcc for w in g.neighbors(v)],
                pc=0,
            )
            for v, reg in enumerate(gt.registers, start=1)
        ],
    )


# ---------------------------------------------------------------------------
# arbitrary initialization

def test_init_deterministic(fig1):
    assert init_arbitrary(fig1, 5) == init_arbitrary(fig1, 5)
    assert init_arbitrary(fig1, 5) != init_arbitrary(fig1, 6)


def test_init_respects_type_bounds(fig1):
    conf = init_arbitrary(fig1, 9)
    bound = fig1.n * fig1.n
    for v, st in enumerate(conf.states, start=1):
        for p in (st.register.path, st.register.bcc, st.path, *st.read_path, *st.read_bcc):
            assert 1 <= len(p) <= fig1.n
            assert all(0 <= s <= fig1.max_degree for s in p)
        assert abs(st.register.count) <= bound
        assert 0 <= st.pc < len(conf.programs[v - 1].schedule)


def test_init_almost_never_legitimate(fig1, triangle):
    for g in (fig1, triangle):
        gt = ground_truth(g)
        legit = sum(is_legitimate(init_arbitrary(g, seed), gt) for seed in range(100))
        assert legit == 0


def test_single_node_converges_within_three_steps():
    g = parse_graph("1 0\n")
    gt = ground_truth(g)
    conf = init_arbitrary(g, 1234)
    for _ in range(3):
        conf = step(conf, 1)
    assert is_legitimate(conf, gt)
    _, report = run(g, make_scheduler("round-robin"), init_arbitrary(g, 7))
    assert report.stabilized


# ---------------------------------------------------------------------------
# stepping

def test_step_locality(fig1):
    conf = init_arbitrary(fig1, 21)
    for pid in (1, 5, 16):
        after = step(conf, pid)
        for v in range(1, 17):
            if v == pid:
                # the pc always advances, so the activated state must differ
                assert after.states[v - 1] != conf.states[v - 1]
            else:
                assert after.states[v - 1] == conf.states[v - 1]
                assert after.states[v - 1] is conf.states[v - 1]


def test_two_pids_change_disjoint_states(fig1):
    conf = init_arbitrary(fig1, 22)
    a = step(conf, 3)
    b = step(conf, 9)
    assert a.states[8] == conf.states[8]
    assert b.states[2] == conf.states[2]


def test_read_steps_change_no_register(fig1):
    conf = init_arbitrary(fig1, 23)
    regs = conf.registers()
    # drive node 7 through its phase-A reads: register can only change on writes
    from stabconn.simulator import _step

    c = conf
    for _ in range(4):
        c, ev = _step(c, 7)
        if ev.kind == "read":
            assert c.registers() == regs
        else:
            regs = c.registers()


def test_step_rejects_bad_pid(triangle):
    with pytest.raises(ValueError):
        step(init_arbitrary(triangle, 0), 9)


def test_root_activation_writes_its_program_value(triangle):
    conf = init_arbitrary(triangle, 31)
    st = conf.states[0]
    st.pc = 0
    after = step(conf, 1)
    assert after.states[0].register.path == ROOT_PATH


# ---------------------------------------------------------------------------
# rounds

def test_round_boundaries_spec_examples():
    assert round_boundaries([1, 2, 1, 3, 3, 2, 1], 3) == [4, 7]
    assert round_boundaries([1, 2, 3, 1, 2, 3], 3) == [3, 6]
    assert round_boundaries([1, 1, 1, 2], 2) == [4]


def test_round_boundaries_trailing_incomplete():
    assert round_boundaries([1, 2, 1, 1], 3) == []


def test_round_robin_rounds_are_exactly_n():
    sched = make_scheduler("round-robin")
    prefix = [pid for _, pid in zip(range(12), sched.activations(4))]
    assert round_boundaries(prefix, 4) == [4, 8, 12]


def test_schedulers_are_fair_and_deterministic():
    n = 25
    for name in ("round-robin", "random", "weighted"):
        sched = make_scheduler(name, seed=3)
        first = [pid for _, pid in zip(range(10000), sched.activations(n))]
        again = [pid for _, pid in zip(range(10000), sched.activations(n))]
        assert first == again
        assert set(first) == set(range(1, n + 1))
        assert len(round_boundaries(first, n)) > 10


def test_weighted_scheduler_rejects_bad_weights():
    with pytest.raises(ValueError):
        make_scheduler("weighted", seed=1, weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        make_scheduler("nope")


# ---------------------------------------------------------------------------
# full runs

def test_run_single_edge_exact_registers(single_edge):
    _, report = run(
        single_edge, make_scheduler("round-robin"), init_arbitrary(single_edge, 77)
    )
    assert report.stabilized
    assert report.final_registers == (
        Register((BOTTOM,), 0, (BOTTOM,)),
        Register((BOTTOM, 1), 0, (BOTTOM, 1)),
    )


def test_run_figure1_counts_and_certification(fig1):
    gt = ground_truth(fig1)
    for name in ("round-robin", "random", "weighted"):
        _, report = run(fig1, make_scheduler(name, seed=11), init_arbitrary(fig1, 42))
        assert report.stabilized and report.oracle_match
        for v in (4, 6, 11, 14):
            assert report.final_registers[v - 1].count == 0
        assert report.final_registers == gt.registers


def test_run_deterministic(fig1):
    def one():
        return run(
            fig1,
            make_scheduler("random", seed=5),
            init_arbitrary(fig1, 6),
            closure_rounds=5,
        )[1]

    a, b = one(), one()
    assert a.final_registers == b.final_registers
    assert (a.stabilization_round, a.rounds, a.total_steps) == (
        b.stabilization_round,
        b.rounds,
        b.total_steps,
    )
    assert a.detection == b.detection


def test_run_round_bound(fig1):
    bound = 10 * fig1.diameter * fig1.n * fig1.max_degree
    for seed in range(5):
        _, report = run(fig1, make_scheduler("random", seed=seed), init_arbitrary(fig1, seed))
        assert report.stabilized
        assert report.stabilization_round <= bound


def test_run_closure_no_changes(fig1):
    for name in ("round-robin", "random", "weighted"):
        _, report = run(
            fig1,
            make_scheduler(name, seed=2),
            init_arbitrary(fig1, 3),
            closure_rounds=50,
        )
        assert report.stabilized
        assert report.post_stabilization_changes == 0


def test_run_reports_non_convergence(fig1):
    _, report = run(fig1, make_scheduler("round-robin"), init_arbitrary(fig1, 1), max_rounds=2)
    assert not report.stabilized
    assert report.stabilization_round is None
    assert report.detection is None and report.oracle_match is None


def test_run_trace_rounds(fig1):
    trace, report = run(
        fig1,
        make_scheduler("round-robin"),
        init_arbitrary(fig1, 8),
        record_rounds=True,
    )
    assert len(trace.rounds) == report.rounds
    assert trace.rounds[-1].legitimate
    assert trace.rounds[0].registers is not None
    # round-robin: every round is exactly n steps
    assert all(r.end_step == i * fig1.n for i, r in enumerate(trace.rounds, start=1))


def test_run_step_log_debug_flag(triangle):
    trace, report = run(
        triangle,
        make_scheduler("round-robin"),
        init_arbitrary(triangle, 13),
        record_steps=True,
    )
    assert len(trace.steps) == report.total_steps
    steps, pids, events = zip(*trace.steps)
    assert list(steps) == list(range(1, report.total_steps + 1))
    assert set(pids) == {1, 2, 3}
    assert all(ev.kind in ("read", "write") for ev in events)


def test_run_does_not_mutate_init(fig1):
    init = init_arbitrary(fig1, 55)
    snapshot = init.clone()
    run(fig1, make_scheduler("round-robin"), init)
    assert init == snapshot


def test_default_max_rounds(fig1):
    assert default_max_rounds(fig1) == 10 * 7 * 16 * 4
    assert default_max_rounds(parse_graph("1 0\n")) == 10


# ---------------------------------------------------------------------------
# faults

def test_empty_fault_is_identity(fig1):
    conf = init_arbitrary(fig1, 1)
    assert inject_fault(conf, FaultSpec(trigger=0)) == conf


def test_fault_targets_only_listed_fields(fig1):
    conf = init_arbitrary(fig1, 2)
    spec = FaultSpec(trigger=0, targets=((3, "count"),), values={(3, "count"): 7})
    after = inject_fault(conf, spec)
    assert after.states[2].register.count == 7
    assert after.states[2].register.path == conf.states[2].register.path
    for v in range(1, 17):
        if v != 3:
            assert after.states[v - 1] == conf.states[v - 1]


def test_fault_deterministic(fig1):
    conf = init_arbitrary(fig1, 3)
    spec = FaultSpec(trigger=0, random_fields=4, seed=9)
    assert inject_fault(conf, spec) == inject_fault(conf, spec)
    assert inject_fault(conf, spec) != inject_fault(conf, spec, seed=10)


def test_fault_rejects_bad_targets(triangle):
    conf = init_arbitrary(triangle, 4)
    with pytest.raises(FaultTargetError):
        inject_fault(conf, FaultSpec(trigger=0, targets=((9, "path"),)))
    with pytest.raises(FaultTargetError):
        inject_fault(conf, FaultSpec(trigger=0, targets=((1, "nope"),)))
    with pytest.raises(FaultTargetError):
        inject_fault(
            conf,
            FaultSpec(trigger=0, targets=((1, "count"),), values={(1, "count"): 10**9}),
        )
    with pytest.raises(FaultTargetError):
        inject_fault(
            conf,
            FaultSpec(trigger=0, targets=((1, "path"),), values={(1, "path"): (99, 99)}),
        )


def test_corrupt_root_count_restored_by_next_cycle(triangle):
    gt = ground_truth(triangle)
    conf = stabilized_configuration(triangle, gt)
    corrupted = inject_fault(
        conf, FaultSpec(trigger=0, targets=((1, "count"),), values={(1, "count"): 7})
    )
    assert corrupted.states[0].register.count == 7
    c = corrupted
    for _ in range(3):
        c = step(c, 1)
    assert c.states[0].register.count == 0


def test_step_fault_fires_at_trigger(fig1):
    spec = FaultSpec(trigger=40, targets=((5, "path"),), seed=3)
    _, report = run(fig1, make_scheduler("round-robin"), init_arbitrary(fig1, 6), faults=[spec])
    assert len(report.fault_events) == 1
    assert report.fault_events[0].step == 40
    assert report.fault_events[0].node == 5
    assert report.stabilized


def test_post_stabilization_fault_recovery(fig1):
    gt = ground_truth(fig1)
    spec = FaultSpec(trigger=POST_STABILIZATION, targets=((11, "bcc"),), seed=8)
    _, report = run(
        fig1, make_scheduler("round-robin"), init_arbitrary(fig1, 9), faults=[spec]
    )
    assert report.stabilized
    assert len(report.fault_events) == 1
    assert report.fault_events[0].node == 11
    # re-stabilized to registers identical to the unique ground truth
    assert report.final_registers == gt.registers
    assert report.oracle_match


def test_post_stab_fault_recovery_from_snapshot(fig1):
    gt = ground_truth(fig1)
    rng = random.Random(0)
    stabilized = stabilized_configuration(fig1, gt)
    pre_fault = stabilized.registers()
    for trial in range(5):
        spec = FaultSpec(trigger=0, random_fields=rng.randint(1, 6), seed=trial)
        corrupted = inject_fault(stabilized, spec)
        _, rep = run(fig1, make_scheduler("random", seed=trial), corrupted)
        assert rep.stabilized
        assert rep.final_registers == pre_fault


def test_planted_adversarial_pair_recovers(k4_adversarial):
    # registers of two adjacent nodes hold a maximal-length all-ones path
    # that lexicographically undercuts their legitimate paths; under a naive
    # truncating minimum this is a stable illegitimate fixpoint
    g = k4_adversarial
    conf = init_arbitrary(g, 0)
    for v in (3, 4):
        st = conf.states[v - 1]
        st.register = st.register._replace(path=(BOTTOM, 1, 1, 1))
        st.pc = 0
    for v in (1, 2):
        conf.states[v - 1].pc = 0
    _, report = run(g, make_scheduler("round-robin"), conf)
    assert report.stabilized
    assert report.oracle_match


def test_space_bound_tracking(fig1):
    from stabconn.protocol import register_bit_budget

    _, report = run(fig1, make_scheduler("random", seed=1), init_arbitrary(fig1, 12))
    assert report.max_path_len <= fig1.n
    assert report.max_register_bits <= register_bit_budget(
        fig1.n, fig1.max_degree, fig1.n * fig1.n
    )
