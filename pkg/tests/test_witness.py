from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from bcastnet.instances import chain_example, gen_lower_bound, gen_succinctness, running_example
from bcastnet.saturation import saturate
from bcastnet.semantics import Configuration, Execution, Semantics, configurations, lossy_to_reconfig, replay
from bcastnet.witness import (
    NotCoverable,
    copycat_lossy,
    copycat_reconfig,
    fresh_node_id,
    synthesize_lossy_witness,
    synthesize_reconfig_witness,
    synthesize_witness,
)

from corpus import random_protocol
from sample_runs import PROTOCOL, TARGET, lossy_five_nodes, reconfig_three_nodes
from test_semantics import _random_walk


def _check_copycat(e, src, p, copy):
    before = replay(e, p)
    cc = copy(e, src, p)
    after = replay(cc.execution, p)
    assert cc.fresh not in e.initial.labels
    assert after.size == before.size + 1
    for n, m in cc.injection.items():
        assert after.final.labels[m] == before.final.labels[n]
    assert after.final.labels[cc.fresh] == before.final.labels[src]
    assert after.active_length[cc.fresh] == before.active_length[src]
    return cc, before, after


def test_fresh_node_id():
    assert fresh_node_id(["n1", "n2"]) == "n3"
    assert fresh_node_id(["n3", "x"]) == "n4"
    assert fresh_node_id(["n3", "n4", "n5"]) == "n6"


def test_copycat_reconfig_on_three_node_run():
    cc, _, after = _check_copycat(reconfig_three_nodes(), "C", PROTOCOL, copycat_reconfig)
    assert after.final.labels[cc.fresh] == "smiley"
    assert after.final.edges == replay(reconfig_three_nodes(), PROTOCOL).final.edges


def test_copycat_reconfig_of_a_broadcaster():
    e = reconfig_three_nodes()
    cc, before, after = _check_copycat(e, "B", PROTOCOL, copycat_reconfig)
    assert after.length == before.length + before.active_length["B"]
    assert after.final.labels[cc.fresh] == "q4"


def test_copycat_on_separation_family_doubles_the_broadcaster():
    p, f = gen_succinctness(2)
    e = synthesize_reconfig_witness(p, f)
    final = replay(e, p).final
    holders = [n for n, q in final.labels.items() if q == "q4"]
    cc = copycat_reconfig(e, holders[0], p)
    labels = replay(cc.execution, p).final.labels
    assert sum(q == "q4" for q in labels.values()) == len(holders) + 1


def test_copycat_of_empty_execution():
    init = Configuration(("n1", "n2"), frozenset(), {"n1": "q0", "n2": "q0"})
    for sem, copy in (("reconfigurable", copycat_reconfig), ("lossy", copycat_lossy)):
        cc = copy(Execution(sem, init), "n1", PROTOCOL)
        assert cc.execution.steps == () and cc.execution.initial.labels[cc.fresh] == "q0"


def test_copycat_lossy_on_five_node_run():
    e = lossy_five_nodes()
    cc, _, after = _check_copycat(e, "C", PROTOCOL, copycat_lossy)
    assert after.size == 6
    assert after.final.labels[cc.fresh] == "smiley"
    assert after.real_active_length[cc.fresh] == 0
    assert set(cc.execution.initial.neighbours(cc.fresh)) == set(e.initial.neighbours("C"))


def test_copycat_lossy_of_a_broadcaster_only_loses():
    e = lossy_five_nodes()
    cc, before, after = _check_copycat(e, "A", PROTOCOL, copycat_lossy)
    assert after.real_active_length[cc.fresh] == 0
    assert after.active_length[cc.fresh] == before.active_length["A"] == 1


def test_copycat_rejects_bad_input():
    with pytest.raises(Exception):
        copycat_reconfig(lossy_five_nodes(), "A")
    with pytest.raises(Exception):
        copycat_lossy(lossy_five_nodes(), "Z")


def test_running_example_witnesses():
    w = synthesize_witness(PROTOCOL, TARGET, "reconfigurable")
    s = w.summary(PROTOCOL)
    assert s["size"] == 13 <= 15
    assert set(s["covered_states"]) == set(PROTOCOL.states)
    assert s["max_alen"] <= 7
    lw = synthesize_witness(PROTOCOL, TARGET, "lossy")
    ls = lw.summary(PROTOCOL)
    assert ls["size"] == 13 and ls["max_real_alen"] <= 1
    assert set(lw.representatives) == set(PROTOCOL.states)


def test_chain_example_lossy_witness_has_ten_nodes():
    p, f = chain_example()
    assert saturate(p).final_counter == 10
    w = synthesize_witness(p, f, "lossy")
    m = replay(w.execution, p)
    assert m.size == 10
    assert set(w.representatives) == {f"q{i}" for i in range(7)}
    for q, n in w.representatives.items():
        assert m.final.labels[n] == q and m.real_active_length[n] == 0


def test_target_already_initial_gives_empty_execution():
    for synth in (synthesize_reconfig_witness, synthesize_lossy_witness):
        e = synth(PROTOCOL, ["q0"], stop_at_target=True)
        assert e.steps == () and e.size == 1 and e.initial.edges == frozenset()


def test_stop_at_target_is_a_prefix_of_the_saturation():
    p, f = gen_lower_bound(2)
    e = synthesize_reconfig_witness(p, ["q1"], stop_at_target=True)
    assert replay(e, p).final.label_set() == {"q0", "q1"}


def test_not_coverable():
    bare = PROTOCOL.without_transitions()
    for synth in (synthesize_reconfig_witness, synthesize_lossy_witness):
        with pytest.raises(NotCoverable):
            synth(bare, TARGET)
    with pytest.raises(ValueError):
        synthesize_witness(PROTOCOL, TARGET, "static")


def test_separation_family_lossy_witness_respects_lower_bound():
    p, f = gen_succinctness(3)
    e = synthesize_lossy_witness(p, f)
    assert e.size >= 4
    assert replay(e, p).covers(f)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_witness_invariants(seed):
    p = random_protocol(random.Random(seed))
    t = saturate(p)
    nq = len(p.states)
    for sem in (Semantics.RECONFIGURABLE, Semantics.LOSSY):
        w = synthesize_witness(p, None, sem)
        m = replay(w.execution, p)
        if sem is Semantics.RECONFIGURABLE:
            assert m.final.label_set() == set(t.final)
        assert m.size == t.final_counter <= 2 * nq - len(p.init)
        assert m.max_active_length <= t.m
        assert m.length <= t.final_counter * t.m <= 2 * nq * nq
        if sem is Semantics.LOSSY:
            assert m.max_real_active_length <= 1
            assert all(c.edges == w.execution.initial.edges for c in configurations(w.execution))
            assert set(w.representatives) == set(t.final)
            assert all(m.final.labels[n] == q for q, n in w.representatives.items())
            r = lossy_to_reconfig(w.execution, p)
            assert replay(r, p).final.labels == m.final.labels


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["reconfigurable", "lossy"]))
def test_copycat_properties_on_random_walks(seed, sem):
    rng = random.Random(seed)
    p = random_protocol(rng)
    sem = Semantics.parse(sem)
    e = _random_walk(p, sem, rng, rng.randint(1, 4), rng.randint(0, 8))
    src = rng.choice(e.initial.nodes)
    copy = copycat_reconfig if sem is Semantics.RECONFIGURABLE else copycat_lossy
    cc, before, after = _check_copycat(e, src, p, copy)
    if sem is Semantics.LOSSY:
        assert after.real_active_length[cc.fresh] == 0
        for n in e.initial.nodes:
            assert after.real_active_length[n] == before.real_active_length[n]
