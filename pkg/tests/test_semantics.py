from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from bcastnet.semantics import (
    Configuration,
    Execution,
    IllegalExecution,
    MalformedEdges,
    NotEnabled,
    Semantics,
    StepDescriptor,
    apply_step,
    configurations,
    dumps_execution,
    enabled_steps,
    execution_from_json,
    execution_to_json,
    is_covering,
    loads_execution,
    lossy_to_reconfig,
    make_edges,
    replay,
)

from corpus import random_protocol
from sample_runs import PROTOCOL, TARGET, lossy_five_nodes, reconfig_three_nodes, static_five_nodes, t


def three(edges=(), labels=None):
    return Configuration(("n1", "n2", "n3"), make_edges(edges), labels or {n: "q0" for n in ("n1", "n2", "n3")})


def test_static_step_relabels_sender_and_neighbours():
    c = three([("n1", "n2")])
    out = apply_step(c, StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q0 ?a q1")}), "static")
    assert out.labels == {"n1": "q0", "n2": "q1", "n3": "q0"}
    assert out.edges == c.edges


def test_lost_step_only_moves_sender():
    c = three([("n1", "n2")])
    out = apply_step(c, StepDescriptor("n1", t("q0 !a q0"), {}, lost=True), "lossy")
    assert out.labels == c.labels and out.edges == c.edges


def test_reconfigurable_step_rewires_after_broadcast():
    c = three()
    out = apply_step(c, StepDescriptor("n1", t("q0 !a q0"), {}, new_edges=make_edges([("n1", "n2")])),
                     "reconfigurable")
    assert out.labels == c.labels
    assert out.edges == make_edges([("n1", "n2")])


@pytest.mark.parametrize("step, sem, fragment", [
    (StepDescriptor("n1", t("q1 !b1 q2"), {"n2": t("q0 ?b1 r1")}), "static", "not 'q1'"),
    (StepDescriptor("n1", t("q0 !a q0"), {}), "static", "missing receptions for n2"),
    (StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q0 ?a q1"), "n3": t("q0 ?a q1")}), "static", "non-neighbours n3"),
    (StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q1 ?a q1")}), "static", "starts in 'q1'"),
    (StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q0 ?b1 r1")}), "static", "does not receive 'a'"),
    (StepDescriptor("n1", t("q0 !a q0"), {}, lost=True), "static", "only lossy"),
    (StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q0 ?a q1")}, new_edges=frozenset()), "lossy", "only reconfigurable"),
    (StepDescriptor("n1", t("q0 ?a q1"), {"n2": t("q0 ?a q1")}), "static", "not a broadcast"),
    (StepDescriptor("n9", t("q0 !a q0"), {}), "static", "unknown sender"),
    (StepDescriptor("n1", t("q0 !b2 q0"), {"n2": t("q0 ?b2 bot")}), "static", "not a protocol transition"),
])
def test_apply_step_rejects_disabled_steps(step, sem, fragment):
    with pytest.raises(NotEnabled, match=fragment):
        apply_step(three([("n1", "n2")]), step, sem, PROTOCOL)


def test_edges_are_irreflexive():
    with pytest.raises(MalformedEdges):
        make_edges([("n1", "n1")])
    with pytest.raises(MalformedEdges):
        make_edges([("n1", "n4")], nodes=("n1", "n2"))
    with pytest.raises(MalformedEdges):
        StepDescriptor("n1", t("q0 !a q0"), {}, new_edges=[("n2", "n2")])


def test_enabled_steps_examples():
    single = Configuration(("n1",), frozenset(), {"n1": "q1"})
    for sem in Semantics:
        assert enabled_steps(single, sem, PROTOCOL) == [StepDescriptor("n1", t("q1 !b1 q2"), {})]
    assert enabled_steps(Configuration(("n1",), frozenset(), {"n1": "smiley"}), "static", PROTOCOL) == []
    pair = Configuration(("n1", "n2"), make_edges([("n1", "n2")]), {"n1": "q0", "n2": "q0"})
    assert enabled_steps(pair, "static", PROTOCOL) == [
        StepDescriptor("n1", t("q0 !a q0"), {"n2": t("q0 ?a q1")}),
        StepDescriptor("n2", t("q0 !a q0"), {"n1": t("q0 ?a q1")}),
    ]
    lossy = enabled_steps(pair, "lossy", PROTOCOL)
    assert [s.lost for s in lossy] == [False, True, False, True]


def test_enabled_steps_expand_reception_choices():
    c = Configuration(("n1", "n2", "n3"), make_edges([("n1", "n2"), ("n1", "n3")]),
                      {"n1": "q1", "n2": "q0", "n3": "q0"})
    steps = [s for s in enabled_steps(c, "static", PROTOCOL) if s.sender == "n1"]
    # q0 receives b1 into r1 or bot, independently at each neighbour
    assert len(steps) == 4
    assert {s.receptions["n2"].target for s in steps} == {"r1", "bot"}


def test_three_node_reconfigurable_run():
    m = replay(reconfig_three_nodes(), PROTOCOL)
    assert (m.size, m.length) == (3, 4)
    assert m.final.labels == {"A": "q0", "B": "q4", "C": "smiley"}
    assert m.active_length == {"A": 2, "B": 2, "C": 0}
    assert m.real_active_length == m.active_length
    assert is_covering(m, TARGET)


def test_lossy_five_node_run():
    e = lossy_five_nodes()
    m = replay(e, PROTOCOL)
    assert (m.size, m.length, m.lost_steps) == (5, 5, 1)
    assert m.active_length["E"] == 2 and m.real_active_length["E"] == 1
    assert m.covers(TARGET)
    assert all(c.edges == e.initial.edges for c in configurations(e))


def test_static_run_and_corrupted_step():
    e = static_five_nodes()
    m = replay(e, PROTOCOL)
    assert m.final.labels == {"A": "bot", "B": "q2", "C": "r1", "D": "bot", "E": "q2"}
    assert not m.covers(TARGET)
    last = e.steps[2]
    receptions = {n: r for n, r in last.receptions.items() if n != "D"}
    broken = Execution("static", e.initial, e.steps[:2] + (StepDescriptor("E", last.broadcast, receptions),))
    with pytest.raises(IllegalExecution) as info:
        replay(broken, PROTOCOL)
    assert info.value.step == 2
    assert "missing receptions for D" in str(info.value)


def test_replay_rejects_non_initial_start():
    c = three(labels={"n1": "q1", "n2": "q0", "n3": "q0"})
    with pytest.raises(IllegalExecution) as info:
        replay(Execution("static", c), PROTOCOL)
    assert info.value.step is None


def test_empty_execution_metrics():
    m = replay(Execution("static", three([("n1", "n2")])), PROTOCOL)
    assert m.length == 0 and set(m.active_length.values()) == {0}


def test_lossy_to_reconfig_on_lossy_run():
    e = lossy_five_nodes()
    r = lossy_to_reconfig(e, PROTOCOL)
    assert r.semantics is Semantics.RECONFIGURABLE
    m = replay(r, PROTOCOL)
    assert m.final.labels == replay(e, PROTOCOL).final.labels
    confs = configurations(r)
    for i, s in enumerate(e.steps):
        assert confs[i].edges == (frozenset() if s.lost else e.initial.edges)
    assert confs[-1].edges == e.initial.edges


def test_lossy_to_reconfig_without_losses_keeps_topology():
    e = lossy_five_nodes()
    e = Execution("lossy", e.initial, e.steps[:2])
    r = lossy_to_reconfig(e, PROTOCOL)
    assert all(s.new_edges is None for s in r.steps)
    assert r.initial.edges == e.initial.edges


def test_lossy_to_reconfig_all_lost():
    init = Configuration(("n1", "n2"), make_edges([("n1", "n2")]), {"n1": "q0", "n2": "q0"})
    e = Execution("lossy", init, [StepDescriptor("n1", t("q0 !a q0"), {}, lost=True)] * 3)
    r = lossy_to_reconfig(e, PROTOCOL)
    assert r.initial.edges == frozenset()
    assert [c.edges for c in configurations(r)][:-1] == [frozenset()] * 3
    assert replay(r, PROTOCOL).final.labels == init.labels


def test_lossy_to_reconfig_rejects_other_semantics():
    with pytest.raises(Exception):
        lossy_to_reconfig(reconfig_three_nodes())


@pytest.mark.parametrize("make", [reconfig_three_nodes, lossy_five_nodes, static_five_nodes])
def test_json_round_trip(make):
    e = make()
    doc = execution_to_json(e)
    assert execution_from_json(doc) == e
    text = dumps_execution(e)
    assert dumps_execution(loads_execution(text)) == text
    assert json.loads(text) == doc


def test_json_shape():
    doc = execution_to_json(lossy_five_nodes())
    assert set(doc) == {"semantics", "initial", "steps"}
    assert doc["initial"]["nodes"][0] == {"id": "A", "state": "q0"}
    lost = doc["steps"][2]
    assert lost == {"sender": "E", "bcast": ["q1", "!b1", "q2"], "lost": True, "recv": {}}
    assert "lost" not in doc["steps"][0]
    assert "new_edges" in execution_to_json(reconfig_three_nodes())["steps"][0]


def _random_walk(p, sem, rng, k, steps):
    nodes = tuple(f"n{i}" for i in range(1, k + 1))
    pairs = [(u, v) for i, u in enumerate(nodes) for v in nodes[i + 1:]]
    edges = make_edges([e for e in pairs if rng.random() < 0.5])
    c = Configuration(nodes, edges, {n: rng.choice(p.init) for n in nodes})
    init, out = c, []
    for _ in range(steps):
        options = enabled_steps(c, sem, p)
        if not options:
            break
        s = rng.choice(options)
        if sem is Semantics.RECONFIGURABLE and rng.random() < 0.5:
            s = StepDescriptor(s.sender, s.broadcast, s.receptions,
                               new_edges=make_edges([e for e in pairs if rng.random() < 0.5]))
        c = apply_step(c, s, sem, p)
        out.append(s)
    return Execution(sem, init, out)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Semantics)))
def test_random_walks_replay_and_round_trip(seed, sem):
    rng = random.Random(seed)
    p = random_protocol(rng)
    e = _random_walk(p, sem, rng, rng.randint(1, 4), rng.randint(0, 8))
    m = replay(e, p)
    confs = configurations(e)
    assert all(c.nodes == e.initial.nodes for c in confs)
    if sem is not Semantics.RECONFIGURABLE:
        assert all(c.edges == e.initial.edges for c in confs)
    assert all(m.real_active_length[n] <= m.active_length[n] for n in e.initial.nodes)
    assert loads_execution(dumps_execution(e)) == e
    if sem is Semantics.LOSSY:
        r = lossy_to_reconfig(e, p)
        assert replay(r, p).final.labels == m.final.labels
