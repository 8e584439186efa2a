import math

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from oracles import cwfr_choice, pwfr_replay
from splitflow.core import (
    Call,
    CallClose,
    DuplicateCall,
    IncompatibleTraffic,
    Packet,
    T,
    U,
    UnknownCall,
    normalize_weights,
    validate_weights,
)
from splitflow.splitters import (
    CwfrSplitter,
    PwfrSplitter,
    RrMode,
    SplitterKind,
    make_splitter,
    select_max,
    tiebreak_order,
)
from splitflow.traffic import TrafficConfig, UniformInt, generate


def unit_packets(n, cls=U):
    return [Packet(k, 1, cls) for k in range(1, n + 1)]


def route_all(splitter, packets):
    return [splitter.route_packet(p) for p in packets]


weight_vectors = st.lists(st.integers(0, 20), min_size=1, max_size=6).filter(any).map(normalize_weights)


# --- construction -----------------------------------------------------------


def test_fresh_pwfr_has_zero_residuals():
    s = make_splitter(SplitterKind.PWFR, validate_weights([0.5, 0.5]))
    assert s.residuals == [0.0, 0.0]


def test_cyclic_pgrr_starts_at_path_one():
    s = make_splitter("pgrr", validate_weights([0.3, 0.7]), RrMode.PURE_CYCLIC)
    assert s.route_packet(Packet(1, 99, U)) == 1


def test_single_path_mwfr():
    s = make_splitter(SplitterKind.MWFR, validate_weights([1.0]))
    assert s.route_packet(Packet(1, 40, U)) == 1
    assert s.open_call(Call(1, 5.0)) == 1
    assert s.route_packet(Packet(2, 40, T, 1)) == 1


# --- PWFR -------------------------------------------------------------------


def test_pwfr_equal_weights_alternate():
    w = validate_weights([0.5, 0.5])
    expected, _ = pwfr_replay(w, [1, 1, 1, 1])
    assert expected == [1, 2, 1, 2]
    assert route_all(PwfrSplitter(w), unit_packets(4)) == expected


def test_pwfr_three_to_one():
    w = validate_weights([0.75, 0.25])
    expected, history = pwfr_replay(w, [1, 1, 1, 1])
    assert expected == [1, 1, 2, 1]
    assert history[-1] == [0, 0]
    s = PwfrSplitter(w)
    assert route_all(s, unit_packets(4)) == expected
    assert s.residuals == pytest.approx([0.0, 0.0], abs=1e-12)


def test_pwfr_never_uses_zero_weight_path():
    s = PwfrSplitter(validate_weights([0.5, 0.5, 0.0]))
    sizes = [1500, 64, 700, 1, 1, 1499, 64, 900] * 50
    paths = route_all(s, [Packet(k, x, U) for k, x in enumerate(sizes, 1)])
    assert 3 not in paths


@settings(max_examples=60, deadline=None)
@given(weight_vectors, st.lists(st.integers(1, 1500), min_size=1, max_size=200))
def test_pwfr_matches_exact_oracle(w, sizes):
    expected, history = pwfr_replay(w, sizes)
    s = PwfrSplitter(w)
    for k, size in enumerate(sizes):
        assert s.route_packet(Packet(k + 1, size, U)) == expected[k]
        assert s.residuals == pytest.approx([float(x) for x in history[k]], abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(weight_vectors, st.lists(st.integers(1, 1500), min_size=1, max_size=300))
def test_pwfr_conservation_and_bound(w, sizes):
    s = PwfrSplitter(w)
    for k, size in enumerate(sizes, 1):
        s.route_packet(Packet(k, size, U))
        assert abs(math.fsum(s.residuals)) <= 1e-6
        assert min(s.residuals) >= -s.max_size


# --- tie-breaking -------------------------------------------------------------


@given(st.lists(st.integers(0, 5), min_size=1, max_size=6).filter(any), st.integers(-3, 3))
def test_tiebreak_prefers_heavier_then_lower_id(raw, level):
    w = normalize_weights(raw)
    values = [float(level)] * w.n
    j = select_max(values, tiebreak_order(w))
    heaviest = max(w.weights)
    assert w.weights[j] == heaviest
    assert j == w.weights.index(heaviest)


def test_tiebreak_strict_maximum_wins():
    w = validate_weights([0.7, 0.2, 0.1])
    assert select_max([0.0, 0.0, 0.5], tiebreak_order(w)) == 2
    assert select_max([0.1, 0.3, 0.3], tiebreak_order(w)) == 1


# --- CWFR -------------------------------------------------------------------


def test_cwfr_first_two_calls():
    w = validate_weights([0.5, 0.5])
    s = CwfrSplitter(w)
    path, dev = cwfr_choice(w, [0, 0], 10)
    assert (path, dev) == (1, [5, 5])
    assert s.open_call(Call(1, 10.0)) == 1
    assert s.reserved == [10.0, 0.0]
    path, dev = cwfr_choice(w, [10, 0], 10)
    assert (path, dev) == (2, [0, 10])
    assert s.open_call(Call(2, 10.0)) == 2
    assert s.reserved == [10.0, 10.0]


def test_cwfr_all_weight_on_path_one():
    s = CwfrSplitter(validate_weights([1.0, 0.0, 0.0]))
    assert [s.open_call(Call(i, float(q))) for i, q in enumerate([3, 50, 1, 7], 1)] == [1, 1, 1, 1]


def test_cwfr_open_close_bookkeeping():
    s = CwfrSplitter(validate_weights([0.5, 0.5]))
    s.open_call(Call(1, 10.0))
    s.close_call(1)
    assert s.reserved == [0.0, 0.0]
    s.open_call(Call(1, 10.0))
    s.open_call(Call(2, 4.0))
    s.close_call(1)
    assert s.reserved == [0.0, 4.0]
    assert s.assignments == {2: 2}
    with pytest.raises(UnknownCall):
        s.close_call(99)
    with pytest.raises(DuplicateCall):
        s.open_call(Call(2, 1.0))


def test_cwfr_packet_affinity():
    s = CwfrSplitter(validate_weights([0.5, 0.5]))
    s.open_call(Call(1, 10.0))
    s.open_call(Call(2, 10.0))
    assert [s.route_packet(Packet(k, 100, T, 2)) for k in range(1, 4)] == [2, 2, 2]
    got = [s.route_packet(Packet(k, 10, T, cid)) for k, cid in enumerate([1, 2, 2, 1, 2], 4)]
    assert got == [1, 2, 2, 1, 2]
    s.close_call(2)
    with pytest.raises(UnknownCall):
        s.route_packet(Packet(20, 10, T, 2))
    with pytest.raises(IncompatibleTraffic):
        s.route_packet(Packet(21, 10, U))


call_ops = st.lists(st.tuples(st.booleans(), st.floats(0.01, 1000)), min_size=1, max_size=80)


@settings(max_examples=60, deadline=None)
@given(weight_vectors, call_ops)
def test_cwfr_matches_oracle_and_conserves(w, ops):
    s = CwfrSplitter(w)
    open_q: dict[int, float] = {}
    next_id = 1
    for is_open, q in ops:
        if is_open or not open_q:
            path, dev = cwfr_choice(w, s.reserved, q)
            got = s.open_call(Call(next_id, q))
            assert got == path
            assert math.fsum(s.last_deviation) == pytest.approx(q, abs=1e-6)
            open_q[next_id] = q
            next_id += 1
        else:
            cid = min(open_q)
            s.close_call(cid)
            del open_q[cid]
        assert all(x >= 0 for x in s.reserved)
        assert math.fsum(s.reserved) == pytest.approx(math.fsum(open_q.values()), abs=1e-6)
        assert set(s.assignments) == set(open_q)


# --- round robin ------------------------------------------------------------


def test_pgrr_cyclic_sequence():
    s = make_splitter("pgrr", validate_weights([0.2, 0.3, 0.5]), "cyclic")
    assert route_all(s, [Packet(k, 10 * k, U) for k in range(1, 6)]) == [1, 2, 3, 1, 2]


def test_pgrr_weighted_count():
    w = validate_weights([0.75, 0.25])
    expected, _ = pwfr_replay(w, [1] * 4)
    s = make_splitter("pgrr", w, "weighted")
    assert route_all(s, [Packet(k, 1000 * k, U) for k in range(1, 5)]) == expected == [1, 1, 2, 1]


@pytest.mark.parametrize("mode", list(RrMode))
def test_single_path_round_robin(mode):
    s = make_splitter("pgrr", validate_weights([1.0]), mode)
    assert set(route_all(s, [Packet(k, 5, U) for k in range(1, 10)])) == {1}


def test_cgrr_cyclic_calls():
    s = make_splitter("cgrr", validate_weights([0.2, 0.3, 0.5]), "cyclic")
    assert [s.open_call(Call(i, 1.0)) for i in (1, 2, 3)] == [1, 2, 3]
    assert [s.route_packet(Packet(k, 9, T, cid)) for k, cid in enumerate([3, 1, 2, 3], 1)] == [3, 1, 2, 3]


def test_cgrr_weighted_count_ignores_bandwidth():
    w = validate_weights([0.75, 0.25])
    expected, _ = pwfr_replay(w, [1] * 4)
    s = make_splitter("cgrr", w, "weighted")
    assert [s.open_call(Call(i, q)) for i, q in enumerate([1.0, 500.0, 0.1, 77.0], 1)] == expected


def test_cgrr_errors():
    s = make_splitter("cgrr", validate_weights([0.5, 0.5]))
    with pytest.raises(UnknownCall):
        s.route_packet(Packet(1, 9, T, 4))
    s.open_call(Call(4, 1.0))
    with pytest.raises(DuplicateCall):
        s.open_call(Call(4, 1.0))
    with pytest.raises(IncompatibleTraffic):
        s.route_packet(Packet(2, 9, U))
    s.close_call(4)
    with pytest.raises(UnknownCall):
        s.close_call(4)


@settings(max_examples=40, deadline=None)
@given(weight_vectors, st.integers(1, 400))
def test_weighted_pgrr_equals_pwfr_on_unit_packets(w, n):
    packets = unit_packets(n)
    assert route_all(make_splitter("pgrr", w), packets) == route_all(make_splitter("pwfr", w), packets)


# --- mixed dispatch -----------------------------------------------------------


def small_trace(seed, mix, n=600):
    cfg = TrafficConfig(class_mix=mix, n_packets=n, seed=seed, max_concurrent_calls=6,
                        packets_per_call_dist=UniformInt(2, 12))
    return generate(cfg)


def decisions(splitter, events):
    out = []
    for ev in events:
        path = splitter.handle(ev)
        if path is not None:
            out.append((ev.seq, path))
    return out


@pytest.mark.parametrize("mixed, packet_kind, call_kind", [("mwfr", "pwfr", "cwfr"), ("mrr", "pgrr", "cgrr")])
def test_mixed_reduces_to_inner_splitters(mixed, packet_kind, call_kind):
    w = validate_weights([0.2, 0.5, 0.3])
    u_trace, t_trace = small_trace(3, 1.0), small_trace(3, 0.0)
    assert decisions(make_splitter(mixed, w), u_trace.events) == decisions(make_splitter(packet_kind, w), u_trace.events)
    assert decisions(make_splitter(mixed, w), t_trace.events) == decisions(make_splitter(call_kind, w), t_trace.events)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), weight_vectors.filter(lambda w: w.n >= 2))
def test_mixed_matches_subtrace_replay(seed, w):
    trace = small_trace(seed, 0.5)
    for mixed, packet_kind, call_kind in (("mwfr", "pwfr", "cwfr"), ("mrr", "pgrr", "cgrr")):
        got = dict(decisions(make_splitter(mixed, w), trace.events))
        u_events = [e for e in trace.events if type(e) is Packet and e.cls is U]
        t_events = [e for e in trace.events if not (type(e) is Packet and e.cls is U)]
        expected = dict(decisions(make_splitter(packet_kind, w), u_events))
        expected.update(decisions(make_splitter(call_kind, w), t_events))
        assert got == expected


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(list(SplitterKind)))
def test_replay_is_deterministic(seed, kind):
    w = validate_weights([0.3, 0.3, 0.4])
    trace = small_trace(seed, 0.5 if kind not in (SplitterKind.CWFR, SplitterKind.CGRR) else 0.0)
    assert decisions(make_splitter(kind, w), trace.events) == decisions(make_splitter(kind, w), trace.events)


def test_close_event_goes_to_call_splitter():
    s = make_splitter("mwfr", validate_weights([0.5, 0.5]))
    assert s.handle(Call(1, 3.0)) is None
    assert s.handle(Packet(1, 10, T, 1)) == 1
    assert s.handle(CallClose(1)) is None
    with pytest.raises(UnknownCall):
        s.handle(Packet(2, 10, T, 1))
