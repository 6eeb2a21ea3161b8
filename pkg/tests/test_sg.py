import io

import pytest

from adaptivecc.sg import (
    MalformedHistoryError,
    ScheduleEvent,
    build_serialization_graph,
    find_cycle,
    read_trace_csv,
    write_trace_csv,
)


def ev(time, txn, op, item="", detail=""):
    return ScheduleEvent(time, txn, op, item, detail)


def incompatible_two_txn_history(commit_both):
    """Txn 1 reads o then p; txn 2 reads p and o, overwrites o and commits
    first; txn 1 then writes p.  Committing txn 1 as well would put opposite
    orders into the optimistic and the locking class."""
    events = [
        ev(0, 1, "r", "o", "v1@O"),
        ev(1, 2, "r", "p", "v1@P"),
        ev(2, 2, "r", "o", "v1@O"),
        ev(3, 2, "w", "o", "v2@O"),
        ev(3, 2, "c"),
        ev(4, 1, "r", "p", "v1@P"),
        ev(5, 1, "w", "p", "v2@P"),
    ]
    if commit_both:
        events.append(ev(5, 1, "c"))
    else:
        events.append(ev(5, 1, "a", "", "validation"))
    return events


def test_forced_double_commit_is_cyclic():
    graph = build_serialization_graph(incompatible_two_txn_history(commit_both=True))
    assert graph.nodes == {1, 2}
    kinds = {(e.src, e.dst, e.item) for e in graph.edges}
    assert (1, 2, "o") in kinds
    assert (2, 1, "p") in kinds
    cycle = find_cycle(graph)
    assert cycle is not None
    assert set(cycle) == {1, 2}


def test_validation_abort_breaks_the_cycle():
    graph = build_serialization_graph(incompatible_two_txn_history(commit_both=False))
    assert graph.nodes == {2}
    assert find_cycle(graph) is None


def test_empty_history():
    graph = build_serialization_graph([])
    assert graph.nodes == set()
    assert find_cycle(graph) is None


def test_unterminated_txn_rejected():
    with pytest.raises(MalformedHistoryError):
        build_serialization_graph([ev(0, 1, "r", "x", "v1@O")])


def test_reconciled_classes_contribute_no_edges():
    events = [
        ev(0, 1, "r", "acct", "v1@R"),
        ev(1, 2, "r", "acct", "v1@R"),
        ev(2, 1, "w", "acct", "v2@R"),
        ev(2, 1, "c"),
        ev(3, 2, "w", "acct", "v3@R"),
        ev(3, 2, "c"),
    ]
    graph = build_serialization_graph(events)
    assert graph.edges == set()


def test_two_reads_never_conflict():
    events = [
        ev(0, 1, "r", "x", "v1@O"),
        ev(1, 2, "r", "x", "v1@O"),
        ev(2, 1, "c"),
        ev(3, 2, "c"),
    ]
    assert build_serialization_graph(events).edges == set()


def test_classes_argument_for_unannotated_traces():
    from adaptivecc.store import CCClass

    events = [ev(0, 1, "r", "x", "v1"), ev(1, 2, "w", "x", "v2"), ev(1, 2, "c"), ev(2, 1, "c")]
    graph = build_serialization_graph(events, classes={"x": CCClass.O})
    assert {(e.src, e.dst) for e in graph.edges} == {(1, 2)}
    with pytest.raises(MalformedHistoryError):
        build_serialization_graph(events)


def test_trace_csv_roundtrip():
    events = incompatible_two_txn_history(commit_both=False)
    buffer = io.StringIO()
    write_trace_csv(events, buffer)
    buffer.seek(0)
    assert read_trace_csv(buffer) == events
