"""Shared invariant checkers used by unit and acceptance tests."""

from meshtcp.engine import TraceKind

LEGAL_PHASE_EDGES = {
    ("SS", "CA"),
    ("SS", "FRR"),
    ("CA", "FRR"),
    ("FRR", "CA"),
    ("CA", "SS"),
    ("FRR", "SS"),
}

TERMINAL_KINDS = (TraceKind.DELIVER, TraceKind.DROP_WIRELESS, TraceKind.DROP_QUEUE)


def check_phase_edges(trace, flow_id=0):
    """Every recorded phase transition must be a legal edge from SS."""
    phase = "SS"
    for r in trace:
        if r.kind is TraceKind.PHASE_CHANGE and r.flow_id == flow_id:
            assert (phase, r.value) in LEGAL_PHASE_EDGES, (
                f"illegal phase edge {phase}->{r.value} at t={r.time}"
            )
            phase = r.value


def check_cwnd_positive(trace, flow_id=0):
    for r in trace:
        if r.kind is TraceKind.CWND_SAMPLE and r.flow_id == flow_id:
            assert r.value >= 1, f"cwnd {r.value} below 1 at t={r.time}"


def check_window_discipline(trace, flow_id=0):
    """Replay the trace: every new data send must fit inside the window
    that was in force at that instant."""
    cwnd = 1
    last_ack = 0
    for r in trace:
        if r.flow_id != flow_id:
            continue
        if r.kind is TraceKind.CWND_SAMPLE:
            cwnd = r.value
        elif r.kind is TraceKind.DELIVER and r.value == "ack":
            last_ack = max(last_ack, r.seq)
        elif r.kind is TraceKind.SEND and r.value == "data":
            outstanding = r.seq + 1 - last_ack
            assert outstanding <= cwnd, (
                f"window violated at t={r.time}: seq={r.seq} "
                f"last_ack={last_ack} cwnd={cwnd}"
            )


def check_conservation(world, trace, flow_id=0):
    """Originated segments = terminal records + still-in-flight count."""
    sends = terminal = 0
    for r in trace:
        if r.flow_id != flow_id:
            continue
        if r.kind in (TraceKind.SEND, TraceKind.RETX):
            sends += 1
        elif r.kind in TERMINAL_KINDS:
            terminal += 1
    balance = sends - terminal
    assert balance >= 0, f"more terminals ({terminal}) than sends ({sends})"
    assert balance == world.in_flight(flow_id), (
        f"trace balance {balance} != in-flight counter {world.in_flight(flow_id)}"
    )


def check_group_exclusivity(world):
    """No two transmissions within one interference group may overlap."""
    by_group = {}
    for group, start, end in world.net.tx_log:
        by_group.setdefault(group, []).append((start, end))
    for group, intervals in by_group.items():
        intervals.sort()
        for (s1, e1), (s2, e2) in zip(intervals, intervals[1:]):
            assert s2 >= e1 - 1e-12, (
                f"group {group}: transmission [{s2},{e2}] overlaps [{s1},{e1}]"
            )
