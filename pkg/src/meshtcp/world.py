"""One simulated run: a chain network carrying TCP flows.

The world owns the clock, the event queue and the trace, dispatches events
to the network and the endpoints, and records window/phase samples whenever
the congestion state changes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cc import CcPhase, Flavor
from .endpoint import (
    DEFAULT_RECEIVER_WINDOW,
    DEFAULT_RTO_MAX_S,
    DEFAULT_RTO_MIN_S,
    ReceiverEndpoint,
    Segment,
    SegmentKind,
    SenderEndpoint,
)
from .engine import EventKind, EventQueue, RunTrace, TraceKind
from .errors import ConfigError, ContractError
from .mesh import (
    DEFAULT_ACK_BYTES,
    DEFAULT_MSS_BYTES,
    ChainTopology,
    MeshNetwork,
    ScriptedDrops,
)


@dataclass(frozen=True)
class FlowConfig:
    """One unidirectional flow from node 1 over ``hops`` links."""

    flavor: Flavor
    hops: int
    app_limit: int | None = None


@dataclass
class _Flow:
    flow_id: int
    src: int
    dst: int
    sender: SenderEndpoint
    receiver: ReceiverEndpoint


class MeshWorld:
    """A fully wired simulation, ready for ``engine.run_until``."""

    def __init__(
        self,
        topology: ChainTopology,
        flows: list[FlowConfig],
        *,
        seed: int,
        mss_bytes: int = DEFAULT_MSS_BYTES,
        ack_bytes: int = DEFAULT_ACK_BYTES,
        rto_min: float = DEFAULT_RTO_MIN_S,
        rto_max: float = DEFAULT_RTO_MAX_S,
        receiver_window: int = DEFAULT_RECEIVER_WINDOW,
        scripted: ScriptedDrops | None = None,
    ) -> None:
        self.clock = 0.0
        self.events = EventQueue()
        self.trace = RunTrace()
        self.net = MeshNetwork(
            topology, events=self.events, trace=self.trace, seed=seed, scripted=scripted
        )
        self.flows: dict[int, _Flow] = {}
        self._scheduled_epoch: dict[int, int] = {}
        self._last_window: dict[int, tuple[int, int]] = {}
        self._last_phase: dict[int, CcPhase] = {}

        for flow_id, config in enumerate(flows):
            if config.hops < 1 or config.hops > topology.n_hops:
                raise ConfigError(
                    f"flow needs 1..{topology.n_hops} hops, got {config.hops}"
                )
            src, dst = 1, 1 + config.hops
            sender = SenderEndpoint(
                flow_id,
                config.flavor,
                mss_bytes,
                src=src,
                dst=dst,
                app_limit=config.app_limit,
                receiver_window=receiver_window,
                rto_min=rto_min,
                rto_max=rto_max,
                trace=self.trace,
            )
            receiver = ReceiverEndpoint(
                flow_id,
                node=dst,
                peer=src,
                ack_bytes=ack_bytes,
                sack_enabled=config.flavor is Flavor.SACK,
            )
            self.flows[flow_id] = _Flow(flow_id, src, dst, sender, receiver)
            self.net.carried[flow_id] = 0
            self.events.push(0.0, EventKind.APP_TICK, flow_id)

    def in_flight(self, flow_id: int) -> int:
        """Segments of this flow originated but not yet delivered/dropped."""
        return self.net.carried[flow_id]

    def handle(self, time: float, kind: EventKind, payload) -> None:
        if kind is EventKind.SEGMENT_ARRIVAL:
            node, seg = payload
            self._on_arrival(time, node, seg)
        elif kind is EventKind.CHANNEL_FREE:
            self.net.on_channel_free(payload, time)
        elif kind is EventKind.TIMER_EXPIRY:
            self._on_timer(time, *payload)
        elif kind is EventKind.APP_TICK:
            self._on_app_tick(time, payload)
        elif kind is EventKind.SAMPLE_TICK:
            pass
        else:  # pragma: no cover - enum is closed
            raise ContractError(f"unknown event kind {kind}")

    def _on_arrival(self, time: float, node: int, seg: Segment) -> None:
        if seg.dst != node:
            self.net.forward(node, seg, time)
            return
        flow = self.flows[seg.flow_id]
        self.trace.add(time, TraceKind.DELIVER, flow.flow_id, seg.seq, seg.kind.value)
        self.net.carried[flow.flow_id] -= 1
        if seg.kind is SegmentKind.DATA:
            ack = flow.receiver.on_data(seg, time)
            if ack is not None:
                self.trace.add(time, TraceKind.SEND, flow.flow_id, ack.seq, "ack")
                self.net.carried[flow.flow_id] += 1
                self.net.forward(ack.src, ack, time)
        else:
            emissions = flow.sender.on_ack_segment(seg, time)
            self._record_cc(flow, time)
            self._originate(flow, emissions, time)
            self._sync_timer(flow)

    def _on_timer(self, time: float, flow_id: int, epoch: int) -> None:
        flow = self.flows[flow_id]
        if epoch != flow.sender.timer_epoch:
            return  # superseded timer
        emissions = flow.sender.on_rto(time)
        self._record_cc(flow, time)
        self._originate(flow, emissions, time)
        self._sync_timer(flow)

    def _on_app_tick(self, time: float, flow_id: int) -> None:
        flow = self.flows[flow_id]
        self._record_cc(flow, time, force=True)
        emissions = flow.sender.fill_window(time)
        self._originate(flow, emissions, time)
        self._sync_timer(flow)

    def _originate(self, flow: _Flow, segments: list[Segment], time: float) -> None:
        for seg in segments:
            kind = TraceKind.RETX if seg.retx else TraceKind.SEND
            self.trace.add(time, kind, flow.flow_id, seg.seq, seg.kind.value)
            self.net.carried[flow.flow_id] += 1
            self.net.forward(seg.src, seg, time)

    def _sync_timer(self, flow: _Flow) -> None:
        sender = flow.sender
        if (
            sender.rto_deadline is not None
            and self._scheduled_epoch.get(flow.flow_id) != sender.timer_epoch
        ):
            self.events.push(
                sender.rto_deadline,
                EventKind.TIMER_EXPIRY,
                (flow.flow_id, sender.timer_epoch),
            )
            self._scheduled_epoch[flow.flow_id] = sender.timer_epoch

    def _record_cc(self, flow: _Flow, time: float, force: bool = False) -> None:
        cc = flow.sender.cc
        window = (cc.cwnd, cc.ssthresh)
        if force or window != self._last_window.get(flow.flow_id):
            self.trace.add(
                time, TraceKind.CWND_SAMPLE, flow.flow_id, cc.ssthresh, cc.cwnd
            )
            self._last_window[flow.flow_id] = window
        if cc.phase != self._last_phase.get(flow.flow_id, CcPhase.SS):
            self.trace.add(
                time, TraceKind.PHASE_CHANGE, flow.flow_id, 0, cc.phase.value
            )
            self._last_phase[flow.flow_id] = cc.phase
