"""Chain-topology wireless mesh.

Each hop is a shared medium carried by two directed links (data forward,
ACKs backward) with drop-tail FIFO queues. Links are partitioned into
interference groups of ``interference_range + 1`` consecutive hops; within
a group at most one transmission is on the air at a time and waiting links
are served in FIFO order. Wireless errors are a per-link Poisson process
of loss instants: a transmission is lost iff an instant lands inside it.
A scripted drop table can replace the stochastic model for reproducing
exact loss scenarios.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .endpoint import Segment, SegmentKind
from .engine import EventKind, EventQueue, RngStream, RunTrace, TraceKind
from .errors import ConfigError, ContractError

DEFAULT_BANDWIDTH_BPS = 2_000_000.0
DEFAULT_PROP_DELAY_S = 0.001
DEFAULT_QUEUE_CAPACITY = 50
DEFAULT_INTERFERENCE_RANGE = 2
DEFAULT_MSS_BYTES = 1460
DEFAULT_ACK_BYTES = 40


@dataclass(frozen=True)
class LinkModel:
    """Static per-hop parameters. ``loss_rate`` is the Poisson rate of
    wireless loss instants, per directed link, in events per second."""

    bandwidth_bps: float = DEFAULT_BANDWIDTH_BPS
    prop_delay_s: float = DEFAULT_PROP_DELAY_S
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    loss_rate: float = 0.0
    interference_range: int = DEFAULT_INTERFERENCE_RANGE

    def __post_init__(self) -> None:
        if self.bandwidth_bps <= 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth_bps}")
        if self.queue_capacity < 1:
            raise ConfigError(f"queue capacity must be >= 1, got {self.queue_capacity}")
        if self.loss_rate < 0:
            raise ConfigError(f"loss rate must be >= 0, got {self.loss_rate}")
        if self.interference_range < 0:
            raise ConfigError(
                f"interference range must be >= 0, got {self.interference_range}"
            )


@dataclass(frozen=True)
class ChainTopology:
    """Nodes 1..n in a line; hop h is the link between nodes h and h+1."""

    n_nodes: int
    links: tuple[LinkModel, ...]
    interference_range: int

    @property
    def n_hops(self) -> int:
        return self.n_nodes - 1

    def group_of(self, hop: int) -> int:
        return (hop - 1) // (self.interference_range + 1)

    @property
    def n_groups(self) -> int:
        return self.group_of(self.n_hops) + 1


def build_chain(
    n_nodes: int,
    link: LinkModel,
    per_hop_loss: tuple[float, ...] | None = None,
) -> ChainTopology:
    """Uniform chain of n_nodes; per_hop_loss overrides the loss rate of
    individual hops when the error model should not be uniform."""
    if n_nodes < 2:
        raise ConfigError(f"a chain needs at least 2 nodes, got {n_nodes}")
    models = []
    for hop in range(1, n_nodes):
        if per_hop_loss is not None:
            if len(per_hop_loss) != n_nodes - 1:
                raise ConfigError(
                    f"per_hop_loss needs {n_nodes - 1} entries, got {len(per_hop_loss)}"
                )
            models.append(
                LinkModel(
                    bandwidth_bps=link.bandwidth_bps,
                    prop_delay_s=link.prop_delay_s,
                    queue_capacity=link.queue_capacity,
                    loss_rate=per_hop_loss[hop - 1],
                    interference_range=link.interference_range,
                )
            )
        else:
            models.append(link)
    return ChainTopology(
        n_nodes=n_nodes,
        links=tuple(models),
        interference_range=link.interference_range,
    )


class LossProcess:
    """Poisson loss instants with exponentially distributed gaps.

    Instants are generated lazily in time order, so the instant sequence
    depends only on (seed, stream name), never on who is transmitting.
    """

    def __init__(self, stream: RngStream, rate: float) -> None:
        self.rate = rate
        self._stream = stream
        self._next: float | None = None

    def decide(self, start: float, tx_time: float) -> bool:
        if self.rate <= 0:
            return False
        if self._next is None:
            self._next = self._stream.exponential(self.rate)
        while self._next < start:
            self._next += self._stream.exponential(self.rate)
        return self._next < start + tx_time


@dataclass(frozen=True)
class DropDirective:
    """Drop the nth transmission (1-based) of data segment ``seq`` on hop
    ``hop`` (forward direction)."""

    hop: int
    seq: int
    nth: int

    def __post_init__(self) -> None:
        if self.hop < 1 or self.seq < 0 or self.nth < 1:
            raise ConfigError(f"bad drop directive {self.hop}:{self.seq}:{self.nth}")


class ScriptedDrops:
    """Explicit drop table; when present it replaces the stochastic model."""

    def __init__(self, directives: tuple[DropDirective, ...]) -> None:
        self._wanted = {(d.hop, d.seq, d.nth) for d in directives}
        self._counts: dict[tuple[int, int], int] = {}

    def decide(self, hop: int, forward: bool, seg: Segment) -> bool:
        if seg.kind is not SegmentKind.DATA or not forward:
            return False
        key = (hop, seg.seq)
        n = self._counts.get(key, 0) + 1
        self._counts[key] = n
        return (hop, seg.seq, n) in self._wanted


_IDLE, _WAITING, _SENDING = 0, 1, 2


class _Link:
    """Runtime state of one directed link."""

    __slots__ = ("src", "dst", "hop", "forward", "model", "queue", "state", "group", "loss")

    def __init__(self, src, dst, hop, forward, model, group, loss):
        self.src = src
        self.dst = dst
        self.hop = hop
        self.forward = forward
        self.model = model
        self.group = group
        self.loss = loss
        self.queue: deque[Segment] = deque()
        self.state = _IDLE


class _Group:
    """One interference group: a single shared channel."""

    __slots__ = ("index", "busy_link", "fifo")

    def __init__(self, index):
        self.index = index
        self.busy_link: _Link | None = None
        self.fifo: deque[_Link] = deque()


class MeshNetwork:
    """Event-driven transport fabric over a ChainTopology.

    Owns link queues, channel arbitration and the error model; deliveries
    are reported by scheduling SEGMENT_ARRIVAL events for the next node.
    """

    def __init__(
        self,
        topology: ChainTopology,
        *,
        events: EventQueue,
        trace: RunTrace,
        seed: int,
        scripted: ScriptedDrops | None = None,
    ) -> None:
        self.topology = topology
        self.events = events
        self.trace = trace
        self.scripted = scripted
        self.carried: dict[int, int] = {}
        # transmission intervals per group, for exclusivity checks
        self.tx_log: list[tuple[int, float, float]] = []

        self.groups = [_Group(i) for i in range(topology.n_groups)]
        self._links: dict[tuple[int, int], _Link] = {}
        root = RngStream(seed)
        for hop in range(1, topology.n_nodes):
            model = topology.links[hop - 1]
            group = self.groups[topology.group_of(hop)]
            for forward in (True, False):
                src, dst = (hop, hop + 1) if forward else (hop + 1, hop)
                name = f"loss/hop{hop}/{'fwd' if forward else 'rev'}"
                loss = LossProcess(root.split(name), model.loss_rate)
                self._links[(src, dst)] = _Link(src, dst, hop, forward, model, group, loss)

    def link(self, src: int, dst: int) -> _Link:
        return self._links[(src, dst)]

    def forward(self, node: int, seg: Segment, now: float) -> None:
        """Route one segment a single hop toward its destination."""
        if seg.dst == node:
            raise ContractError(f"segment for node {node} routed to itself")
        next_node = node + 1 if seg.dst > node else node - 1
        self.enqueue(self._links[(node, next_node)], seg, now)

    def enqueue(self, link: _Link, seg: Segment, now: float) -> bool:
        """Drop-tail FIFO; the segment being transmitted occupies a slot."""
        if len(link.queue) >= link.model.queue_capacity:
            self.trace.add(now, TraceKind.DROP_QUEUE, seg.flow_id, seg.seq, seg.kind.value)
            self.carried[seg.flow_id] = self.carried.get(seg.flow_id, 0) - 1
            return False
        link.queue.append(seg)
        if link.state == _IDLE:
            self._request_channel(link, now)
        return True

    def _request_channel(self, link: _Link, now: float) -> None:
        group = link.group
        if group.busy_link is None:
            self._start_transmission(link, now)
        else:
            link.state = _WAITING
            group.fifo.append(link)

    def _start_transmission(self, link: _Link, now: float) -> None:
        seg = link.queue[0]
        link.state = _SENDING
        link.group.busy_link = link
        tx_time = seg.size_bytes * 8.0 / link.model.bandwidth_bps
        if self.scripted is not None:
            dropped = self.scripted.decide(link.hop, link.forward, seg)
        else:
            dropped = link.loss.decide(now, tx_time)
        self.tx_log.append((link.group.index, now, now + tx_time))
        self.events.push(now + tx_time, EventKind.CHANNEL_FREE, link)
        if dropped:
            self.trace.add(
                now, TraceKind.DROP_WIRELESS, seg.flow_id, seg.seq, seg.kind.value
            )
            self.carried[seg.flow_id] = self.carried.get(seg.flow_id, 0) - 1
        else:
            self.events.push(
                now + tx_time + link.model.prop_delay_s,
                EventKind.SEGMENT_ARRIVAL,
                (link.dst, seg),
            )

    def on_channel_free(self, link: _Link, now: float) -> None:
        """A transmission on this link just ended; hand the channel on."""
        link.queue.popleft()
        group = link.group
        group.busy_link = None
        if link.queue:
            link.state = _WAITING
            group.fifo.append(link)
        else:
            link.state = _IDLE
        if group.fifo:
            self._start_transmission(group.fifo.popleft(), now)
