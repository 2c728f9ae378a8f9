"""Experiment configuration, sweep orchestration and CSV tabulation.

Configs are line-oriented ``key = value`` text with ``#`` comments and
comma-separated lists. A sweep runs every (flavor, hops, loss_rate, seed)
combination on a fresh chain of ``max(hops) + 1`` nodes with the flow from
node 1 to node ``1 + hops``. Link loss streams are keyed by seed and link
only, never by flavor, so two flavors at the same (hops, loss_rate, seed)
see identical loss-instant sequences and comparisons are paired.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .cc import Flavor
from .engine import RunTrace, run_until
from .errors import ConfigError, ContractError
from .mesh import (
    DEFAULT_ACK_BYTES,
    DEFAULT_BANDWIDTH_BPS,
    DEFAULT_INTERFERENCE_RANGE,
    DEFAULT_MSS_BYTES,
    DEFAULT_PROP_DELAY_S,
    DEFAULT_QUEUE_CAPACITY,
    DropDirective,
    LinkModel,
    ScriptedDrops,
    build_chain,
)
from .metrics import MetricsSummary, summarize
from .world import FlowConfig, MeshWorld
from .endpoint import DEFAULT_RTO_MAX_S, DEFAULT_RTO_MIN_S

_REQUIRED_KEYS = ("flavors", "hops", "loss_rates", "seeds", "duration")
_KNOWN_KEYS = frozenset(
    _REQUIRED_KEYS
    + (
        "bandwidth_bps",
        "prop_delay_s",
        "queue_capacity",
        "mss_bytes",
        "ack_bytes",
        "interference_range",
        "rto_min_s",
        "rto_max_s",
        "app_limit",
        "scripted_drops",
        "warmup_s",
    )
)

CSV_HEADER = (
    "flavor,hops,loss_rate,seed,throughput,goodput,plr,mean_delay,"
    "rto_count,retransmit_count,delivered_count"
)


@dataclass(frozen=True)
class ExperimentSpec:
    flavors: tuple[Flavor, ...]
    hop_counts: tuple[int, ...]
    loss_rates: tuple[float, ...]
    seeds: tuple[int, ...]
    duration: float
    bandwidth_bps: float = DEFAULT_BANDWIDTH_BPS
    prop_delay_s: float = DEFAULT_PROP_DELAY_S
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    mss_bytes: int = DEFAULT_MSS_BYTES
    ack_bytes: int = DEFAULT_ACK_BYTES
    interference_range: int = DEFAULT_INTERFERENCE_RANGE
    rto_min_s: float = DEFAULT_RTO_MIN_S
    rto_max_s: float = DEFAULT_RTO_MAX_S
    app_limit: int | None = None
    scripted_drops: tuple[DropDirective, ...] = ()
    warmup_s: float = 0.0

    @property
    def n_nodes(self) -> int:
        return max(self.hop_counts) + 1

    def combinations(self) -> list[tuple[Flavor, int, float, int]]:
        """All sweep points in deterministic lexicographic order."""
        return [
            (flavor, hops, rate, seed)
            for flavor in sorted(self.flavors, key=lambda f: f.value)
            for hops in sorted(self.hop_counts)
            for rate in sorted(self.loss_rates)
            for seed in sorted(self.seeds)
        ]


@dataclass(frozen=True)
class ResultRow:
    flavor: Flavor
    hops: int
    loss_rate: float
    seed: int
    throughput: float | None
    goodput: float | None
    plr: float | None
    mean_delay: float | None
    rto_count: int
    retransmit_count: int
    delivered_count: int


def _parse_lines(text: str) -> dict[str, tuple[str, str]]:
    """Parse key = value lines into {key: (raw value, location)}."""
    mapping: dict[str, tuple[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        where = f"line {lineno}"
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in mapping:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"{where}: empty value for {key!r}")
        mapping[key] = (raw, where)
    return mapping


def _split_list(raw: str, where: str, key: str) -> list[str]:
    items = [part.strip() for part in raw.split(",")]
    if not items or any(not part for part in items):
        raise ConfigError(f"{where}: malformed list for {key!r}")
    return items


def _parse_flavors(raw: str, where: str) -> tuple[Flavor, ...]:
    flavors = []
    for name in _split_list(raw, where, "flavors"):
        try:
            flavors.append(Flavor(name))
        except ValueError:
            known = ", ".join(f.value for f in Flavor)
            raise ConfigError(
                f"{where}: unknown flavor {name!r} (known: {known})"
            ) from None
    return tuple(flavors)


def _parse_int(raw: str, where: str, key: str, minimum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{where}: {key} must be an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: {key} must be >= {minimum}, got {value}")
    return value


def _parse_float(
    raw: str, where: str, key: str, minimum: float | None = None, strict: bool = False
) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: {key} must be a number, got {raw!r}") from None
    if minimum is not None and (value < minimum or (strict and value <= minimum)):
        op = ">" if strict else ">="
        raise ConfigError(f"{where}: {key} must be {op} {minimum}, got {value}")
    return value


def _parse_scripted(raw: str, where: str) -> tuple[DropDirective, ...]:
    directives = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ConfigError(
                f"{where}: scripted_drops entries are 'link:seq:nth', got {part!r}"
            )
        hop, seq, nth = (_parse_int(p, where, "scripted_drops") for p in pieces)
        directives.append(DropDirective(hop, seq, nth))
    if not directives:
        raise ConfigError(f"{where}: scripted_drops is empty")
    return tuple(directives)


def load_config(text: str, overrides: Mapping[str, str] | None = None) -> ExperimentSpec:
    """Parse and validate a config, applying overrides on top."""
    mapping = _parse_lines(text)
    for key, raw in (overrides or {}).items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"override: unknown key {key!r}")
        mapping[key] = (str(raw), "override")

    missing = [key for key in _REQUIRED_KEYS if key not in mapping]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    raw, where = mapping["flavors"]
    flavors = _parse_flavors(raw, where)
    raw, where = mapping["hops"]
    hop_counts = tuple(_parse_int(p, where, "hops", 1) for p in _split_list(raw, where, "hops"))
    raw, where = mapping["loss_rates"]
    loss_rates = tuple(
        _parse_float(p, where, "loss_rates", 0.0) for p in _split_list(raw, where, "loss_rates")
    )
    raw, where = mapping["seeds"]
    seeds = tuple(_parse_int(p, where, "seeds") for p in _split_list(raw, where, "seeds"))
    raw, where = mapping["duration"]
    duration = _parse_float(raw, where, "duration", 0.0, strict=True)

    spec = ExperimentSpec(
        flavors=flavors,
        hop_counts=hop_counts,
        loss_rates=loss_rates,
        seeds=seeds,
        duration=duration,
    )
    if "bandwidth_bps" in mapping:
        raw, where = mapping["bandwidth_bps"]
        spec = replace(spec, bandwidth_bps=_parse_float(raw, where, "bandwidth_bps", 0.0, strict=True))
    if "prop_delay_s" in mapping:
        raw, where = mapping["prop_delay_s"]
        spec = replace(spec, prop_delay_s=_parse_float(raw, where, "prop_delay_s", 0.0))
    if "queue_capacity" in mapping:
        raw, where = mapping["queue_capacity"]
        spec = replace(spec, queue_capacity=_parse_int(raw, where, "queue_capacity", 1))
    if "mss_bytes" in mapping:
        raw, where = mapping["mss_bytes"]
        spec = replace(spec, mss_bytes=_parse_int(raw, where, "mss_bytes", 1))
    if "ack_bytes" in mapping:
        raw, where = mapping["ack_bytes"]
        spec = replace(spec, ack_bytes=_parse_int(raw, where, "ack_bytes", 1))
    if "interference_range" in mapping:
        raw, where = mapping["interference_range"]
        spec = replace(spec, interference_range=_parse_int(raw, where, "interference_range", 0))
    if "rto_min_s" in mapping:
        raw, where = mapping["rto_min_s"]
        spec = replace(spec, rto_min_s=_parse_float(raw, where, "rto_min_s", 0.0, strict=True))
    if "rto_max_s" in mapping:
        raw, where = mapping["rto_max_s"]
        spec = replace(spec, rto_max_s=_parse_float(raw, where, "rto_max_s", 0.0, strict=True))
    if "app_limit" in mapping:
        raw, where = mapping["app_limit"]
        if raw != "unbounded":
            spec = replace(spec, app_limit=_parse_int(raw, where, "app_limit", 1))
    if "scripted_drops" in mapping:
        raw, where = mapping["scripted_drops"]
        spec = replace(spec, scripted_drops=_parse_scripted(raw, where))
    if "warmup_s" in mapping:
        raw, where = mapping["warmup_s"]
        spec = replace(spec, warmup_s=_parse_float(raw, where, "warmup_s", 0.0))

    if spec.rto_max_s < spec.rto_min_s:
        raise ConfigError("rto_max_s must be >= rto_min_s")
    if spec.warmup_s >= spec.duration:
        raise ConfigError("warmup_s must be below duration")
    for directive in spec.scripted_drops:
        if directive.hop > max(spec.hop_counts):
            raise ConfigError(
                f"scripted drop on hop {directive.hop} beyond the chain"
            )
    return spec


def build_world(
    spec: ExperimentSpec, flavor: Flavor, hops: int, loss_rate: float, seed: int
) -> MeshWorld:
    """Fresh world for one sweep point."""
    link = LinkModel(
        bandwidth_bps=spec.bandwidth_bps,
        prop_delay_s=spec.prop_delay_s,
        queue_capacity=spec.queue_capacity,
        loss_rate=loss_rate,
        interference_range=spec.interference_range,
    )
    topology = build_chain(spec.n_nodes, link)
    scripted = ScriptedDrops(spec.scripted_drops) if spec.scripted_drops else None
    return MeshWorld(
        topology,
        [FlowConfig(flavor=flavor, hops=hops, app_limit=spec.app_limit)],
        seed=seed,
        mss_bytes=spec.mss_bytes,
        ack_bytes=spec.ack_bytes,
        rto_min=spec.rto_min_s,
        rto_max=spec.rto_max_s,
        scripted=scripted,
    )


def run_single(
    spec: ExperimentSpec, flavor: Flavor, hops: int, loss_rate: float, seed: int
) -> tuple[RunTrace, MetricsSummary]:
    """Run one combination to spec.duration and summarize it."""
    world = build_world(spec, flavor, hops, loss_rate, seed)
    trace = run_until(world, spec.duration)
    return trace, summarize(trace, 0, warmup=spec.warmup_s)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run the full sweep; one row per combination, lexicographic order."""
    rows = []
    for flavor, hops, rate, seed in spec.combinations():
        try:
            _, summary = run_single(spec, flavor, hops, rate, seed)
        except ContractError as exc:
            raise ContractError(
                f"combination flavor={flavor.value} hops={hops} "
                f"loss_rate={rate} seed={seed} aborted: {exc}"
            ) from exc
        rows.append(
            ResultRow(
                flavor=flavor,
                hops=hops,
                loss_rate=rate,
                seed=seed,
                throughput=summary.throughput,
                goodput=summary.goodput,
                plr=summary.plr,
                mean_delay=summary.mean_delay,
                rto_count=summary.rto_count,
                retransmit_count=summary.retransmit_count,
                delivered_count=summary.delivered_count,
            )
        )
    return rows


def _fmt(value: float | None) -> str:
    return "nan" if value is None else f"{value:.6f}"


def emit_csv(rows: list[ResultRow]) -> str:
    """Byte-stable CSV: header plus one line per row."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.flavor.value},{r.hops},{_fmt(r.loss_rate)},{r.seed},"
            f"{_fmt(r.throughput)},{_fmt(r.goodput)},{_fmt(r.plr)},{_fmt(r.mean_delay)},"
            f"{r.rto_count},{r.retransmit_count},{r.delivered_count}"
        )
    return "\n".join(lines) + "\n"
