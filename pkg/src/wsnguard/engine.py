"""One WSN simulation run: traffic, hop-by-hop secure forwarding, attacks and the CI loop."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import attacks as atk
from .ci import ActionKind, CIEngine, Label, MitigationAction, extract_all
from .config import ScenarioConfig
from .eventlog import CAUSE_CODE, EventLog
from .net import (
    Node, Outcome, Role, admit_reserved, build_topology, dequeue, enqueue,
    generate_traffic, release_reserved, requeue_front, transmit,
)
from .protocol import (
    AuthError, CrcError, FrameHeader, Priority, ReplayError, ReplayWindow,
    ArqAction, ArqEvent, ArqState, arq_start, arq_step, compute_tag, open_frame, seal,
)
from .rng import Rng, fork_stream, label_of
from .routing import RoutingState
from .simkernel import EventKind, RunSummary, SimEvent, Simulator

# stream labels
_KEY, _TRAFFIC, _CHANNEL, _ATTACK, _REKEY, _NONCE = 1, 2, 3, 4, 5, 6

_C = CAUSE_CODE


@dataclass(slots=True, eq=False)
class Packet:
    pid: int
    origin: int
    dest: int
    app_seq: int
    priority: int
    created_at: int
    size: int
    is_app: bool
    wire: object
    holder: int


@dataclass(slots=True, eq=False)
class Tx:
    """One frame outstanding on a hop under stop-and-wait ARQ."""

    sender: int
    pkt: Packet
    hop_dst: int
    frame: object
    arq: ArqState
    aborted: bool = False


class WsnSimulation:
    def __init__(self, cfg: ScenarioConfig, console: Callable[[int, str, tuple], None] | None = None) -> None:
        self.cfg = cfg
        self.log = EventLog()
        if console is not None:
            self.log.subscribe(console)
        self.sim = Simulator(self.log)
        lk = cfg.link
        self.topo = build_topology(cfg.topology, lk.base_loss, lk.latency, lk.capacity)
        self.nodes: list[Node] = self.topo.nodes
        self.sink = self.topo.sink
        self.sensors = [n.id for n in self.nodes if n.role is Role.Sensor]
        seed = cfg.seed
        for n in self.nodes:
            n.key = Rng(fork_stream(seed, label_of(_KEY, n.id))).next_u64()
        # verification keys held by honest nodes; a rekey replaces the entry
        self.verify_keys = {n.id: n.key for n in self.nodes}
        self.retired_keys: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        self.traffic_rng = {i: Rng(fork_stream(seed, label_of(_TRAFFIC, i))) for i in self.sensors}
        self.channel_rng = {n.id: Rng(fork_stream(seed, label_of(_CHANNEL, n.id))) for n in self.nodes}
        self.routing = RoutingState(self.topo, cfg.routing)
        self.ci = CIEngine(cfg.detector) if cfg.ci_enabled else None
        self.replay = ReplayWindow()
        self.active: dict[int, atk.ActiveAttack] = {}
        self.next_pid = 0
        self.app_seq = {n.id: 0 for n in self.nodes}
        self.hop_seq = {n.id: 0 for n in self.nodes}
        self.live: dict[int, Packet] = {}
        self._kicked: set[int] = set()
        self.rekeys = 0
        self.finished = False

        s = self.sim
        s.on(EventKind.TrafficTick, self._on_traffic)
        s.on(EventKind.PacketSend, self._on_send)
        s.on(EventKind.PacketArrive, self._on_arrive)
        s.on(EventKind.AckTimeout, self._on_timeout)
        s.on(EventKind.BeaconTick, self._on_beacon)
        s.on(EventKind.DetectorTick, self._on_detector)
        s.on(EventKind.AttackStart, self._on_attack_start)
        s.on(EventKind.AttackEnd, self._on_attack_end)
        s.on(EventKind.MitigationApply, self._on_mitigation)

        s.schedule(0, EventKind.BeaconTick)
        period = cfg.traffic.period
        for i in self.sensors:
            s.schedule(i % period, EventKind.TrafficTick, ("app", i))
        if self.ci is not None:
            s.schedule(cfg.detector.window, EventKind.DetectorTick)
        for idx, spec in enumerate(cfg.attacks):
            s.schedule(spec.start, EventKind.AttackStart, idx)
            s.schedule(spec.end, EventKind.AttackEnd, idx)

    # -- driver ------------------------------------------------------------------

    def run(self) -> RunSummary:
        """Simulate ticks ``[0, duration)`` and append the in-flight census."""
        if self.finished:
            raise RuntimeError("simulation already ran")
        d = self.cfg.duration
        summary = self.sim.run(d - 1) if d > 0 else RunSummary(0, 0, self.log.digest)
        self.sim.now = d
        for pid in sorted(self.live):
            self.log.append(d, "inflight", self.live[pid].holder, pid)
        if d > 0:
            self.log.append(d, "run_end", d)
        self.finished = True
        return RunSummary(summary.events, d, self.log.digest)

    @property
    def now(self) -> int:
        return self.sim.now

    def _emit(self, kind: str, *fields) -> None:
        self.log.append(self.sim.now, kind, *fields)

    def _rate_window(self) -> int:
        return self.sim.now // self.cfg.detector.window

    # -- packets -----------------------------------------------------------------

    def _new_packet(self, node: Node, dest: int, priority: int, payload: bytes, is_app: bool) -> Packet:
        pid = self.next_pid
        self.next_pid += 1
        seq = self.app_seq[node.id]
        self.app_seq[node.id] = seq + 1
        nonce = label_of(_NONCE, node.id, seq)
        hdr = FrameHeader(node.id, dest, node.id, node.id, seq, 0, int(priority), self.cfg.protocol.ttl, nonce)
        wire = seal(hdr, payload, node.key, self.cfg.protocol.payload_max)
        pkt = Packet(pid, node.id, dest, seq, int(priority), self.now, len(payload), is_app, wire, node.id)
        self.live[pid] = pkt
        return pkt

    def _drop(self, node: int, pkt: Packet, cause: str, hop_src: int = -1) -> None:
        self._emit("drop", node, pkt.pid, _C[cause], hop_src)
        self.live.pop(pkt.pid, None)

    def _kick(self, node: Node) -> None:
        if node.outstanding is None and node.id not in self._kicked and node.queued:
            self._kicked.add(node.id)
            self.sim.schedule(self.now, EventKind.PacketSend, node.id)

    def _kick_all(self) -> None:
        for n in self.nodes:
            self._kick(n)

    # -- handlers ----------------------------------------------------------------

    def _on_traffic(self, ev: SimEvent) -> None:
        what, ref = ev.subject
        if what == "flood":
            self._flood_tick(ref)
            return
        node = self.nodes[ref]
        cfg = self.cfg.traffic
        self.sim.schedule(self.now + cfg.period, EventKind.TrafficTick, ev.subject)
        if node.quarantined:
            return
        for ap in generate_traffic(node.id, self.sink, cfg, self.traffic_rng[node.id], self.now, self.app_seq[node.id]):
            pkt = self._new_packet(node, ap.dest, ap.priority, ap.payload, True)
            self._emit("gen", node.id, pkt.pid, pkt.app_seq, pkt.priority, pkt.size)
            if enqueue(node, pkt, pkt.priority, self.now):
                self._kick(node)
            else:
                self._drop(node.id, pkt, "congestion")

    def _flood_tick(self, idx: int) -> None:
        spec = self.cfg.attacks[idx]
        att = self.active.get(spec.attacker)
        if att is None or att.spec is not spec:
            return
        if self.now + 1 < spec.end:
            self.sim.schedule(self.now + 1, EventKind.TrafficTick, ("flood", idx))
        node = self.nodes[spec.attacker]
        dest = self.sink if spec.victim is None else spec.victim
        for payload in atk.flood_behavior(spec.flood_rate, att.rng, self.cfg.traffic.payload_len):
            pkt = self._new_packet(node, dest, Priority.Critical, payload, False)
            self._emit("inject", node.id, pkt.pid, dest)
            nh = self.routing.table.next_hop.get(node.id)
            if node.quarantined or nh is None:
                # isolated: nothing can leave the node
                self._drop(node.id, pkt, "link_error")
                continue
            if not node.may_emit(self._rate_window()):
                self._drop(node.id, pkt, "rate_limited")
                continue
            frame = self._hop_frame(node, pkt, nh)
            self._emit("send", node.id, nh, pkt.pid, pkt.origin, 1)
            self._push(node, pkt, nh, frame, None)

    def _hop_frame(self, node: Node, pkt: Packet, nh: int):
        hs = self.hop_seq[node.id]
        self.hop_seq[node.id] = hs + 1
        return pkt.wire.with_hop(hop_src=node.id, hop_dst=nh, hop_seq=hs & 0xFFFFFFFF)

    def _push(self, node: Node, pkt: Packet, nh: int, frame, tx: Tx | None) -> None:
        """Put one transmission on the channel and handle its immediate outcome."""
        link = self.topo.link(node.id, nh)
        recv = self.nodes[nh]
        res = transmit(link, self.now, self.channel_rng[node.id], recv, pkt.dest == nh)
        if res.outcome is Outcome.LostLinkError:
            if tx is None:
                self._drop(node.id, pkt, "link_error")
            else:
                self._emit("loss", node.id, nh, pkt.pid)
            return
        if res.outcome is Outcome.DroppedQueueFull:
            self._drop(nh, pkt, "congestion", node.id)
            if tx is not None:
                self._release(node)
            return
        self.sim.schedule(res.at, EventKind.PacketArrive, ("data", node.id, nh, pkt, frame, tx))

    def _release(self, node: Node) -> None:
        node.note_occupancy(self.now)
        node.outstanding = None
        self._kick(node)

    def _on_send(self, ev: SimEvent) -> None:
        node = self.nodes[ev.subject]
        self._kicked.discard(node.id)
        if node.outstanding is not None or node.quarantined:
            return
        nh = self.routing.table.next_hop.get(node.id)
        if nh is None:
            return
        pkt = dequeue(node, self.now)
        if pkt is None:
            return
        if not node.may_emit(self._rate_window()):
            self._drop(node.id, pkt, "rate_limited")
            self._kick(node)
            return
        frame = self._hop_frame(node, pkt, nh)
        p = self.cfg.protocol
        tx = Tx(node.id, pkt, nh, frame, arq_start(self.now, p.retry_limit, p.ack_timeout))
        node.note_occupancy(self.now)
        node.outstanding = tx
        self._emit("send", node.id, nh, pkt.pid, pkt.origin, 1)
        self.sim.schedule(tx.arq.timeout_at, EventKind.AckTimeout, (tx, 1))
        self._push(node, pkt, nh, frame, tx)

    def _on_timeout(self, ev: SimEvent) -> None:
        tx, attempt = ev.subject
        node = self.nodes[tx.sender]
        if node.outstanding is not tx or tx.aborted or tx.arq.attempts != attempt:
            return
        self.routing.observe(node.id, tx.hop_dst, False, self.now)
        action, st = arq_step(tx.arq, ArqEvent.Timeout, self.now)
        pkt = tx.pkt
        if action is ArqAction.GiveUp:
            self._drop(node.id, pkt, "retry_exhausted")
            self._release(node)
            return
        if not node.may_emit(self._rate_window()):
            self._drop(node.id, pkt, "rate_limited")
            self._release(node)
            return
        tx.arq = st
        self._emit("send", node.id, tx.hop_dst, pkt.pid, pkt.origin, st.attempts)
        self.sim.schedule(st.timeout_at, EventKind.AckTimeout, (tx, st.attempts))
        self._push(node, pkt, tx.hop_dst, tx.frame, tx)

    def _on_arrive(self, ev: SimEvent) -> None:
        subj = ev.subject
        if subj[0] == "ack":
            self._on_ack(subj[1], subj[2])
            return
        _, src, dst, pkt, frame, tx = subj
        v = self.nodes[dst]
        final = pkt.dest == dst
        if tx is not None and tx.aborted:
            # the hop was torn down by a quarantine; the sender already requeued
            if not final:
                release_reserved(v, self.now)
            self._emit("loss", src, dst, pkt.pid)
            return
        if tx is not None:
            lat = self.topo.link(dst, src).latency
            self.sim.schedule(self.now + lat, EventKind.PacketArrive, ("ack", tx, tx.arq.attempts))
        self._emit("recv", dst, src, pkt.pid, pkt.origin, pkt.dest)
        try:
            open_frame(frame, self.verify_keys[pkt.origin], self.replay if final else None)
        except CrcError:
            if not final:
                release_reserved(v, self.now)
            self._drop(dst, pkt, "crc_fail", src)
            return
        except AuthError:
            if not final:
                release_reserved(v, self.now)
            if self._stale_key(frame, pkt.origin):
                self._drop(dst, pkt, "auth_fail", pkt.origin)
            else:
                self._drop(dst, pkt, "auth_fail", src)
                self._emit("tamper_notice", dst, src, pkt.pid, pkt.origin)
            return
        except ReplayError:
            self._emit("dup", dst, pkt.pid, pkt.origin, pkt.app_seq)
            self.live.pop(pkt.pid, None)
            return
        if final:
            self._emit("deliver", dst, pkt.pid, pkt.origin, pkt.app_seq, self.now - pkt.created_at, pkt.size)
            self.live.pop(pkt.pid, None)
            return
        hdr = frame.header
        if hdr.ttl <= 1:
            release_reserved(v, self.now)
            self._drop(dst, pkt, "ttl_expired", src)
            return
        self._emit("relay", dst, src, pkt.pid, pkt.origin)
        att = self.active.get(dst)
        if att is not None:
            spec = att.spec
            if spec.kind is atk.AttackKind.Blackhole:
                if atk.blackhole_behavior(True, spec.drop_prob, spec.selective, att.rng):
                    release_reserved(v, self.now)
                    self._drop(dst, pkt, "attack_drop", src)
                    return
            elif spec.kind is atk.AttackKind.Tamper:
                frame, bit = atk.tamper_behavior(frame, spec.flip_prob, att.rng)
                if bit is not None:
                    self._emit("tamper", dst, pkt.pid, bit)
        pkt.wire = frame.with_hop(ttl=hdr.ttl - 1)
        pkt.holder = dst
        self._emit("fwd", dst, pkt.pid)
        admit_reserved(v, pkt, pkt.priority, self.now)
        self._kick(v)

    def _stale_key(self, frame, origin: int) -> bool:
        return any(compute_tag(frame.header, frame.ciphertext, k) == frame.tag for k in self.retired_keys[origin])

    def _on_ack(self, tx: Tx, attempt: int) -> None:
        node = self.nodes[tx.sender]
        if node.outstanding is not tx or tx.aborted:
            return
        arq_step(tx.arq, ArqEvent.AckReceived, self.now)
        self.routing.observe(node.id, tx.hop_dst, True, self.now)
        self._release(node)

    # -- routing -------------------------------------------------------------------

    def _recompute_routes(self) -> None:
        table = self.routing.on_beacon(self.now)
        for n in self.nodes:
            if n.id == self.sink:
                continue
            nh = table.next_hop.get(n.id, -1)
            self._emit("route", n.id, nh, float(table.cost.get(n.id, -1.0)))
        for u in table.unroutable:
            self._emit("unroutable", u)
        self._kick_all()

    def _on_beacon(self, ev: SimEvent) -> None:
        self._recompute_routes()
        self.sim.schedule(self.now + self.cfg.routing.beacon_period, EventKind.BeaconTick)

    # -- CI loop ---------------------------------------------------------------------

    def _on_detector(self, ev: SimEvent) -> None:
        W = self.cfg.detector.window
        now = self.now
        self.sim.schedule(now + W, EventKind.DetectorTick)
        for i in self.sensors:
            n = self.nodes[i]
            area = n.take_occupancy_area(now)
            self._emit("telemetry", i, area / (W * n.capacity))
        records = self.log.slice(now - W, now + 1)
        features = extract_all(records, self.sensors, now, W)
        assessments, actions, risks = self.ci.on_window(features)
        theta = self.cfg.detector.theta
        alerted = set()
        per_suspect: dict[int, int] = {}
        for m in actions:
            per_suspect[m.target] = per_suspect.get(m.target, 0) + 1
        for a in assessments:
            self._emit("assess", a.observed_at, int(a.label), float(a.score))
        for a in assessments:
            if a.label is Label.Benign:
                if risks.get(a.observed_at, 0.0) >= theta:
                    self._emit("predict", a.observed_at, float(risks[a.observed_at]))
                continue
            key = (a.node, a.label)
            if key in alerted:
                continue
            alerted.add(key)
            self.routing.penalize(a.node)
            self._emit("alert", a.node, int(a.label), float(a.score), per_suspect.pop(a.node, 0))
        for m in actions:
            self._emit("action", int(m.kind), m.target, m.param)
        if actions:
            self.sim.schedule(now, EventKind.MitigationApply, actions)

    def _on_mitigation(self, ev: SimEvent) -> None:
        recompute = False
        actions: list[MitigationAction] = ev.subject
        for m in actions:
            target = self.nodes[m.target]
            if m.kind is ActionKind.Quarantine:
                target.quarantined = True
                self.routing.quarantine(target.id, self.now)
                self._abort_hops_to(target.id)
            elif m.kind is ActionKind.RateLimit:
                target.rate_limit = m.param
            elif m.kind is ActionKind.Rekey:
                self.rekeys += 1
                self.retired_keys[target.id].append(self.verify_keys[target.id])
                self.verify_keys[target.id] = Rng(
                    fork_stream(self.cfg.seed, label_of(_REKEY, target.id, self.rekeys))
                ).next_u64()
            elif m.kind is ActionKind.RecomputeRoutes:
                recompute = True
        if recompute:
            self._recompute_routes()

    def _abort_hops_to(self, target: int) -> None:
        for n in self.nodes:
            tx = n.outstanding
            if tx is not None and tx.hop_dst == target:
                tx.aborted = True
                n.note_occupancy(self.now)
                n.outstanding = None
                requeue_front(n, tx.pkt, tx.pkt.priority, self.now)
                self._kick(n)

    # -- attacks -------------------------------------------------------------------

    def _on_attack_start(self, ev: SimEvent) -> None:
        spec = self.cfg.attacks[ev.subject]
        rng = Rng(fork_stream(self.cfg.seed, label_of(_ATTACK, ev.subject)))
        self.active[spec.attacker] = atk.activate(spec, self.now, rng)
        self.nodes[spec.attacker].compromised = True
        self._emit("attack_start", spec.attacker, int(spec.kind))
        if spec.kind is atk.AttackKind.Flood:
            self.sim.schedule(self.now, EventKind.TrafficTick, ("flood", ev.subject))

    def _on_attack_end(self, ev: SimEvent) -> None:
        spec = self.cfg.attacks[ev.subject]
        att = self.active.get(spec.attacker)
        if att is not None and att.spec is spec:
            del self.active[spec.attacker]
            self.nodes[spec.attacker].compromised = False
        self._emit("attack_end", spec.attacker, int(spec.kind))


def simulate(cfg: ScenarioConfig, console=None) -> WsnSimulation:
    s = WsnSimulation(cfg, console)
    s.run()
    return s
