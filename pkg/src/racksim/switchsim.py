"""Top-of-rack switch model: per-request scheduling over a LoadTable, a
multi-stage request-affinity table, pluggable inter-server policies, load
tracking mechanisms, a pipeline stage-budget model, and fault hooks.

First packets (REQF) pick a server and record the mapping; subsequent packets
(REQR) follow the mapping; replies (REP) clear it and update tracked load.
A REQR whose mapping is missing (table overflow, post-failure) falls back to
hash routing over the *physical* membership of the request's locality set so
that every packet of a request still reaches one server.

Per-stage hashes use CPython's built-in tuple hashing (ints are not salted by
PYTHONHASHSEED, so placement is reproducible across runs on one platform).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .baselines import dispatch_random, hash_pick
from .engine import SimulationError

# packet types; REPP is a non-final dependency-group reply: forwarded to the
# client but neither table-clearing nor load-updating.
REQF, REQR, REP, REPP = 0, 1, 2, 3

# load tracking mechanisms
INT1, INT2, INT3, PROACTIVE = "int1", "int2", "int3", "proactive"
TRACKING_KINDS = (INT1, INT2, INT3, PROACTIVE)


@dataclass(slots=True)
class Packet:
    """Wire format seen by the switch."""

    ptype: int
    req_id: int
    src: int
    dst: int
    class_tag: int = 0
    priority: int = 0
    locality: int = 0
    load_report: float = 0.0
    req: object = None


@dataclass(frozen=True)
class PipelineBudget:
    max_stages: int = 12
    comparisons_per_stage: int = 4
    reads_per_stage: int = 4


def stage_cost(policy_kind: str, n_servers: int, budget: PipelineBudget,
               k: int = 0, layout: str = "tree") -> int:
    """Pipeline stages a policy consumes.

    A linear scan costs one stage per candidate. A min-tree over s candidates
    costs sum over layers of ceil(layer_width / comparisons_per_stage), with
    layer widths halving. Sampling(k) prepends ceil(k / reads_per_stage)
    stages to read the sampled counters.
    """
    def tree(s: int) -> int:
        stages = 0
        while s > 1:
            width = s // 2
            stages += -(-width // budget.comparisons_per_stage)
            s = s - width
        return stages

    if policy_kind in ("hash", "rr", "random"):
        return 1
    if policy_kind in ("shortest", "jbsq"):
        return n_servers if layout == "linear" else tree(n_servers)
    if policy_kind == "sampling":
        reads = -(-k // budget.reads_per_stage)
        return reads + (k if layout == "linear" else tree(k))
    raise ValueError(f"unknown policy kind {policy_kind!r}")


class ReqTable:
    """Multi-stage hash table mapping req_id -> server.

    Insert probes each stage at that stage's hash of req_id and takes the
    first empty slot; a request whose probes are all occupied is not stored
    (the caller falls back to hash routing). An insertion log supports lazy
    TTL purging of stale mappings without full-table sweeps.
    """

    __slots__ = ("stages", "slots_per_stage", "salts", "_req", "_srv",
                 "ttl_us", "_log", "occupancy")

    def __init__(self, stages: int, slots_per_stage: int, salts: list[int],
                 ttl_us: float | None = None):
        if len(salts) != stages:
            raise SimulationError("one hash salt per stage required")
        self.stages = stages
        self.slots_per_stage = slots_per_stage
        self.salts = salts
        self._req = [[0] * slots_per_stage for _ in range(stages)]
        self._srv = [[0] * slots_per_stage for _ in range(stages)]
        self.ttl_us = ttl_us
        self._log: deque = deque()
        self.occupancy = 0

    def insert(self, req_id: int, server: int, now: float) -> bool:
        m = self.slots_per_stage
        for i in range(self.stages):
            idx = hash((req_id, self.salts[i])) % m
            row = self._req[i]
            if row[idx] == 0:
                row[idx] = req_id
                self._srv[i][idx] = server
                self.occupancy += 1
                if self.ttl_us is not None:
                    self._log.append((now, i, idx, req_id))
                return True
        return False

    def read(self, req_id: int) -> int:
        m = self.slots_per_stage
        for i in range(self.stages):
            idx = hash((req_id, self.salts[i])) % m
            if self._req[i][idx] == req_id:
                return self._srv[i][idx]
        return -1

    def remove(self, req_id: int) -> bool:
        m = self.slots_per_stage
        for i in range(self.stages):
            idx = hash((req_id, self.salts[i])) % m
            row = self._req[i]
            if row[idx] == req_id:
                row[idx] = 0
                self.occupancy -= 1
                return True
        return False

    def purge_stale(self, now: float) -> int:
        """Clear entries older than the TTL (lost replies, failed servers)."""
        if self.ttl_us is None:
            return 0
        horizon = now - self.ttl_us
        purged = 0
        log = self._log
        while log and log[0][0] <= horizon:
            _, stage, idx, req_id = log.popleft()
            if self._req[stage][idx] == req_id:
                self._req[stage][idx] = 0
                self.occupancy -= 1
                purged += 1
        return purged

    def purge_server(self, server: int) -> int:
        """Drop every mapping onto one (failed) server."""
        purged = 0
        for i in range(self.stages):
            reqs, srvs = self._req[i], self._srv[i]
            for idx in range(self.slots_per_stage):
                if reqs[idx] != 0 and srvs[idx] == server:
                    reqs[idx] = 0
                    purged += 1
        self.occupancy -= purged
        return purged

    def clear(self) -> None:
        for i in range(self.stages):
            self._req[i] = [0] * self.slots_per_stage
            self._srv[i] = [0] * self.slots_per_stage
        self._log.clear()
        self.occupancy = 0


class RandomPolicy:
    kind = "random"
    uses_outstanding = False

    def select(self, loads, elig, rnd, req_id):
        return dispatch_random(elig, rnd)


class HashRandomPolicy:
    kind = "hash"
    uses_outstanding = False

    def __init__(self, salt: int):
        self.salt = salt

    def select(self, loads, elig, rnd, req_id):
        return hash_pick(req_id, elig, self.salt)


class RoundRobinPolicy:
    """Cyclic counter per class over the eligible list."""

    kind = "rr"
    uses_outstanding = False

    def __init__(self, n_classes: int):
        self._next = [0] * n_classes
        self._class = 0

    def bind_class(self, c: int):
        self._class = c

    def select(self, loads, elig, rnd, req_id):
        c = self._class
        i = self._next[c]
        self._next[c] = i + 1
        return elig[i % len(elig)]


class ShortestPolicy:
    """Exact shortest-queue over the eligible set, lowest index on ties."""

    kind = "shortest"
    uses_outstanding = False

    def select(self, loads, elig, rnd, req_id):
        best = elig[0]
        bl = loads[best]
        for s in elig:
            l = loads[s]
            if l < bl:
                bl = l
                best = s
        return best


class SamplingPolicy:
    """Power-of-k-choices: k distinct eligible servers sampled uniformly,
    least-loaded wins, lowest index on ties. With k == len(eligible) the
    decision is identical to ShortestPolicy under the same tie-break."""

    kind = "sampling"
    uses_outstanding = False

    def __init__(self, k: int):
        if k < 1:
            raise SimulationError("sampling k must be >= 1")
        self.k = k

    def select(self, loads, elig, rnd, req_id):
        n = len(elig)
        k = self.k
        if k >= n:
            best = elig[0]
            bl = loads[best]
            for s in elig:
                l = loads[s]
                if l < bl:
                    bl = l
                    best = s
            return best
        if k == 2:
            i = int(rnd.random() * n)
            j = int(rnd.random() * (n - 1))
            if j >= i:
                j += 1
            a = elig[i]
            b = elig[j]
            la = loads[a]
            lb = loads[b]
            if lb < la or (lb == la and b < a):
                return b
            return a
        picked = []
        while len(picked) < k:
            s = elig[int(rnd.random() * n)]
            if s not in picked:
                picked.append(s)
        best = picked[0]
        bl = loads[best]
        for s in picked[1:]:
            l = loads[s]
            if l < bl or (l == bl and s < best):
                bl = l
                best = s
        return best


class JBSQPolicy:
    """Bounded shortest queue: least outstanding among servers below the
    bound; None means every eligible server is at the bound and the request
    stalls in the switch-side FIFO until a reply frees a slot."""

    kind = "jbsq"
    uses_outstanding = True

    def __init__(self, bound: int):
        if bound < 1:
            raise SimulationError("jbsq bound must be >= 1")
        self.bound = bound

    def select(self, loads, elig, rnd, req_id):
        bound = self.bound
        best = -1
        bl = bound
        for s in elig:
            l = loads[s]
            if l < bl:
                bl = l
                best = s
        return best if best >= 0 else None


def make_policy(kind: str, n_classes: int, salt: int, k: int = 2, bound: int = 3):
    if kind == "random":
        return RandomPolicy()
    if kind == "hash":
        return HashRandomPolicy(salt)
    if kind == "rr":
        return RoundRobinPolicy(n_classes)
    if kind == "shortest":
        return ShortestPolicy()
    if kind == "sampling":
        return SamplingPolicy(k)
    if kind == "jbsq":
        return JBSQPolicy(bound)
    raise ValueError(f"unknown policy kind {kind!r}")


class Switch:
    """Switch state machine: returns forwarding decisions, never schedules."""

    def __init__(self, n_servers: int, n_classes: int, loc_sets: list[list[int]],
                 active: list[bool], policy, tracking: str, reqtable: ReqTable,
                 rnd_sampling, rnd_loss, fallback_salt: int,
                 rep_loss_prob: float = 0.0, double_count_prob: float = 0.0,
                 trace_affinity: bool = False):
        if tracking not in TRACKING_KINDS:
            raise SimulationError(f"unknown tracking kind {tracking!r}")
        self.n_servers = n_servers
        self.n_classes = n_classes
        self.loc_sets = loc_sets            # physical membership, fixed per run
        self.active = active
        self.policy = policy
        self.tracking = tracking
        self.reqtable = reqtable
        self.rnd_sampling = rnd_sampling
        self.rnd_loss = rnd_loss
        self.fallback_salt = fallback_salt
        self.rep_loss_prob = rep_loss_prob
        self.double_count_prob = double_count_prob

        if tracking == INT3:
            self.counters = [[0.0] * n_servers for _ in range(n_classes)]
        else:
            self.counters = [[0] * n_servers for _ in range(n_classes)]
        self.int2 = [[0, 0] for _ in range(n_classes)]   # (server, value) per class
        self.outstanding = [0] * n_servers               # jbsq +/- counts
        self.stalled: deque = deque()                    # jbsq FIFO of req_ids
        self._stall_buf: dict = {}                       # req_id -> [req, n_reqr]
        self.failed = False

        self.elig: list[list[int]] = []
        self._rebuild_eligible()

        self.dispatch_hist = [0] * n_servers
        self.fallback_insert = 0
        self.fallback_read = 0
        self.drops = 0
        self.dropped_requests = 0
        self.deliveries: dict | None = {} if trace_affinity else None
        self.affinity_violations = 0
        self.class_dispatch: list | None = (
            [dict() for _ in range(n_classes)] if trace_affinity else None)

    # -- eligibility / faults ------------------------------------------------

    def _rebuild_eligible(self):
        self.elig = [[s for s in members if self.active[s]] for members in self.loc_sets]

    def set_active(self, server: int, flag: bool):
        self.active[server] = flag
        self._rebuild_eligible()

    def fail(self):
        """Switch goes dark: every packet is dropped until recover()."""
        self.failed = True
        stalled = [self._stall_buf.pop(rid)[0] for rid in self.stalled if rid in self._stall_buf]
        self.stalled.clear()
        return stalled

    def recover(self):
        """Resume with empty ReqTable and zeroed LoadTable."""
        self.failed = False
        self.reqtable.clear()
        for row in self.counters:
            for s in range(self.n_servers):
                row[s] = 0
        self.int2 = [[0, 0] for _ in range(self.n_classes)]
        self.outstanding = [0] * self.n_servers

    def mark_dropped(self, req) -> None:
        self.drops += 1
        if not req.dropped:
            req.dropped = True
            self.dropped_requests += 1

    # -- affinity instrumentation (tests) -------------------------------------

    def _trace(self, req_id: int, server: int):
        seen = self.deliveries.get(req_id)
        if seen is None:
            self.deliveries[req_id] = server
        elif seen != server:
            self.affinity_violations += 1

    # -- packet handling -----------------------------------------------------

    def _fallback(self, req) -> int:
        members = self.loc_sets[req.locality]
        return hash_pick(req.req_id, members, self.fallback_salt)

    def route_reqf(self, req, now: float):
        """Pick a server for a first packet. Returns the server id, or None
        if dropped (switch down), or -1 if stalled (JBSQ at bound)."""
        if self.failed:
            self.mark_dropped(req)
            return None
        c = req.tag
        elig = self.elig[req.locality]
        if not elig:
            raise SimulationError("no eligible server for locality class")
        policy = self.policy
        if self.tracking == INT2:
            dst = self.int2[c][0]
            if not self.active[dst]:
                dst = elig[0]
        elif policy.uses_outstanding:
            dst = policy.select(self.outstanding, elig, self.rnd_sampling, req.req_id)
            if dst is None:
                self.stalled.append(req.req_id)
                self._stall_buf[req.req_id] = [req, 0]
                return -1
        else:
            if policy.kind == "rr":
                policy.bind_class(c)
            dst = policy.select(self.counters[c], elig, self.rnd_sampling, req.req_id)
        return self._dispatch(req, dst, now)

    def _dispatch(self, req, dst: int, now: float) -> int:
        if not self.reqtable.insert(req.req_id, dst, now):
            self.fallback_insert += 1
            req.fallback = True
            dst = self._fallback(req)
        if self.tracking == INT2:
            pair = self.int2[req.tag]
            if dst == pair[0]:
                pair[1] += 1  # the tracked minimum just received one more
        elif self.tracking == PROACTIVE:
            row = self.counters[req.tag]
            if self.double_count_prob > 0.0 and self.rnd_loss.random() < self.double_count_prob:
                row[dst] += 2
            else:
                row[dst] += 1
        if self.policy.uses_outstanding:
            self.outstanding[dst] += 1
        self.dispatch_hist[dst] += 1
        if self.deliveries is not None:
            self._trace(req.req_id, dst)
            d = self.class_dispatch[req.tag]
            d[dst] = d.get(dst, 0) + 1
        return dst

    def route_reqr(self, req):
        """Route a follow-on packet via the stored mapping; fall back to the
        locality-stable hash when the mapping is gone."""
        if self.failed:
            self.mark_dropped(req)
            return None
        rid = req.req_id
        buf = self._stall_buf.get(rid)
        if buf is not None:
            buf[1] += 1
            return -1
        dst = self.reqtable.read(rid)
        if dst < 0:
            self.fallback_read += 1
            req.fallback = True
            dst = self._fallback(req)
        if self.deliveries is not None:
            self._trace(rid, dst)
        return dst

    def note_rep(self, req, src: int, load_report: float, final: bool, now: float):
        """Process a reply passing through: clear the mapping, update tracked
        load, release a stalled request if JBSQ. Returns (delivered, release)
        where release is None or (req, dst, n_buffered_reqr)."""
        if self.failed:
            self.mark_dropped(req)
            return False, None
        release = None
        if final:
            self.reqtable.remove(req.req_id)
            if self.rep_loss_prob > 0.0 and self.rnd_loss.random() < self.rep_loss_prob:
                pass  # reply's tracking effect lost (retransmission cleans up)
            else:
                c = req.tag
                t = self.tracking
                if t == INT1 or t == INT3:
                    self.counters[c][src] = load_report
                elif t == PROACTIVE:
                    row = self.counters[c]
                    if row[src] > 0:
                        row[src] -= 1
                else:  # INT2: replace value from stored server, or the pair if smaller
                    pair = self.int2[c]
                    if src == pair[0]:
                        pair[1] = load_report
                    elif load_report < pair[1]:
                        pair[0] = src
                        pair[1] = load_report
            if self.policy.uses_outstanding:
                if self.outstanding[src] > 0:
                    self.outstanding[src] -= 1
                if self.stalled:
                    rid = self.stalled.popleft()
                    sreq, n_reqr = self._stall_buf.pop(rid)
                    elig = self.elig[sreq.locality]
                    dst = self.policy.select(self.outstanding, elig,
                                             self.rnd_sampling, rid)
                    if dst is None:
                        # released slot raced away; put it back at the head
                        self.stalled.appendleft(rid)
                        self._stall_buf[rid] = [sreq, n_reqr]
                    else:
                        release = (sreq, self._dispatch(sreq, dst, now), n_reqr)
        return True, release

    # -- spec-shaped packet API (unit tests, composition) ---------------------

    def process_packet(self, pkt: Packet, now: float):
        """Forwarding decisions for one packet: a list of (where, dst, pkt)
        with where in {"server", "client", "stall", "drop"}."""
        if pkt.ptype == REQF:
            dst = self.route_reqf(pkt.req, now)
            if dst is None:
                return [("drop", -1, pkt)]
            if dst == -1:
                return [("stall", -1, pkt)]
            return [("server", dst, pkt)]
        if pkt.ptype == REQR:
            dst = self.route_reqr(pkt.req)
            if dst is None:
                return [("drop", -1, pkt)]
            if dst == -1:
                return [("stall", -1, pkt)]
            return [("server", dst, pkt)]
        if pkt.ptype in (REP, REPP):
            delivered, release = self.note_rep(pkt.req, pkt.src, pkt.load_report,
                                               pkt.ptype == REP, now)
            if not delivered:
                return [("drop", -1, pkt)]
            out = [("client", pkt.dst, pkt)]
            if release is not None:
                sreq, dst, n_reqr = release
                out.append(("server", dst,
                            Packet(REQF, sreq.req_id, -1, dst, sreq.tag,
                                   sreq.priority, sreq.locality, 0.0, sreq)))
                for _ in range(n_reqr):
                    out.append(("server", dst,
                                Packet(REQR, sreq.req_id, -1, dst, sreq.tag,
                                       sreq.priority, sreq.locality, 0.0, sreq)))
            return out
        raise SimulationError(f"unknown packet type {pkt.ptype}")
