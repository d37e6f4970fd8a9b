"""Server model: W workers draining per-server queues under a preemptive
intra-server policy.

Policies: centralized FCFS (optionally preempting requests that exceed a
running threshold, re-enqueued at the tail), processor sharing at a fixed
time slice, their multi-queue per-class variants (arbitrated by earliest head
arrival), strict priority with preemption of running lower-priority work, and
weighted fair queueing across clients at slice granularity.

The server owns its timer events; cancellation is by per-worker tokens (a
stale token means the worker was reassigned and the event is void). Replies
are emitted through a callback so the server never needs to know about
network delays or the switch.
"""

from __future__ import annotations

from collections import deque

from .engine import SimulationError
from .switchsim import INT3

CFCFS, PS, MQ_CFCFS, MQ_PS, PRIO, WFQ = range(6)

INTRA_CODES = {
    "cfcfs": CFCFS,
    "ps": PS,
    "mq-cfcfs": MQ_CFCFS,
    "mq-ps": MQ_PS,
    "priority": PRIO,
    "wfq": WFQ,
}


class Server:
    def __init__(self, sid: int, n_workers: int, intra: str, sim, emit,
                 n_classes: int = 1, slice_us: float = 25.0,
                 preempt_threshold_us: float | None = None,
                 ctx_switch_us: float = 0.0, preempt_latency_us: float = 5.0,
                 tracking: str = "int1", wfq_weights: list[float] | None = None,
                 priorities: list[int] | None = None):
        code = INTRA_CODES.get(intra)
        if code is None:
            raise SimulationError(f"unknown intra-server policy {intra!r}")
        self.sid = sid
        self.n_workers = n_workers
        self.code = code
        self.sim = sim
        self.emit = emit
        self.n_classes = n_classes
        self.slice_us = slice_us
        self.threshold_us = preempt_threshold_us
        self.ctx_us = ctx_switch_us
        self.preempt_lat_us = preempt_latency_us
        self.int3 = tracking == INT3

        self.w_req: list = [None] * n_workers
        self.w_start = [0.0] * n_workers
        self.w_token = [0] * n_workers
        self.w_last: list = [None] * n_workers
        self.idle = list(range(n_workers - 1, -1, -1))
        self.busy = 0

        if code in (CFCFS, PS):
            self.queue: deque = deque()
        elif code in (MQ_CFCFS, MQ_PS):
            self.mq: dict[int, deque] = {c: deque() for c in range(n_classes)}
        elif code == PRIO:
            self.prio_order = sorted(set(priorities or [0]), reverse=True)
            self.prio_queues: dict[int, deque] = {p: deque() for p in self.prio_order}
        else:  # WFQ
            if not wfq_weights:
                raise SimulationError("wfq requires per-client weights")
            self.weights = [int(w) for w in wfq_weights]
            self.wfq_queues: dict[int, deque] = {c: deque() for c in range(len(self.weights))}
            self.wfq_idx = 0
            self.wfq_credit = 0

        self.outstanding = [0] * n_classes      # queued + running, per class
        self.rem_sum = [0.0] * n_classes        # remaining service, per class
        self.in_system = 0
        self.completed = 0
        self.failed = False
        self.partial: dict = {}                 # multi-packet reassembly
        self.drop_sink = None                   # set by the runner

    # -- packet arrival --------------------------------------------------------

    def on_packet(self, now: float, req) -> None:
        """One request packet delivered (event-handler signature); the request
        enters the queue once all its packets are here."""
        if self.failed:
            if self.drop_sink is not None:
                self.drop_sink(req)
            return
        if req.packets > 1:
            left = req.pkts_pending - 1
            req.pkts_pending = left
            if left > 0:
                self.partial[req.req_id] = req
                return
            self.partial.pop(req.req_id, None)
        self.enqueue(req, now)

    def enqueue(self, req, now: float) -> None:
        self.outstanding[req.tag] += 1
        self.rem_sum[req.tag] += req.remaining
        self.in_system += 1
        code = self.code
        if code == CFCFS or code == PS:
            self.queue.append(req)
        elif code == MQ_CFCFS or code == MQ_PS:
            self.mq[req.tag].append(req)
        elif code == PRIO:
            self.prio_queues[req.priority].append(req)
            if not self.idle:
                self._maybe_preempt(req.priority, now)
        else:
            self.wfq_queues[req.client].append(req)
        if self.idle:
            self._dispatch(now)

    # -- queue selection -------------------------------------------------------

    def _pick(self):
        code = self.code
        if code == CFCFS or code == PS:
            q = self.queue
            return q.popleft() if q else None
        if code == MQ_CFCFS or code == MQ_PS:
            best = None
            bt = 0.0
            for q in self.mq.values():
                if q:
                    t = q[0].arrival
                    if best is None or t < bt:
                        bt = t
                        best = q
            return best.popleft() if best is not None else None
        if code == PRIO:
            for p in self.prio_order:
                q = self.prio_queues[p]
                if q:
                    return q.popleft()
            return None
        # WFQ: weighted round-robin over clients in slice quanta
        order = self.weights
        n = len(order)
        for _ in range(n):
            q = self.wfq_queues[self.wfq_idx]
            if q:
                if self.wfq_credit <= 0:
                    self.wfq_credit = order[self.wfq_idx]
                self.wfq_credit -= 1
                req = q.popleft()
                if self.wfq_credit <= 0:
                    self.wfq_idx = (self.wfq_idx + 1) % n
                return req
            self.wfq_idx = (self.wfq_idx + 1) % n
            self.wfq_credit = 0
        return None

    def _requeue_tail(self, req) -> None:
        code = self.code
        if code == CFCFS or code == PS:
            self.queue.append(req)
        elif code == MQ_CFCFS or code == MQ_PS:
            self.mq[req.tag].append(req)
        elif code == PRIO:
            self.prio_queues[req.priority].append(req)
        else:
            self.wfq_queues[req.client].append(req)

    # -- dispatch / timers -----------------------------------------------------

    def _dispatch(self, now: float) -> None:
        idle = self.idle
        while idle:
            req = self._pick()
            if req is None:
                return
            wid = idle.pop()
            self._assign(wid, req, now)

    def _assign(self, wid: int, req, now: float) -> None:
        code = self.code
        rem = req.remaining
        if code == CFCFS or code == MQ_CFCFS or code == PRIO:
            cap = self.threshold_us
            q = rem if (cap is None or rem <= cap) else cap
        else:
            cap = self.slice_us
            q = rem if rem <= cap else cap
        start = now
        if self.ctx_us > 0.0 and self.w_last[wid] is not req:
            start = now + self.ctx_us
        self.w_req[wid] = req
        self.w_start[wid] = start
        self.busy += 1
        token = self.w_token[wid] + 1
        self.w_token[wid] = token
        self.sim.schedule(start + q, self._on_worker, (wid, token, q))

    def _on_worker(self, now: float, arg) -> None:
        wid, token, q = arg
        if self.w_token[wid] != token:
            return
        req = self.w_req[wid]
        req.remaining -= q
        self.rem_sum[req.tag] -= q
        self.w_req[wid] = None
        self.w_last[wid] = req
        self.idle.append(wid)
        self.busy -= 1
        if req.remaining <= 0.0:
            self._complete(req, now)
        else:
            self._requeue_tail(req)
        self._dispatch(now)

    def _complete(self, req, now: float) -> None:
        tag = req.tag
        self.outstanding[tag] -= 1
        self.in_system -= 1
        self.completed += 1
        group = req.group
        if group is None:
            final = True
        else:
            group.done += 1
            final = group.done >= group.size
        self.emit(req, self.sid, self.current_load(tag, now), final, now)

    def current_load(self, tag: int, now: float) -> float:
        """Piggybacked load: queued+running count (INT1/INT2) or remaining
        service microseconds (INT3), excluding any request that just left."""
        if not self.int3:
            return self.outstanding[tag]
        rem = self.rem_sum[tag]
        w_req = self.w_req
        w_start = self.w_start
        for wid in range(self.n_workers):
            r = w_req[wid]
            if r is not None and r.tag == tag:
                elapsed = now - w_start[wid]
                if elapsed > 0.0:
                    rem -= elapsed
        return rem if rem > 0.0 else 0.0

    # -- strict-priority preemption ---------------------------------------------

    def _maybe_preempt(self, incoming_prio: int, now: float) -> None:
        victim_wid = -1
        victim_prio = incoming_prio
        for wid in range(self.n_workers):
            r = self.w_req[wid]
            if r is not None and r.priority < victim_prio:
                victim_prio = r.priority
                victim_wid = wid
        if victim_wid < 0:
            return
        req = self.w_req[victim_wid]
        elapsed = now - self.w_start[victim_wid]
        if elapsed > 0.0:
            req.remaining -= elapsed
            self.rem_sum[req.tag] -= elapsed
        self.w_token[victim_wid] += 1
        self.w_req[victim_wid] = None
        self.w_last[victim_wid] = req
        self.busy -= 1
        # victim was in service: it resumes from the head of its own queue
        self.prio_queues[req.priority].appendleft(req)
        token = self.w_token[victim_wid]
        self.sim.schedule(now + self.preempt_lat_us, self._on_switch_done,
                          (victim_wid, token))

    def _on_switch_done(self, now: float, arg) -> None:
        wid, token = arg
        if self.w_token[wid] != token:
            return
        self.idle.append(wid)
        self._dispatch(now)

    # -- faults ------------------------------------------------------------------

    def fail(self) -> list:
        """Unplanned removal: every queued, running, and partially-arrived
        request is lost. Returns the lost requests for drop accounting."""
        lost = []
        code = self.code
        if code in (CFCFS, PS):
            lost.extend(self.queue)
            self.queue.clear()
        elif code in (MQ_CFCFS, MQ_PS):
            for q in self.mq.values():
                lost.extend(q)
                q.clear()
        elif code == PRIO:
            for q in self.prio_queues.values():
                lost.extend(q)
                q.clear()
        else:
            for q in self.wfq_queues.values():
                lost.extend(q)
                q.clear()
        for wid in range(self.n_workers):
            if self.w_req[wid] is not None:
                lost.append(self.w_req[wid])
                self.w_req[wid] = None
            self.w_token[wid] += 1
        lost.extend(self.partial.values())
        self.partial.clear()
        self.idle = list(range(self.n_workers - 1, -1, -1))
        self.busy = 0
        self.in_system = 0
        self.outstanding = [0] * self.n_classes
        self.rem_sum = [0.0] * self.n_classes
        self.failed = True
        return lost
