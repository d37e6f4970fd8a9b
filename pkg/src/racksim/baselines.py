"""Baseline dispatchers the switch-based scheduler is compared against:
uniform/hash-random dispatch, idealized global single-queue policies, and the
client-based power-of-k scheduler with per-client stale views.
"""

from __future__ import annotations

from random import Random


def dispatch_random(eligible: list[int], rnd: Random) -> int:
    """Uniform pick among eligible servers."""
    return eligible[int(rnd.random() * len(eligible))]


def hash_pick(req_id: int, eligible: list[int], salt: int) -> int:
    """Deterministic hash pick; all packets of a request map to one server as
    long as the eligible list is unchanged (fallback routing therefore uses
    the fixed physical set, not the active subset)."""
    return eligible[hash((req_id, salt)) % len(eligible)]


class ClientView:
    """One client's private load estimates.

    The view is updated only by this client's own replies and is optimistically
    incremented when the client dispatches (the client knows its own request
    adds load; without the increment consecutive sends herd onto one server).
    No client reads another client's view or true server state.
    """

    __slots__ = ("estimates",)

    def __init__(self, n_servers: int):
        self.estimates = [0] * n_servers

    def choose(self, eligible: list[int], k: int, rnd: Random) -> int:
        est = self.estimates
        n = len(eligible)
        if k >= n:
            best = eligible[0]
            bl = est[best]
            for s in eligible:
                l = est[s]
                if l < bl:
                    bl = l
                    best = s
        elif k == 2:
            i = int(rnd.random() * n)
            j = int(rnd.random() * (n - 1))
            if j >= i:
                j += 1
            a, b = eligible[i], eligible[j]
            la, lb = est[a], est[b]
            best = b if (lb < la or (lb == la and b < a)) else a
        else:
            picked: list[int] = []
            while len(picked) < k:
                s = eligible[int(rnd.random() * n)]
                if s not in picked:
                    picked.append(s)
            best = picked[0]
            bl = est[best]
            for s in picked[1:]:
                l = est[s]
                if l < bl or (l == bl and s < best):
                    bl = l
                    best = s
        est[best] += 1
        return best

    def observe(self, server: int, load_report: int) -> None:
        """A reply to this client carried the server's piggybacked load."""
        self.estimates[server] = load_report


def globalize(n_servers: int, workers) -> list[int]:
    """Worker layout for the idealized global single-queue baseline: one
    rack-wide queue feeding every worker, modeled as a single server owning
    all workers (zero dispatch latency, perfect knowledge)."""
    if isinstance(workers, int):
        return [n_servers * workers]
    return [sum(workers)]
