"""Result records and the small analytical toolbox used to cross-check runs.

The closed-form pieces here are deliberately independent of the simulator:
they are computed from first principles so that simulation output can be
validated against them rather than against itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


# -- summary statistics --------------------------------------------------------


def quantile(sorted_samples, p: float) -> float:
    """Nearest-rank quantile of an ascending-sorted sequence.

    Uses the ceil(p*n) rank so that e.g. the p99 of 100 samples is the 99th
    order statistic, never an interpolated value.
    """
    n = len(sorted_samples)
    if n == 0:
        raise ValueError("quantile of empty sample set")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"quantile fraction must be in (0, 1], got {p}")
    rank = math.ceil(p * n)
    return sorted_samples[rank - 1]


def tv_distance(hist_a: dict, hist_b: dict) -> float:
    """Total variation distance between two count histograms (normalized)."""
    ta = sum(hist_a.values())
    tb = sum(hist_b.values())
    if ta <= 0 or tb <= 0:
        raise ValueError("tv_distance needs non-empty histograms")
    keys = set(hist_a) | set(hist_b)
    return 0.5 * sum(
        abs(hist_a.get(k, 0) / ta - hist_b.get(k, 0) / tb) for k in keys
    )


def sign_test_p(wins: int, n: int) -> float:
    """One-sided exact sign test: P(X >= wins) for X ~ Binomial(n, 1/2)."""
    if not 0 <= wins <= n:
        raise ValueError(f"wins must be in [0, {n}], got {wins}")
    total = sum(math.comb(n, i) for i in range(wins, n + 1))
    return total / (2 ** n)


# -- closed-form queueing references -------------------------------------------


def mm1_sojourn_mean(arrival_rate: float, service_rate: float) -> float:
    """Mean time in system for an M/M/1 queue: 1 / (mu - lambda)."""
    if arrival_rate <= 0.0 or service_rate <= arrival_rate:
        raise ValueError("need 0 < arrival_rate < service_rate")
    return 1.0 / (service_rate - arrival_rate)


def jsq_equilibrium(rho: float, workers_per_server: int, n_max: int) -> list:
    """Tail of the join-shortest-queue equilibrium in the many-server regime.

    Returns [x_0, x_1, ..., x_n_max] with x_n = rho ** (n * K), the fraction
    of servers holding at least n waiting jobs when each server has K workers.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"utilization must be in (0, 1), got {rho}")
    if workers_per_server < 1:
        raise ValueError("workers_per_server must be >= 1")
    return [rho ** (n * workers_per_server) for n in range(n_max + 1)]


def erlang_c(n_workers: int, offered: float) -> float:
    """Probability of queueing in an M/M/c system with offered load a = lambda/mu.

    Used as an independent reference for pooled first-come-first-served
    servers. Stable only for offered < n_workers.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if not 0.0 < offered < n_workers:
        raise ValueError("offered load must be in (0, n_workers)")
    rho = offered / n_workers
    # Iterative Erlang-B then convert, avoiding large factorials.
    b = 1.0
    for i in range(1, n_workers + 1):
        b = offered * b / (i + offered * b)
    return b / (1.0 - rho + rho * b)


def mmc_wait_quantile(n_workers: int, arrival_rate: float, service_rate: float,
                      p: float) -> float:
    """Sojourn-time p-quantile is not closed-form for M/M/c; this returns the
    waiting-time quantile, which is exact: P(W > t) = C * exp(-(c*mu - lam) t).
    """
    offered = arrival_rate / service_rate
    c = erlang_c(n_workers, offered)
    if c <= 1.0 - p:
        return 0.0
    decay = n_workers * service_rate - arrival_rate
    return math.log(c / (1.0 - p)) / decay


# -- run results ----------------------------------------------------------------


@dataclass
class ClassSummary:
    tag: str
    arrivals: int
    completions: int
    fallbacks: int
    mean_us: float
    p50_us: float
    p99_us: float
    p999_us: float


@dataclass
class MetricsRecord:
    """Everything measured in one simulation run.

    Latency samples are completion - send time, in microseconds, for requests
    whose send time fell inside the measurement window. Lists are indexed by
    class position in the run's class list.
    """

    class_tags: list
    window: tuple                       # (start_us, end_us) of measurement
    samples: list                       # per class: list of latency samples
    arrivals: list                      # per class: measured sends
    completions: list                   # per class: measured completions
    fallbacks: list                     # per class: measured fallback-path reqs
    injected: int = 0                   # every request created, warmup included
    completed: int = 0
    dropped: int = 0
    dispatch_hist: list = field(default_factory=list)
    fallback_inserts: int = 0
    fallback_reads: int = 0
    census_system: dict = field(default_factory=dict)   # jobs in system -> ticks
    census_waiting: dict = field(default_factory=dict)  # jobs waiting -> ticks
    buckets: list = field(default_factory=list)         # per class: completions per bucket
    bucket_us: float = 0.0
    wall_s: float = 0.0

    def in_flight(self) -> int:
        return self.injected - self.completed - self.dropped

    def elapsed_us(self) -> float:
        return self.window[1] - self.window[0]

    def class_summary(self, index: int) -> ClassSummary:
        xs = sorted(self.samples[index])
        if xs:
            mean = sum(xs) / len(xs)
            p50 = quantile(xs, 0.50)
            p99 = quantile(xs, 0.99)
            p999 = quantile(xs, 0.999)
        else:
            mean = p50 = p99 = p999 = float("nan")
        return ClassSummary(
            tag=self.class_tags[index],
            arrivals=self.arrivals[index],
            completions=self.completions[index],
            fallbacks=self.fallbacks[index],
            mean_us=mean,
            p50_us=p50,
            p99_us=p99,
            p999_us=p999,
        )

    def offered_rps(self, index: int) -> float:
        return self.arrivals[index] / self.elapsed_us() * 1e6

    def achieved_rps(self, index: int) -> float:
        return self.completions[index] / self.elapsed_us() * 1e6

    def pooled_p99(self) -> float:
        xs = sorted(x for s in self.samples for x in s)
        return quantile(xs, 0.99)

    def pooled_mean(self) -> float:
        n = sum(len(s) for s in self.samples)
        if n == 0:
            return float("nan")
        return sum(sum(s) for s in self.samples) / n

    def waiting_tail_fractions(self, n_max: int) -> list:
        """Empirical [x_0..x_n_max]: fraction of census ticks with >= n waiting."""
        total = sum(self.census_waiting.values())
        if total == 0:
            raise ValueError("no census ticks recorded")
        out = []
        for n in range(n_max + 1):
            at_least = sum(c for k, c in self.census_waiting.items() if k >= n)
            out.append(at_least / total)
        return out


def insensitivity_check(workers_per_server: int, rho: float, dist_a: dict,
                        dist_b: dict, seeds, n_servers: int = 8,
                        intra: str = "ps", slice_us: float = 5.0,
                        requests_per_seed: int = 200000,
                        census_interval_us: float = 47.0) -> float:
    """Run join-shortest-queue racks under two service distributions of equal
    mean and return the total variation distance between their per-server
    queue-length histograms (sampled at Poisson epochs, pooled over seeds).

    Dispatch uses proactive outstanding counts (exact at the dispatcher), so
    the runs realize the idealized JSQ discipline rather than the
    reply-delayed telemetry variants, whose staleness artifacts depend on the
    service law and would confound the comparison.

    The simulator import is deferred so this module stays usable standalone.
    """
    from .config import ExperimentConfig
    from .runner import run_point
    from .workload import ServiceDistribution

    mean_a = ServiceDistribution.from_config(dist_a).mean_us
    mean_b = ServiceDistribution.from_config(dist_b).mean_us
    if abs(mean_a - mean_b) > 1e-6 * mean_a:
        raise ValueError(f"distributions must share a mean, got {mean_a} "
                         f"and {mean_b}")
    hists = []
    for dist in (dist_a, dist_b):
        census: dict = {}
        exp = ExperimentConfig.from_dict({
            "name": "insensitivity",
            "servers": {"count": n_servers, "workers": workers_per_server},
            "workload": {"service": dist},
            "policy": {"kind": "shortest"},
            "tracking": {"kind": "proactive"},
            "intra": {"kind": intra, "slice_us": slice_us},
            "sweep": {"loads": [rho], "seeds": list(seeds),
                      "requests_per_point": requests_per_seed},
            "census_interval_us": census_interval_us,
        })
        for seed in seeds:
            rec = run_point(exp, "default", rho, seed)
            for k, c in rec.census_system.items():
                census[k] = census.get(k, 0) + c
        hists.append(census)
    return tv_distance(hists[0], hists[1])
