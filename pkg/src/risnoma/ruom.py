"""Fairness-efficiency bilevel optimizer.

The outer (fairness) stage minimizes the worst per-UAV outage over power
coefficient vectors enumerated by a progressive grid search whose resolution
shrinks geometrically; the inner (efficiency) stage then trims or grows each
UAV's RIS element count until its outage sits just below the threshold.
Iterate until the power vector stops moving.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .noma import OutageModel, PowerAllocation

__all__ = [
    "NoFeasibleAllocationError",
    "RisCapacityExhausted",
    "RuomParams",
    "RisAssignment",
    "RuomIteration",
    "RuomTrace",
    "RuomResult",
    "pgs",
    "evaluate_candidates",
    "ruom",
]


class NoFeasibleAllocationError(RuntimeError):
    """The grid search produced no feasible power vector at any resolution."""


@dataclass(frozen=True)
class RisCapacityExhausted:
    """Efficiency-stage event: a RIS ran out of elements with outage still
    above threshold.  The algorithm records it and moves on."""

    iteration: int
    rank: int
    ris: int
    outage: float


@dataclass(frozen=True)
class RuomParams:
    lam: float = 0.1  # resolution scaling factor per refinement
    delta: float = 1e-3  # outage threshold
    eps_in: float = 1e-1  # initial search resolution
    eps_ac: float = 1e-8  # accuracy threshold ending the refinement loop
    eps_conv: float = 1e-4  # convergence tolerance on ||beta_t - beta_{t-1}||
    max_iter: int = 100
    warm_start: bool = False  # reuse beta_{t-1} to seed the fairness loop

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.eps_ac < self.eps_in <= 1.0:
            raise ValueError("require 0 < eps_ac < eps_in <= 1")
        if self.eps_conv <= 0 or self.max_iter < 1:
            raise ValueError("eps_conv must be positive and max_iter >= 1")


@dataclass(frozen=True)
class RisAssignment:
    """Element counts per (rank, ris) with per-RIS capacity caps."""

    n: tuple  # n[rank-1] = (ris_index, count)
    caps: dict

    def __post_init__(self):
        sums = {}
        for ris_k, count in self.n:
            if count < 0:
                raise ValueError("element counts must be nonnegative")
            sums[ris_k] = sums.get(ris_k, 0) + count
        for ris_k, total in sums.items():
            if total > self.caps[ris_k]:
                raise ValueError(f"RIS {ris_k} over capacity: {total} > {self.caps[ris_k]}")

    @property
    def counts(self):
        return tuple(count for _, count in self.n)

    @property
    def total(self) -> int:
        return sum(count for _, count in self.n)


@dataclass(frozen=True)
class RuomIteration:
    t: int
    beta: tuple
    n_per_rank: tuple
    outages: tuple
    max_outage: float
    total_elements: int


@dataclass
class RuomTrace:
    iterations: list = field(default_factory=list)
    events: list = field(default_factory=list)


@dataclass(frozen=True)
class RuomResult:
    beta_star: PowerAllocation
    assignment: RisAssignment
    trace: RuomTrace
    converged: bool
    iterations: int


def _feasible(beta, rates) -> bool:
    m_users = len(beta)
    if abs(math.fsum(beta) - 1.0) > 1e-9 * m_users:
        return False
    for j in range(m_users):
        phi = 2.0 ** float(rates[j]) - 1.0
        if not phi * math.fsum(beta[j + 1:]) < beta[j]:
            return False
    return True


def _axis_values(eps_sr: float, low: float, high: float):
    """Grid multiples of eps_sr inside [low, high], with 1.0 always a member."""
    lo_k = math.ceil(low / eps_sr - 1e-9)
    hi_k = math.floor(high / eps_sr + 1e-9)
    vals = [k * eps_sr for k in range(max(lo_k, 0), hi_k + 1) if k * eps_sr <= 1.0 + 1e-12]
    if low <= 1.0 <= high and not any(abs(v - 1.0) <= 1e-12 for v in vals):
        vals.append(1.0)
    return vals


def pgs(beta_prev, eps_sr: float, rates, m_users: int):
    """Progressive grid search: feasible power vectors at resolution eps_sr.

    Without an incumbent the full grid {0, eps, 2eps, ..., 1}^M is scanned;
    with one, each coordinate is restricted to [beta_m - eps, beta_m + eps]
    and the incumbent itself is kept in the set so refinements never regress.
    Returns PowerAllocations in lexicographic order; empty is a legal result.
    """
    if not 0.0 < eps_sr <= 1.0:
        raise ValueError("eps_sr must lie in (0, 1]")
    if beta_prev is None:
        axes = [_axis_values(eps_sr, 0.0, 1.0)] * m_users
    else:
        if beta_prev.m_users != m_users:
            raise ValueError("incumbent dimension mismatch")
        axes = [
            _axis_values(eps_sr, max(0.0, b - eps_sr), min(1.0, b + eps_sr))
            for b in beta_prev.beta
        ]

    found = {}

    def visit(candidate):
        if not _feasible(candidate, rates):
            return
        try:
            alloc = PowerAllocation(candidate)
        except ValueError:
            # feasible under (16b)-(16c) but violating the strict NOMA
            # ordering (possible for target rates < 1); not a valid allocation
            return
        found.setdefault(tuple(round(b, 12) for b in candidate), alloc)

    # depth-first with sum pruning: partial sums above 1 (or unable to reach 1)
    # can never satisfy the sum constraint
    tol = 1e-9 * m_users
    suffix_max = [0.0] * (m_users + 1)
    for i in range(m_users - 1, -1, -1):
        suffix_max[i] = suffix_max[i + 1] + max(axes[i])

    def enumerate_axes(depth, prefix, partial):
        if depth == m_users:
            visit(prefix)
            return
        for v in axes[depth]:
            new_sum = partial + v
            if new_sum > 1.0 + tol:
                break
            if new_sum + suffix_max[depth + 1] < 1.0 - tol:
                continue
            enumerate_axes(depth + 1, prefix + (v,), new_sum)

    enumerate_axes(0, (), 0.0)
    if beta_prev is not None:
        visit(beta_prev.beta)
    return [found[key] for key in sorted(found)]


def evaluate_candidates(candidates, objective, max_workers=None) -> PowerAllocation:
    """Argmin of `objective` over candidate allocations.

    Ties on the objective break toward the lexicographically smallest beta,
    so the winner is independent of evaluation order (and of max_workers).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate set")
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scores = list(pool.map(objective, candidates))
    else:
        scores = [objective(c) for c in candidates]
    best = min(zip(scores, (c.beta for c in candidates), candidates), key=lambda s: s[:2])
    return best[2]


def ruom(model: OutageModel, params: RuomParams, max_workers=None) -> RuomResult:
    """Run the bilevel outage-minimization loop over a resolved scenario.

    Element counts persist across outer iterations; the fairness loop restarts
    from a global grid each iteration unless params.warm_start is set.
    """
    m_users = model.m_users
    rates = model.rates
    caps = {}
    for link in model.links:
        caps[link.ris] = link.max_ris_elements
    n_per_rank = [0] * m_users
    trace = RuomTrace()
    beta_prev = None
    beta_t = None
    converged = False

    def shared_elements(ris_k):
        return sum(
            n_per_rank[i] for i in range(m_users) if model.links[i].ris == ris_k
        )

    for t in range(1, params.max_iter + 1):
        # --- fairness: progressive grid search on beta ---
        eps_sr = params.eps_in
        beta_t = beta_prev if params.warm_start else None
        while eps_sr > params.eps_ac:
            candidates = pgs(beta_t, eps_sr, rates, m_users)
            if not candidates and beta_t is None:
                # the coarsest global grid is infeasible; finer global grids
                # are combinatorially explosive, so fail fast per contract
                raise NoFeasibleAllocationError(
                    f"no feasible power vector at resolution {eps_sr:g} "
                    f"for M={m_users}, rates={rates}"
                )
            if candidates:
                beta_t = evaluate_candidates(
                    candidates,
                    lambda b: max(model.outages(b, n_per_rank)),
                    max_workers=max_workers,
                )
            eps_sr *= params.lam

        # --- efficiency: trim or grow each rank's element count ---
        for m in range(1, m_users + 1):
            idx = m - 1
            ris_k = model.links[idx].ris
            while n_per_rank[idx] >= 1 and model.outage(m, beta_t, n_per_rank[idx]) < params.delta:
                n_per_rank[idx] -= 1
            while True:
                out_m = model.outage(m, beta_t, n_per_rank[idx])
                if out_m < params.delta:
                    break
                if shared_elements(ris_k) >= caps[ris_k]:
                    trace.events.append(
                        RisCapacityExhausted(iteration=t, rank=m, ris=ris_k, outage=out_m)
                    )
                    break
                n_per_rank[idx] += 1

        outs = model.outages(beta_t, n_per_rank)
        trace.iterations.append(
            RuomIteration(
                t=t,
                beta=beta_t.beta,
                n_per_rank=tuple(n_per_rank),
                outages=tuple(outs),
                max_outage=max(outs),
                total_elements=sum(n_per_rank),
            )
        )

        if beta_prev is not None:
            delta_beta = math.sqrt(
                sum((a - b) ** 2 for a, b in zip(beta_t.beta, beta_prev.beta))
            )
            if delta_beta < params.eps_conv:
                converged = True
                break
        beta_prev = beta_t

    assignment = RisAssignment(
        n=tuple(
            (model.links[i].ris, n_per_rank[i]) for i in range(m_users)
        ),
        caps=caps,
    )
    return RuomResult(
        beta_star=beta_t,
        assignment=assignment,
        trace=trace,
        converged=converged,
        iterations=len(trace.iterations),
    )
