"""Causal flowing-window allocation.

The transmitter re-plans at every *event* (a channel-state change or an
energy arrival, plus access 1): the energy currently in the battery is
spread over the next ``f_w`` accesses by the per-epoch solver, assuming the
channel stays at its current gains.  Powers up to the next event are
committed; the rest of the plan is discarded when the next event arrives.
Accesses past the window of the last plan before an event stay silent.

Only causal information enters each plan -- energy harvested at accesses
<= s_t minus energy already committed before s_t, and the gains at s_t --
so committed powers are invariant to any perturbation of the future.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import InvalidInputError
from .offline import Allocation, RunStats, build_pools
from .scenario import Scenario
from .tables import MmseTable
from .waterfill import EpochProblem, solve_epoch

__all__ = ["detect_events", "online_solve", "causal_ecc_check"]


def detect_events(scenario: Scenario) -> list[int]:
    """Sorted accesses where the gains change or a packet arrives; includes 1."""
    ev = {1}
    ev.update(e for e, _ in scenario.arrivals)
    changed = np.any(scenario.gains[:, 1:] != scenario.gains[:, :-1], axis=0)
    ev.update(int(i) + 2 for i in np.nonzero(changed)[0])
    return sorted(ev)


def online_solve(
    scenario: Scenario,
    f_w: int,
    tables: tuple[MmseTable, ...] | None = None,
) -> Allocation:
    """Causal allocation with flowing window ``f_w`` (accesses, >= 1)."""
    if not isinstance(f_w, (int, np.integer)) or f_w < 1:
        raise InvalidInputError(f"flowing window must be an integer >= 1, got {f_w!r}")
    if tables is None:
        from .offline import stream_tables

        tables = stream_tables(scenario)
    t0 = time.perf_counter()
    events = detect_events(scenario)
    arrivals = dict(scenario.arrivals)
    n = scenario.n
    powers = np.zeros((scenario.k, n))
    access_levels = np.zeros(n)
    stats = RunStats()
    harvested = 0.0
    spent = 0.0
    for t, s_t in enumerate(events):
        harvested += arrivals.get(s_t, 0.0)
        available = max(harvested - spent, 0.0)
        w_end = min(s_t + f_w - 1, n)
        frozen = np.repeat(scenario.gains[:, s_t - 1 : s_t], w_end - s_t + 1, axis=1)
        sol = solve_epoch(
            EpochProblem(
                gains=frozen,
                tables=tables,
                budget=available,
                ts=scenario.ts,
                accesses=tuple(range(s_t, w_end + 1)),
            )
        )
        stats.hg_calls += sol.hg_calls
        commit_end = events[t + 1] - 1 if t + 1 < len(events) else n
        upto = min(w_end, commit_end)
        powers[:, s_t - 1 : upto] = sol.powers[:, : upto - s_t + 1]
        access_levels[s_t - 1 : upto] = sol.water_level
        spent += scenario.ts * float(powers[:, s_t - 1 : commit_end].sum())
    stats.wall_seconds = time.perf_counter() - t0
    n_pools = len(build_pools(scenario.arrivals, n))
    return Allocation(
        powers=powers,
        pool_water_levels=np.full(n_pools, np.nan),
        access_water_levels=access_levels,
        epoch_of_pool=np.full(n_pools, -1, dtype=np.int64),
        epochs=(),
        stats=stats,
    )


def causal_ecc_check(scenario: Scenario, alloc: Allocation, tol: float = 1e-9):
    """(ok, worst_violation): prefix spent <= prefix harvested at every access."""
    harvested = np.zeros(scenario.n)
    for e, E in scenario.arrivals:
        harvested[e - 1 :] += E
    cum_spent = np.cumsum(scenario.ts * alloc.powers.sum(axis=0))
    viol = float(np.max(cum_spent - harvested, initial=0.0))
    return viol <= tol * max(scenario.total_energy, 1.0), viol
