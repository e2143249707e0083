"""Offline mercury/water-flowing allocation over all channel accesses.

Two optimal algorithms compute the same allocation:

* :func:`nda_solve` starts from one epoch per pool and repeatedly merges the
  first adjacent pair whose water level decreases, re-solving only the merged
  epoch, until levels are non-decreasing.
* :func:`fsa_solve` searches forward for transition pools: the candidate
  first epoch spans all remaining pools; while any energy-causality
  constraint inside it is violated, the last pool is dropped; on success the
  next epoch starts at the first excluded pool.

Optimality of either output is checked by :func:`kkt_verify`: per-stream
stationarity, cumulative energy causality with a terminally empty battery,
non-decreasing water levels, and level changes only at empty-battery
boundaries.  :func:`dwf_reference` provides the Gaussian-input closed-form
solution (classical water-filling per epoch, no bisection) as an independent
cross-check.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidInputError, TableRangeError
from .scenario import Scenario
from .tables import MmseTable, table_for
from .waterfill import EpochProblem, EpochSolution, classical_wf, solve_epoch

__all__ = [
    "Pool",
    "Epoch",
    "RunStats",
    "Allocation",
    "KktReport",
    "build_pools",
    "stream_tables",
    "nda_solve",
    "fsa_solve",
    "dwf_reference",
    "kkt_verify",
    "allocation_csv",
    "allocation_from_csv",
]


@dataclass(frozen=True)
class Pool:
    """Accesses between two consecutive energy arrivals (1-based, inclusive)."""

    index: int
    start: int
    end: int
    energy: float

    @property
    def arrival_access(self) -> int:
        return self.start

    @property
    def n_accesses(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Epoch:
    """A maximal run of pools sharing one water level (1-based pool indices)."""

    pools: tuple[int, ...]
    water_level: float


@dataclass
class RunStats:
    hg_calls: int = 0
    wall_seconds: float = 0.0


@dataclass
class Allocation:
    """Powers plus the water-level structure that produced them.

    ``pool_water_levels`` and ``epoch_of_pool`` are NaN/-1 for allocations
    without a per-pool level structure (the online algorithm re-plans inside
    pools); ``access_water_levels`` is always populated.
    """

    powers: NDArray[np.float64]                 # (K, N) radiated power, W
    pool_water_levels: NDArray[np.float64]      # (J,)
    access_water_levels: NDArray[np.float64]    # (N,)
    epoch_of_pool: NDArray[np.int64]            # (J,), -1 when undefined
    epochs: tuple[Epoch, ...]
    stats: RunStats = field(default_factory=RunStats)


def build_pools(arrivals, n: int) -> list[Pool]:
    """Partition accesses 1..n into pools at the arrival instants."""
    arr = [(int(e), float(E)) for e, E in arrivals]
    if not arr:
        raise InvalidInputError("need at least one energy arrival")
    if arr[0][0] != 1:
        raise InvalidInputError("first arrival must be at access 1 (initial battery)")
    for (e0, _), (e1, _) in zip(arr, arr[1:]):
        if e1 <= e0:
            raise InvalidInputError("arrival accesses must be strictly increasing")
    if arr[-1][0] > n:
        raise InvalidInputError(f"arrival at access {arr[-1][0]} exceeds n = {n}")
    if any(E < 0.0 for _, E in arr):
        raise InvalidInputError("packet energies must be >= 0")
    pools = []
    for j, (e, E) in enumerate(arr):
        end = arr[j + 1][0] - 1 if j + 1 < len(arr) else n
        pools.append(Pool(index=j + 1, start=e, end=end, energy=E))
    return pools


def stream_tables(scenario: Scenario, **table_kwargs) -> tuple[MmseTable, ...]:
    """One cached mmse table per stream of the scenario."""
    return tuple(table_for(c, **table_kwargs) for c in scenario.constellations)


def _epoch_problem(scenario: Scenario, tables, pools: list[Pool]) -> EpochProblem:
    start, end = pools[0].start, pools[-1].end
    return EpochProblem(
        gains=scenario.gains[:, start - 1 : end],
        tables=tables,
        budget=sum(p.energy for p in pools),
        ts=scenario.ts,
        accesses=tuple(range(start, end + 1)),
    )


def _assemble(
    scenario: Scenario,
    pools: list[Pool],
    groups: list[list[Pool]],
    sols: list[EpochSolution],
    stats: RunStats,
) -> Allocation:
    powers = np.zeros((scenario.k, scenario.n))
    pool_levels = np.empty(len(pools))
    access_levels = np.empty(scenario.n)
    epoch_of_pool = np.empty(len(pools), dtype=np.int64)
    epochs = []
    for m, (grp, sol) in enumerate(zip(groups, sols)):
        s, e = grp[0].start, grp[-1].end
        powers[:, s - 1 : e] = sol.powers
        access_levels[s - 1 : e] = sol.water_level
        for p in grp:
            pool_levels[p.index - 1] = sol.water_level
            epoch_of_pool[p.index - 1] = m
        epochs.append(Epoch(pools=tuple(p.index for p in grp), water_level=sol.water_level))
    return Allocation(
        powers=powers,
        pool_water_levels=pool_levels,
        access_water_levels=access_levels,
        epoch_of_pool=epoch_of_pool,
        epochs=tuple(epochs),
        stats=stats,
    )


def _nda_loop(scenario: Scenario, pools: list[Pool], solve) -> Allocation:
    """Merge-on-decrease loop, parametrized by the per-epoch solver."""
    t0 = time.perf_counter()
    stats = RunStats()
    groups = [[p] for p in pools]
    sols = [solve(scenario, g, stats) for g in groups]
    # merge the first decreasing adjacent pair, re-solve it, restart the scan;
    # exact level ties count as non-decreasing
    while True:
        for m in range(len(groups) - 1):
            if sols[m].water_level > sols[m + 1].water_level * (1.0 + 1e-12):
                groups[m] = groups[m] + groups.pop(m + 1)
                sols.pop(m + 1)
                sols[m] = solve(scenario, groups[m], stats)
                break
        else:
            break
    stats.wall_seconds = time.perf_counter() - t0
    return _assemble(scenario, pools, groups, sols, stats)


def nda_solve(scenario: Scenario, tables: tuple[MmseTable, ...] | None = None) -> Allocation:
    """Optimal offline allocation by the non-decreasing water level algorithm."""
    tables = tables if tables is not None else stream_tables(scenario)
    pools = build_pools(scenario.arrivals, scenario.n)

    def solve(sc, group, stats):
        sol = solve_epoch(_epoch_problem(sc, tables, group))
        stats.hg_calls += sol.hg_calls
        return sol

    return _nda_loop(scenario, pools, solve)


def dwf_reference(scenario: Scenario) -> Allocation:
    """Gaussian-input closed-form reference: exact water-filling per epoch."""
    pools = build_pools(scenario.arrivals, scenario.n)

    def solve(sc, group, stats):
        start, end = group[0].start, group[-1].end
        sol = classical_wf(
            sc.gains[:, start - 1 : end],
            budget=sum(p.energy for p in group),
            ts=sc.ts,
        )
        stats.hg_calls += sol.hg_calls
        return sol

    return _nda_loop(scenario, pools, solve)


def fsa_solve(
    scenario: Scenario,
    ecc_oracle=None,
    tables: tuple[MmseTable, ...] | None = None,
) -> Allocation:
    """Optimal offline allocation by the forward transition-pool search.

    ``ecc_oracle``, a testing hook, replaces the energy-causality verdicts:
    entry ``i`` is True when the constraint at the boundary after pool
    ``i + 1`` holds.  With an oracle injected only the call count of the
    returned stats is meaningful.
    """
    tables = tables if tables is not None else stream_tables(scenario)
    pools = build_pools(scenario.arrivals, scenario.n)
    n_pools = len(pools)
    if ecc_oracle is not None and len(ecc_oracle) != n_pools - 1:
        raise InvalidInputError(
            f"ecc_oracle must give {n_pools - 1} boundary verdicts, got {len(ecc_oracle)}"
        )
    slack = 1e-9 * max(scenario.total_energy, 1.0)
    t0 = time.perf_counter()
    stats = RunStats()
    groups: list[list[Pool]] = []
    sols: list[EpochSolution] = []
    start = 0
    while start < n_pools:
        end = n_pools
        while True:
            group = pools[start:end]
            sol = solve_epoch(_epoch_problem(scenario, tables, group))
            stats.hg_calls += sol.hg_calls
            if _epoch_ecc_ok(scenario, group, sol, ecc_oracle, slack):
                break
            end -= 1  # drop the last pool and retry
        groups.append(group)
        sols.append(sol)
        start = end
    stats.wall_seconds = time.perf_counter() - t0
    return _assemble(scenario, pools, groups, sols, stats)


def _epoch_ecc_ok(scenario, group, sol, ecc_oracle, slack) -> bool:
    """Energy causality at every pool boundary strictly inside the epoch."""
    if len(group) == 1:
        return True
    if ecc_oracle is not None:
        return all(ecc_oracle[p.index - 1] for p in group[:-1])
    offset = group[0].start
    spent_per_access = scenario.ts * sol.powers.sum(axis=0)
    cum = np.cumsum(spent_per_access)
    avail = 0.0
    for p in group[:-1]:
        avail += p.energy
        if cum[p.end - offset] > avail + slack:
            return False
    return True


# ---------------------------------------------------------------------------
# KKT verification
# ---------------------------------------------------------------------------

@dataclass
class KktReport:
    stationarity_ok: bool
    stationarity_max_residual: float
    ecc_ok: bool
    ecc_max_violation: float
    terminal_ok: bool
    terminal_gap: float
    monotone_levels_ok: bool
    empty_battery_changes_ok: bool
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.stationarity_ok
            and self.ecc_ok
            and self.terminal_ok
            and self.monotone_levels_ok
            and self.empty_battery_changes_ok
        )


def kkt_verify(
    scenario: Scenario,
    alloc: Allocation,
    tol: float = 1e-7,
    tables: tuple[MmseTable, ...] | None = None,
) -> KktReport:
    """Check the sufficient optimality conditions of an offline allocation.

    (1) stationarity: active streams satisfy W * lam * mmse(lam * power) = 1
    to ``tol`` relative, inactive streams satisfy W * lam <= 1 + tol;
    (2) cumulative energy causality at every pool boundary, with an empty
    battery at the end; (3) water levels non-decreasing across pools;
    (4) level increases only where the battery emptied.
    """
    if alloc.powers.shape != (scenario.k, scenario.n):
        raise InvalidInputError(
            f"allocation shape {alloc.powers.shape} does not match scenario "
            f"{(scenario.k, scenario.n)}"
        )
    tables = tables if tables is not None else stream_tables(scenario)
    pools = build_pools(scenario.arrivals, scenario.n)
    if alloc.pool_water_levels.shape != (len(pools),):
        raise InvalidInputError("allocation pool levels do not match the pool count")
    msgs: list[str] = []

    # (1) stationarity
    max_resid = 0.0
    stat_ok = True
    for pool in pools:
        w = float(alloc.pool_water_levels[pool.index - 1])
        for n in range(pool.start, pool.end + 1):
            lam = scenario.gains[:, n - 1]
            pw = alloc.powers[:, n - 1]
            for k in range(scenario.k):
                if pw[k] > 0.0:
                    try:
                        m = tables[k].mmse_at(float(lam[k] * pw[k]))
                    except TableRangeError:
                        stat_ok = False
                        msgs.append(
                            f"stationarity: stream {k + 1} access {n} beyond table range"
                        )
                        continue
                    resid = abs(w * lam[k] * m - 1.0)
                    max_resid = max(max_resid, resid)
                    if resid > tol:
                        stat_ok = False
                else:
                    if w * lam[k] > 1.0 + tol:
                        stat_ok = False
                        msgs.append(
                            f"stationarity: inactive stream {k + 1} access {n} "
                            f"has W*lam = {w * lam[k]:.6g} > 1"
                        )
    if not stat_ok and not msgs:
        msgs.append(f"stationarity: max residual {max_resid:.3e} > tol {tol:.1e}")

    # (2) energy causality, terminal empty battery
    scale = max(scenario.total_energy, 1.0)
    spent_per_access = scenario.ts * alloc.powers.sum(axis=0)
    cum_spent = np.cumsum(spent_per_access)
    ecc_ok = True
    max_viol = 0.0
    avail = 0.0
    batteries = []
    for pool in pools:
        avail += pool.energy
        battery = avail - float(cum_spent[pool.end - 1])
        batteries.append(battery)
        viol = max(0.0, -battery)
        max_viol = max(max_viol, viol)
        if viol > tol * scale:
            ecc_ok = False
            msgs.append(f"ecc: pool {pool.index} overspends by {viol:.3e} J")
    terminal_gap = abs(batteries[-1])
    terminal_ok = terminal_gap <= tol * scale
    if not terminal_ok:
        msgs.append(f"terminal battery not empty: {batteries[-1]:.3e} J left")

    # (3) non-decreasing water levels
    levels = alloc.pool_water_levels
    mono_ok = True
    for j in range(len(pools) - 1):
        if levels[j + 1] < levels[j] - tol * max(1.0, abs(levels[j])):
            mono_ok = False
            msgs.append(
                f"water level decreases from pool {j + 1} ({levels[j]:.6g}) "
                f"to pool {j + 2} ({levels[j + 1]:.6g})"
            )

    # (4) level changes only at empty-battery boundaries
    empty_ok = True
    for j in range(len(pools) - 1):
        rises = levels[j + 1] > levels[j] + tol * max(1.0, abs(levels[j]))
        if rises and batteries[j] > tol * scale:
            empty_ok = False
            msgs.append(
                f"water level rises after pool {j + 1} with {batteries[j]:.3e} J banked"
            )

    return KktReport(
        stationarity_ok=stat_ok,
        stationarity_max_residual=max_resid,
        ecc_ok=ecc_ok,
        ecc_max_violation=max_viol,
        terminal_ok=terminal_ok,
        terminal_gap=terminal_gap,
        monotone_levels_ok=mono_ok,
        empty_battery_changes_ok=empty_ok,
        messages=msgs,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def allocation_from_csv(scenario: Scenario, text: str) -> Allocation:
    """Rebuild an allocation from its CSV export.

    Pool water levels are taken from each pool's first access, which matches
    the export for any per-pool-level allocation; epochs are restored from
    the epoch column.
    """
    import csv as _csv

    pools = build_pools(scenario.arrivals, scenario.n)
    powers = np.full((scenario.k, scenario.n), np.nan)
    access_levels = np.full(scenario.n, np.nan)
    epoch_of_pool = np.full(len(pools), -1, dtype=np.int64)
    reader = _csv.DictReader(io.StringIO(text))
    need = {"n", "k", "lambda", "sigma2", "water_level", "pool", "epoch"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise InvalidInputError(
            f"allocation CSV must have columns {sorted(need)}, got {reader.fieldnames}"
        )
    for row in reader:
        n = int(row["n"])
        k = int(row["k"])
        if not (1 <= n <= scenario.n and 1 <= k <= scenario.k):
            raise InvalidInputError(f"allocation row ({n}, {k}) outside the scenario")
        powers[k - 1, n - 1] = float(row["sigma2"])
        access_levels[n - 1] = float(row["water_level"])
        epoch_of_pool[int(row["pool"]) - 1] = int(row["epoch"]) - 1
    if np.any(np.isnan(powers)):
        raise InvalidInputError("allocation CSV does not cover every (n, k)")
    pool_levels = np.array([access_levels[p.start - 1] for p in pools])
    epochs = []
    for m in range(int(epoch_of_pool.max()) + 1 if epoch_of_pool.size else 0):
        members = tuple(int(p.index) for p in pools if epoch_of_pool[p.index - 1] == m)
        if members:
            epochs.append(Epoch(pools=members, water_level=float(pool_levels[members[0] - 1])))
    return Allocation(
        powers=powers,
        pool_water_levels=pool_levels,
        access_water_levels=access_levels,
        epoch_of_pool=epoch_of_pool,
        epochs=tuple(epochs),
        stats=RunStats(),
    )


def allocation_csv(scenario: Scenario, alloc: Allocation, path_or_buf=None) -> str | None:
    """Rows (n, k, lambda, sigma2, water_level, pool, epoch); 1-based indices."""
    pools = build_pools(scenario.arrivals, scenario.n)
    pool_of_access = np.empty(scenario.n, dtype=np.int64)
    for p in pools:
        pool_of_access[p.start - 1 : p.end] = p.index
    buf = io.StringIO()
    buf.write("n,k,lambda,sigma2,water_level,pool,epoch\n")
    for n in range(1, scenario.n + 1):
        pool_ix = int(pool_of_access[n - 1])
        epoch_ix = int(alloc.epoch_of_pool[pool_ix - 1])
        for k in range(1, scenario.k + 1):
            buf.write(
                f"{n},{k},{float(scenario.gains[k - 1, n - 1])!r},"
                f"{float(alloc.powers[k - 1, n - 1])!r},"
                f"{float(alloc.access_water_levels[n - 1])!r},{pool_ix},"
                f"{epoch_ix + 1 if epoch_ix >= 0 else -1}\n"
            )
    text = buf.getvalue()
    if path_or_buf is None:
        return text
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
    try:
        fh.write(text)
    finally:
        if own:
            fh.close()
    return None
