"""Baselines, mutual-information scoring, energy sweeps, complexity ensembles.

Baselines against the optimal offline allocation ("mwflow", the merge-based
solver):

* ``pbp-hgwf`` -- mercury/water-filling pool by pool: each pool spends its
  own packet inside itself, no water flows across pools.
* ``pbp-wf``   -- classical Gaussian water-filling pool by pool, scored
  under the true constellations.
* ``dwf``      -- the Gaussian-optimal offline allocation (water levels and
  powers computed as if inputs were Gaussian), scored under the true
  constellations.
* ``online``   -- the causal flowing-window algorithm.

All scoring goes through the per-stream mmse tables, in bits summed over
streams and accesses.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .constellations import gaussian
from .errors import InvalidInputError
from .offline import (
    Allocation,
    Epoch,
    RunStats,
    build_pools,
    dwf_reference,
    fsa_solve,
    nda_solve,
    stream_tables,
)
from .online import online_solve
from .scenario import Scenario, generate, rescale_energy
from .tables import MmseTable
from .waterfill import EpochProblem, classical_wf, solve_epoch

__all__ = [
    "STRATEGIES",
    "SweepResult",
    "ComplexityEnsemble",
    "evaluate_mi",
    "run_strategy",
    "pbp_solve",
    "dwf_solve",
    "best_window",
    "sweep_energy",
    "complexity_ensemble",
    "sweep_csv",
    "complexity_csv",
    "trace_csv",
]

STRATEGIES = ("mwflow", "fsa", "online", "pbp-hgwf", "pbp-wf", "dwf")


def evaluate_mi(
    scenario: Scenario,
    alloc: Allocation,
    tables: tuple[MmseTable, ...] | None = None,
) -> float:
    """Total mutual information of an allocation in bits.

    Sum over streams and accesses of mi_k(lambda * power), evaluated on the
    per-stream tables (snr beyond a truncated table top scores at the
    saturated value, which is exact at double precision).
    """
    if alloc.powers.shape != (scenario.k, scenario.n):
        raise InvalidInputError("allocation shape does not match the scenario")
    tables = tables if tables is not None else stream_tables(scenario)
    total = 0.0
    for k, tab in enumerate(tables):
        total += float(np.sum(tab.mi_at(scenario.gains[k] * alloc.powers[k])))
    return total


def pbp_solve(
    scenario: Scenario,
    inputs: str = "tables",
    tables: tuple[MmseTable, ...] | None = None,
) -> Allocation:
    """Pool-by-pool allocation: each packet is spent inside its own pool.

    ``inputs="tables"`` uses the mercury/water-filling epoch solver;
    ``inputs="gaussian"`` uses exact classical water-filling.
    """
    if inputs not in ("tables", "gaussian"):
        raise InvalidInputError(f"inputs must be 'tables' or 'gaussian', got {inputs!r}")
    pools = build_pools(scenario.arrivals, scenario.n)
    if inputs == "tables":
        tables = tables if tables is not None else stream_tables(scenario)
    powers = np.zeros((scenario.k, scenario.n))
    levels = np.empty(len(pools))
    access_levels = np.empty(scenario.n)
    stats = RunStats()
    for p in pools:
        gains = scenario.gains[:, p.start - 1 : p.end]
        if inputs == "gaussian":
            sol = classical_wf(gains, budget=p.energy, ts=scenario.ts)
        else:
            sol = solve_epoch(
                EpochProblem(
                    gains=gains,
                    tables=tables,
                    budget=p.energy,
                    ts=scenario.ts,
                    accesses=tuple(range(p.start, p.end + 1)),
                )
            )
        stats.hg_calls += sol.hg_calls
        powers[:, p.start - 1 : p.end] = sol.powers
        levels[p.index - 1] = sol.water_level
        access_levels[p.start - 1 : p.end] = sol.water_level
    return Allocation(
        powers=powers,
        pool_water_levels=levels,
        access_water_levels=access_levels,
        epoch_of_pool=np.arange(len(pools), dtype=np.int64),
        epochs=tuple(Epoch(pools=(p.index,), water_level=levels[p.index - 1]) for p in pools),
        stats=stats,
    )


def dwf_solve(scenario: Scenario) -> Allocation:
    """Offline optimum for Gaussian inputs; score it under the true inputs.

    Runs the merge-based solver with every constellation replaced by the
    ideal Gaussian, so the returned powers are the directional water-filling
    allocation.
    """
    as_gaussian = replace(scenario, constellations=(gaussian(),) * scenario.k)
    return nda_solve(as_gaussian)


def run_strategy(
    scenario: Scenario,
    name: str,
    f_w: int | None = None,
    tables: tuple[MmseTable, ...] | None = None,
) -> Allocation:
    """Dispatch a strategy by CLI name."""
    if name == "mwflow" or name == "nda":
        return nda_solve(scenario, tables=tables)
    if name == "fsa":
        return fsa_solve(scenario, tables=tables)
    if name == "online":
        if f_w is None:
            raise InvalidInputError("the online strategy needs a flowing window")
        return online_solve(scenario, f_w, tables=tables)
    if name == "pbp-hgwf":
        return pbp_solve(scenario, "tables", tables=tables)
    if name == "pbp-wf":
        return pbp_solve(scenario, "gaussian")
    if name == "dwf":
        return dwf_solve(scenario)
    if name == "dwf-reference":
        return dwf_reference(scenario)
    raise InvalidInputError(f"unknown strategy {name!r}")


def best_window(
    scenario: Scenario,
    candidates=None,
    tables: tuple[MmseTable, ...] | None = None,
) -> tuple[int, dict[int, float]]:
    """Train the flowing window: the MI-maximizing f_w over ``candidates``.

    Defaults to every window in 1..N; ties resolve to the smallest window.
    Returns (best_f_w, {f_w: mi_bits}).
    """
    tables = tables if tables is not None else stream_tables(scenario)
    cands = list(candidates) if candidates is not None else list(range(1, scenario.n + 1))
    if not cands or any(f < 1 for f in cands):
        raise InvalidInputError("window candidates must be integers >= 1")
    scores = {}
    for f_w in cands:
        alloc = online_solve(scenario, int(f_w), tables=tables)
        scores[int(f_w)] = evaluate_mi(scenario, alloc, tables=tables)
    best = max(sorted(scores), key=lambda f: scores[f])
    return best, scores


# ---------------------------------------------------------------------------
# energy sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    energies: NDArray[np.float64]
    curves: dict[str, NDArray[np.float64]]   # strategy -> MI bits per energy

    def dominance_gap(self) -> float:
        """Most any baseline exceeds mwflow, in bits (<= 0 when dominated)."""
        if "mwflow" not in self.curves:
            raise InvalidInputError("dominance needs the mwflow curve")
        ref = self.curves["mwflow"]
        gap = -np.inf
        for name, curve in self.curves.items():
            if name != "mwflow":
                gap = max(gap, float(np.max(curve - ref)))
        return gap


def _sweep_point(args) -> tuple[int, dict[str, float]]:
    i, scenario, strategies, f_w = args
    tables = stream_tables(scenario)
    out = {}
    for name in strategies:
        alloc = run_strategy(scenario, name, f_w=f_w, tables=tables)
        out[name] = evaluate_mi(scenario, alloc, tables=tables)
    return i, out


def sweep_energy(
    base_params: dict,
    energy_grid,
    strategies=("mwflow", "online", "pbp-hgwf", "pbp-wf", "dwf"),
    f_w: int | None = None,
    jobs: int = 1,
) -> SweepResult:
    """MI of each strategy versus total harvested energy.

    ``base_params`` are :func:`mercuryflow.scenario.generate` arguments
    without ``total_energy``; the same seed is reused at every grid point
    with the packet energies rescaled, so curves differ only in scale.
    """
    grid = np.asarray(list(energy_grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise InvalidInputError("energy grid must be non-empty and positive")
    base = generate(total_energy=1.0, **base_params)
    tasks = [
        (i, rescale_energy(base, float(E)), tuple(strategies), f_w)
        for i, E in enumerate(grid)
    ]
    curves = {name: np.zeros(grid.size) for name in strategies}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    for i, point in results:
        for name, mi in point.items():
            curves[name][i] = mi
    return SweepResult(energies=grid, curves=curves)


# ---------------------------------------------------------------------------
# complexity ensemble
# ---------------------------------------------------------------------------

@dataclass
class ComplexityEnsemble:
    j_values: tuple[int, ...]
    seeds: dict[int, list[int]]              # J -> seed per run
    nda_calls: dict[int, list[int]]
    fsa_calls: dict[int, list[int]]
    fitted_q: float
    fitted_p: float

    def bounds_ok(self) -> bool:
        """Every sample inside the analytic best/worst call bounds."""
        for j in self.j_values:
            if any(not (j <= c <= 2 * j - 1) for c in self.nda_calls[j]):
                return False
            if any(not (1 <= c <= j * (j + 1) // 2) for c in self.fsa_calls[j]):
                return False
        return True


def _complexity_run(args) -> tuple[int, int, int, int]:
    j, seed, params = args
    scenario = generate(j=j, seed=seed, **params)
    tables = stream_tables(scenario)
    a = nda_solve(scenario, tables=tables)
    f = fsa_solve(scenario, tables=tables)
    return j, seed, a.stats.hg_calls, f.stats.hg_calls


def complexity_ensemble(
    j_grid,
    runs: int,
    params: dict | None = None,
    base_seed: int = 1000,
    jobs: int = 1,
) -> ComplexityEnsemble:
    """Record solver call counts over seeded scenarios and fit the averages.

    The mean-call models fitted by least squares are
    ``E{C_nda} = J(q+1) - q`` and ``E{C_fsa} = (J^2/2 + J/2 - 1) p + 1``.
    ``params`` are :func:`generate` arguments without ``j``/``seed``; the
    default is a light single-stream Gaussian setup with two accesses per
    pool and uniformly random packet energies.
    """
    j_values = tuple(int(j) for j in j_grid)
    if any(j < 1 for j in j_values):
        raise InvalidInputError("every J must be >= 1")
    tasks = []
    for j in j_values:
        p = dict(params) if params is not None else {
            "n": 2 * j,
            "k": 1,
            "ts": 1.0,
            "total_energy": float(j),
            "constellations": ("gaussian",),
            "gain_model": "static",
        }
        if "n" not in p:
            p["n"] = 2 * j
        for r in range(runs):
            tasks.append((j, base_seed + 7919 * j + r, p))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_complexity_run, tasks))
    else:
        results = [_complexity_run(t) for t in tasks]
    seeds = {j: [] for j in j_values}
    nda_calls = {j: [] for j in j_values}
    fsa_calls = {j: [] for j in j_values}
    for j, seed, cn, cf in results:
        seeds[j].append(seed)
        nda_calls[j].append(cn)
        fsa_calls[j].append(cf)

    # least squares through the model forms, one mean point per J
    num_q = den_q = num_p = den_p = 0.0
    for j in j_values:
        mean_n = float(np.mean(nda_calls[j]))
        mean_f = float(np.mean(fsa_calls[j]))
        xq = j - 1.0
        num_q += (mean_n - j) * xq
        den_q += xq * xq
        xp = j * j / 2.0 + j / 2.0 - 1.0
        num_p += (mean_f - 1.0) * xp
        den_p += xp * xp
    fitted_q = num_q / den_q if den_q > 0 else float("nan")
    fitted_p = num_p / den_p if den_p > 0 else float("nan")
    return ComplexityEnsemble(
        j_values=j_values,
        seeds=seeds,
        nda_calls=nda_calls,
        fsa_calls=fsa_calls,
        fitted_q=fitted_q,
        fitted_p=fitted_p,
    )


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------

def sweep_csv(result: SweepResult, path_or_buf=None) -> str | None:
    buf = io.StringIO()
    buf.write("energy,strategy,mi_bits\n")
    for name, curve in result.curves.items():
        for e, mi in zip(result.energies, curve):
            buf.write(f"{float(e)!r},{name},{float(mi)!r}\n")
    return _emit(buf, path_or_buf)


def complexity_csv(ens: ComplexityEnsemble, path_or_buf=None) -> str | None:
    buf = io.StringIO()
    buf.write("J,seed,alg,calls\n")
    for j in ens.j_values:
        for seed, c in zip(ens.seeds[j], ens.nda_calls[j]):
            buf.write(f"{j},{seed},nda,{c}\n")
        for seed, c in zip(ens.seeds[j], ens.fsa_calls[j]):
            buf.write(f"{j},{seed},fsa,{c}\n")
    return _emit(buf, path_or_buf)


def trace_csv(
    scenario: Scenario,
    alloc: Allocation,
    tables: tuple[MmseTable, ...] | None = None,
    path_or_buf=None,
) -> str | None:
    """Per-access levels: (n, k, inv_gain, mercury_level, water_level, power)."""
    tables = tables if tables is not None else stream_tables(scenario)
    buf = io.StringIO()
    buf.write("n,k,inv_gain,mercury_level,water_level,power\n")
    for n in range(1, scenario.n + 1):
        w = float(alloc.access_water_levels[n - 1])
        for k in range(1, scenario.k + 1):
            lam = float(scenario.gains[k - 1, n - 1])
            psi = 1.0 / (w * lam) if w > 0.0 else np.inf
            g = tables[k - 1].mercury_factor(min(psi, 1.0))
            mercury = g / lam
            buf.write(
                f"{n},{k},{1.0 / lam!r},{float(mercury)!r},{w!r},"
                f"{float(alloc.powers[k - 1, n - 1])!r}\n"
            )
    return _emit(buf, path_or_buf)


def _emit(buf: io.StringIO, path_or_buf):
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
