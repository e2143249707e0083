"""Precomputed mmse tables: forward/inverse evaluation and the mercury factor.

A :class:`MmseTable` materializes ``snr -> (mmse, mi)`` for one constellation
on a log-spaced grid (snr = 0 anchor plus points in [1e-3, snr_max]).  Both
values and exact derivatives are stored, so evaluation uses cubic Hermite
interpolation of ``log mmse`` (relative accuracy is uniform across the
exponential tail) and the inverse is the *exact* numerical inverse of that
interpolant, polished by a safeguarded Newton iteration.  Forward-then-invert
round trips are therefore consistent to near machine precision, which is what
the downstream water-level solver leans on.

Construction detail: the cheap vectorized Gauss-Hermite sweep is used only on
the snr prefix where it agrees with the exact pairwise-boundary rule (probed
at build time); the pairwise rule covers the rest.  The stored grid is
truncated where mmse falls below a positivity floor -- double precision
cannot represent the tail of e.g. BPSK anywhere near snr = 1e4 -- and
inversion below the stored floor raises :class:`TableRangeError` rather than
extrapolating.

Gaussian-input tables bypass interpolation entirely: mmse = 1/(1+snr),
inverse = 1/psi - 1, mercury factor identically 1.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .constellations import Constellation, _gh_mmse_grid, _pairwise_mmse
from .errors import InvalidInputError, TableBuildError, TableRangeError

__all__ = ["MmseTable", "build_table", "table_for", "clear_cache"]

DEFAULT_SNR_MAX = 1.0e4
DEFAULT_N_POINTS = 2048

# Smallest mmse kept in a table; below this the tail is numerically
# meaningless in double precision (and useless for power allocation).
MMSE_FLOOR = 1.0e-250

_LN2 = math.log(2.0)


def _hermite_eval(x, xs, ys, ds, derivative: bool = False):
    """Cubic Hermite evaluation with exact node derivatives.

    ``xs`` strictly increasing; queries must lie within [xs[0], xs[-1]].
    """
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
    h = xs[idx + 1] - xs[idx]
    t = (x - xs[idx]) / h
    y0, y1 = ys[idx], ys[idx + 1]
    d0, d1 = ds[idx] * h, ds[idx + 1] * h
    t2 = t * t
    t3 = t2 * t
    val = (
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * d1
    )
    if not derivative:
        return val
    dval = (
        (6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * d0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * d1
    ) / h
    return val, dval


@dataclass(frozen=True)
class MmseTable:
    """Monotone (snr -> mmse, mi) grid for one constellation, invertible."""

    constellation: Constellation
    snr_grid: NDArray[np.float64]
    mmse_values: NDArray[np.float64]
    mi_values: NDArray[np.float64]
    log_mmse: NDArray[np.float64]
    dlog_mmse: NDArray[np.float64]  # d(log mmse)/d snr, exact at the nodes
    snr_max_requested: float

    @property
    def label(self) -> str:
        return self.constellation.label

    @property
    def is_gaussian(self) -> bool:
        return self.constellation.is_gaussian

    @property
    def snr_top(self) -> float:
        return float(self.snr_grid[-1])

    @property
    def mmse_floor(self) -> float:
        """Smallest mmse the table models; inversion below this errors out."""
        if self.is_gaussian:
            return 1.0 / (1.0 + self.snr_top)
        return float(self.mmse_values[-1])

    # -- forward maps --------------------------------------------------

    def mmse_at(self, snr):
        """Interpolated mmse; scalar in, scalar out (arrays pass through)."""
        scalar = np.isscalar(snr)
        s = np.atleast_1d(np.asarray(snr, dtype=float))
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise InvalidInputError("snr must be finite and >= 0")
        if self.is_gaussian:
            out = 1.0 / (1.0 + s)
        else:
            if np.any(s > self.snr_top * (1.0 + 1e-12)):
                raise TableRangeError(
                    f"snr {float(s.max())!r} beyond the {self.label} table top "
                    f"{self.snr_top!r}; rebuild with a larger snr_max"
                )
            out = np.exp(_hermite_eval(np.minimum(s, self.snr_top),
                                       self.snr_grid, self.log_mmse, self.dlog_mmse))
        return float(out[0]) if scalar else out

    def mi_at(self, snr):
        """Interpolated mutual information in bits; saturates past the grid top."""
        scalar = np.isscalar(snr)
        s = np.atleast_1d(np.asarray(snr, dtype=float))
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise InvalidInputError("snr must be finite and >= 0")
        if self.is_gaussian:
            out = 0.5 * np.log2(1.0 + s)
        else:
            # d mi/d snr = mmse/(2 ln 2); beyond the stored tail the residual
            # integral is below the positivity floor, so clamping is exact
            # at double precision.
            dmi = self.mmse_values / (2.0 * _LN2)
            out = _hermite_eval(np.minimum(s, self.snr_top),
                                self.snr_grid, self.mi_values, dmi)
        return float(out[0]) if scalar else out

    # -- inverse map ----------------------------------------------------

    def mmse_inverse(self, psi):
        """snr such that mmse(snr) = psi; exact inverse of :meth:`mmse_at`.

        psi >= 1 maps to 0 (mmse(0) = 1).  psi at or below the table floor
        raises :class:`TableRangeError`.
        """
        scalar = np.isscalar(psi)
        p = np.atleast_1d(np.asarray(psi, dtype=float))
        if np.any(~np.isfinite(p)) or np.any(p <= 0.0):
            raise InvalidInputError("psi must be finite and > 0")
        if self.is_gaussian:
            out = np.where(p >= 1.0, 0.0, 1.0 / p - 1.0)
            return float(out[0]) if scalar else out
        out = np.zeros_like(p)
        active = p < 1.0
        if np.any(active):
            pa = p[active]
            if np.any(pa < self.mmse_floor):
                raise TableRangeError(
                    f"mmse {float(pa.min())!r} below the {self.label} table floor "
                    f"{self.mmse_floor!r}; the requested water level implies an snr "
                    "beyond the modeled range (rebuild with a larger snr_max)"
                )
            out[active] = self._invert_log(np.log(pa))
        return float(out[0]) if scalar else out

    def _invert_log(self, target: np.ndarray) -> np.ndarray:
        grid = self.snr_grid
        logm = self.log_mmse
        # log_mmse decreases along the grid; locate the bracketing cell
        idx = np.clip(logm.size - 1 - np.searchsorted(logm[::-1], target, side="left"),
                      0, logm.size - 2)
        lo = grid[idx].copy()
        hi = grid[idx + 1].copy()
        x = lo + (hi - lo) * np.clip(
            (logm[idx] - target) / np.maximum(logm[idx] - logm[idx + 1], 1e-300), 0.0, 1.0
        )
        done = np.zeros(x.shape, dtype=bool)
        for _ in range(80):
            f, df = _hermite_eval(x, grid, logm, self.dlog_mmse, derivative=True)
            resid = f - target
            done |= np.abs(resid) <= 1e-13 * np.maximum(np.abs(target), 1.0)
            if done.all():
                break
            above = resid > 0.0  # mmse too high -> snr too low
            lo = np.where(~done & above, x, lo)
            hi = np.where(~done & ~above, x, hi)
            step = np.where(df != 0.0, resid / df, 0.0)
            cand = x - step
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
            x = np.where(done, x, np.where(bad, 0.5 * (lo + hi), cand))
        return x

    # -- mercury factor ---------------------------------------------------

    def mercury_factor(self, psi):
        """G(psi) = 1/psi - mmse_inverse(psi) for psi in (0,1); 1 for psi >= 1."""
        scalar = np.isscalar(psi)
        p = np.atleast_1d(np.asarray(psi, dtype=float))
        if np.any(~np.isfinite(p)) or np.any(p <= 0.0):
            raise InvalidInputError("psi must be finite and > 0")
        if self.is_gaussian:
            out = np.ones_like(p)
            return float(out[0]) if scalar else out
        out = np.ones_like(p)
        active = p < 1.0
        if np.any(active):
            out[active] = 1.0 / p[active] - self.mmse_inverse(p[active])
        return float(out[0]) if scalar else out

    # -- persistence ------------------------------------------------------

    def to_csv(self, path_or_buf) -> None:
        """Write the (snr, mmse, mi) grid as CSV for inspection."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        fh = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
        try:
            fh.write("snr,mmse,mi_bits\n")
            for s, m, i in zip(self.snr_grid, self.mmse_values, self.mi_values):
                fh.write(f"{float(s)!r},{float(m)!r},{float(i)!r}\n")
        finally:
            if own:
                fh.close()

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _verify_grid(snr, mmse, label):
    """Enforce the table invariants, naming offenders on failure."""
    if abs(mmse[0] - 1.0) > 1e-9:
        raise TableBuildError(
            f"{label}: mmse at snr=0 is {mmse[0]!r}, expected 1", indices=[0]
        )
    bad = np.nonzero(np.diff(mmse) >= 0.0)[0]
    if bad.size:
        raise TableBuildError(
            f"{label}: mmse not strictly decreasing at grid indices {bad[:8].tolist()}",
            indices=bad.tolist(),
        )
    if np.any(mmse <= 0.0) or np.any(mmse > 1.0):
        bad = np.nonzero((mmse <= 0.0) | (mmse > 1.0))[0]
        raise TableBuildError(
            f"{label}: mmse values leave (0, 1] at indices {bad[:8].tolist()}",
            indices=bad.tolist(),
        )


def build_table(
    c: Constellation,
    snr_max: float = DEFAULT_SNR_MAX,
    n_points: int = DEFAULT_N_POINTS,
) -> MmseTable:
    """Build the mmse/mi table for a constellation.

    The grid is snr = 0 plus ``n_points - 1`` log-spaced values in
    [1e-3, snr_max].  For finite constellations the stored grid ends where
    mmse reaches the positivity floor (strict monotonicity in doubles is
    impossible past it); the requested ``snr_max`` is kept for reference.
    """
    snr_max = float(snr_max)
    if not snr_max > 0.0:
        raise InvalidInputError(f"snr_max must be > 0, got {snr_max!r}")
    if n_points < 64:
        raise InvalidInputError(f"n_points must be >= 64, got {n_points!r}")
    grid = np.concatenate([[0.0], np.geomspace(1e-3, snr_max, n_points - 1)])

    if c.is_gaussian:
        mmse = 1.0 / (1.0 + grid)
        mi = 0.5 * np.log2(1.0 + grid)
        return MmseTable(
            constellation=c,
            snr_grid=grid,
            mmse_values=mmse,
            mi_values=mi,
            log_mmse=np.log(mmse),
            dlog_mmse=-1.0 / (1.0 + grid),
            snr_max_requested=snr_max,
        )

    mmse, dmmse = _sweep_mmse(c, grid)

    # truncate the numerically meaningless tail before invariant checks
    keep = mmse.size
    while keep > 2 and (
        mmse[keep - 1] < MMSE_FLOOR
        or mmse[keep - 1] <= 0.0
        or mmse[keep - 1] >= mmse[keep - 2]
    ):
        keep -= 1
    grid, mmse, dmmse = grid[:keep], mmse[:keep], dmmse[:keep]
    _verify_grid(grid, mmse, c.label)

    mi = _integrate_mi(grid, mmse, dmmse)
    if np.any(np.diff(mi) < -1e-12):
        bad = np.nonzero(np.diff(mi) < -1e-12)[0]
        raise TableBuildError(
            f"{c.label}: mutual information decreases at indices {bad[:8].tolist()}",
            indices=bad.tolist(),
        )
    cap = c.max_information_bits()
    mi = np.minimum(np.maximum.accumulate(mi), cap)

    return MmseTable(
        constellation=c,
        snr_grid=grid,
        mmse_values=mmse,
        mi_values=mi,
        log_mmse=np.log(mmse),
        dlog_mmse=dmmse / mmse,
        snr_max_requested=snr_max,
    )


_SWEEP_ORDERS = (96, 192)


def _sweep_mmse(c: Constellation, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mmse, dmmse) over the grid: GH sweeps where probed-safe, pairwise above."""
    # probe each GH order against the exact pairwise rule on a log ladder;
    # trust is a prefix of the grid with a half-decade safety margin
    probes = grid[1:: max(grid.size // 32, 1)]
    exact = [_pairwise_mmse(c, float(s)) for s in probes]
    trust = {}
    for order in _SWEEP_ORDERS:
        gh_m, gh_d = _gh_mmse_grid(c, probes, order=order)
        bound = grid[-1]
        for i, s in enumerate(probes):
            em, ed = exact[i]
            ok = abs(gh_m[i] - em) <= 1e-9 * max(em, 1e-300) and abs(
                gh_d[i] - ed
            ) <= 1e-9 * max(abs(ed), 1e-300)
            if not ok:
                bound = float(s) * 0.5
                break
        trust[order] = bound

    mmse = np.empty_like(grid)
    dmmse = np.empty_like(grid)
    m0, d0 = _pairwise_mmse(c, 0.0)
    mmse[0], dmmse[0] = m0, d0
    done = grid == 0.0
    for order in _SWEEP_ORDERS:
        sel = np.nonzero(~done & (grid <= trust[order]))[0]
        # chunk the vectorized sweep to bound the (G, Q, Q, R) workspace
        chunk = max(1, int(4_000_000 / max(c.cardinality**2 * order, 1)))
        for k in range(0, sel.size, chunk):
            sub = sel[k : k + chunk]
            mmse[sub], dmmse[sub] = _gh_mmse_grid(c, grid[sub], order=order)
        done[sel] = True
    for i in np.nonzero(~done)[0]:
        mmse[i], dmmse[i] = _pairwise_mmse(c, float(grid[i]), step=0.4, log_cut=40.0)
    return mmse, dmmse


def _integrate_mi(grid, mmse, dmmse) -> np.ndarray:
    """Cumulative I(snr) in bits from dI/dsnr = mmse/2 (nats).

    Integrates the same log-space Hermite interpolant later used for
    evaluation, with an 8-point Gauss-Legendre rule per cell.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    logm = np.log(mmse)
    dlogm = dmmse / mmse
    h = np.diff(grid)
    mid = grid[:-1, None] + (gl_x[None, :] + 1.0) * 0.5 * h[:, None]
    vals = np.exp(_hermite_eval(mid.ravel(), grid, logm, dlogm)).reshape(mid.shape)
    cell = (vals * gl_w[None, :]).sum(axis=1) * 0.5 * h
    nats = np.concatenate([[0.0], np.cumsum(0.5 * cell)])
    return nats / _LN2


# ---------------------------------------------------------------------------
# caching: per-process dict, plus an optional on-disk cache directory
# (MERCURYFLOW_TABLE_CACHE) holding .npz snapshots of built tables
# ---------------------------------------------------------------------------

CACHE_ENV_VAR = "MERCURYFLOW_TABLE_CACHE"

_TABLE_CACHE: dict[tuple, MmseTable] = {}


def _disk_path(c: Constellation, snr_max: float, n_points: int):
    import hashlib
    import os
    from pathlib import Path

    root = os.environ.get(CACHE_ENV_VAR)
    if not root or c.is_gaussian:
        return None
    digest = hashlib.sha256(repr(c.cache_key() + (snr_max, n_points)).encode()).hexdigest()[:16]
    return Path(root) / f"{c.label}-{digest}.npz"


def _from_disk(c: Constellation, path, snr_max: float) -> MmseTable | None:
    if path is None or not path.exists():
        return None
    with np.load(path) as z:
        return MmseTable(
            constellation=c,
            snr_grid=z["snr_grid"],
            mmse_values=z["mmse_values"],
            mi_values=z["mi_values"],
            log_mmse=z["log_mmse"],
            dlog_mmse=z["dlog_mmse"],
            snr_max_requested=snr_max,
        )


def table_for(
    c: Constellation,
    snr_max: float = DEFAULT_SNR_MAX,
    n_points: int = DEFAULT_N_POINTS,
) -> MmseTable:
    """Build-or-fetch the table for a constellation.

    Hits the per-process cache first, then the optional on-disk cache named
    by the MERCURYFLOW_TABLE_CACHE environment variable, then builds.
    """
    key = c.cache_key() + (float(snr_max), int(n_points))
    tab = _TABLE_CACHE.get(key)
    if tab is None:
        path = _disk_path(c, float(snr_max), int(n_points))
        tab = _from_disk(c, path, float(snr_max))
        if tab is None:
            tab = build_table(c, snr_max=snr_max, n_points=n_points)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                np.savez(
                    path,
                    snr_grid=tab.snr_grid,
                    mmse_values=tab.mmse_values,
                    mi_values=tab.mi_values,
                    log_mmse=tab.log_mmse,
                    dlog_mmse=tab.dlog_mmse,
                )
        _TABLE_CACHE[key] = tab
    return tab


def clear_cache() -> None:
    _TABLE_CACHE.clear()
