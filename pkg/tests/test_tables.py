import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mercuryflow import constellations as cons
from mercuryflow import tables as tb
from mercuryflow.errors import InvalidInputError, TableBuildError, TableRangeError

from conftest import FINITE_BUILTINS


def test_gaussian_table_matches_closed_forms(builtin_tables):
    t = builtin_tables["gaussian"]
    assert np.max(np.abs(t.mmse_values - 1.0 / (1.0 + t.snr_grid))) < 1e-12
    assert t.mmse_inverse(0.25) == pytest.approx(3.0, abs=1e-14)
    assert t.mmse_inverse(1.0) == 0.0
    assert t.mercury_factor(0.3) == 1.0
    assert t.mi_at(3.0) == pytest.approx(1.0, abs=1e-14)


def test_round_trip_all_interior_grid_points(builtin_tables):
    t = builtin_tables["bpsk"]
    s = t.snr_grid[1:-1]
    back = t.mmse_inverse(t.mmse_at(s))
    assert np.max(np.abs(back - s) / s) < 1e-6


def test_inverse_of_exact_mmse(builtin_tables):
    psi = cons.mmse_exact(cons.bpsk(), 2.0)
    assert builtin_tables["bpsk"].mmse_inverse(psi) == pytest.approx(2.0, rel=1e-6)


def test_inverse_edge_cases(builtin_tables):
    t = builtin_tables["4pam"]
    assert t.mmse_inverse(1.0) == 0.0
    assert t.mmse_inverse(1.7) == 0.0  # above mmse(0)
    with pytest.raises(InvalidInputError):
        t.mmse_inverse(0.0)
    with pytest.raises(InvalidInputError):
        t.mmse_inverse(-0.2)


def test_inverse_below_floor_raises_range_error(builtin_tables):
    t = builtin_tables["bpsk"]
    with pytest.raises(TableRangeError, match="snr_max"):
        t.mmse_inverse(t.mmse_floor * 0.5)


def test_forward_beyond_top_raises(builtin_tables):
    t = builtin_tables["bpsk"]
    with pytest.raises(TableRangeError):
        t.mmse_at(t.snr_top * 2.0)


def test_invalid_constellation_rejected_before_build():
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", np.array([-1.0, 1.0]), np.array([0.7, 0.4]))


def test_table_invariants(builtin_tables):
    for name in FINITE_BUILTINS:
        t = builtin_tables[name]
        assert abs(t.mmse_values[0] - 1.0) < 1e-9
        assert np.all(np.diff(t.mmse_values) < 0.0)
        assert np.all((t.mmse_values > 0.0) & (t.mmse_values <= 1.0))
        assert np.all(np.diff(t.mi_values) >= 0.0)
        assert t.mi_values[-1] <= t.constellation.max_information_bits() + 1e-12
        assert np.all(np.diff(t.snr_grid) > 0.0)
        assert t.snr_grid[0] == 0.0


def test_forward_matches_quadrature(builtin_tables):
    rng = np.random.default_rng(5)
    for name in FINITE_BUILTINS:
        t = builtin_tables[name]
        for s in np.exp(rng.uniform(math.log(1e-3), math.log(50.0), 12)):
            exact = cons.mmse_exact(cons.by_name(name), float(s))
            assert abs(t.mmse_at(float(s)) - exact) / exact < 1e-8


def test_mi_interp_matches_quadrature(builtin_tables):
    rng = np.random.default_rng(6)
    for name in FINITE_BUILTINS:
        t = builtin_tables[name]
        for s in np.exp(rng.uniform(math.log(1e-2), math.log(80.0), 8)):
            assert t.mi_at(float(s)) == pytest.approx(
                cons.mutual_information(cons.by_name(name), float(s)), abs=1e-8
            )


def test_truncation_of_underflowing_tails(builtin_tables):
    t = builtin_tables["bpsk"]
    # the BPSK tail underflows far below snr_max; the stored grid stops there
    assert 500.0 < t.snr_top < t.snr_max_requested
    assert t.mmse_floor >= tb.MMSE_FLOOR
    t32 = builtin_tables["32pam"]
    assert t32.snr_top == pytest.approx(1e4)


def test_mercury_factor_values(builtin_tables):
    t = builtin_tables["bpsk"]
    assert t.mercury_factor(1.5) == 1.0
    grid = np.linspace(0.02, 0.99, 200)
    g = t.mercury_factor(grid)
    assert np.all(np.diff(g) < 0.0)  # strictly decreasing for BPSK
    assert np.all(g > 0.0)


def test_mercury_factor_nonincreasing_all_finite(builtin_tables):
    grid = np.linspace(0.02, 0.99, 200)
    for name in FINITE_BUILTINS:
        g = builtin_tables[name].mercury_factor(grid)
        assert np.all(np.diff(g) <= 1e-12)


def test_build_rejects_small_grid():
    with pytest.raises(InvalidInputError):
        tb.build_table(cons.bpsk(), n_points=32)
    with pytest.raises(InvalidInputError):
        tb.build_table(cons.bpsk(), snr_max=0.0)


def test_verify_grid_names_offending_indices():
    snr = np.array([0.0, 1.0, 2.0, 3.0])
    bad = np.array([1.0, 0.5, 0.6, 0.4])  # rises at index 1 -> 2
    with pytest.raises(TableBuildError) as err:
        tb._verify_grid(snr, bad, "synthetic")
    assert 1 in err.value.indices


def test_csv_export(builtin_tables, tmp_path):
    t = builtin_tables["4pam"]
    path = tmp_path / "t.csv"
    t.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "snr,mmse,mi_bits"
    assert len(lines) == t.snr_grid.size + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == pytest.approx(1.0, abs=1e-9)


def test_disk_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv(tb.CACHE_ENV_VAR, str(tmp_path))
    tb.clear_cache()
    try:
        small = tb.table_for(cons.bpsk(), snr_max=10.0, n_points=64)
        files = list(tmp_path.glob("*.npz"))
        assert len(files) == 1
        tb.clear_cache()
        again = tb.table_for(cons.bpsk(), snr_max=10.0, n_points=64)
        assert np.array_equal(small.snr_grid, again.snr_grid)
        assert np.array_equal(small.mmse_values, again.mmse_values)
    finally:
        tb.clear_cache()


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e-6, max_value=0.999999))
def test_forward_of_inverse_round_trip(psi):
    t = tb.table_for(cons.pam(4))
    snr = t.mmse_inverse(psi)
    assert t.mmse_at(snr) == pytest.approx(psi, rel=1e-9)
