import math

import numpy as np
import pytest

from eprbsim.analytic import correlation_closed_form
from eprbsim.coincidence import (
    NoCoincidencesError,
    CoincidenceTable,
    chsh,
    chsh_max,
    count_coincidences,
    correlation,
    discretize_tag,
    four_correlations,
    s_from_table,
    s_max,
    s_theta,
    single_particle_rates,
)
from eprbsim.model import StationLog

SQRT2 = math.sqrt(2.0)


def _log(station, settings, outcomes, tags, setting_angles=(0.0, 1.0)):
    n = len(settings)
    return StationLog(
        station_id=station,
        time_unit=1.0,
        index=np.arange(1, n + 1),
        setting_index=np.array(settings, dtype=np.uint8),
        setting=np.asarray(setting_angles, dtype=float)[np.array(settings)],
        outcome=np.array(outcomes, dtype=np.int8),
        time_tag=np.array(tags, dtype=float),
    )


def test_discretize_tag():
    assert discretize_tag(0.5, 0.25) == 2
    assert discretize_tag(0.5001, 0.25) == 3
    assert discretize_tag(0.0, 0.25) == 1  # floor at 1 keeps zero tags pairable
    with pytest.raises(ValueError):
        discretize_tag(-0.1, 0.25)
    with pytest.raises(ValueError):
        discretize_tag(0.1, 0.0)


def test_single_pair_same_bin_coincides():
    a = _log(1, [0], [1], [0.1])
    b = _log(2, [1], [-1], [0.1])
    table = count_coincidences(a, b, 1.0, 1.0)
    assert table.n_coincidences == 1
    assert table.counts[0, 1, 0, 1] == 1


def test_far_tags_do_not_coincide():
    a = _log(1, [0], [1], [0.1])
    b = _log(2, [0], [1], [0.9])
    table = count_coincidences(a, b, 0.25, 0.25)
    # k1 = 1, k2 = 4, threshold ceil(W/tau) = 1
    assert table.n_coincidences == 0


def test_window_covering_full_range_counts_everything():
    rng = np.random.default_rng(2)
    n = 500
    a = _log(1, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    b = _log(2, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    table = count_coincidences(a, b, 1.0, 1.0)
    assert table.n_coincidences == n
    table_inf = count_coincidences(a, b, 0.001, math.inf)
    assert table_inf.n_coincidences == n


def test_count_rejects_mismatched_logs():
    a = _log(1, [0, 0], [1, 1], [0.1, 0.2])
    b = _log(2, [0], [1], [0.1])
    with pytest.raises(ValueError, match="index-aligned"):
        count_coincidences(a, b, 1.0, 1.0)
    with pytest.raises(ValueError, match="window"):
        count_coincidences(a, a, 1.0, 0.5)


def test_correlation_perfect_and_symmetric_cases():
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    counts[0, 0, 0, 0] = 5
    counts[0, 0, 1, 1] = 5
    table = CoincidenceTable(counts=counts, total_events=10)
    assert correlation(table, (0, 0)) == 1.0
    counts2 = np.zeros((2, 2, 2, 2), dtype=np.int64)
    counts2[0, 0] = 3
    table2 = CoincidenceTable(counts=counts2, total_events=12)
    assert correlation(table2, (0, 0)) == 0.0
    with pytest.raises(NoCoincidencesError):
        correlation(table, (1, 1))


def test_singles_conditioned_on_coincidence():
    # Three coincident events covering both settings at both stations, plus a
    # fourth far-apart event that must not reach the singles counts.
    a = _log(1, [0, 1, 0, 1], [1, -1, -1, -1], [0.05, 0.05, 0.05, 0.1])
    b = _log(2, [1, 0, 0, 0], [-1, 1, 1, 1], [0.05, 0.05, 0.05, 0.9])
    table = count_coincidences(a, b, 0.1, 0.1)
    assert table.n_coincidences == 3
    assert table.singles(1, 0, 1) == 1
    assert table.singles(1, 1, -1) == 1  # only the coincident setting-1 event
    assert table.singles(2, 1, -1) == 1
    rates = single_particle_rates(table)
    assert rates[(1, 0, 1)] == 0.5
    assert rates[(1, 0, -1)] == 0.5
    assert rates[(1, 1, 1)] + rates[(1, 1, -1)] == 1.0
    with pytest.raises(NoCoincidencesError):
        single_particle_rates(
            CoincidenceTable(counts=np.zeros((2, 2, 2, 2), dtype=np.int64), total_events=0)
        )


def test_unconditioned_singles_flag():
    a = _log(1, [0, 1], [1, -1], [0.05, 0.1])
    b = _log(2, [1, 0], [-1, 1], [0.05, 0.9])
    table = count_coincidences(a, b, 0.1, 0.1, include_unconditioned=True)
    assert table.singles_unconditioned is not None
    assert table.singles_unconditioned[0].sum() == 2  # all station-1 events
    assert table.singles_unconditioned[0, 1, 1] == 1  # setting 1, outcome -1


def test_singles_match_row_and_column_sums():
    rng = np.random.default_rng(8)
    n = 2000
    a = _log(1, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    b = _log(2, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    table = count_coincidences(a, b, 0.05, 0.1)
    for i in (0, 1):
        for x in (1, -1):
            xi = 0 if x == 1 else 1
            assert table.singles(1, i, x) == table.counts[i, :, xi, :].sum()
            assert table.singles(2, i, x) == table.counts[:, i, :, xi].sum()


def test_station_swap_transposes_table():
    rng = np.random.default_rng(12)
    n = 3000
    a = _log(1, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    b = _log(2, rng.integers(0, 2, n), rng.choice([-1, 1], n), rng.uniform(0, 1, n))
    t_ab = count_coincidences(a, b, 0.05, 0.1)
    t_ba = count_coincidences(b, a, 0.05, 0.1)
    assert np.array_equal(t_ba.counts, np.transpose(t_ab.counts, (1, 0, 3, 2)))
    for pair in ((0, 0), (0, 1), (1, 0), (1, 1)):
        assert correlation(t_ba, pair) == correlation(t_ab, (pair[1], pair[0]))


def test_chsh_arithmetic_and_bounds():
    assert chsh(-1.0, 1.0, -1.0, -1.0) == -4.0
    assert chsh(0.0, 0.0, 0.0, 0.0) == 0.0
    assert abs(chsh(0.3, -0.2, 0.9, 0.1)) <= 4.0
    with pytest.raises(ValueError):
        chsh(1.5, 0.0, 0.0, 0.0)


def test_chsh_max_over_sign_placements():
    assert chsh_max(1.0, 1.0, 1.0, 1.0) == 2.0
    assert chsh_max(-1.0, 1.0, -1.0, -1.0) == 4.0
    e = (0.7, -0.7, 0.7, 0.7)
    expect = max(
        abs(-e[0] + e[1] + e[2] + e[3]),
        abs(e[0] - e[1] + e[2] + e[3]),
        abs(e[0] + e[1] - e[2] + e[3]),
        abs(e[0] + e[1] + e[2] - e[3]),
    )
    assert chsh_max(*e) == pytest.approx(expect)


def _singlet(a, b):
    return -math.cos(2 * (a - b))


def test_s_theta_singlet_values():
    assert s_theta(_singlet, math.pi / 8) == pytest.approx(2 * SQRT2, abs=1e-12)
    assert s_theta(_singlet, 0.0) == pytest.approx(2.0, abs=1e-12)
    # matches 3cos(2t) - cos(6t) everywhere
    for t in np.linspace(0, math.pi, 40):
        assert s_theta(_singlet, t) == pytest.approx(3 * math.cos(2 * t) - math.cos(6 * t), abs=1e-9)


def test_s_theta_product_form_is_window_free_sine():
    # Fixed-polarization source at pi/6 measured with equal settings per
    # station (theta, theta + pi/4): all four setting pairs estimate the same
    # E and S(theta) = sin 4(pi/6 - theta).
    eta1 = math.pi / 6
    eta2 = eta1 + math.pi / 2

    for t in np.linspace(0, math.pi, 23):
        e = math.cos(2 * (t - eta1)) * math.cos(2 * (t + math.pi / 4 - eta2))
        s = -chsh(e, e, e, e)
        assert s == pytest.approx(math.sin(4 * (eta1 - t)), abs=1e-9)


def test_s_from_table_orientation():
    # Build a table whose four pair correlations are all exactly -1
    # (aligned-settings anticorrelation): oriented S must be +2.
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for i in (0, 1):
        for j in (0, 1):
            counts[i, j, 0, 1] = 5
            counts[i, j, 1, 0] = 5
    table = CoincidenceTable(counts=counts, total_events=40)
    assert four_correlations(table) == (-1.0, -1.0, -1.0, -1.0)
    assert s_from_table(table) == pytest.approx(2.0)


def test_s_max_singlet_reaches_quantum_bound():
    assert s_max(_singlet, grid=64) == pytest.approx(2 * SQRT2, abs=1e-4)


def test_s_max_sawtooth_reaches_classical_bound():
    saw = lambda a, b: correlation_closed_form(a, b, 0.0)
    assert s_max(saw, grid=64) == pytest.approx(2.0, abs=1e-3)


def test_s_max_product_form_obeys_classical_bound():
    eta1, eta2 = math.pi / 6, math.pi / 6 + math.pi / 2
    prod = lambda a, b: math.cos(2 * (a - eta1)) * math.cos(2 * (b - eta2))
    val = s_max(prod, grid=16, rotation_invariant=False)
    assert val <= 2.0 + 1e-6
    assert val == pytest.approx(2.0, abs=5e-3)


def test_s_max_rejects_tiny_grid():
    with pytest.raises(ValueError):
        s_max(_singlet, grid=4)
