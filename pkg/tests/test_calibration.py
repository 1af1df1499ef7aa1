import numpy as np
import pytest
from scipy.linalg import expm

from blindrb.calibration import (FLAG_FLAT, error_vs_overrotation,
                                 repeated_pulse_scan)
from blindrb.cliffords import PAIR_N, PAIR_Z
from blindrb.encoding import build_dfs_basis
from blindrb.experiment import ExperimentConfig, psb_projector
from blindrb.noise import NoiseModel
from blindrb.spins import heisenberg_coupling

BASIS = build_dfs_basis()


def oracle_p23(theta, repeats=1):
    """Independent path: exact expm evolution and projector expectation."""
    u = expm(-1j * theta * repeats * heisenberg_coupling(2, 3))
    state = u @ BASIS.state("q0,m=+1/2")
    return float(np.real(state.conj() @ psb_projector() @ state))


def test_noiseless_pair23_signal_matches_oracle_and_cosine_law():
    grid = np.linspace(0.2, 2 * np.pi - 0.2, 31)
    scan = repeated_pulse_scan(PAIR_N, grid, 1, seed=0)
    oracle = np.array([oracle_p23(t) for t in grid])
    assert np.abs(scan.p_singlet[0] - oracle).max() < 1e-12
    # closed form from the 120-degree axis geometry
    assert np.abs(scan.p_singlet[0] - (5 / 8 + 3 / 8 * np.cos(grid))).max() < 1e-12


def test_minimum_value_is_one_quarter():
    grid = np.linspace(np.pi - 0.3, np.pi + 0.3, 21)
    scan = repeated_pulse_scan(PAIR_N, grid, 1, seed=0)
    assert np.isclose(scan.p_singlet[0].min(), 0.25, atol=1e-12)
    assert np.isclose(scan.theta_pi, np.pi, atol=1e-9)


def test_pair12_routes_through_basis_change():
    # a z-axis pulse leaves |0> invariant; the scan inserts (2,3) pi pulses
    # automatically, reproducing the same cosine law
    grid = np.linspace(np.pi - 0.4, np.pi + 0.4, 17)
    scan = repeated_pulse_scan(PAIR_Z, grid, 1, seed=0)
    assert np.abs(scan.p_singlet[0] - (5 / 8 + 3 / 8 * np.cos(grid))).max() < 1e-12
    assert np.isclose(scan.theta_pi, np.pi, atol=1e-9)


def test_repeated_pulses_amplify():
    # N-fold repetition: p = 5/8 + 3/8 cos(N theta); the dip sharpens
    grid = np.linspace(np.pi - 0.15, np.pi + 0.15, 31)
    scan = repeated_pulse_scan(PAIR_N, grid, [1, 3], seed=0)
    assert scan.repeat_counts == (1, 3)
    assert np.abs(scan.p_singlet[1] - (5 / 8 + 3 / 8 * np.cos(3 * grid))).max() < 1e-11
    curv1 = np.ptp(scan.p_singlet[0])
    curv3 = np.ptp(scan.p_singlet[1])
    assert curv3 > 5 * curv1


def test_theta_pi_estimate_converges_quadratically():
    # grids deliberately offset so the discrete argmin misses pi
    errors = []
    for h in (0.3, 0.15, 0.075):
        grid = np.linspace(np.pi - 5.37 * h, np.pi + 4.63 * h, 11)
        scan = repeated_pulse_scan(PAIR_N, grid, 1, seed=0)
        errors.append(abs(scan.theta_pi - np.pi))
    assert errors[0] < 0.3 ** 2
    assert errors[2] <= errors[0]
    assert errors[2] < 0.075 ** 2


def test_overrotation_shifts_the_calibrated_angle():
    # with fractional overrotation eps the physical pi happens at pi/(1+eps)
    eps = 0.05
    model = NoiseModel(overrotation={"23": eps})
    grid = np.linspace(np.pi - 0.4, np.pi + 0.1, 41)
    scan = repeated_pulse_scan(PAIR_N, grid, 1, model=model, seed=0)
    assert np.isclose(scan.theta_pi, np.pi / (1 + eps), atol=1e-4)


def test_flat_response_flagged():
    model = NoiseModel(sigma_b=60.0, pulse_duration=1.0)
    grid = np.linspace(np.pi - 0.2, np.pi + 0.2, 11)
    scan = repeated_pulse_scan(PAIR_N, grid, 1, model=model, seed=3, shots=2)
    assert scan.flag == FLAG_FLAT
    assert np.isnan(scan.theta_pi)


def test_scan_input_validation():
    with pytest.raises(ValueError):
        repeated_pulse_scan(PAIR_N, np.linspace(1, 2, 3), 1)
    with pytest.raises(ValueError):
        repeated_pulse_scan(PAIR_N, np.array([1.0, 0.9, 1.1, 1.2, 1.3]), 1)
    with pytest.raises(ValueError):
        repeated_pulse_scan(PAIR_N, np.linspace(1, 2, 7), 0)


def test_scan_deterministic():
    model = NoiseModel(sigma_b=0.1, pulse_duration=1.0)
    grid = np.linspace(np.pi - 0.3, np.pi + 0.3, 9)
    a = repeated_pulse_scan(PAIR_N, grid, 3, model=model, seed=5, shots=4)
    b = repeated_pulse_scan(PAIR_N, grid, 3, model=model, seed=5, shots=4)
    assert np.array_equal(a.p_singlet, b.p_singlet)


BASE = ExperimentConfig(lengths=(2, 4, 8, 16, 32, 64, 128), sequences_per_length=12,
                        shots_per_sequence=1, seed=17)


def test_error_vs_overrotation_validation():
    with pytest.raises(ValueError):
        error_vs_overrotation([0.25], BASE)
    noisy = ExperimentConfig(lengths=(2, 4, 8), sequences_per_length=2,
                             shots_per_sequence=1, seed=1,
                             noise=NoiseModel(sigma_b=0.1))
    with pytest.raises(ValueError):
        error_vs_overrotation([0.01], noisy)


def test_error_vs_overrotation_scaling_and_symmetry():
    scaling = error_vs_overrotation([-0.04, 0.02, 0.04, 0.08], BASE,
                                    n_resamples=40)
    rates = {pt.epsilon: pt.error_per_clifford for pt in scaling.points}
    # quadratic scaling within a loose band (acceptance pins it tighter)
    assert 1.6 < scaling.slope < 2.4
    # even function: r(-eps) == r(+eps) within the bootstrap spread
    sig = next(pt for pt in scaling.points if pt.epsilon == 0.04)
    half_width = (sig.r_hi - sig.r_lo) / 2
    assert abs(rates[-0.04] - rates[0.04]) < 5 * max(half_width, 1e-5)
    # no leakage from overrotation
    for pt in scaling.points:
        assert abs(pt.leakage_weighted) <= 3 * max(pt.leakage_sigma, 1e-9) + 1e-9


def test_error_vs_overrotation_zero_is_zero():
    tiny = ExperimentConfig(lengths=(2, 4, 8), sequences_per_length=3,
                            shots_per_sequence=1, seed=2)
    scaling = error_vs_overrotation([0.0], tiny, n_resamples=20)
    assert scaling.points[0].error_per_clifford < 1e-9
    assert np.isnan(scaling.slope)


def test_scaling_csv_format():
    tiny = ExperimentConfig(lengths=(2, 4, 8, 16), sequences_per_length=4,
                            shots_per_sequence=1, seed=2)
    scaling = error_vs_overrotation([0.05], tiny, n_resamples=20)
    lines = scaling.to_csv().splitlines()
    assert lines[0] == "epsilon,r,r_lo,r_hi,l_raw,l_weighted,l_sigma"
    assert len(lines) == 2
