"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion; any failure shows up as a normal pytest assertion.
"""

import time

import numpy as np
from scipy.linalg import expm

from blindrb.calibration import error_vs_overrotation
from blindrb.cliffords import CliffordGroup
from blindrb.encoding import build_dfs_basis, encoded_action_of, encoded_bloch
from blindrb.experiment import (ExperimentConfig, psb_measure, run_experiment)
from blindrb.fitting import (OFFSET_EXPONENTIAL, PURE_EXPONENTIAL, bootstrap_ci,
                             fit_blind_rb, fit_decay)
from blindrb.noise import NoiseModel
from blindrb.rng import keyed_rng
from blindrb.spins import (exchange_unitary, heisenberg_coupling,
                           phase_invariant_distance, zeeman_unitary)


def report(criterion: int, description: str, started: float) -> None:
    print(f"ACCEPTANCE {criterion}: PASS - {description} "
          f"({time.perf_counter() - started:.1f}s)")


def test_criterion_1_group_and_compilation():
    started = time.perf_counter()
    group = CliffordGroup()
    assert len(group.elements) == 24
    for element in group.elements:
        u = np.eye(8, dtype=complex)
        for pulse in element.pulse_sequence:
            u = exchange_unitary(*pulse.pair, pulse.theta) @ u
        action = encoded_action_of(u)
        assert action.subspace_preserving
        assert phase_invariant_distance(action.qubit_unitary,
                                        element.matrix) <= 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"group+compilation took {elapsed:.1f}s"
    report(1, "24 Cliffords, compiled pulse distance <= 1e-9", started)


def test_criterion_2_exchange_oracle_equivalence():
    started = time.perf_counter()
    rng = keyed_rng(2026, "acceptance-2")
    pairs = [(1, 2), (2, 3), (1, 3)]
    for _ in range(100):
        i, j = pairs[rng.integers(3)]
        theta = float(rng.uniform(0, 4 * np.pi))
        closed = exchange_unitary(i, j, theta)
        oracle = expm(-1j * theta * heisenberg_coupling(i, j))
        assert np.abs(closed - oracle).max() <= 1e-12
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"oracle comparison took {elapsed:.2f}s"
    report(2, "closed form == eigendecomposition exponential to 1e-12", started)


def test_criterion_3_dfs_invariance():
    started = time.perf_counter()
    rng = keyed_rng(2026, "acceptance-3")
    for _ in range(100):
        field = rng.normal(size=3) * float(rng.uniform(0.01, 100))
        duration = float(rng.uniform(0, 20))
        u = zeeman_unitary(np.tile(field, (3, 1)), duration)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        rotated = u @ psi
        assert np.abs(encoded_bloch(rotated) - encoded_bloch(psi)).max() <= 1e-9
        assert abs(psb_measure(rotated) - psb_measure(psi)) <= 1e-9
    report(3, "uniform fields leave encoded_bloch and psb_measure invariant", started)


def test_criterion_4_leakage_conservation_under_exchange():
    started = time.perf_counter()
    config = ExperimentConfig(
        lengths=(2, 4, 8, 16, 32, 64, 128), sequences_per_length=50,
        shots_per_sequence=200, seed=2026, measurement_mode="sampled",
        noise=NoiseModel(overrotation={"12": 0.05, "23": 0.05}))
    dataset = run_experiment(config, threads=4)
    fit = fit_blind_rb(dataset)
    boot = bootstrap_ci(dataset, n_resamples=300, seed=2026)

    assert abs(1.0 - fit.s_fit.lam) <= 3 * boot.sigma("lambda_s"), \
        f"lambda_S {fit.s_fit.lam} not consistent with 1"
    assert abs(fit.leakage_weighted) <= 3 * boot.sigma("l_weighted") + 1e-12, \
        f"leakage {fit.leakage_weighted} not consistent with 0"
    assert fit.error_per_clifford > 5 * boot.sigma("r") > 0, \
        f"r {fit.error_per_clifford} not significant at 5 sigma"
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"criterion 4 took {elapsed:.0f}s"
    report(4, "overrotation only: lambda_S = 1 (3 sigma), r > 0 (5 sigma)", started)


def test_criterion_5_overrotation_scaling():
    started = time.perf_counter()
    base = ExperimentConfig(
        lengths=(2, 4, 8, 16, 32, 64, 128, 256, 512), sequences_per_length=25,
        shots_per_sequence=1, seed=2026)
    scaling = error_vs_overrotation([0.01, 0.02, 0.04, 0.08], base,
                                    n_resamples=100, threads=4)
    assert abs(scaling.slope - 2.0) <= 0.2, f"slope {scaling.slope:.3f}"
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0, f"criterion 5 took {elapsed:.0f}s"
    report(5, f"log-log slope of r(eps) = {scaling.slope:.3f} (2.0 +- 0.2)", started)


def test_criterion_6_hyperfine_leakage_monotone():
    started = time.perf_counter()
    sigmas = (0.06, 0.08, 0.11)
    leak_rates, leak_los = [], []
    for sigma in sigmas:
        config = ExperimentConfig(
            lengths=(2, 4, 8, 16, 32, 64), sequences_per_length=40,
            shots_per_sequence=24, seed=2026,
            noise=NoiseModel(sigma_b=sigma, pulse_duration=1.0))
        dataset = run_experiment(config, threads=4)
        fit = fit_blind_rb(dataset)
        boot = bootstrap_ci(dataset, n_resamples=200, seed=2026)
        leak_rates.append(fit.leakage_raw)
        leak_los.append(fit.leakage_raw - 3 * boot.sigma("l_raw"))
    for sigma, rate, lo in zip(sigmas, leak_rates, leak_los):
        assert lo > 0, f"leakage at sigma_b={sigma} not positive at 3 sigma ({rate})"
    assert leak_rates[0] < leak_rates[1] < leak_rates[2], \
        f"leakage not monotone: {leak_rates}"
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0, f"criterion 6 took {elapsed:.0f}s"
    report(6, f"hyperfine leakage positive and monotone: {np.round(leak_rates, 4)}",
           started)


def test_criterion_7_noiseless_protocol_identity():
    started = time.perf_counter()
    config = ExperimentConfig(lengths=(1, 2, 4, 8, 16, 32), sequences_per_length=8,
                              shots_per_sequence=2, seed=2026)
    dataset = run_experiment(config)
    _, d = dataset.difference_signal()
    _, s = dataset.sum_signal()
    assert np.abs(d - 1.0).max() <= 1e-9
    assert np.abs(s - 1.0).max() <= 1e-9
    report(7, "noiseless D(m) = 1 and S(m) = 1 to 1e-9", started)


def test_criterion_8_fit_correctness():
    started = time.perf_counter()

    # exact recovery of a known offset exponential
    m = np.arange(1, 201, dtype=float)
    fit = fit_decay(m, 0.5 + 0.5 * 0.99 ** m, OFFSET_EXPONENTIAL)
    assert np.abs(fit.params - [0.5, 0.5, 0.99]).max() <= 1e-6

    # analytic Jacobians match central finite differences
    rng = keyed_rng(2026, "acceptance-8")
    grid = np.linspace(1, 120, 15)
    for model in (PURE_EXPONENTIAL, OFFSET_EXPONENTIAL):
        for _ in range(100):
            if model is PURE_EXPONENTIAL:
                params = np.array([rng.uniform(0.1, 2), rng.uniform(0.3, 0.999)])
            else:
                params = np.array([rng.uniform(-0.5, 0.5), rng.uniform(0.1, 2),
                                   rng.uniform(0.3, 0.999)])
            jac = model.jacobian(grid, params)
            for col in range(len(params)):
                dp = np.zeros_like(params)
                dp[col] = 1e-6
                fd = (model.predict(grid, params + dp)
                      - model.predict(grid, params - dp)) / 2e-6
                scale = np.maximum(np.abs(jac[:, col]), 1.0)
                assert np.max(np.abs(jac[:, col] - fd) / scale) <= 1e-6

    # bootstrap coverage: truth inside the 68% CI in 68% +- 5 sigma of trials
    from blindrb.experiment import RBDataset, RBRecord
    lam_true, trials, hits = 0.97, 200, 0
    for t in range(trials):
        trial_rng = keyed_rng(2026, "acceptance-8-coverage", t)
        records = []
        for m_val in (2, 4, 8, 16, 32, 64):
            depth = lam_true ** m_val
            for k in range(15):
                p0 = trial_rng.binomial(150, (1 + depth) / 2) / 150
                records.append(RBRecord(m_val, k, "expect0", p0, 150))
                records.append(RBRecord(m_val, k, "expect1", 1 - p0, 150))
        boot = bootstrap_ci(RBDataset(records=tuple(records)),
                            n_resamples=100, seed=t)
        lo, hi = boot.intervals["lambda_d"]
        hits += lo <= lam_true <= hi
    coverage = hits / trials
    sigma = np.sqrt(0.68 * 0.32 / trials)
    assert abs(coverage - 0.68) <= 5 * sigma, f"coverage {coverage:.3f}"
    report(8, f"fit recovery 1e-6, Jacobian 1e-6, CI coverage {coverage:.2f}",
           started)


def test_criterion_9_thread_determinism():
    started = time.perf_counter()
    config = ExperimentConfig(
        lengths=(2, 4, 8, 16), sequences_per_length=10, shots_per_sequence=25,
        seed=2026, measurement_mode="sampled",
        noise=NoiseModel(sigma_b=0.1, pulse_duration=1.0, idle_duration=0.2,
                         overrotation={"12": 0.02, "23": -0.01}))
    outputs = {threads: run_experiment(config, threads=threads).to_csv()
               for threads in (1, 4, 16)}
    assert outputs[1] == outputs[4] == outputs[16]
    assert outputs[1].encode() == outputs[4].encode()
    report(9, "byte-identical CSV at 1, 4 and 16 threads", started)
