"""Blind randomized benchmarking: paired sequences, simulation, datasets.

Each random Clifford sequence is run twice under an identical measurement:
variant ``expect0`` appends the recovery gate ``inverse(net)`` so the ideal
outcome is the initial state ``|0>``, variant ``expect1`` appends the same
recovery followed by the logical X so the ideal outcome is ``|1>``.  The
measurement (singlet probability on dots 1,2) is blind to which variant ran.
Per length m the difference signal ``D(m) = <p0> - <p1>`` isolates qubit
error and decays to zero; the sum ``S(m) = <p0> + <p1>`` starts at 1 and
decays only through leakage out of the encoded sector.

Both variants of a pair see the same noise realization shot-for-shot
(``paired_noise``), which maximizes cancellation in D(m); an unpaired mode
exists for sensitivity studies.  Every random draw is keyed by purpose and
(m, sequence, shot) ids, so a dataset is a pure function of (config, seed)
regardless of thread count.
"""

from __future__ import annotations

import io
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cliffords import CliffordElement, CliffordGroup, ExchangePulse, clifford_group
from .encoding import build_dfs_basis
from .noise import NoiseModel, NoiseRealization, noisy_pulse_unitary, sample_realization
from .rng import keyed_rng
from .spins import DIM, zeeman_unitary

VARIANTS = ("expect0", "expect1")
MEASUREMENT_MODES = {
    "analytic": "analytic",
    "analytic-probability": "analytic",
    "sampled": "sampled",
    "binomial-sampled": "sampled",
}

CSV_HEADER = "m,sequence_id,variant,p_singlet,shots"


@dataclass(frozen=True)
class ExperimentConfig:
    lengths: tuple[int, ...]
    sequences_per_length: int
    shots_per_sequence: int
    seed: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    measurement_mode: str = "analytic"
    paired_noise: bool = True
    visibility: float = 1.0
    dark_fraction: float = 0.0

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ValueError("lengths must not be empty")
        if lengths[0] < 1:
            raise ValueError(f"sequence lengths must be >= 1, got {lengths[0]}")
        if any(b >= a for a, b in zip(lengths[1:], lengths)):
            raise ValueError("lengths must be strictly increasing")
        if self.sequences_per_length < 1:
            raise ValueError("sequences_per_length must be >= 1")
        if self.shots_per_sequence < 1:
            raise ValueError("shots_per_sequence must be >= 1")
        mode = MEASUREMENT_MODES.get(self.measurement_mode)
        if mode is None:
            raise ValueError(
                f"measurement_mode must be one of {sorted(set(MEASUREMENT_MODES))}, "
                f"got {self.measurement_mode!r}")
        object.__setattr__(self, "measurement_mode", mode)
        if not (0.0 < self.visibility <= 1.0):
            raise ValueError(f"visibility must lie in (0, 1], got {self.visibility}")
        if not (0.0 <= self.dark_fraction < 1.0):
            raise ValueError(f"dark_fraction must lie in [0, 1), got {self.dark_fraction}")
        if self.visibility + self.dark_fraction > 1.0 + 1e-12:
            raise ValueError("visibility + dark_fraction must not exceed 1")


@dataclass(frozen=True)
class RBRecord:
    m: int
    sequence_id: int
    variant: str
    p_singlet: float
    shots: int


@dataclass(frozen=True)
class RBDataset:
    """Blind-pair return probabilities plus the derived D(m), S(m) columns."""

    records: tuple[RBRecord, ...]

    def __post_init__(self):
        seen = {}
        for rec in self.records:
            if rec.variant not in VARIANTS:
                raise ValueError(f"unknown variant {rec.variant!r}")
            if not (0.0 <= rec.p_singlet <= 1.0):
                raise ValueError(f"p_singlet out of [0,1]: {rec.p_singlet}")
            seen.setdefault((rec.m, rec.sequence_id), set()).add(rec.variant)
        for key, variants in seen.items():
            if variants != set(VARIANTS):
                raise ValueError(f"sequence {key} missing one blind variant")

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(sorted({rec.m for rec in self.records}))

    def pair_probabilities(self, m: int) -> dict[int, tuple[float, float]]:
        """sequence_id -> (p_expect0, p_expect1) at length m."""
        out: dict[int, list[float | None]] = {}
        for rec in self.records:
            if rec.m != m:
                continue
            slot = out.setdefault(rec.sequence_id, [None, None])
            slot[VARIANTS.index(rec.variant)] = rec.p_singlet
        return {k: (v[0], v[1]) for k, v in sorted(out.items())}

    def difference_signal(self) -> tuple[np.ndarray, np.ndarray]:
        ms = np.array(self.lengths)
        d = np.array([np.mean([p0 - p1 for p0, p1 in self.pair_probabilities(m).values()])
                      for m in ms])
        return ms, d

    def sum_signal(self) -> tuple[np.ndarray, np.ndarray]:
        ms = np.array(self.lengths)
        s = np.array([np.mean([p0 + p1 for p0, p1 in self.pair_probabilities(m).values()])
                      for m in ms])
        return ms, s

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for rec in self.records:
            lines.append(f"{rec.m},{rec.sequence_id},{rec.variant},"
                         f"{rec.p_singlet:.17g},{rec.shots}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "RBDataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER.split(","):
            raise ValueError(f"unexpected CSV header: {header}")
        records = []
        for row in reader:
            if not row:
                continue
            m, seq_id, variant, p, shots = row
            records.append(RBRecord(int(m), int(seq_id), variant, float(p), int(shots)))
        return cls(records=tuple(records))


@lru_cache(maxsize=1)
def psb_projector() -> np.ndarray:
    """Projector for Pauli-spin-blockade readout: singlet on dots (1,2)."""
    basis = build_dfs_basis()
    q0 = basis.qubit_states[:2]  # |0,+1/2>, |0,-1/2> span singlet_12 (x) dot3
    proj = q0.T @ q0.conj()
    proj.setflags(write=False)
    return proj


def psb_measure(state) -> float:
    """Singlet-return probability; accepts an 8-vector or an 8x8 density matrix."""
    state = np.asarray(state, dtype=complex)
    proj = psb_projector()
    if state.ndim == 1:
        val = np.real(state.conj() @ proj @ state)
    else:
        val = np.real(np.trace(proj @ state))
    return float(min(1.0, max(0.0, val)))


@dataclass(frozen=True)
class BlindPair:
    """The two pulse programs of one random sequence."""

    gate_indices: tuple[int, ...]
    recovery_expect0: int
    recovery_expect1: int
    pulses_expect0: tuple[ExchangePulse, ...]
    pulses_expect1: tuple[ExchangePulse, ...]


def build_blind_pair(sequence: list[CliffordElement],
                     group: CliffordGroup | None = None) -> BlindPair:
    """Close the sequence with one recovery Clifford per variant.

    ``expect0`` appends ``inverse(net)`` so the ideal total is the identity;
    ``expect1`` appends the single group element ``X * inverse(net)`` so the
    ideal total is the logical X.  Both variants therefore run m+1 equally
    noisy compiled gates and are indistinguishable to the measurement.
    """
    group = group or clifford_group()
    indices = tuple(e.index for e in sequence)
    net = group.compose_sequence(indices)
    recovery0 = group.inverse(net)
    recovery1 = group.multiply(group.x_index, recovery0)

    def flatten(gates):
        return tuple(p for idx in gates for p in group.elements[idx].pulse_sequence)

    return BlindPair(
        gate_indices=indices,
        recovery_expect0=recovery0,
        recovery_expect1=recovery1,
        pulses_expect0=flatten(indices + (recovery0,)),
        pulses_expect1=flatten(indices + (recovery1,)),
    )


class _ShotEvolver:
    """Applies pulses for one noise realization, caching repeated unitaries."""

    def __init__(self, model: NoiseModel, realization: NoiseRealization):
        self.model = model
        self.realization = realization
        self._pulse_cache: dict = {}
        self._idle_u: np.ndarray | None = None

    def _pulse_unitary(self, pulse: ExchangePulse, index: int) -> np.ndarray:
        if self.realization.theta_jitter is not None:
            return noisy_pulse_unitary(pulse, self.model, self.realization, index)
        key = (pulse.pair, pulse.theta, pulse.overrotation_tag)
        u = self._pulse_cache.get(key)
        if u is None:
            u = noisy_pulse_unitary(pulse, self.model, self.realization)
            self._pulse_cache[key] = u
        return u

    def run(self, pulses, initial: np.ndarray) -> np.ndarray:
        state = initial
        idle = self.model.idle_duration > 0
        if idle and self._idle_u is None:
            self._idle_u = zeeman_unitary(self.realization.fields,
                                          self.model.idle_duration)
        for index, pulse in enumerate(pulses):
            state = self._pulse_unitary(pulse, index) @ state
            if idle:
                state = self._idle_u @ state
        return state / np.linalg.norm(state)


def initial_state() -> np.ndarray:
    return build_dfs_basis().state("q0,m=+1/2")


def simulate_shot(pulses, model: NoiseModel, realization: NoiseRealization,
                  initial: np.ndarray | None = None,
                  rng: np.random.Generator | None = None) -> float:
    """Evolve one shot and measure; with ``rng`` returns a Bernoulli draw."""
    state = initial if initial is not None else initial_state()
    p = psb_measure(_ShotEvolver(model, realization).run(pulses, state))
    if rng is None:
        return p
    return float(rng.random() < p)


def _readout(p: float, config: ExperimentConfig) -> float:
    return min(1.0, max(0.0, config.visibility * p + config.dark_fraction))


def _run_pair(config: ExperimentConfig, group: CliffordGroup,
              init: np.ndarray, m: int, k: int) -> tuple[RBRecord, RBRecord]:
    model = config.noise
    n_shots = config.shots_per_sequence
    sequence, _ = group.sample_sequence(m, config.seed, stream=("sequence", m, k))
    pair = build_blind_pair(sequence, group)
    n_pulses = max(len(pair.pulses_expect0), len(pair.pulses_expect1))

    # noise identical for every shot when there is nothing shot-dependent to
    # draw, or when the redraw cadence is one realization per sequence
    static_noise = not model.quasistatic_fields_vary and model.theta_jitter == 0.0
    shot_independent = static_noise or model.redraw == "per_sequence"

    def realization(shot: int, variant: str) -> NoiseRealization:
        shot_key: tuple = (0,) if shot_independent else (shot,)
        if not config.paired_noise:
            shot_key = shot_key + (variant,)
        return sample_realization(model, config.seed, (m, k), shot_key, n_pulses)

    variant_pulses = dict(zip(VARIANTS, (pair.pulses_expect0, pair.pulses_expect1)))
    probs = {v: np.empty(n_shots) for v in VARIANTS}
    if shot_independent:
        shared = _ShotEvolver(model, realization(0, VARIANTS[0])) \
            if (config.paired_noise or static_noise) else None
        for variant in VARIANTS:
            evolver = shared if shared is not None \
                else _ShotEvolver(model, realization(0, variant))
            p = _readout(psb_measure(evolver.run(variant_pulses[variant], init)), config)
            probs[variant][:] = p
    else:
        for shot in range(n_shots):
            shared = _ShotEvolver(model, realization(shot, VARIANTS[0])) \
                if config.paired_noise else None
            for variant in VARIANTS:
                evolver = shared if shared is not None \
                    else _ShotEvolver(model, realization(shot, variant))
                probs[variant][shot] = _readout(
                    psb_measure(evolver.run(variant_pulses[variant], init)), config)

    records = []
    for variant in VARIANTS:
        if config.measurement_mode == "sampled":
            rng = keyed_rng(config.seed, "measurement", m, k, variant)
            outcomes = rng.random(n_shots) < probs[variant]
            p_hat = float(np.mean(outcomes))
        else:
            p_hat = float(np.mean(probs[variant]))
        records.append(RBRecord(m=m, sequence_id=k, variant=variant,
                                p_singlet=p_hat, shots=n_shots))
    return records[0], records[1]


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RBDataset:
    """Simulate the full blind RB protocol; deterministic in (config, seed)."""
    group = clifford_group()
    init = initial_state()
    tasks = [(m, k) for m in config.lengths
             for k in range(config.sequences_per_length)]
    if threads <= 1:
        results = [_run_pair(config, group, init, m, k) for m, k in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda mk: _run_pair(config, group, init, *mk), tasks))
    records = tuple(rec for pair in results for rec in pair)
    return RBDataset(records=records)
