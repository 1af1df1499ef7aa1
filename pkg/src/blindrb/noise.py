"""Noise models: quasistatic Overhauser fields and systematic overrotation.

Field noise is the quasistatic-bath picture of hyperfine interaction: each
dot sees a random magnetic field, constant for one shot (one execution of a
pulse sequence) and redrawn between shots.  Fields are isotropic 3-component
Gaussians by default; differences between the dots' transverse components
are what drives leakage out of the encoded sector.  A ``z_only_fields``
switch restricts the noise to the z component for comparison studies, and
``redraw = "per_sequence"`` freezes one realization for all shots of a
sequence (the alternative bath cadence).

Overrotation multiplies every nominal pulse angle by ``1 + epsilon`` for the
pair's error channel; it is a coherent error and generates no leakage.
Optional charge noise on the exchange coupling is modelled as Gaussian
fractional angle jitter per pulse, off by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cliffords import ExchangePulse
from .rng import keyed_rng
from .spins import exchange_unitary, joint_pulse_unitary, zeeman_unitary

REDRAW_MODES = ("per_shot", "per_sequence")


@dataclass(frozen=True)
class NoiseModel:
    sigma_b: float = 0.0
    uniform_b: tuple[float, float, float] = (0.0, 0.0, 0.0)
    overrotation: dict[str, float] = field(default_factory=dict)
    pulse_duration: float = 1.0
    idle_duration: float = 0.0
    z_only_fields: bool = False
    theta_jitter: float = 0.0
    redraw: str = "per_shot"

    def __post_init__(self):
        if not (math.isfinite(self.sigma_b) and self.sigma_b >= 0):
            raise ValueError(f"sigma_b must be finite and >= 0, got {self.sigma_b}")
        if len(self.uniform_b) != 3 or not all(math.isfinite(b) for b in self.uniform_b):
            raise ValueError("uniform_b must be a finite 3-vector")
        for tag, eps in self.overrotation.items():
            if not (-1.0 < eps < 1.0):
                raise ValueError(f"overrotation[{tag!r}] must lie in (-1, 1), got {eps}")
        if self.pulse_duration < 0 or self.idle_duration < 0:
            raise ValueError("durations must be >= 0")
        if self.theta_jitter < 0:
            raise ValueError("theta_jitter must be >= 0")
        if self.redraw not in REDRAW_MODES:
            raise ValueError(f"redraw must be one of {REDRAW_MODES}, got {self.redraw!r}")

    @property
    def quasistatic_fields_vary(self) -> bool:
        """True when the field realization actually differs between draws."""
        return self.sigma_b > 0

    def epsilon_for(self, pulse: ExchangePulse) -> float:
        return self.overrotation.get(pulse.overrotation_tag, 0.0)


@dataclass(frozen=True)
class NoiseRealization:
    """One quasistatic draw: per-dot field 3-vectors, optional angle jitter."""

    fields: np.ndarray                      # shape (3, 3), row d = dot d+1
    theta_jitter: np.ndarray | None = None  # fractional, per flattened pulse

    def jitter_for(self, pulse_index: int | None) -> float:
        if self.theta_jitter is None or pulse_index is None:
            return 0.0
        return float(self.theta_jitter[pulse_index])


def sample_realization(model: NoiseModel, seed: int, sequence_id, shot_id,
                       n_pulses: int = 0) -> NoiseRealization:
    """Draw the quasistatic noise for one shot, keyed by (seed, ids).

    ``sequence_id`` and ``shot_id`` may be ints or tuples of ints/strings;
    identical keys always reproduce the identical realization.
    """
    seq_parts = sequence_id if isinstance(sequence_id, tuple) else (sequence_id,)
    shot_parts = shot_id if isinstance(shot_id, tuple) else (shot_id,)
    rng = keyed_rng(seed, "overhauser", *seq_parts, *shot_parts)
    fields = np.tile(np.asarray(model.uniform_b, dtype=float), (3, 1))
    if model.sigma_b > 0:
        if model.z_only_fields:
            fields[:, 2] += rng.normal(0.0, model.sigma_b, size=3)
        else:
            fields += rng.normal(0.0, model.sigma_b, size=(3, 3))
    jitter = None
    if model.theta_jitter > 0 and n_pulses > 0:
        jrng = keyed_rng(seed, "theta-jitter", *seq_parts, *shot_parts)
        jitter = jrng.normal(0.0, model.theta_jitter, size=n_pulses)
    fields.setflags(write=False)
    return NoiseRealization(fields=fields, theta_jitter=jitter)


def noisy_pulse_unitary(pulse: ExchangePulse, model: NoiseModel,
                        realization: NoiseRealization,
                        pulse_index: int | None = None) -> np.ndarray:
    """8x8 unitary of one pulse under overrotation, jitter and fields."""
    theta = pulse.theta * (1.0 + model.epsilon_for(pulse)) \
        * (1.0 + realization.jitter_for(pulse_index))
    if model.pulse_duration == 0.0:
        return exchange_unitary(pulse.pair[0], pulse.pair[1], theta)
    return joint_pulse_unitary(pulse.pair[0], pulse.pair[1], theta,
                               realization.fields, model.pulse_duration)


def apply_noisy_pulse(state: np.ndarray, pulse: ExchangePulse, model: NoiseModel,
                      realization: NoiseRealization,
                      pulse_index: int | None = None) -> np.ndarray:
    out = noisy_pulse_unitary(pulse, model, realization, pulse_index) @ state
    return out / np.linalg.norm(out)


def idle_unitary(model: NoiseModel, realization: NoiseRealization) -> np.ndarray:
    return zeeman_unitary(realization.fields, model.idle_duration)


def apply_idle(state: np.ndarray, model: NoiseModel,
               realization: NoiseRealization) -> np.ndarray:
    if model.idle_duration == 0.0:
        return state.copy()
    out = idle_unitary(model, realization) @ state
    return out / np.linalg.norm(out)
