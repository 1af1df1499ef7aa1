"""Triple-dot exchange-only qubit simulator with blind randomized benchmarking."""

__version__ = "0.1.0"

from .calibration import (CalibrationScan, OverrotationScaling,
                          error_vs_overrotation, repeated_pulse_scan)
from .cliffords import (CliffordElement, CliffordGroup, ExchangePulse,
                        clifford_group, compile_target)
from .config import CalibrationSpec, ConfigError, RunSpec, config_hash, parse_config
from .encoding import (DfsBasis, EncodedAction, build_dfs_basis, encoded_action_of,
                       encoded_bloch, leakage_population, leakage_projector,
                       qubit_projector, rotation_axis_angle)
from .experiment import (BlindPair, ExperimentConfig, RBDataset, RBRecord,
                         build_blind_pair, initial_state, psb_measure,
                         psb_projector, run_experiment, simulate_shot)
from .fitting import (BlindRbFit, BootstrapResult, DecayModel, FitResult,
                      OFFSET_EXPONENTIAL, PURE_EXPONENTIAL, bootstrap_ci,
                      fit_blind_rb, fit_decay)
from .noise import (NoiseModel, NoiseRealization, apply_idle, apply_noisy_pulse,
                    sample_realization)
from .spins import (embed_single_spin, exchange_unitary, heisenberg_coupling,
                    joint_pulse_unitary, phase_invariant_distance, zeeman_unitary)

__all__ = [name for name in dir() if not name.startswith("_")]
