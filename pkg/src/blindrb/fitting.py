"""Decay-model fitting for the blind RB signals.

``D(m)`` is fit with a pure exponential ``B * lam^m`` (the blind difference
cancels state-independent backgrounds, so its asymptote is pinned at zero)
and ``S(m)`` with ``A + B * lam^m``.  Error per Clifford is
``r = (1 - lam_D) / 2`` (the d = 2 randomized-benchmarking convention);
leakage per Clifford is reported both as the raw ``1 - lam_S`` and weighted
by the fitted asymptote split, ``(1 - lam_S) * B_S / (A_S + B_S)``, so
either convention can be compared against.  Uncertainties come from a
percentile bootstrap that resamples sequences with replacement within each
length.

The solver is a damped (Levenberg-style) least-squares loop on the models'
analytic Jacobians with adaptive damping; it terminates on a relative
parameter change below 1e-10 or after 200 iterations.  Constant data makes
lam unidentifiable for the offset model and is reported as a flagged
non-convergence rather than a silent answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .experiment import RBDataset
from .rng import keyed_rng

MAX_ITER = 200
PARAM_CHANGE_TOL = 1e-10
LAM_FLOOR = 1e-12

FLAG_DEGENERATE = "degenerate_constant_data"
FLAG_NO_DECAY = "no_decay"
FLAG_MAX_ITER = "max_iterations"


@dataclass(frozen=True)
class DecayModel:
    form: str
    param_names: tuple[str, ...]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def predict(self, m: np.ndarray, params: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if self.form == "pure_exponential":
            b, lam = params
            return b * lam ** m
        a, b, lam = params
        return a + b * lam ** m

    def jacobian(self, m: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Analytic d predict / d params, shape (len(m), n_params)."""
        m = np.asarray(m, dtype=float)
        if self.form == "pure_exponential":
            b, lam = params
            return np.column_stack([lam ** m, b * m * lam ** (m - 1)])
        a, b, lam = params
        return np.column_stack([np.ones_like(m), lam ** m, b * m * lam ** (m - 1)])


PURE_EXPONENTIAL = DecayModel("pure_exponential", ("B", "lam"))
OFFSET_EXPONENTIAL = DecayModel("offset_exponential", ("A", "B", "lam"))


@dataclass(frozen=True)
class FitResult:
    model: DecayModel
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    flag: str | None = None

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.model.param_names.index(name)])

    @property
    def lam(self) -> float:
        return self["lam"]

    def stderr(self, name: str) -> float:
        i = self.model.param_names.index(name)
        return float(np.sqrt(max(0.0, self.covariance[i, i])))


def _validate_inputs(m, y, weights):
    m = np.asarray(m, dtype=float)
    y = np.asarray(y, dtype=float)
    if m.shape != y.shape or m.ndim != 1:
        raise ValueError("m and y must be 1-d arrays of equal length")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in fit input")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != y.shape or np.any(weights < 0) \
                or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite, non-negative, same length as y")
    return m, y, weights


def _initial_guess(model: DecayModel, m: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Log-linear regression on the decaying part, clamped positive."""
    if model.form == "pure_exponential":
        offset = 0.0
    else:
        offset = float(np.min(y))
    resid = np.clip(y - offset, 1e-12, None)
    slope, intercept = np.polyfit(m, np.log(resid), 1)
    lam0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
    b0 = float(np.exp(intercept))
    if model.form == "pure_exponential":
        return np.array([b0, lam0])
    return np.array([offset, b0, lam0])


def _profiled_guess(model: DecayModel, m: np.ndarray, y: np.ndarray,
                    sw: np.ndarray) -> np.ndarray:
    """Best init over a lam grid; amplitudes solved exactly by linear LS.

    The log-linear guess alone can land the offset model in a lam ~ 0 local
    minimum for slow decays; profiling lam avoids that basin.
    """
    lams = np.concatenate([1.0 - np.geomspace(1e-6, 0.6, 24), np.linspace(0.35, 0.02, 6)])
    best, best_cost = None, np.inf
    for lam in lams:
        cols = [lam ** m] if model.form == "pure_exponential" \
            else [np.ones_like(m), lam ** m]
        design = np.column_stack(cols) * sw[:, None]
        coef, *_ = np.linalg.lstsq(design, sw * y, rcond=None)
        r = design @ coef - sw * y
        cost = float(r @ r)
        if cost < best_cost:
            best_cost = cost
            best = np.append(coef, lam)
    return best


def _clip_lam(model: DecayModel, params: np.ndarray) -> np.ndarray:
    out = params.copy()
    out[-1] = min(1.0, max(LAM_FLOOR, out[-1]))
    return out


def fit_decay(m, y, model: DecayModel, weights=None) -> FitResult:
    """Damped least squares for one decay curve.

    Exactly constant data is an exact no-decay solution for the pure model
    (when nonzero) and an identifiability failure for the offset model.
    """
    m, y, weights = _validate_inputs(m, y, weights)
    if len(np.unique(m)) < 3:
        raise ValueError("need at least 3 distinct sequence lengths")
    if len(m) <= model.n_params:
        raise ValueError("need more points than fit parameters")

    if float(np.ptp(y)) == 0.0:
        return _fit_constant_case(m, y, model)

    sw = np.sqrt(weights) if weights is not None else np.ones_like(y)
    inits = [_clip_lam(model, _initial_guess(model, m, y)),
             _clip_lam(model, _profiled_guess(model, m, y, sw))]
    best = None
    for init in inits:
        params, cost, converged, flag = _levenberg(model, m, y, sw, init)
        if best is None or (converged, -cost) > (best[2], -best[1]):
            best = (params, cost, converged, flag)
    params, cost, converged, flag = best

    flat = _flat_boundary_solution(model, m, y, weights, sw, cost)
    if params[-1] >= 1.0 - 1e-12 and flat is not None:
        # on the lam = 1 boundary the model can only be a constant, and the
        # weighted mean is that boundary's optimum; canonicalize A/B there
        return flat

    cov = _covariance(model, m, params, cost, weights, sw)
    return FitResult(model=model, params=params, covariance=cov,
                     residual_norm=math.sqrt(cost), converged=converged, flag=flag)


def _levenberg(model: DecayModel, m, y, sw, init):
    params = init.copy()

    def cost_of(p):
        r = sw * (model.predict(m, p) - y)
        return r, float(r @ r)

    resid, cost = cost_of(params)
    mu = 1e-3
    # both exits are legitimate terminations ("returns local minimum"); the
    # flag records when the parameter-change tolerance was not reached
    flag = FLAG_MAX_ITER
    for _ in range(MAX_ITER):
        jac = sw[:, None] * model.jacobian(m, params)
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        step_taken = False
        for _ in range(16):
            try:
                delta = np.linalg.solve(jtj + mu * np.diag(np.diag(jtj) + 1e-30), -jtr)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            cand = _clip_lam(model, params + delta)
            cand_resid, cand_cost = cost_of(cand)
            if cand_cost <= cost:
                rel_change = np.max(np.abs(cand - params)
                                    / np.maximum(np.abs(params), 1e-12))
                improvement = cost - cand_cost
                params, resid, cost = cand, cand_resid, cand_cost
                mu = max(mu / 3, 1e-14)
                step_taken = True
                if rel_change < PARAM_CHANGE_TOL:
                    flag = None
                elif improvement <= 1e-14 * max(cost, 1e-300):
                    # cost improvements at numerical dust level: minimum reached
                    flag = None
                break
            mu *= 4
        if flag is None or not step_taken:
            if not step_taken:
                # no damping level improves the cost: a local minimum
                flag = None
            break
    return params, cost, True, flag


def _flat_boundary_solution(model, m, y, weights, sw, cost_to_beat):
    w = weights if weights is not None else np.ones_like(y)
    mean = float(np.sum(w * y) / np.sum(w))
    flat_cost = float(np.sum(w * (y - mean) ** 2))
    if flat_cost > cost_to_beat * (1 + 1e-12) + 1e-30:
        return None
    if model.form == "pure_exponential":
        params = np.array([mean, 1.0])
    else:
        params = np.array([mean, 0.0, 1.0])
    cov = _covariance(model, m, params, flat_cost, weights, sw)
    return FitResult(model=model, params=params, covariance=cov,
                     residual_norm=math.sqrt(flat_cost), converged=True,
                     flag=FLAG_NO_DECAY)


def _fit_constant_case(m, y, model: DecayModel) -> FitResult:
    value = float(y[0])
    if model.form == "pure_exponential" and value != 0.0:
        params = np.array([value, 1.0])
        return FitResult(model=model, params=params,
                         covariance=np.zeros((2, 2)), residual_norm=0.0,
                         converged=True, flag=FLAG_NO_DECAY)
    n = model.n_params
    nan_params = np.full(n, np.nan)
    return FitResult(model=model, params=nan_params,
                     covariance=np.full((n, n), np.nan), residual_norm=0.0,
                     converged=False, flag=FLAG_DEGENERATE)


def _covariance(model, m, params, cost, weights, sw):
    jac = sw[:, None] * model.jacobian(m, params)
    jtj = jac.T @ jac
    dof = len(m) - model.n_params
    try:
        inv = np.linalg.pinv(jtj, hermitian=True)
    except np.linalg.LinAlgError:
        return np.full((model.n_params,) * 2, np.nan)
    if weights is None:
        sigma2 = cost / dof if dof > 0 else 0.0
        cov = sigma2 * inv
    else:
        cov = inv
    return (cov + cov.T) / 2


@dataclass(frozen=True)
class BlindRbFit:
    """Joint result of the D(m) and S(m) fits with derived rates."""

    d_fit: FitResult
    s_fit: FitResult
    error_per_clifford: float
    leakage_raw: float
    leakage_weighted: float

    def to_dict(self) -> dict:
        def fit_block(fit: FitResult) -> dict:
            return {
                "model": fit.model.form,
                "param_names": list(fit.model.param_names),
                "params": [float(p) for p in fit.params],
                "covariance": [[float(c) for c in row] for row in fit.covariance],
                "residual_norm": fit.residual_norm,
                "converged": fit.converged,
                "flag": fit.flag,
            }
        return {
            "difference": fit_block(self.d_fit),
            "sum": fit_block(self.s_fit),
            "error_per_clifford": self.error_per_clifford,
            "leakage_per_clifford_raw": self.leakage_raw,
            "leakage_per_clifford_weighted": self.leakage_weighted,
        }


@dataclass(frozen=True)
class _SignalArrays:
    """Per-sequence probabilities unpacked once for fast (re)fitting."""

    lengths: np.ndarray                 # float, ascending
    p0: tuple[np.ndarray, ...]          # one array of sequence values per length
    p1: tuple[np.ndarray, ...]
    shots: tuple[np.ndarray, ...]
    sampled: bool


def _dataset_arrays(dataset: RBDataset) -> _SignalArrays:
    p0, p1, shots = [], [], []
    sampled = True
    for m in dataset.lengths:
        pairs = dataset.pair_probabilities(m)
        shot_by_id = {rec.sequence_id: rec.shots
                      for rec in dataset.records if rec.m == m}
        ids = sorted(pairs)
        p0.append(np.array([pairs[k][0] for k in ids]))
        p1.append(np.array([pairs[k][1] for k in ids]))
        shots.append(np.array([shot_by_id[k] for k in ids], dtype=float))
    for arr_p, arr_n in zip(list(p0) + list(p1), list(shots) * 2):
        counts = arr_p * arr_n
        if np.any(np.abs(counts - np.round(counts)) > 1e-9):
            sampled = False
            break
    return _SignalArrays(lengths=np.array(dataset.lengths, dtype=float),
                         p0=tuple(p0), p1=tuple(p1), shots=tuple(shots),
                         sampled=sampled)


def _signals_from(arrays: _SignalArrays, picks=None):
    """Mean D, S and binomial weights, optionally for resampled indices."""
    d, s, var = [], [], []
    for i in range(len(arrays.lengths)):
        p0, p1, n = arrays.p0[i], arrays.p1[i], arrays.shots[i]
        if picks is not None:
            p0, p1, n = p0[picks[i]], p1[picks[i]], n[picks[i]]
        d.append(np.mean(p0 - p1))
        s.append(np.mean(p0 + p1))
        point_var = (p0 * (1 - p0) + p1 * (1 - p1) + 0.5 / n) / n
        var.append(np.sum(point_var) / len(p0) ** 2)
    return np.array(d), np.array(s), 1.0 / np.array(var)


def _fit_signals(ms, d, s, weights, d_offset: bool) -> BlindRbFit:
    d_model = OFFSET_EXPONENTIAL if d_offset else PURE_EXPONENTIAL
    d_fit = fit_decay(ms, d, d_model, weights=weights)

    if float(np.ptp(s)) < 1e-12:
        # exactly flat sum signal: no leakage channel resolved
        s_fit = FitResult(model=OFFSET_EXPONENTIAL,
                          params=np.array([float(np.mean(s)), 0.0, 1.0]),
                          covariance=np.zeros((3, 3)), residual_norm=0.0,
                          converged=True, flag=FLAG_NO_DECAY)
    else:
        s_fit = fit_decay(ms, s, OFFSET_EXPONENTIAL, weights=weights)

    # lam bounds (0, 1] keep r and l_raw in [0, 1) automatically; l_weighted
    # inherits the sign of B_S (negative means a rising sum, no leakage seen)
    r = (1.0 - d_fit.lam) / 2 if d_fit.converged else float("nan")
    if s_fit.converged:
        l_raw = 1.0 - s_fit.lam
        total = s_fit["A"] + s_fit["B"]
        l_weighted = l_raw * s_fit["B"] / total if abs(total) > 1e-9 else float("nan")
    else:
        l_raw = l_weighted = float("nan")
    return BlindRbFit(d_fit=d_fit, s_fit=s_fit, error_per_clifford=r,
                      leakage_raw=l_raw, leakage_weighted=l_weighted)


def fit_blind_rb(dataset: RBDataset, weighted: bool | None = None,
                 d_offset: bool = False) -> BlindRbFit:
    """Fit D(m) and S(m) and derive the error and leakage rates.

    ``weighted=None`` applies inverse-variance weights exactly when every
    record is an integer count over its shots (a sampled-mode dataset).
    ``d_offset`` switches the difference fit to the 3-parameter model.
    """
    arrays = _dataset_arrays(dataset)
    if weighted is None:
        weighted = arrays.sampled
    d, s, w = _signals_from(arrays)
    return _fit_signals(arrays.lengths, d, s, w if weighted else None, d_offset)


@dataclass(frozen=True)
class BootstrapResult:
    intervals: dict[str, tuple[float, float]]
    n_resamples: int
    n_failures: int
    samples: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def sigma(self, name: str) -> float:
        """Half-width of the 16-84 percentile interval (1-sigma equivalent)."""
        lo, hi = self.intervals[name]
        return (hi - lo) / 2


def bootstrap_ci(dataset: RBDataset, n_resamples: int = 1000, seed: int = 0,
                 weighted: bool | None = None) -> BootstrapResult:
    """Percentile bootstrap over sequences, deterministic given the seed.

    Sequences are resampled with replacement within each length.  Raises
    RuntimeError when more than 10% of the resample fits fail.
    """
    arrays = _dataset_arrays(dataset)
    if weighted is None:
        weighted = arrays.sampled
    quantities = ("r", "lambda_d", "lambda_s", "l_raw", "l_weighted", "B_d",
                  "A_s", "B_s")
    samples: dict[str, list[float]] = {q: [] for q in quantities}
    failures = 0
    for b in range(n_resamples):
        rng = keyed_rng(seed, "bootstrap", b)
        picks = [rng.integers(0, len(p), size=len(p)) for p in arrays.p0]
        try:
            d, s, w = _signals_from(arrays, picks)
            fit = _fit_signals(arrays.lengths, d, s, w if weighted else None,
                               d_offset=False)
        except (ValueError, RuntimeError):
            failures += 1
            continue
        if not (fit.d_fit.converged and fit.s_fit.converged):
            failures += 1
            continue
        samples["r"].append(fit.error_per_clifford)
        samples["lambda_d"].append(fit.d_fit.lam)
        samples["lambda_s"].append(fit.s_fit.lam)
        samples["l_raw"].append(fit.leakage_raw)
        samples["l_weighted"].append(fit.leakage_weighted)
        samples["B_d"].append(fit.d_fit["B"])
        samples["A_s"].append(fit.s_fit["A"])
        samples["B_s"].append(fit.s_fit["B"])
    if failures > 0.1 * n_resamples:
        raise RuntimeError(
            f"{failures}/{n_resamples} bootstrap resamples failed to fit")
    arrays = {q: np.asarray(v) for q, v in samples.items()}
    intervals = {}
    for q, vals in arrays.items():
        finite = vals[np.isfinite(vals)]
        if len(finite) == 0:
            intervals[q] = (float("nan"), float("nan"))
        else:
            lo, hi = np.percentile(finite, [16.0, 84.0])
            intervals[q] = (float(lo), float(hi))
    return BootstrapResult(intervals=intervals, n_resamples=n_resamples,
                           n_failures=failures, samples=arrays)
