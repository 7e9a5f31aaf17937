"""Two-dictionary separation and corruption-robust recovery.

A signal sparse in dictionary D plus a disturbance sparse in dictionary
B is recovered jointly: stack [D B], solve one l1 problem, split the
solution.  The feasibility condition compares the measured coherence
spreads of D, B, and their cross products against the combined sparsity.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._streams import k_subset, stream
from .bounds import separation_condition
from .coherence import coherence_sample, cross_coherence, profile
from .ensembles import MeasurementMatrix, normalize_columns, real_fourier_frame
from .errors import DimensionError, DomainError
from .ripcheck import BAND_ROUNDING
from .solvers import SparseSignal, bpdn
from .util import parallel_map


@dataclass(frozen=True)
class SeparationProblem:
    left: MeasurementMatrix
    right: MeasurementMatrix
    y: np.ndarray
    epsilon: float
    n_x: int
    n_e: int

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64, copy=True).ravel()
        if self.left.rows != self.right.rows:
            raise DimensionError(
                f"row mismatch: {self.left.rows} vs {self.right.rows}")
        if y.size != self.left.rows:
            raise DimensionError(
                f"y has length {y.size}, dictionaries have {self.left.rows} rows")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n_x < 0 or self.n_e < 0:
            raise DomainError(f"sparsities must be >= 0, got {self.n_x}, {self.n_e}")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)


@dataclass
class SeparationResult:
    x_hat: SparseSignal
    e_hat: SparseSignal
    feature_left: np.ndarray
    feature_right: np.ndarray
    condition: object
    solver: object


@dataclass(frozen=True)
class SeparationTrial:
    x_rel_error: float
    e_rel_error: float
    x_support_ok: bool
    e_support_ok: bool
    residual_norm: float
    converged: bool
    margin: float


@dataclass(frozen=True)
class JointRipReport:
    g: float
    in_band: float
    g_pair_scaled: float
    in_band_pair_scaled: float
    trials: int
    max_energy_gap: float
    condition: object


def joint_dictionary(left, right):
    """Column-stack two dictionaries into one (tagged 'custom')."""
    if left.rows != right.rows:
        raise DimensionError(f"row mismatch: {left.rows} vs {right.rows}")
    return MeasurementMatrix(np.hstack([left.data, right.data]))


def measured_spreads(left, right):
    """Coherence spreads (sigma_left, sigma_right, sigma_cross) from data.

    A dictionary with fewer than two columns contributes zero spread.
    """
    sigma_left = profile(coherence_sample(left)).std if left.cols >= 2 else 0.0
    sigma_right = profile(coherence_sample(right)).std if right.cols >= 2 else 0.0
    if left.cols and right.cols:
        sigma_cross = cross_coherence(left, right).std
    else:
        sigma_cross = 0.0
    return sigma_left, sigma_right, sigma_cross


def separation_feasibility(left, right, n_x, n_e):
    """Feasibility condition at measured spreads; zero sparsities clamp to 1."""
    sl, sr, sc = measured_spreads(left, right)
    return separation_condition(sl, sr, sc, max(n_x, 1), max(n_e, 1))


def separate(problem, **solver_options):
    """Recover both sparse components from one joint l1 solve.

    With an empty right dictionary this reduces exactly to bpdn on the
    left dictionary (same iterate sequence).
    """
    joint = joint_dictionary(problem.left, problem.right)
    res = bpdn(joint, problem.y, problem.epsilon, **solver_options)
    split = problem.left.cols
    x_dense = res.estimate[:split]
    e_dense = res.estimate[split:]
    return SeparationResult(
        x_hat=SparseSignal.from_dense(x_dense),
        e_hat=SparseSignal.from_dense(e_dense),
        feature_left=problem.left.data @ x_dense,
        feature_right=(problem.right.data @ e_dense if problem.right.cols
                       else np.zeros(problem.left.rows)),
        condition=separation_feasibility(problem.left, problem.right,
                                         problem.n_x, problem.n_e),
        solver=res,
    )


def spikes_fourier_pair(n):
    """The canonical separation pair: identity spikes and harmonic waves."""
    spikes = MeasurementMatrix(np.eye(n))
    waves = normalize_columns(MeasurementMatrix(real_fourier_frame(n)))
    return spikes, waves


def _support_match(est_signal, true_support, tol):
    est = set(np.flatnonzero(np.abs(est_signal) > tol).tolist())
    return est == set(true_support.tolist())


def separation_trial(left, right, n_x, n_e, seed, noise_sigma=0.0,
                     epsilon=1e-6, support_tol=None, **solver_options):
    """One planted separation experiment.

    Draws n_x atoms from the left dictionary and n_e from the right with
    Gaussian coefficients, mixes, optionally adds noise, separates, and
    reports per-component relative errors and support agreement.
    """
    if left.rows != right.rows:
        raise DimensionError(f"row mismatch: {left.rows} vs {right.rows}")
    rng_x = stream(seed, "separation-x", n_x)
    rng_e = stream(seed, "separation-e", n_e)
    x = np.zeros(left.cols)
    if n_x:
        x[k_subset(rng_x, left.cols, n_x)] = rng_x.standard_normal(n_x)
    e = np.zeros(right.cols)
    if n_e:
        e[k_subset(rng_e, right.cols, n_e)] = rng_e.standard_normal(n_e)
    y = left.data @ x + (right.data @ e if right.cols else 0.0)
    if noise_sigma > 0:
        y = y + noise_sigma * stream(seed, "separation-noise").standard_normal(left.rows)
    problem = SeparationProblem(left=left, right=right, y=y, epsilon=epsilon,
                                n_x=n_x, n_e=n_e)
    result = separate(problem, **solver_options)
    if support_tol is None:
        support_tol = 10.0 * noise_sigma if noise_sigma > 0 else 1e-6
    x_hat = result.x_hat.to_dense()
    e_hat = result.e_hat.to_dense()

    def rel(err, ref):
        norm_ref = float(np.linalg.norm(ref))
        return float(np.linalg.norm(err)) / norm_ref if norm_ref > 0 \
            else float(np.linalg.norm(err))

    return SeparationTrial(
        x_rel_error=rel(x_hat - x, x),
        e_rel_error=rel(e_hat - e, e),
        x_support_ok=_support_match(x_hat, np.flatnonzero(x), support_tol),
        e_support_ok=_support_match(e_hat, np.flatnonzero(e), support_tol),
        residual_norm=result.solver.residual_norm,
        converged=result.solver.converged,
        margin=result.condition.margin,
    )


def robust_recovery_trial(matrix, k, n_corruptions, noise_sigma, seed,
                          corruption_scale=10.0, epsilon=None, support_tol=None,
                          **solver_options):
    """Recovery under gross measurement corruption.

    The measurement picks up n_corruptions spike errors of typical size
    corruption_scale on top of optional dense Gaussian noise; recovery
    stacks the dictionary with the identity and separates.  Reported
    errors and support agreement refer to the signal component only.
    """
    n = matrix.rows
    if not 0 <= n_corruptions <= n:
        raise DimensionError(f"need 0 <= n_corruptions <= {n}, got {n_corruptions}")
    if not 0 <= k <= matrix.cols:
        raise DomainError(f"need 0 <= k <= {matrix.cols}, got {k}")
    spikes = MeasurementMatrix(np.eye(n))
    rng_x = stream(seed, "robust-signal", k)
    x = np.zeros(matrix.cols)
    if k:
        x[k_subset(rng_x, matrix.cols, k)] = rng_x.standard_normal(k)
    rng_e = stream(seed, "robust-corruption", n_corruptions)
    e = np.zeros(n)
    if n_corruptions:
        picked = k_subset(rng_e, n, n_corruptions)
        e[picked] = corruption_scale * rng_e.standard_normal(n_corruptions)
    y = matrix.data @ x + e
    if noise_sigma > 0:
        y = y + noise_sigma * stream(seed, "robust-noise").standard_normal(n)
    if epsilon is None:
        epsilon = 1.1 * noise_sigma * math.sqrt(n) if noise_sigma > 0 else 0.0
    problem = SeparationProblem(left=matrix, right=spikes, y=y, epsilon=epsilon,
                                n_x=k, n_e=n_corruptions)
    result = separate(problem, **solver_options)
    if support_tol is None:
        support_tol = 10.0 * noise_sigma if noise_sigma > 0 else 1e-6
    x_hat = result.x_hat.to_dense()
    xnorm = float(np.linalg.norm(x))
    err = float(np.linalg.norm(x_hat - x))
    rel = err / xnorm if xnorm > 0 else err
    e_hat = result.e_hat.to_dense()
    enorm = float(np.linalg.norm(e))
    e_err = float(np.linalg.norm(e_hat - e))
    return SeparationTrial(
        x_rel_error=rel,
        e_rel_error=e_err / enorm if enorm > 0 else e_err,
        x_support_ok=_support_match(x_hat, np.flatnonzero(x), support_tol),
        e_support_ok=_support_match(e_hat, np.flatnonzero(e), support_tol),
        residual_norm=result.solver.residual_norm,
        converged=result.solver.converged,
        margin=result.condition.margin,
    )


def joint_rip_check(left, right, n_x, n_e, trials, seed, threads=1):
    """Monte Carlo check of the joint energy band and the cross-energy identity.

    Each trial plants a random (n_x, n_e)-sparse pair, computes the joint
    energy ratio ||D x + B e||^2 / (||x||^2 + ||e||^2), and checks it
    against 1 +- g for both the measured-band g and its pair-scaled
    variant.  Also tracks the worst rounding gap of the decomposition
    ||D x + B e||^2 = ||D x||^2 + ||B e||^2 + 2 <D x, B e>.
    """
    if left.rows != right.rows:
        raise DimensionError(f"row mismatch: {left.rows} vs {right.rows}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= n_x <= left.cols or not 0 <= n_e <= right.cols:
        raise DomainError("sparsities must fit inside the dictionaries")
    cond = separation_feasibility(left, right, n_x, n_e)

    def one(trial):
        rng = stream(seed, "joint-rip", trial)
        dx = np.zeros(left.rows)
        energy = 0.0
        if n_x:
            sup = k_subset(rng, left.cols, n_x)
            c = rng.standard_normal(n_x)
            dx = left.data[:, sup] @ c
            energy += float(c @ c)
        be = np.zeros(left.rows)
        if n_e:
            sup = k_subset(rng, right.cols, n_e)
            c = rng.standard_normal(n_e)
            be = right.data[:, sup] @ c
            energy += float(c @ c)
        mixed = dx + be
        direct = float(mixed @ mixed)
        parts = float(dx @ dx) + float(be @ be) + 2.0 * float(dx @ be)
        ratio = direct / energy if energy > 0 else 1.0
        return ratio, abs(direct - parts)

    out = parallel_map(one, range(trials), threads)
    ratios = np.array([r for r, _ in out])
    gaps = np.array([g for _, g in out])
    dev = np.abs(ratios - 1.0)
    in_band = float(np.mean(dev <= cond.g_joint + BAND_ROUNDING))
    in_band_pair = float(np.mean(dev <= cond.g_joint_pair_scaled + BAND_ROUNDING))
    return JointRipReport(g=cond.g_joint, in_band=in_band,
                          g_pair_scaled=cond.g_joint_pair_scaled,
                          in_band_pair_scaled=in_band_pair, trials=trials,
                          max_energy_gap=float(np.max(gaps)), condition=cond)
