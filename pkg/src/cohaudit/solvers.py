"""Sparse recovery solvers and Monte Carlo recovery harnesses.

Greedy (omp, cosamp), thresholding (iht), and convex (lasso / bpdn via
monotone FISTA with a discrepancy search over lambda).  All solvers are
deterministic functions of their inputs; randomness only enters through
the trial harnesses, which use keyed streams.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._streams import k_subset, stream, substream_seed
from .ensembles import EnsembleSpec, MeasurementMatrix, generate
from .errors import DimensionError, DomainError
from .linalg import operator_norm
from .util import parallel_map

SOLVERS = ("omp", "iht", "cosamp", "bpdn")

SIGNAL_MODELS = ("gaussian", "rademacher")

# Relative reconstruction error below which a noiseless trial counts as
# an exact recovery.
NOISELESS_SUCCESS_TOL = 1e-4


@dataclass(frozen=True)
class SparseSignal:
    """Explicit sparse vector: sorted distinct support plus nonzero values."""

    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sup = np.array(self.support, dtype=int, copy=True)
        val = np.array(self.values, dtype=np.float64, copy=True)
        if sup.size != val.size:
            raise DimensionError("support and values must have equal length")
        if sup.size:
            if np.unique(sup).size != sup.size:
                raise ValueError("support indices must be distinct")
            if not np.all(np.diff(sup) > 0):
                raise ValueError("support must be sorted ascending")
            if sup[0] < 0 or sup[-1] >= self.dim:
                raise ValueError(f"support indices must lie in [0, {self.dim})")
            if np.any(val == 0.0):
                raise ValueError("values must be nonzero")
        sup.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", val)

    @property
    def sparsity(self):
        return int(self.support.size)

    def to_dense(self):
        x = np.zeros(self.dim)
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x, tol=0.0):
        x = np.asarray(x, dtype=np.float64)
        support = np.flatnonzero(np.abs(x) > tol)
        return cls(dim=x.size, support=support, values=x[support])


@dataclass
class SolveResult:
    estimate: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool
    flags: tuple = ()
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrialResult:
    k: int
    seed: int
    solver: str
    rel_error: float
    support_precision: float
    support_recall: float
    success: bool
    iterations: int
    residual_norm: float
    converged: bool
    flags: tuple


@dataclass(frozen=True)
class PhasePoint:
    k: int
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float

    def as_dict(self):
        return {"k": self.k, "trials": self.trials, "successes": self.successes,
                "rate": self.rate, "ci_low": self.ci_low, "ci_high": self.ci_high}


def _mat(matrix):
    if isinstance(matrix, MeasurementMatrix):
        return matrix.data
    return np.asarray(matrix, dtype=np.float64)


def _check_rhs(data, y):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != data.shape[0]:
        raise DimensionError(f"y has length {y.size}, matrix has {data.shape[0]} rows")
    return y


def _lstsq(sub, y):
    """Least squares with a ridge fallback on rank deficiency."""
    coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
    if rank < sub.shape[1]:
        gram = sub.T @ sub + 1e-12 * np.eye(sub.shape[1])
        coef = np.linalg.solve(gram, sub.T @ y)
        return coef, True
    return coef, False


def hard_threshold(v, k):
    """Keep the k largest-magnitude entries, ties resolved to lower index."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    out = np.zeros_like(v)
    if k == 0:
        return out
    if k >= v.size:
        return v.copy()
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    keep = order[:k]
    out[keep] = v[keep]
    return out


def _top_indices(v, m):
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    return np.sort(order[:m])


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def omp(matrix, y, k=None, residual_tol=None, max_iter=None):
    """Orthogonal matching pursuit with full least-squares refit per step.

    Stops after k atoms, or when the residual norm drops to
    residual_tol, whichever is requested (at least one must be).  Ties
    in atom selection go to the lowest index.  A repeated selection
    means the residual is orthogonal to every remaining atom; the solver
    stops and flags 'stalled'.
    """
    data = _mat(matrix)
    y = _check_rhs(data, y)
    n, cols = data.shape
    if k is None and residual_tol is None:
        raise ValueError("need a sparsity target k or a residual_tol")
    if k is not None and not 0 <= k <= min(n, cols):
        raise DomainError(f"need 0 <= k <= min(rows, cols) = {min(n, cols)}, got {k}")
    limit = k if k is not None else min(n, cols)
    if max_iter is not None:
        limit = min(limit, max_iter)
    rnorm = float(np.linalg.norm(y))
    if rnorm == 0.0:
        return SolveResult(estimate=np.zeros(cols), iterations=0,
                           residual_norm=0.0, converged=True)
    flags = []
    support = []
    coef = np.zeros(0)
    resid = y.copy()
    it = 0
    chosen = set()
    while it < limit:
        if residual_tol is not None and rnorm <= residual_tol:
            break
        corr = data.T @ resid
        j = int(np.argmax(np.abs(corr)))
        if j in chosen:
            flags.append("stalled")
            break
        chosen.add(j)
        support.append(j)
        coef, ridged = _lstsq(data[:, support], y)
        if ridged and "regularized" not in flags:
            flags.append("regularized")
        resid = y - data[:, support] @ coef
        rnorm = float(np.linalg.norm(resid))
        it += 1
    x = np.zeros(cols)
    if support:
        x[support] = coef
    converged = ((k is not None and len(support) == k)
                 or (residual_tol is not None and rnorm <= residual_tol))
    return SolveResult(estimate=x, iterations=it, residual_norm=rnorm,
                       converged=converged, flags=tuple(flags))


def iht(matrix, y, k, step="auto", max_iter=1000, tol=1e-10):
    """Iterative hard thresholding x <- H_k(x + step M^T (y - M x)).

    step='auto' uses 1 / ||M||_2^2.  Stops when the iterate moves less
    than tol, flags 'diverged' and stops if the residual grows by 10x
    over a 50-iteration window.
    """
    data = _mat(matrix)
    y = _check_rhs(data, y)
    cols = data.shape[1]
    if not 0 <= k <= cols:
        raise DomainError(f"need 0 <= k <= {cols}, got {k}")
    if step == "auto":
        nrm = operator_norm(data)
        step = 1.0 / (nrm * nrm) if nrm > 0 else 1.0
    elif step <= 0:
        return SolveResult(estimate=np.zeros(cols), iterations=0,
                           residual_norm=float(np.linalg.norm(y)),
                           converged=False, flags=("bad-step",))
    x = np.zeros(cols)
    flags = []
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        resid = y - data @ x
        rnorm = float(np.linalg.norm(resid))
        history.append(rnorm)
        if len(history) > 50 and rnorm > 10.0 * history[-51]:
            flags.append("diverged")
            break
        x_next = hard_threshold(x + step * (data.T @ resid), k)
        delta = float(np.linalg.norm(x_next - x))
        x = x_next
        if delta <= tol:
            return SolveResult(estimate=x, iterations=it,
                               residual_norm=float(np.linalg.norm(y - data @ x)),
                               converged=True, flags=tuple(flags))
    return SolveResult(estimate=x, iterations=it,
                       residual_norm=float(np.linalg.norm(y - data @ x)),
                       converged=False, flags=tuple(flags))


def cosamp(matrix, y, k, max_iter=100, tol=1e-10):
    """CoSaMP: proxy, top-2k merge, least squares, prune to k.

    Returns the lowest-residual iterate seen.  Stops on a small relative
    residual or when the residual stops improving ('stagnated').
    """
    data = _mat(matrix)
    y = _check_rhs(data, y)
    cols = data.shape[1]
    if not 0 <= k <= cols:
        raise DomainError(f"need 0 <= k <= {cols}, got {k}")
    ynorm = float(np.linalg.norm(y))
    if k == 0 or ynorm == 0.0:
        return SolveResult(estimate=np.zeros(cols), iterations=0,
                           residual_norm=ynorm, converged=True)
    flags = []
    x = np.zeros(cols)
    resid = y.copy()
    best_x = x
    best_rnorm = ynorm
    prev_rnorm = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        proxy = data.T @ resid
        merged = np.union1d(_top_indices(proxy, min(2 * k, cols)),
                            np.flatnonzero(x))
        coef, ridged = _lstsq(data[:, merged], y)
        if ridged and "regularized" not in flags:
            flags.append("regularized")
        full = np.zeros(cols)
        full[merged] = coef
        x = hard_threshold(full, k)
        resid = y - data @ x
        rnorm = float(np.linalg.norm(resid))
        if rnorm < best_rnorm:
            best_rnorm = rnorm
            best_x = x
        if rnorm <= tol * ynorm:
            converged = True
            break
        if prev_rnorm - rnorm <= 1e-12 * ynorm:
            flags.append("stagnated")
            break
        prev_rnorm = rnorm
    return SolveResult(estimate=best_x, iterations=it, residual_norm=best_rnorm,
                       converged=converged, flags=tuple(flags))


def lasso(matrix, y, lam, x0=None, max_iter=2000, tol=1e-9, lipschitz=None,
          gap_rtol=1e-6, gap_check=10):
    """Minimize 0.5 ||y - M x||^2 + lam ||x||_1 by monotone FISTA.

    The accepted objective never increases (a worse accelerated step
    falls back to the previous iterate).  The objective trace is kept in
    info['objective_trace'].

    Two stopping criteria: iterate movement below tol (catches exact
    fixed points immediately), and a duality-gap certificate checked
    every gap_check iterations.  The gap uses the scaled residual as the
    dual point; rel gap <= gap_rtol bounds the objective suboptimality
    directly, which the movement heuristic cannot.  Monotone clamping
    floors the reachable gap near the float resolution of the
    objective, so gap_rtol much below 1e-8 may never fire.
    """
    data = _mat(matrix)
    y = _check_rhs(data, y)
    cols = data.shape[1]
    if lam < 0:
        raise DomainError(f"lam must be >= 0, got {lam}")
    if lipschitz is None:
        nrm = operator_norm(data)
        lipschitz = max(nrm * nrm, np.finfo(float).tiny)
    x = np.zeros(cols) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if x.size != cols:
        raise DimensionError(f"x0 has length {x.size}, expected {cols}")

    def objective(v, resid):
        return 0.5 * float(resid @ resid) + lam * float(np.sum(np.abs(v)))

    def rel_gap(v, fv):
        r = y - data @ v
        corr = float(np.max(np.abs(data.T @ r))) if cols else 0.0
        scale = 1.0 if corr <= lam else lam / corr
        nu = scale * r
        dual = float(nu @ y) - 0.5 * float(nu @ nu)
        return (fv - dual) / max(fv, np.finfo(float).tiny)

    z = x.copy()
    t_acc = 1.0
    fx = objective(x, y - data @ x)
    trace = [fx]
    converged = False
    gap = None
    it = 0
    for it in range(1, max_iter + 1):
        grad = data.T @ (data @ z - y)
        u = soft_threshold(z - grad / lipschitz, lam / lipschitz)
        resid_u = y - data @ u
        fu = objective(u, resid_u)
        if fu <= fx:
            x_new, f_new = u, fu
        else:
            x_new, f_new = x, fx
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc * t_acc))
        # momentum difference is against the previous accepted iterate,
        # which is still held in x at this point
        z = x_new + (t_acc / t_next) * (u - x_new) \
            + ((t_acc - 1.0) / t_next) * (x_new - x)
        moved = max(float(np.linalg.norm(x_new - x)),
                    float(np.linalg.norm(u - x_new)))
        x = x_new
        fx = f_new
        t_acc = t_next
        trace.append(fx)
        if moved <= tol * max(1.0, float(np.linalg.norm(x))):
            converged = True
            break
        if it % gap_check == 0:
            gap = rel_gap(x, fx)
            if gap <= gap_rtol:
                converged = True
                break
    resid = y - data @ x
    return SolveResult(estimate=x, iterations=it,
                       residual_norm=float(np.linalg.norm(resid)),
                       converged=converged,
                       info={"lam": lam, "objective": fx, "rel_gap": gap,
                             "objective_trace": trace})


def bpdn(matrix, y, epsilon, eta=0.3, inner_iter=1000, tol=1e-10,
         bisect_iter=40, resid_match=0.02, bp_resid_tol=1e-8):
    """Basis pursuit denoising: min ||x||_1 s.t. ||y - M x|| <= epsilon.

    Solved as a warm-started lasso path.  lambda walks down geometrically
    (factor eta) from the largest useful value; warm starts keep the
    iterates sparse, which is what makes the small-lambda solves
    converge.  The walk stops when the residual matches epsilon within
    resid_match; if it jumps past the match window, a warm geometric
    bisection refines lambda inside the last step.

    epsilon = 0 asks for the basis pursuit limit and walks lambda down
    until the residual falls below bp_resid_tol * ||y||.  epsilon >=
    ||y|| returns the zero vector, which is feasible and l1-minimal.
    An epsilon that stays unreachable at the smallest lambda is flagged
    'infeasible-epsilon'.
    """
    data = _mat(matrix)
    y = _check_rhs(data, y)
    cols = data.shape[1]
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    if not 0 < eta < 1:
        raise DomainError(f"eta must be in (0, 1), got {eta}")
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0 or epsilon >= ynorm:
        return SolveResult(estimate=np.zeros(cols), iterations=0,
                           residual_norm=ynorm, converged=True,
                           flags=("zero-solution",) if epsilon >= ynorm and ynorm > 0 else (),
                           info={"lam": 0.0})
    nrm = operator_norm(data)
    lipschitz = max(nrm * nrm, np.finfo(float).tiny)
    lam_max = float(np.max(np.abs(data.T @ y)))
    if lam_max == 0.0:
        # y is orthogonal to every column; nothing can reduce the residual
        return SolveResult(estimate=np.zeros(cols), iterations=0,
                           residual_norm=ynorm, converged=False,
                           flags=("infeasible-epsilon",), info={"lam": 0.0})
    lo_target = (1.0 - resid_match) * epsilon
    hi_target = (1.0 + resid_match) * epsilon
    state = {"warm": None, "total": 0, "best": None}

    def solve(lam):
        res = lasso(data, y, lam, x0=state["warm"], max_iter=inner_iter,
                    tol=tol, lipschitz=lipschitz)
        state["warm"] = res.estimate
        state["total"] += res.iterations
        best = state["best"]
        if epsilon > 0:
            better = best is None or (abs(res.residual_norm - epsilon)
                                      < abs(best.residual_norm - epsilon))
        else:
            better = best is None or res.residual_norm < best.residual_norm
        if better:
            state["best"] = res
        return res

    def finish(res, matched):
        flags = list(res.flags)
        if not matched and res.residual_norm > max(epsilon, bp_resid_tol * ynorm):
            flags.append("infeasible-epsilon")
        return SolveResult(estimate=res.estimate, iterations=state["total"],
                           residual_norm=res.residual_norm,
                           converged=matched and res.converged,
                           flags=tuple(flags), info=dict(res.info))

    lam_floor = 1e-16 * lam_max
    lam_prev = lam_max
    lam = lam_max
    bracket = None
    while lam > lam_floor:
        lam *= eta
        res = solve(lam)
        if epsilon == 0.0:
            if res.residual_norm <= bp_resid_tol * ynorm:
                return finish(res, True)
        else:
            if lo_target <= res.residual_norm <= hi_target:
                return finish(res, True)
            if res.residual_norm < lo_target:
                bracket = (lam, lam_prev)
                break
        lam_prev = lam
    if bracket is None:
        # walked to the floor without reaching the target
        return finish(state["best"], False)
    lo, hi = bracket
    for _ in range(bisect_iter):
        lam = math.sqrt(lo * hi)
        res = solve(lam)
        if res.residual_norm > hi_target:
            hi = lam
        elif res.residual_norm < lo_target:
            lo = lam
        else:
            return finish(res, True)
    return finish(state["best"],
                  lo_target <= state["best"].residual_norm <= hi_target)


def _draw_signal(rng, cols, k, model):
    support = k_subset(rng, cols, k)
    if model == "gaussian":
        values = rng.standard_normal(k)
        # a standard normal draw is never exactly zero in practice, but
        # the SparseSignal contract requires it
        values[values == 0.0] = 1.0
    elif model == "rademacher":
        values = 2.0 * rng.integers(0, 2, size=k) - 1.0
    else:
        raise ValueError(f"unknown signal model {model!r}")
    return SparseSignal(dim=cols, support=support, values=values)


def _run_solver(matrix, y, k, solver, noise_sigma, options):
    opts = dict(options or {})
    if solver == "omp":
        opts.setdefault("k", k)
        return omp(matrix, y, **opts)
    if solver == "iht":
        return iht(matrix, y, k, **opts)
    if solver == "cosamp":
        return cosamp(matrix, y, k, **opts)
    if solver == "bpdn":
        if "epsilon" not in opts:
            n = matrix.rows if isinstance(matrix, MeasurementMatrix) else matrix.shape[0]
            opts["epsilon"] = 1.1 * noise_sigma * math.sqrt(n) if noise_sigma > 0 else 0.0
        return bpdn(matrix, y, **opts)
    raise ValueError(f"unknown solver {solver!r}, expected one of {SOLVERS}")


def recovery_trial(matrix, k, solver, noise_sigma, seed, solver_options=None,
                   signal_model="gaussian", support_tol=None):
    """One synthetic recovery experiment with a known planted signal.

    Noiseless success means relative l2 error <= 1e-4; noisy success
    means the estimated support (entries above support_tol, default
    10 * noise_sigma) matches the true support exactly.
    """
    if noise_sigma < 0:
        raise DomainError(f"noise_sigma must be >= 0, got {noise_sigma}")
    cols = matrix.cols
    if not 0 <= k <= cols:
        raise DomainError(f"need 0 <= k <= {cols}, got {k}")
    truth = _draw_signal(stream(seed, "signal", k), cols, k, signal_model)
    x = truth.to_dense()
    y = matrix.data @ x
    if noise_sigma > 0:
        y = y + noise_sigma * stream(seed, "noise", k).standard_normal(matrix.rows)
    res = _run_solver(matrix, y, k, solver, noise_sigma, solver_options)
    est = res.estimate
    xnorm = float(np.linalg.norm(x))
    err = float(np.linalg.norm(est - x))
    rel = err / xnorm if xnorm > 0 else err
    if support_tol is None:
        support_tol = 10.0 * noise_sigma if noise_sigma > 0 else 1e-8
    est_sup = set(np.flatnonzero(np.abs(est) > support_tol).tolist())
    true_sup = set(truth.support.tolist())
    hits = len(est_sup & true_sup)
    precision = hits / len(est_sup) if est_sup else (1.0 if not true_sup else 0.0)
    recall = hits / len(true_sup) if true_sup else 1.0
    if noise_sigma == 0:
        success = rel <= NOISELESS_SUCCESS_TOL
    else:
        success = est_sup == true_sup
    return TrialResult(k=k, seed=seed, solver=solver, rel_error=rel,
                       support_precision=precision, support_recall=recall,
                       success=success, iterations=res.iterations,
                       residual_norm=res.residual_norm, converged=res.converged,
                       flags=res.flags)


def wilson_interval(successes, trials, z=1.959963984540054):
    """Wilson score 95% interval for a binomial proportion."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    # The endpoints are exactly 0 and 1 at the boundary counts; keep them
    # so rate <= ci_high holds bitwise at rate 1.0.
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def phase_curve(source, k_list, solver, trials, noise_sigma, seed,
                solver_options=None, fresh_matrix=False, signal_model="gaussian",
                threads=1):
    """Empirical success rate vs sparsity with Wilson 95% intervals.

    source is a MeasurementMatrix (fixed-matrix mode) or an EnsembleSpec;
    fresh_matrix=True redraws the matrix per trial and needs a spec.
    Per-trial seeds are keyed substreams of (seed, k, trial), so the
    curve is reproducible at any thread count.
    """
    k_list = [int(k) for k in k_list]
    if not k_list:
        raise ValueError("k_list must be nonempty")
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be strictly ascending")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if fresh_matrix and not isinstance(source, EnsembleSpec):
        raise ValueError("fresh_matrix mode needs an EnsembleSpec source")
    fixed = source if isinstance(source, MeasurementMatrix) else None
    if fixed is None and not fresh_matrix:
        fixed = generate(source)

    points = []
    for k in k_list:
        def one(trial, k=k):
            mat = fixed
            if mat is None:
                spec = EnsembleSpec(source.ensemble, source.rows, source.cols,
                                    substream_seed(seed, "matrix", k, trial))
                mat = generate(spec)
            return recovery_trial(mat, k, solver, noise_sigma,
                                  substream_seed(seed, "trial", k, trial),
                                  solver_options=solver_options,
                                  signal_model=signal_model)
        results = parallel_map(one, range(trials), threads)
        wins = sum(1 for r in results if r.success)
        lo, hi = wilson_interval(wins, trials)
        points.append(PhasePoint(k=k, trials=trials, successes=wins,
                                 rate=wins / trials, ci_low=lo, ci_high=hi))
    return points


def write_phase_csv(points, path):
    lines = ["k,trials,successes,rate,ci_low,ci_high"]
    for p in points:
        lines.append("%d,%d,%d,%.12g,%.12g,%.12g"
                     % (p.k, p.trials, p.successes, p.rate, p.ci_low, p.ci_high))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
