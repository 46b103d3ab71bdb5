"""Statistical estimators: contraction fits, dual-Lipschitz distance, Lyapunov and A_{x,k} checks, density diagnostics."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy import sparse, stats
from scipy.optimize import linprog
from scipy.spatial.distance import pdist, squareform

from src.config.exception_handler import config_exception, domain_exception
from src.entities.binding.models import BindingSpec
from src.entities.system.models import ModelSpec
from src.entities.trajectory.engine import integrate, integrate_coupled, sample_noise
from src.entities.trajectory.models import Trajectory
from .schemes import (
    AxkRow,
    ContractionFit,
    DensityRow,
    DistancePoint,
    GrowthFit,
    LyapunovFit,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_CAP = 300
MIN_FIT_POINTS = 5
# Horizons skipped before fitting the one-step decay rate.
DENSITY_BURN_IN = 3


def fit_contraction(series: Sequence[tuple[float, float]]) -> ContractionFit:
    """Least squares of log value = log C - gamma t."""
    if len(series) < MIN_FIT_POINTS:
        raise domain_exception(
            f"contraction fit needs at least {MIN_FIT_POINTS} points", details={"points": len(series)}
        )
    t = np.array([p[0] for p in series], dtype=float)
    v = np.array([p[1] for p in series], dtype=float)
    if np.any(~(v > 0)):
        raise domain_exception("log of non-positive", details={"values": v[~(v > 0)].tolist()})
    fit = stats.linregress(t, np.log(v))
    residual = np.log(v) - (fit.intercept + fit.slope * t)
    return ContractionFit(
        C=float(np.exp(fit.intercept)),
        gamma=float(-fit.slope),
        gamma_se=float(fit.stderr),
        residual=float(np.sqrt(np.mean(residual**2))),
        points=len(series),
    )


def dual_lipschitz_distance(
    sample_a: np.ndarray, sample_b: np.ndarray, cap: int = DEFAULT_SAMPLE_CAP
) -> float:
    """Empirical ||mu_a - mu_b||_L as a linear program over the merged support.

    Variables are g on every distinct point plus the budget (s, l):
    maximize mean_a g - mean_b g with |g| <= s, g_p - g_q <= l d(p, q) and
    s + l <= 1. A Lipschitz function on a finite set extends to the whole
    space with the same bounds, so the optimum is the exact norm.
    """
    a = np.atleast_2d(np.asarray(sample_a, dtype=float))
    b = np.atleast_2d(np.asarray(sample_b, dtype=float))
    if len(a) == 0 or len(b) == 0 or a.shape[1] != b.shape[1]:
        raise domain_exception("samples must be non-empty with a common dimension")
    if len(a) > cap or len(b) > cap:
        raise config_exception("sample too large", details={"cap": cap, "sizes": [len(a), len(b)]})
    points, inverse = np.unique(np.concatenate([a, b]), axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    n = len(points)
    weights = np.bincount(inverse[: len(a)], minlength=n) / len(a) - np.bincount(
        inverse[len(a) :], minlength=n
    ) / len(b)
    if n == 1 or not np.any(weights):
        return 0.0

    dist = squareform(pdist(points))
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    pairs = len(i)
    rows = np.arange(pairs)
    lip = sparse.coo_matrix(
        (
            np.concatenate([np.ones(pairs), -np.ones(pairs), -dist[i, j]]),
            (np.concatenate([rows, rows, rows]), np.concatenate([i, j, np.full(pairs, n + 1)])),
        ),
        shape=(pairs, n + 2),
    )
    eye = sparse.identity(n, format="coo")
    s_col = sparse.coo_matrix((-np.ones(n), (np.arange(n), np.full(n, n))), shape=(n, n + 2))
    upper = sparse.hstack([eye, sparse.coo_matrix((n, 2))]) + s_col
    lower = sparse.hstack([-eye, sparse.coo_matrix((n, 2))]) + s_col
    budget = sparse.coo_matrix(([1.0, 1.0], ([0, 0], [n, n + 1])), shape=(1, n + 2))
    a_ub = sparse.vstack([lip, upper, lower, budget]).tocsr()
    b_ub = np.zeros(a_ub.shape[0])
    b_ub[-1] = 1.0
    cost = np.concatenate([-weights, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0.0, None), (0.0, None)]
    logger.debug("dual-Lipschitz LP: %d points, %d constraints", n, a_ub.shape[0])
    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if result.status != 0:
        raise domain_exception("dual-Lipschitz LP failed", details={"status": int(result.status), "message": result.message})
    return float(max(-result.fun, 0.0))


def subsample(sample: np.ndarray, cap: int, seed: int) -> np.ndarray:
    if len(sample) <= cap:
        return sample
    rng = np.random.default_rng(seed)
    return sample[np.sort(rng.choice(len(sample), size=cap, replace=False))]


def distance_series(
    traj_a: Trajectory,
    traj_b: Trajectory,
    times: Sequence[float],
    cap: int = DEFAULT_SAMPLE_CAP,
    seed: int = 0,
) -> list[DistancePoint]:
    """Distance between the two ensembles' laws at each requested time."""
    points = []
    for t in times:
        a, b = traj_a.at(t), traj_b.at(t)
        over = len(a) > cap or len(b) > cap
        a, b = subsample(a, cap, seed), subsample(b, cap, seed + 1)
        points.append(
            DistancePoint(
                t=float(t),
                distance=dual_lipschitz_distance(a, b, cap),
                n_a=len(a),
                n_b=len(b),
                subsample_seed=seed if over else None,
            )
        )
    return points


def bootstrap_noise_floor(
    sample_a: np.ndarray,
    sample_b: np.ndarray,
    n_boot: int = 20,
    seed: int = 0,
    quantile: float = 0.95,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> float:
    """Upper quantile of the distance between resampled halves of the pooled sample."""
    pooled = np.concatenate([np.atleast_2d(sample_a), np.atleast_2d(sample_b)])
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_boot):
        a = pooled[rng.integers(len(pooled), size=len(sample_a))]
        b = pooled[rng.integers(len(pooled), size=len(sample_b))]
        values.append(dual_lipschitz_distance(a, b, cap))
    return float(np.quantile(values, quantile))


def fit_distance_decay(
    points: Sequence[DistancePoint], floor: float, initial: float
) -> tuple[bool, ContractionFit]:
    """Monotonicity up to the floor, and the contraction fit on the part of the series above it.

    The fit window is the start (t = 0, distance ``initial``) plus every
    point above the floor; when that gives fewer than MIN_FIT_POINTS, the
    earliest points at the floor fill it up.
    """
    distances = [p.distance for p in points]
    monotone = all(b <= a + floor for a, b in zip(distances, distances[1:]))
    above = [(p.t, p.distance) for p in points if p.distance > floor]
    window = [(0.0, initial)] + above
    at_floor = [(p.t, p.distance) for p in points if p.distance <= floor]
    window += at_floor[: max(MIN_FIT_POINTS - len(window), 0)]
    fit = fit_contraction(sorted((t, max(d, np.finfo(float).tiny)) for t, d in window))
    logger.debug("distance decay: %d of %d points above floor %.3g", len(above), len(points), floor)
    return monotone, fit


def _lyapunov_envelope(values: np.ndarray, upper: np.ndarray) -> tuple[float, float]:
    """Minimal sum of a V_i + b with a V_i + b >= upper_i, a, b >= 0."""
    cost = np.array([values.sum(), float(len(values))])
    a_ub = -np.column_stack([values, np.ones_like(values)])
    result = linprog(cost, A_ub=a_ub, b_ub=-upper, bounds=[(0.0, None), (0.0, None)], method="highs")
    if result.status != 0:
        raise domain_exception("lyapunov envelope LP failed", details={"message": result.message})
    return float(result.x[0]), float(result.x[1])


def k0_display(a: float, b: float) -> float:
    """K0 = 4b / (1 - a)."""
    if not a < 1:
        raise domain_exception("K0 needs a < 1", details={"a": a})
    return 4.0 * b / (1.0 - a)


def lyapunov_fit(
    model: ModelSpec,
    states: Sequence[np.ndarray],
    samples_per_state: int,
    dt: float = 1e-3,
    seed: int = 0,
) -> LyapunovFit:
    """Fits E V(Phi(x)) <= a V(x) + b over the states at t = 1."""
    steps = round(1.0 / dt)
    values, means, ses = [], [], []
    for p, state in enumerate(states):
        noise = sample_noise(model, steps, dt, seed, stream=p * samples_per_state, members=samples_per_state)
        final = integrate(model, state, noise, record_every=steps).final()
        v_end = model.lyapunov(final)
        values.append(float(model.lyapunov(np.asarray(state, dtype=float))))
        means.append(float(v_end.mean()))
        ses.append(float(v_end.std(ddof=1) / np.sqrt(len(v_end))) if len(v_end) > 1 else 0.0)
    values_arr, means_arr, ses_arr = np.array(values), np.array(means), np.array(ses)
    a, b = _lyapunov_envelope(values_arr, means_arr + 2.0 * ses_arr)
    logger.info("lyapunov fit %s: a=%.4g b=%.4g over %d states", model.id, a, b, len(states))
    if not a < 1:
        raise domain_exception("no dissipative fit", details={"a": a, "b": b})
    return LyapunovFit(
        a=a, b=b, state_values=values, state_means=means, state_se=ses, K0=k0_display(a, b)
    )


def _axk_table(w_sup: np.ndarray, v0: float, ks: Sequence[float], horizon: int) -> np.ndarray:
    """Fraction of members with W over [n, n+1] <= k V(x) + k n^2 for n = 1..horizon."""
    if horizon == 0:
        return np.ones(len(ks))
    n = np.arange(1, horizon + 1, dtype=float)
    window = w_sup[1 : horizon + 1]
    return np.array([np.all(window <= (k * v0 + k * n**2)[:, None], axis=0).mean() for k in ks])


def axk_sweep(
    model: ModelSpec,
    x: np.ndarray,
    ks: Sequence[float],
    horizon: int,
    n_traj: int,
    dt: float = 1e-3,
    seed: int = 0,
) -> list[AxkRow]:
    """A_{x,k} frequencies on one shared ensemble, so rows are nested in k.

    The bound column is 1 - C/k with C calibrated at the smallest k.
    """
    if any(k <= 0 for k in ks):
        raise domain_exception("k must be > 0", details={"ks": list(ks)})
    ks = sorted(ks)
    v0 = float(model.lyapunov(np.asarray(x, dtype=float)))
    if horizon == 0:
        freqs = np.ones(len(ks))
    else:
        steps = round((horizon + 1) / dt)
        noise = sample_noise(model, steps, dt, seed, members=n_traj)
        traj = integrate(model, x, noise, record_every=steps)
        freqs = _axk_table(traj.w_sup, v0, ks, horizon)
    c_hat = ks[0] * (1.0 - freqs[0])
    return [
        AxkRow(k=float(k), empirical=float(f), bound=float(np.clip(1.0 - c_hat / k, 0.0, 1.0)))
        for k, f in zip(ks, freqs)
    ]


def axk_frequency(
    model: ModelSpec,
    x: np.ndarray,
    k: float,
    horizon: int,
    n_traj: int,
    dt: float = 1e-3,
    seed: int = 0,
) -> tuple[float, float]:
    row = axk_sweep(model, x, [k], horizon, n_traj, dt, seed)[0]
    return row.empirical, row.bound


def density_diagnostics(
    model: ModelSpec,
    binding: BindingSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    horizons: Sequence[int],
    n_traj: int,
    dt: float = 1e-3,
    seed: int = 0,
    k: float = 10.0,
) -> tuple[list[DensityRow], float | None]:
    """Per-horizon density table and the fitted decay rate of the one-step column.

    One coupled ensemble is run to max(horizons) + 1. For horizon n:
    mean D^n over non-overflowed members; mean (D^n)^-2 on the good event
    (W of y below k V(y0) + k j^2 on every unit j in 1..n-1); mean
    (1 - D_1)^2 for the step [n, n+1] on the same event.
    """
    horizons = sorted(set(int(n) for n in horizons))
    if not horizons or horizons[0] < 1:
        raise domain_exception("horizons must be positive integers", details={"horizons": list(horizons)})
    per_unit = round(1.0 / dt)
    last = horizons[-1] + 1
    noise = sample_noise(model, last * per_unit, dt, seed, members=n_traj)
    traj = integrate_coupled(model, binding, x0, y0, noise, record_every=per_unit)
    log_d = traj.log_density_path
    overflow = traj.girsanov.overflow
    valid = ~overflow
    v0 = float(model.lyapunov(np.asarray(y0, dtype=float)))

    rows = []
    for n in horizons:
        good = valid.copy()
        for j in range(1, n):
            good &= traj.w_sup_y[j] <= k * v0 + k * j**2
        d_n = np.exp(log_d[n][valid])
        one_step = np.exp(log_d[n + 1] - log_d[n])
        rows.append(
            DensityRow(
                n=n,
                mean_density=float(d_n.mean()) if d_n.size else float("nan"),
                density_se=float(d_n.std(ddof=1) / np.sqrt(d_n.size)) if d_n.size > 1 else 0.0,
                good_fraction=float(good.mean()),
                mean_inverse_square_good=float(np.exp(-2.0 * log_d[n][good]).mean()) if good.any() else float("nan"),
                mean_one_step_deviation=float(((1.0 - one_step[good]) ** 2).mean()) if good.any() else float("nan"),
                excluded_overflow=int(overflow.sum()),
            )
        )

    tail = [(r.n, r.mean_one_step_deviation) for r in rows[DENSITY_BURN_IN:]]
    gamma2 = None
    if len(tail) >= MIN_FIT_POINTS and all(v > 0 for _, v in tail):
        gamma2 = fit_contraction(tail).gamma
    logger.info("density diagnostics %s: gamma2_hat=%s, overflow=%d", model.id, gamma2, int(overflow.sum()))
    return rows, gamma2


def fit_growth_bound(
    binding: BindingSpec,
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
) -> GrowthFit:
    """Smallest log-linear envelope |G|^2 <= C |x - y|^alpha (1 + V(x) + V(y))^beta."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    g2 = np.sum(binding.force(x, y) ** 2, axis=-1)
    r = np.linalg.norm(y - x, axis=-1)
    vt = 1.0 + model.lyapunov(x) + model.lyapunov(y)
    keep = (g2 > 0) & (r > 0)
    if keep.sum() < 3:
        raise domain_exception("growth fit needs at least 3 pairs with G != 0")
    lg, lr, lv = np.log(g2[keep]), np.log(r[keep]), np.log(vt[keep])
    design = np.column_stack([np.ones_like(lr), lr, lv])
    result = linprog(
        design.sum(axis=0),
        A_ub=-design,
        b_ub=-lg,
        bounds=[(None, None), (0.0, None), (0.0, None)],
        method="highs",
    )
    if result.status != 0:
        raise domain_exception("growth envelope LP failed", details={"message": result.message})
    log_c, alpha, beta = result.x
    return GrowthFit(C=float(np.exp(log_c)), alpha=float(alpha), beta=float(beta), pairs=int(keep.sum()))
