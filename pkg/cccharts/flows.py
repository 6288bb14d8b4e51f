"""
Flows e^{tX}x, multi-field exponentials and the existence / non-return probes.

All integration is classical fixed-step RK4 over batches of initial points.
A flow of a single field for time t is the time-1 flow of the frozen
combination t*X, so flow() and exp_multi() share one integrator and one
step rule: ceil(steps_per_unit * |a| * r) steps.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, qmc

from .errors import DomainError, FlowError
from .fields import Box, VectorField, VectorSystem

logger = logging.getLogger(__name__)

BLOWUP_NORM = 1e8

Velocity = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FlowOptions:
    steps_per_unit: int = 200
    max_step: Optional[float] = None
    domain: Optional[Box] = None

    def __post_init__(self):
        if self.steps_per_unit < 1:
            raise ValueError(f"steps_per_unit must be >= 1, got {self.steps_per_unit}")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be positive")

    def with_domain(self, domain: Optional[Box]) -> 'FlowOptions':
        return replace(self, domain=domain)


@dataclass
class FlowBatch:
    """Result of a batched integration; failed rows keep their last good state."""

    states: np.ndarray
    ok: np.ndarray
    fail_r: np.ndarray
    reasons: List[str]
    trajectory: Optional[np.ndarray] = None
    r_values: Optional[np.ndarray] = None


def _safe_velocity(velocity: Velocity, y: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        v = np.asarray(velocity(y, c), dtype=float)
        bad = ~np.all(np.isfinite(v), axis=1)
        return np.where(bad[:, None], 0.0, v), bad
    except DomainError:
        v = np.zeros_like(y)
        bad = np.zeros(y.shape[0], dtype=bool)
        for i in range(y.shape[0]):
            try:
                v[i] = velocity(y[i:i + 1], c[i:i + 1])[0]
            except DomainError:
                bad[i] = True
        return v, bad


def integrate(velocity: Velocity, x0: np.ndarray, coeffs: np.ndarray, opts: FlowOptions,
              r_end: float = 1.0, record: bool = False, steps: Optional[int] = None) -> FlowBatch:
    """RK4 for dE/dr = velocity(E, c) on r in [0, r_end] for each row.

    `steps` fixes the step count; otherwise it follows the step rule of opts.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    N = x0.shape[0]
    scale = float(np.max(np.linalg.norm(coeffs, axis=1))) * abs(r_end) if N else 0.0
    if steps is None:
        steps = max(1, math.ceil(opts.steps_per_unit * scale - 1e-9))
        if opts.max_step is not None and scale > 0:
            steps = max(steps, math.ceil(scale / opts.max_step))
    h = r_end / steps
    state = x0.copy()
    alive = np.ones(N, dtype=bool)
    fail_r = np.full(N, np.nan)
    reasons = [''] * N
    traj = [state.copy()] if record else None
    tol = 1e-12 * max(1.0, float(np.max(np.abs(x0)))) if N else 0.0

    for s in range(steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        y = state[idx]
        c = coeffs[idx]
        k1, b1 = _safe_velocity(velocity, y, c)
        k2, b2 = _safe_velocity(velocity, y + 0.5 * h * k1, c)
        k3, b3 = _safe_velocity(velocity, y + 0.5 * h * k2, c)
        k4, b4 = _safe_velocity(velocity, y + h * k3, c)
        new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        r_now = (s + 1) * h
        bad_domain = b1 | b2 | b3 | b4
        with np.errstate(invalid='ignore', over='ignore'):
            norms = np.linalg.norm(new, axis=1)
        bad_blow = ~bad_domain & (~np.isfinite(norms) | (norms > BLOWUP_NORM))
        bad_exit = np.zeros_like(bad_blow)
        if opts.domain is not None:
            bad_exit = ~bad_domain & ~bad_blow & ~opts.domain.contains(np.where(np.isfinite(new), new, 0.0), tol)
        for mask, reason in ((bad_domain, 'domain'), (bad_blow, 'blowup'), (bad_exit, 'exit')):
            for i in idx[mask]:
                reasons[i] = reason
                fail_r[i] = r_now
        good = ~(bad_domain | bad_blow | bad_exit)
        state[idx[good]] = new[good]
        alive[idx[~good]] = False
        if record:
            traj.append(state.copy())

    r_values = None
    trajectory = None
    if record:
        trajectory = np.stack(traj)
        r_values = np.arange(trajectory.shape[0]) * h
    return FlowBatch(state, alive, fail_r, reasons, trajectory, r_values)


def _field_velocity(X: VectorField) -> Velocity:
    return lambda y, c: c[:, :1] * X(y)


def _system_velocity(S: VectorSystem) -> Velocity:
    return lambda y, c: S.combination(c, y)


def flow_batch(X: VectorField, x0, t, opts: Optional[FlowOptions] = None) -> FlowBatch:
    opts = opts or FlowOptions()
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), (x0.shape[0],)).reshape(-1, 1)
    return integrate(_field_velocity(X), x0, t, opts)


def flow(X: VectorField, x0, t: float, opts: Optional[FlowOptions] = None) -> np.ndarray:
    """e^{tX} x0 by RK4."""
    opts = opts or FlowOptions()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if opts.domain is not None and not opts.domain.contains(x0):
        raise ValueError(f"initial point {x0.tolist()} is outside the domain")
    res = flow_batch(X, x0, t, opts)
    if not res.ok[0]:
        time = float(res.fail_r[0]) * t
        raise FlowError(f"flow of {X.name or 'field'} failed ({res.reasons[0]}) at t={time:.6g}",
                        time, res.states[0], res.reasons[0])
    return res.states[0]


def flow_trajectory(X: VectorField, x0, t: float, opts: Optional[FlowOptions] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Sampled trajectory (times, states) of e^{sX}x0 for s between 0 and t."""
    opts = opts or FlowOptions()
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    res = integrate(_field_velocity(X), x0, np.array([[t]]), opts, record=True)
    states = res.trajectory[:, 0, :]
    times = res.r_values * t
    if not res.ok[0]:
        keep = res.r_values <= res.fail_r[0] - 1e-15
        logger.warning(f"trajectory stopped ({res.reasons[0]}) at t={res.fail_r[0] * t:.6g}")
        return times[keep], states[keep]
    return times, states


def exp_multi_batch(S: VectorSystem, a, x0, opts: Optional[FlowOptions] = None, r: float = 1.0) -> FlowBatch:
    """Batched e^{r(a_1 X_1 + ... + a_q X_q)} x0; rows of a and x0 broadcast."""
    opts = opts or FlowOptions(domain=S.domain)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    N = max(a.shape[0], x0.shape[0])
    a = np.broadcast_to(a, (N, S.q))
    x0 = np.broadcast_to(x0, (N, S.n))
    return integrate(_system_velocity(S), np.array(x0), np.array(a), opts, r_end=r)


def exp_multi(S: VectorSystem, a, x0, opts: Optional[FlowOptions] = None, r: float = 1.0) -> np.ndarray:
    """E(r) for dE/dr = sum_j a_j X_j(E), E(0) = x0."""
    opts = opts or FlowOptions(domain=S.domain)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != S.q:
        raise ValueError(f"expected {S.q} coefficients, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients must be finite")
    if opts.domain is not None and not opts.domain.contains(x0):
        raise ValueError(f"initial point {x0.tolist()} is outside the domain")
    res = exp_multi_batch(S, a, x0, opts, r)
    if not res.ok[0]:
        raise FlowError(f"exponential of {S.name or 'system'} failed ({res.reasons[0]}) at r={res.fail_r[0]:.6g}",
                        float(res.fail_r[0]), res.states[0], res.reasons[0])
    return res.states[0]


def sphere_directions(q: int, count: int, include_axes: bool = True) -> np.ndarray:
    """Deterministic points on S^{q-1}: signed axes plus Halton points pushed through the normal quantile."""
    dirs = []
    if include_axes:
        eye = np.eye(q)
        dirs.extend([eye, -eye])
    if count > 0:
        u = qmc.Halton(d=q, scramble=False).random(count + 1)[1:]
        g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
        lens = np.linalg.norm(g, axis=1)
        g = g[lens > 1e-12] / lens[lens > 1e-12, None]
        dirs.append(g)
    return np.vstack(dirs) if dirs else np.zeros((0, q))


@dataclass
class ConditionCReport:
    holds: bool
    eta: float
    checked: int
    witnesses: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'holds': self.holds, 'eta': self.eta, 'checked': self.checked, 'witnesses': self.witnesses}


RADIUS_FRACTIONS = (0.5, 0.75, 0.875, 0.9375, 0.96875, 0.984375, 0.9921875)


def check_condition_C(S: VectorSystem, x0, eta: float, opts: Optional[FlowOptions] = None,
                      n_dirs: int = 32, max_witnesses: int = 8) -> ConditionCReport:
    """Sampled check that e^{a.X}x0 exists in the domain for |a| < eta.

    holds=True is a sampled certificate over the axis directions and the
    low-discrepancy sphere points, scaled to radii approaching eta.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    opts = opts or FlowOptions(domain=S.domain)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    dirs = sphere_directions(S.q, n_dirs)
    coeffs = np.vstack([eta * f * dirs for f in RADIUS_FRACTIONS])
    res = exp_multi_batch(S, coeffs, x0, opts)
    failed = np.flatnonzero(~res.ok)
    witnesses = [{'a': coeffs[i].tolist(), 'reason': res.reasons[i], 'r': float(res.fail_r[i])}
                 for i in failed[:max_witnesses]]
    holds = failed.size == 0
    logger.debug(f"condition C at eta={eta:.6g}: {'holds' if holds else f'{failed.size} failures'}")
    return ConditionCReport(holds, float(eta), int(coeffs.shape[0]), witnesses)


@dataclass
class EtaProbe:
    eta: float
    eta_max: float
    failed_eta: Optional[float]
    witness: Optional[dict]

    def to_dict(self) -> dict:
        return {'eta': self.eta, 'eta_max': self.eta_max, 'failed_eta': self.failed_eta, 'witness': self.witness}


def probe_eta(S: VectorSystem, x0, eta_max: float, opts: Optional[FlowOptions] = None,
              n_dirs: int = 32, iterations: int = 12) -> EtaProbe:
    """Bisection over eta in (0, eta_max] using check_condition_C."""
    report = check_condition_C(S, x0, eta_max, opts, n_dirs)
    if report.holds:
        return EtaProbe(float(eta_max), float(eta_max), None, None)
    lo, hi, witness = 0.0, float(eta_max), report.witnesses[0]
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        rep = check_condition_C(S, x0, mid, opts, n_dirs)
        if rep.holds:
            lo = mid
        else:
            hi, witness = mid, rep.witnesses[0]
    if lo == 0.0:
        raise FlowError(f"condition C fails at every probed eta down to {hi:.3g}",
                        0.0, x0, witness['reason'] if witness else 'exit')
    logger.info(f"condition C holds up to eta={lo:.6g} (fails at {hi:.6g})")
    return EtaProbe(lo, float(eta_max), hi, witness)


@dataclass
class Delta0Report:
    delta0: float
    grid: List[float]
    return_tol: float
    checked: int
    excluded: int
    violation: Optional[dict] = None

    def to_dict(self) -> dict:
        return {'delta0': self.delta0, 'grid': self.grid, 'return_tol': self.return_tol,
                'checked': self.checked, 'excluded': self.excluded, 'violation': self.violation}


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ab = b - a
    denom = np.einsum('ij,ij->i', ab, ab)
    with np.errstate(invalid='ignore', divide='ignore'):
        s = np.where(denom > 0, np.einsum('ij,ij->i', p - a, ab) / denom, 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(a + s[:, None] * ab - p, axis=1), s


def probe_delta0(S: VectorSystem, K: Box, delta_grid: Sequence[float], theta_samples=32,
                 return_tol: Optional[float] = None, points_per_axis: int = 3,
                 opts: Optional[FlowOptions] = None) -> Delta0Report:
    """Largest delta in the grid with no sampled return e^{r theta.X}x = x for r <= delta."""
    grid = sorted(float(d) for d in delta_grid)
    if not grid:
        raise ValueError("delta grid is empty")
    opts = opts or FlowOptions(domain=S.domain)
    tol = 1e-3 * K.diameter if return_tol is None else float(return_tol)
    pts = K.grid(points_per_axis)
    thetas = (np.asarray(theta_samples, dtype=float) if not np.isscalar(theta_samples)
              else sphere_directions(S.q, int(theta_samples)))
    X0 = np.repeat(pts, thetas.shape[0], axis=0)
    TH = np.tile(thetas, (pts.shape[0], 1))
    speed = np.linalg.norm(S.combination(TH, X0), axis=1)
    scale = np.max(np.linalg.norm(S.matrix(X0), axis=1), axis=1)
    keep = speed > 1e-12 * np.maximum(scale, 1e-300)
    excluded = int(np.count_nonzero(~keep))
    X0, TH = X0[keep], TH[keep]
    r_max = grid[-1]
    res = integrate(_system_velocity(S), X0, TH, opts, r_end=r_max, record=True)
    traj, r_vals = res.trajectory, res.r_values
    left = np.zeros(X0.shape[0], dtype=bool)
    first_return = np.full(X0.shape[0], np.inf)
    for s in range(1, traj.shape[0]):
        prev, cur = traj[s - 1], traj[s]
        active = ~np.isfinite(first_return)
        active &= np.isnan(res.fail_r) | (r_vals[s] <= res.fail_r)
        dist, frac = _segment_distance(X0, prev, cur)
        hit = active & left & (dist < tol)
        first_return[hit] = r_vals[s - 1] + frac[hit] * (r_vals[s] - r_vals[s - 1])
        left |= np.linalg.norm(cur - X0, axis=1) > 2.0 * tol
    violation = None
    delta0 = grid[-1]
    if np.any(np.isfinite(first_return)):
        i = int(np.argmin(first_return))
        r_ret = float(first_return[i])
        violation = {'x': X0[i].tolist(), 'theta': TH[i].tolist(), 'r': r_ret}
        below = [d for d in grid if d < r_ret]
        delta0 = below[-1] if below else 0.0
        logger.info(f"non-return probe: return at r={r_ret:.6g}, delta0 estimate {delta0:.6g}")
    return Delta0Report(delta0, grid, tol, int(X0.shape[0]), excluded, violation)
