"""
Canonical coordinates of the first kind adapted to a system of vector fields.

build_chart runs the whole construction at a base point x0:

    J0 selection -> eta probe (condition C) -> Phi(t) = exp(t.X_J0) x0
    -> C(t) -> A by Picard iteration -> pulled-back fields Y_j
    -> quantitative inverse function radii -> verification residuals

Index tuples and field indices are 1-based in every public result; tensors
over J0 (A, C, structure coefficients) are indexed by position in J0.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .ccmetric import CCGraph, CCParams, sample_ball_points
from .errors import ChartError, ConvergenceError, IFTError, InjectivityError, SpanError
from .fields import (Box, IndexTuple, VectorField, VectorSystem, cramer_solve, select_J0, structure_coefficients,
                     validate_index_tuple, wedge_ratios)
from .flows import Delta0Report, EtaProbe, FlowOptions, integrate, probe_delta0, probe_eta, sphere_directions
from .funcspaces import cml_norm
from .odecore import GridFunction, MatrixFunction, PicardReport, estimate_D, picard_solve
from .output import write_json

logger = logging.getLogger(__name__)

DET_FLOOR = 1e-8
NEWTON_ITERATIONS = 50
NEWTON_TOL = 1e-8
COLLISION_RATIO = 1e-6


@dataclass(frozen=True)
class ChartConfig:
    zeta: float = 1.0
    eta_max: float = 1.0
    grid: int = 17
    tol: float = 1e-10
    steps_per_unit: int = 200
    n_dirs: int = 32
    quad_points: int = 16
    ift_samples: int = 16
    seed: int = 0
    delta_grid: Optional[Tuple[float, ...]] = None
    verify_samples: int = 100
    injectivity_pairs: int = 2000
    h_fd: float = 1e-6
    J0: Optional[Tuple[int, ...]] = None
    estimate_radii: bool = False
    radii_samples: int = 32

    def __post_init__(self):
        if not 0.0 < self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in (0, 1], got {self.zeta}")
        if self.eta_max <= 0:
            raise ValueError(f"eta_max must be positive, got {self.eta_max}")
        if self.verify_samples < 1 or self.ift_samples < 1:
            raise ValueError("sample counts must be positive")


@dataclass
class ChartRadii:
    """Radii of a chart; eta1 = min(kappa * delta1, eta_prime) with delta1 the IFT radius Delta0."""
    eta: float
    xi_box: float
    eta0: float
    eta_prime: float
    eta1: float
    delta1: Optional[float] = None
    xi1: Optional[float] = None
    xi2: Optional[float] = None

    def to_dict(self) -> dict:
        return {'eta': self.eta, 'xi_box': self.xi_box, 'eta0': self.eta0, 'eta_prime': self.eta_prime,
                'delta1': self.delta1, 'eta1': self.eta1, 'xi1': self.xi1, 'xi2': self.xi2}


@dataclass
class IFTReport:
    kappa: float
    Delta0: float
    u_radius: float
    delta2: float
    lipschitz: float
    inverse_bound: float
    c0: float
    cofactor_bound: float
    cofactor_ok: bool
    samples: int
    surjectivity_ratio: Optional[float] = None

    @property
    def delta1(self) -> float:
        """Radius of the v-ball whose image under Psi_u contains B^n(kappa * delta1)."""
        return self.Delta0

    @property
    def surjectivity_ok(self) -> bool:
        r = self.surjectivity_ratio
        return r is None or bool(r <= 1.0)

    def to_dict(self) -> dict:
        return {**self.__dict__, 'delta1': self.delta1, 'surjectivity_ok': self.surjectivity_ok}


@dataclass
class InjectivityReport:
    c_min: float
    pairs: int
    witness: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.witness is None

    def to_dict(self) -> dict:
        return {'c_min': self.c_min, 'pairs': self.pairs, 'ok': self.ok, 'witness': self.witness}


@dataclass
class RadiiReport:
    xi1: float
    xi2: float
    grid: List[float]
    samples: int
    violations: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ChartDiagnostics:
    D: float
    picard: PicardReport
    ift: IFTReport
    eta_probe: EtaProbe
    delta0: Delta0Report
    residuals: Dict[str, dict] = field(default_factory=dict)
    injectivity: Optional[InjectivityReport] = None
    radii_check: Optional[RadiiReport] = None
    norms: Dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'D': self.D, 'picard': self.picard.to_dict(), 'ift': self.ift.to_dict(),
                'eta_probe': self.eta_probe.to_dict(), 'delta0': self.delta0.to_dict(),
                'residuals': self.residuals,
                'injectivity': self.injectivity.to_dict() if self.injectivity else None,
                'radii_check': self.radii_check.to_dict() if self.radii_check else None,
                'norms': self.norms}


def uniform_ball_points(rng: np.random.Generator, count: int, n: int, radius: float) -> np.ndarray:
    """Uniform points of the closed ball B^n(radius)."""
    g = rng.standard_normal((count, n))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    return g * (radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / n))


def _j0_structure(S: VectorSystem, J0: IndexTuple) -> Callable[[np.ndarray], np.ndarray]:
    """Points -> c[j, l, k] with [X_J0[j], X_J0[l]] = sum_k c[j, l, k] X_J0[k]."""
    idx = [j - 1 for j in J0]
    others = [m for m in range(S.q) if m not in idx]
    if S.structure is None:
        restricted = S.restrict(J0)
        return lambda P: structure_coefficients(restricted, P)

    def fold(P: np.ndarray) -> np.ndarray:
        full = structure_coefficients(S, P)
        c = full[:, idx][:, :, idx][..., idx]
        if others:
            mats = S.matrix(P)
            basis = mats[:, :, idx]
            for m in others:
                b = cramer_solve(basis, mats[:, :, m])
                c = c + full[:, idx][:, :, idx][..., m][..., None] * b[:, None, None, :]
        return c
    return fold


def build_C_matrix(structure: Callable[[np.ndarray], np.ndarray], phi: Callable[[np.ndarray], np.ndarray],
                   n: int) -> MatrixFunction:
    """C(t)_{jk} = sum_l t_l c_{j,l}^k(Phi(t))."""

    def C(t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(t)
        c = structure(phi(t))
        return np.einsum('nl,njlk->njk', t, c)
    return MatrixFunction(n, C, name='C')


class ExpMap:
    """Phi(t) = exp(t_1 X_J0[1] + ... + t_n X_J0[n]) x0 with a fixed RK4 step count, so Phi is one smooth map."""

    def __init__(self, system: VectorSystem, x0: np.ndarray, opts: FlowOptions, radius: float):
        self.system = system
        self.x0 = x0
        self.opts = opts
        self.steps = max(1, math.ceil(opts.steps_per_unit * radius))

    def batch(self, t) -> Tuple[np.ndarray, np.ndarray]:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        x0 = np.repeat(self.x0[None], t.shape[0], axis=0)
        res = integrate(lambda y, c: self.system.combination(c, y), x0, t, self.opts, steps=self.steps)
        return res.states, res.ok

    def __call__(self, t) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        states, ok = self.batch(arr)
        if not np.all(ok):
            bad = np.atleast_2d(arr)[int(np.argmin(ok))]
            raise ChartError(f"Phi is undefined at t={bad.tolist()} (flow left the domain)")
        return states[0] if arr.ndim == 1 else states


class Chart:
    """A built chart; immutable after build_chart returns it."""

    def __init__(self, S: VectorSystem, x0: np.ndarray, J0: IndexTuple, ratio: float, config: ChartConfig,
                 radii: ChartRadii, exp_map: ExpMap, A: GridFunction, C: MatrixFunction,
                 structure: Callable[[np.ndarray], np.ndarray]):
        self.S = S
        self.x0 = x0
        self.J0 = J0
        self.wedge_ratio = ratio
        self.config = config
        self.radii = radii
        self.A = A
        self.C = C
        self._structure = structure
        self._idx = [j - 1 for j in J0]
        self._dependent = [k for k in range(1, S.q + 1) if k not in J0]
        self.exp_map = exp_map
        self.system_J0 = exp_map.system

    @property
    def n(self) -> int:
        return self.S.n

    def phi_batch(self, t) -> Tuple[np.ndarray, np.ndarray]:
        return self.exp_map.batch(t)

    def phi(self, t) -> np.ndarray:
        return self.exp_map(t)

    def phi_jacobian(self, t, h_fd: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(Phi(t), dPhi(t)) with dPhi by central differences, one batched integration."""
        h = self.config.h_fd if h_fd is None else h_fd
        t = np.atleast_2d(np.asarray(t, dtype=float))
        N, n = t.shape
        eye = np.eye(n) * h
        shifted = np.concatenate([t[:, None, :], t[:, None, :] + eye[None], t[:, None, :] - eye[None]], axis=1)
        vals = self.phi(shifted.reshape(-1, n)).reshape(N, 2 * n + 1, n)
        dphi = (vals[:, 1:n + 1] - vals[:, n + 1:]).transpose(0, 2, 1) / (2.0 * h)
        return vals[:, 0], dphi

    def frame(self, t) -> np.ndarray:
        """I + A(t); row p holds the components of Y_J0[p]."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.eye(self.n)[None] + self.A(t)

    def dependent_coeffs(self, k: int, t) -> np.ndarray:
        """b_k^l(t) with X_k(Phi(t)) = sum_l b_k^l X_J0[l](Phi(t)); k is an original index outside J0."""
        if k in self.J0 or not 1 <= k <= self.S.q:
            raise ValueError(f"field {k} is not a dependent field of J0={self.J0}")
        arr = np.asarray(t, dtype=float)
        P = self.phi(np.atleast_2d(arr))
        mats = self.S.matrix(P)
        try:
            b = cramer_solve(mats[:, :, self._idx], mats[:, :, k - 1])
        except SpanError as e:
            raise ChartError(f"X_J0 basis degenerates along the chart image: {e}") from e
        return b[0] if arr.ndim == 1 else b

    def Y(self, t) -> np.ndarray:
        """All pulled-back fields, shape (N, q, n) (or (q, n) for one point), original order."""
        arr = np.asarray(t, dtype=float)
        T = np.atleast_2d(arr)
        F = self.frame(T)
        out = np.empty((T.shape[0], self.S.q, self.n))
        for p, j in enumerate(self._idx):
            out[:, j] = F[:, p]
        for k in self._dependent:
            b = self.dependent_coeffs(k, T)
            out[:, k - 1] = np.einsum('nl,nli->ni', b, F)
        return out[0] if arr.ndim == 1 else out

    def c_tilde(self, t) -> np.ndarray:
        """c~_{j,k}^l(t) = c_{j,k}^l(Phi(t)) over J0 positions."""
        arr = np.asarray(t, dtype=float)
        c = self._structure(self.phi(np.atleast_2d(arr)))
        return c[0] if arr.ndim == 1 else c

    def inverse_batch(self, Y, T0=None) -> Tuple[np.ndarray, np.ndarray]:
        """Newton for Phi(t) = y row by row, iterates kept in B^n(eta0); returns (t, converged)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        T = np.zeros_like(Y) if T0 is None else np.array(np.atleast_2d(T0), dtype=float)
        tol = NEWTON_TOL * np.maximum(1.0, np.linalg.norm(Y, axis=1))
        done = np.zeros(Y.shape[0], dtype=bool)
        limit = self.radii.eta0
        for _ in range(NEWTON_ITERATIONS):
            live = np.flatnonzero(~done)
            if live.size == 0:
                break
            states, ok = self.phi_batch(T[live])
            gap = np.linalg.norm(states - Y[live], axis=1)
            done[live[ok & (gap <= tol[live])]] = True
            step_rows = live[~done[live] & ok]
            if step_rows.size == 0:
                break
            try:
                P, dphi = self.phi_jacobian(T[step_rows])
                delta = np.linalg.solve(dphi, (P - Y[step_rows])[..., None])[..., 0]
            except (np.linalg.LinAlgError, ChartError):
                break
            T[step_rows] -= delta
            norms = np.linalg.norm(T[step_rows], axis=1)
            over = norms > limit
            T[step_rows[over]] *= (limit / norms[over])[:, None]
        return T, done


def chart_inverse(chart: Chart, y, t_guess=None) -> np.ndarray:
    """t with Phi(t) = y within 1e-8."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    T, ok = chart.inverse_batch(y, None if t_guess is None else np.asarray(t_guess, dtype=float).reshape(1, -1))
    if not ok[0]:
        raise ConvergenceError(f"chart inverse did not converge for y={y[0].tolist()} "
                               f"in {NEWTON_ITERATIONS} iterations")
    if np.linalg.norm(T[0]) > chart.radii.eta0 * (1.0 + 1e-9):
        raise ChartError(f"y={y[0].tolist()} lies outside the chart image")
    return T[0]


def pullback_direct(phi: Callable[[np.ndarray], np.ndarray], X: VectorField, t, h_fd: float = 1e-6) -> np.ndarray:
    """Y_hat(t) = dPhi(t)^{-1} X(Phi(t)) with dPhi from central differences of phi."""
    arr = np.asarray(t, dtype=float)
    T = np.atleast_2d(arr)
    N, n = T.shape
    eye = np.eye(n) * h_fd
    shifted = np.concatenate([T[:, None], T[:, None] + eye[None], T[:, None] - eye[None]], axis=1)
    vals = np.asarray(phi(shifted.reshape(-1, n))).reshape(N, 2 * n + 1, n)
    dphi = (vals[:, 1:n + 1] - vals[:, n + 1:]).transpose(0, 2, 1) / (2.0 * h_fd)
    try:
        out = np.linalg.solve(dphi, X(vals[:, 0])[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        raise ChartError(f"dPhi is singular near t={T[0].tolist()}") from e
    return out[0] if arr.ndim == 1 else out


def dependent_coeffs(S: VectorSystem, chart: Chart, k: int, t) -> np.ndarray:
    if S is not chart.S and S != chart.S:
        raise ValueError("the system does not match the chart")
    return chart.dependent_coeffs(k, t)


def pullback_structure(chart: Chart, t, h: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """(c~ at t, max deviation from the bracket of the interpolated Y expanded in the Y basis)."""
    T = np.atleast_2d(np.asarray(t, dtype=float))
    N, n = T.shape
    h = 1e-3 * chart.radii.eta_prime if h is None else h
    c_tilde = chart.c_tilde(T)
    F = chart.frame(T)
    eye = np.eye(n) * h
    plus = chart.frame((T[:, None] + eye[None]).reshape(-1, n)).reshape(N, n, n, n)
    minus = chart.frame((T[:, None] - eye[None]).reshape(-1, n)).reshape(N, n, n, n)
    # jac[N, p, i, m] = d Y_p^i / d t_m
    jac = ((plus - minus) / (2.0 * h)).transpose(0, 2, 3, 1)
    br = (np.einsum('npim,njm->njpi', jac, F) - np.einsum('njim,npm->njpi', jac, F))
    Ft = np.transpose(F, (0, 2, 1))
    c_fd = np.linalg.solve(Ft[:, None, None], br[..., None])[..., 0]
    residual = float(np.max(np.abs(c_fd - c_tilde))) if N else 0.0
    return (c_tilde[0] if np.asarray(t).ndim == 1 else c_tilde), residual


def _psi_jacobians(frame: Callable[[np.ndarray], np.ndarray], U: np.ndarray, V: np.ndarray,
                   steps: int, h: float) -> np.ndarray:
    """dPsi_u(v) for Psi_u(v) = exp(v.Y) u, central differences in v, one batched integration."""
    N, n = U.shape
    eye = np.eye(n) * h
    coeffs = np.concatenate([V[:, None] + eye[None], V[:, None] - eye[None]], axis=1).reshape(-1, n)
    starts = np.repeat(U, 2 * n, axis=0)
    res = integrate(lambda y, c: np.einsum('nj,nji->ni', c, frame(y)), starts, coeffs, FlowOptions(), steps=steps)
    vals = res.states.reshape(N, 2 * n, n)
    return (vals[:, :n] - vals[:, n:]).transpose(0, 2, 1) / (2.0 * h)


def _surjectivity_ratio(frame: Callable[[np.ndarray], np.ndarray], n: int, kappa: float, Delta0: float,
                        steps: int, h: float) -> float:
    """max |v| / Delta0 over Newton preimages of points on the sphere of radius kappa*Delta0 under Psi_0."""
    W = kappa * Delta0 * sphere_directions(n, 2 * n)
    U = np.zeros_like(W)
    V = np.zeros_like(W)
    velocity = lambda y, c: np.einsum('nj,nji->ni', c, frame(y))
    for _ in range(NEWTON_ITERATIONS):
        P = integrate(velocity, U, V, FlowOptions(), steps=steps).states
        R = P - W
        if np.max(np.linalg.norm(R, axis=1)) <= 1e-12 * max(1.0, kappa * Delta0):
            break
        J = _psi_jacobians(frame, U, V, steps, h)
        V = V - np.linalg.solve(J, R[..., None])[..., 0]
    return float(np.max(np.linalg.norm(V, axis=1)) / Delta0)


def ift_kappa(frame: Callable[[np.ndarray], np.ndarray], n: int, eta: float, delta0: float = math.inf,
              samples: int = 16, seed: int = 0, steps_per_unit: int = 200, h_fd: float = 1e-6) -> IFTReport:
    """kappa and Delta0 for the maps Psi_u(v) = exp(v_1 Y_1 + ... + v_n Y_n) u, |u| <= eta/2.

    frame(u) returns rows Y_1(u) .. Y_n(u). kappa = 1/2 * (sup ||dPsi^{-1}||)^{-1}
    over sampled (u, v); Delta0 keeps ||dPsi_u(0)^{-1}|| L Delta0 <= 1/2
    where L bounds ||dPsi_u(v) - dPsi_u(0)|| / |v|.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    rng = np.random.default_rng(seed)
    u_radius = 0.5 * eta
    U = np.vstack([np.zeros((1, n)), uniform_ball_points(rng, max(samples - 1, 0), n, u_radius)])
    dets0 = np.abs(np.linalg.det(frame(U)))
    c0 = float(np.min(dets0))
    if c0 < DET_FLOOR:
        raise IFTError(f"|det(Y_1 | ... | Y_n)| drops to {c0:.3g} on B^{n}({u_radius:.4g})")
    dirs = sphere_directions(n, 2 * n)
    V_base = np.vstack([np.zeros((1, n))] + [r * u_radius * dirs for r in (0.25, 0.5, 1.0)])
    m = V_base.shape[0]
    UU = np.repeat(U, m, axis=0)
    VV = np.tile(V_base, (U.shape[0], 1))
    steps = max(4, math.ceil(steps_per_unit * 1.5 * u_radius))
    J = _psi_jacobians(frame, UU, VV, steps, h_fd).reshape(U.shape[0], m, n, n)
    try:
        inv_norms = np.linalg.norm(np.linalg.inv(J), ord=2, axis=(-2, -1))
    except np.linalg.LinAlgError as e:
        raise IFTError("dPsi is singular at a sampled point") from e
    vnorm = np.linalg.norm(V_base, axis=1)
    lip = float(np.max(np.linalg.norm(J[:, 1:] - J[:, :1], ord=2, axis=(-2, -1)) / vnorm[None, 1:]))
    M0 = float(np.max(inv_norms[:, 0]))
    delta2 = u_radius if lip <= 0 else min(u_radius, 1.0 / (2.0 * M0 * lip))
    within = vnorm <= delta2 * (1.0 + 1e-12)
    kappa = 0.5 / float(np.max(inv_norms[:, within]))
    Delta0 = min(0.99 * delta2, 0.99 * eta / (2.0 * kappa), delta0)
    if Delta0 <= 0:
        raise IFTError(f"no admissible Delta0 (delta2={delta2:.3g}, delta0={delta0:.3g})")
    sel = J[:, within].reshape(-1, n, n)
    dets = np.abs(np.linalg.det(sel))
    top = float(np.max(np.linalg.norm(sel, ord=2, axis=(-2, -1))))
    cofactor = 0.5 * float(np.min(dets)) / top ** (n - 1)
    surj = _surjectivity_ratio(frame, n, kappa, Delta0, steps, h_fd)
    report = IFTReport(kappa, Delta0, u_radius, delta2, lip, M0, c0, cofactor,
                       bool(kappa >= cofactor * (1.0 - 1e-9)), int(UU.shape[0]), surj)
    logger.info(f"IFT radii: kappa={kappa:.4g} Delta0={Delta0:.4g} (L={lip:.3g}, delta2={delta2:.4g})")
    return report


def verify_injectivity(chart: Chart, pairs: Optional[int] = None, seed: int = 0) -> InjectivityReport:
    """min |Phi(t) - Phi(t')| / |t - t'| over random pairs of B^n(eta1)."""
    pairs = chart.config.injectivity_pairs if pairs is None else int(pairs)
    rng = np.random.default_rng(seed)
    eta1 = chart.radii.eta1
    T1 = uniform_ball_points(rng, pairs, chart.n, eta1)
    T2 = uniform_ball_points(rng, pairs, chart.n, eta1)
    near = pairs // 4
    T2[:near] = T1[:near] + uniform_ball_points(rng, near, chart.n, 1e-3 * eta1)
    P = chart.phi(np.vstack([T1, T2]))
    gap = np.linalg.norm(T1 - T2, axis=1)
    keep = gap > 0
    ratios = np.linalg.norm(P[:pairs] - P[pairs:], axis=1)[keep] / gap[keep]
    c_min = float(np.min(ratios)) if ratios.size else math.inf
    witness = None
    if c_min < COLLISION_RATIO:
        i = np.flatnonzero(keep)[int(np.argmin(ratios))]
        witness = {'t': T1[i].tolist(), 't_prime': T2[i].tolist(), 'ratio': c_min}
        logger.warning(f"near collision of Phi at {witness}")
    return InjectivityReport(c_min, int(np.count_nonzero(keep)), witness)


def radii_estimates(chart: Chart, S: Optional[VectorSystem] = None, params: Optional[CCParams] = None,
                    samples: Optional[int] = None, seed: int = 0, levels: int = 6) -> RadiiReport:
    """Largest xi2 <= xi1 on the ladder eta1 * 2^-k with sampled B_X(x0, xi2) in B_X_J0(x0, xi1) in Phi(B(eta1))."""
    S = chart.S if S is None else S
    samples = chart.config.radii_samples if samples is None else int(samples)
    rng = np.random.default_rng(seed)
    eta1 = chart.radii.eta1
    grid = [eta1 * 2.0 ** -k for k in range(levels)]
    xi1 = 0.0
    for xi in grid:
        pts = sample_ball_points(chart.system_J0, chart.x0, xi, samples, rng)
        T, ok = chart.inverse_batch(pts)
        if np.all(ok) and np.all(np.linalg.norm(T, axis=1) <= eta1 * (1.0 + 1e-9)):
            xi1 = xi
            break
    xi2 = 0.0
    violations = 0
    if xi1 > 0:
        graph = CCGraph(chart.system_J0, chart.x0, xi1, params)
        for xi in grid:
            if xi > xi1:
                continue
            pts = sample_ball_points(S, chart.x0, xi, samples, rng)
            inside = graph.distances(pts) < xi1
            if np.all(inside):
                xi2 = xi
                break
            violations += int(np.count_nonzero(~inside))
    logger.info(f"radii estimates: xi1={xi1:.4g}, xi2={xi2:.4g}")
    return RadiiReport(xi1, xi2, grid, samples, violations)


def _pick_J0(S: VectorSystem, x0: np.ndarray, config: ChartConfig) -> Tuple[IndexTuple, float]:
    if config.J0 is None:
        return select_J0(S, x0, config.zeta)
    J0 = validate_index_tuple(config.J0, S.n, S.q)
    ratio = float(wedge_ratios(S, J0, x0)[0])
    if not math.isfinite(ratio):
        raise SpanError(f"X_J0 with J0={J0} is degenerate at {x0.tolist()}", x0)
    return J0, ratio


def _verify(chart: Chart, rng: np.random.Generator, picard: PicardReport) -> Dict[str, dict]:
    S, n = chart.S, chart.n
    T = np.vstack([np.zeros((1, n)), uniform_ball_points(rng, chart.config.verify_samples - 1, n, chart.radii.eta1)])
    P, dphi = chart.phi_jacobian(T)
    residuals: Dict[str, dict] = {}

    ratios = wedge_ratios(S, chart.J0, P)
    if not np.all(np.isfinite(ratios)):
        bad = T[int(np.argmax(~np.isfinite(ratios)))]
        raise ChartError(f"X_J0 degenerates on the chart image at t={bad.tolist()}")
    if np.max(ratios) > 2.0 / chart.config.zeta:
        logger.warning(f"wedge ratio reaches {np.max(ratios):.3g} on the chart image")
    residuals['wedge'] = {'max_ratio': float(np.max(ratios)), 'zeta': chart.config.zeta}

    Y = chart.Y(T)
    lhs = np.einsum('nik,njk->nji', dphi, Y)
    X = np.transpose(S.matrix(P), (0, 2, 1))
    scale = 1.0 + np.linalg.norm(X, axis=2)
    err = np.linalg.norm(lhs - X, axis=2) / scale
    residuals['pullback'] = {'max': float(np.max(err)), 'per_field': np.max(err, axis=0).tolist(),
                             'samples': int(T.shape[0])}

    F = chart.frame(T)
    det_lhs = np.abs(np.linalg.det(dphi)) * np.abs(np.linalg.det(F))
    det_rhs = np.abs(np.linalg.det(S.matrix(P)[:, :, chart._idx]))
    residuals['determinant'] = {'max_relative': float(np.max(np.abs(det_lhs - det_rhs) / det_rhs))}

    norms = chart.A.node_norms()[chart.A.spec.mask]
    residuals['A_bound'] = {'A_origin': float(np.max(np.abs(chart.A.at_origin()))),
                            'max_norm': float(np.max(norms)), 'half_bound_ok': bool(np.max(norms) <= 0.5),
                            'sixteenth_excess': picard.bound_excess,
                            'sixteenth_bound_ok': bool(picard.bound_excess <= 1e-12)}

    if chart._dependent:
        worst = 0.0
        for k in chart._dependent:
            b = chart.dependent_coeffs(k, T)
            direct_k = pullback_direct(chart.phi, S.fields[k - 1], T, chart.config.h_fd)
            direct_l = np.stack([pullback_direct(chart.phi, S.fields[j - 1], T, chart.config.h_fd)
                                 for j in chart.J0], axis=1)
            worst = max(worst, float(np.max(np.linalg.norm(direct_k - np.einsum('nl,nli->ni', b, direct_l), axis=1))))
        residuals['dependent'] = {'max': worst, 'fields': list(chart._dependent)}

    _, structure_err = pullback_structure(chart, T)
    residuals['structure'] = {'max': structure_err}
    return residuals


def build_chart(S: VectorSystem, x0, zeta: Optional[float] = None,
                config: Optional[ChartConfig] = None) -> Tuple[Chart, ChartDiagnostics]:
    """Construct and verify the canonical chart of S at x0."""
    config = config or ChartConfig()
    if zeta is not None:
        config = replace(config, zeta=zeta)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != S.n:
        raise ValueError(f"x0 has {x0.shape[0]} coordinates, expected {S.n}")
    if not S.domain.contains(x0):
        raise ValueError(f"x0={x0.tolist()} is outside the domain")
    n = S.n

    J0, ratio = _pick_J0(S, x0, config)
    SJ = S.restrict(J0)
    opts = FlowOptions(steps_per_unit=config.steps_per_unit, domain=S.domain)
    probe = probe_eta(SJ, x0, config.eta_max, opts, config.n_dirs)
    xi_box = float(min(np.min(x0 - S.domain.lo), np.min(S.domain.hi - x0)))
    eta0 = min(probe.eta, xi_box)
    if eta0 <= 0:
        raise ChartError(f"x0={x0.tolist()} lies on the domain boundary")
    logger.info(f"J0={J0}, eta={probe.eta:.6g}, eta0={eta0:.6g} at x0={x0.tolist()}")

    structure = _j0_structure(S, J0)
    radii = ChartRadii(probe.eta, xi_box, eta0, eta0, eta0)
    exp_map = ExpMap(SJ, x0, opts, eta0)
    C = build_C_matrix(structure, exp_map, n)
    D = estimate_D(C, eta0, config.grid, n)
    A, picard = picard_solve(C, eta0, config.grid, config.tol, n=n, quad_points=config.quad_points, D=D)
    radii.eta_prime = picard.eta

    chart = Chart(S, x0, J0, ratio, config, radii, exp_map, A, C, structure)
    c0 = float(np.min(np.abs(np.linalg.det(np.eye(n)[None] + A.values[A.spec.mask]))))
    if c0 < DET_FLOOR:
        raise IFTError(f"det(I + A) drops to {c0:.3g} on the Picard ball")

    delta_grid = config.delta_grid or tuple(eta0 * 2.0 ** -k for k in range(6))
    K = Box.around(x0, 0.25 * eta0).intersect(S.domain)
    d0 = probe_delta0(SJ, K, delta_grid, opts=opts)
    delta0 = d0.delta0 if d0.delta0 > 0 else min(delta_grid)
    ift = ift_kappa(chart.frame, n, radii.eta_prime, delta0, config.ift_samples, config.seed,
                    config.steps_per_unit, config.h_fd)
    if not ift.surjectivity_ok:
        raise IFTError(f"Psi_0(B^{n}({ift.delta1:.4g})) misses B^{n}(kappa*delta1), "
                       f"preimage ratio {ift.surjectivity_ratio:.3g}")
    radii.delta1 = ift.delta1
    radii.eta1 = min(ift.kappa * radii.delta1, radii.eta_prime)

    diagnostics = ChartDiagnostics(D, picard, ift, probe, d0)
    rng = np.random.default_rng(config.seed)
    diagnostics.residuals = _verify(chart, rng, picard)
    diagnostics.injectivity = verify_injectivity(chart, seed=config.seed)
    if not diagnostics.injectivity.ok:
        raise InjectivityError(f"Phi is not injective on B^{n}({radii.eta1:.4g}): {diagnostics.injectivity.witness}")
    diagnostics.norms['A'] = cml_norm(A, m=0, l=2, omega_exponent=0.5).to_dict()
    if config.estimate_radii:
        diagnostics.radii_check = radii_estimates(chart, seed=config.seed)
        radii.xi1 = diagnostics.radii_check.xi1
        radii.xi2 = diagnostics.radii_check.xi2
    logger.info(f"chart built: eta'={radii.eta_prime:.4g} eta1={radii.eta1:.4g} D={D:.4g}")
    return chart, diagnostics


def sample_Y(chart: Chart, points) -> np.ndarray:
    """Y_j at the given t, shape (N, q, n)."""
    return chart.Y(np.atleast_2d(np.asarray(points, dtype=float)))


def chart_to_json(chart: Chart, diagnostics: ChartDiagnostics, path: Union[str, Path]) -> Path:
    """Header JSON plus the A payload as CSV next to it."""
    path = Path(path)
    payload = path.with_name(path.stem + '_A.csv')
    path.parent.mkdir(parents=True, exist_ok=True)
    chart.A.to_csv(payload)
    header = {
        'system': chart.S.name,
        'x0': chart.x0.tolist(),
        'J0': list(chart.J0),
        'wedge_ratio': chart.wedge_ratio,
        'radii': chart.radii.to_dict(),
        'grid': {'n': chart.A.spec.n, 'eta': chart.A.spec.eta, 'resolution': chart.A.spec.resolution},
        'A_payload': payload.name,
        'diagnostics': diagnostics.to_dict(),
    }
    return write_json(path, header)
