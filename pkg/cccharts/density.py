"""
Densities nu = w * Leb, the distinguished density nu0 of a chart basis,
Lie-derivative ratios, the chart pullback h and ball-measure comparisons.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .ccmetric import CCGraph, CCParams
from .chart import Chart, uniform_ball_points
from .errors import ConvergenceError, DomainError, SpanError
from .expr import Expr, as_expr, gradient
from .fields import VectorField, VectorSystem, fd_jacobian, validate_index_tuple
from .flows import sphere_directions
from .workers import WorkerPool, chunk_rng, chunk_sizes

logger = logging.getLogger(__name__)


class Density:
    """A density given by its weight against Lebesgue measure."""

    def __init__(self, n: int, weight: Callable[[np.ndarray], np.ndarray], expr: Optional[Expr] = None,
                 tag: str = 'custom', factor: float = 1.0):
        self.n = int(n)
        self._weight = weight
        self.expr = expr
        self.tag = tag
        self.factor = float(factor)

    @classmethod
    def lebesgue(cls, n: int) -> 'Density':
        return cls(n, lambda p: np.ones(p.shape[0]), as_expr(1.0, n), tag='lebesgue')

    @classmethod
    def from_expr(cls, weight: Union[str, Expr, float], n: int, tag: str = 'weight') -> 'Density':
        e = as_expr(weight, n)
        return cls(n, lambda p: np.broadcast_to(np.asarray(e.evaluate(p), dtype=float), (p.shape[0],)), e, tag)

    @classmethod
    def nu0(cls, S: VectorSystem, J0: Sequence[int]) -> 'Density':
        """Weight 1/|det X_J0|, so nu0(X_J0[1], ..., X_J0[n]) = 1."""
        J0 = validate_index_tuple(J0, S.n, S.q)
        cols = [j - 1 for j in J0]

        def weight(p: np.ndarray) -> np.ndarray:
            det = np.abs(np.linalg.det(S.matrix(p)[:, :, cols]))
            if np.any(det == 0.0):
                raise SpanError("nu0 is undefined where X_J0 degenerates")
            return 1.0 / det
        return cls(S.n, weight, tag='nu0')

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.factor * np.asarray(self._weight(pts), dtype=float).reshape(-1)

    def gradient(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.expr is not None:
            grads = np.stack([np.broadcast_to(np.asarray(g.evaluate(pts), dtype=float), (pts.shape[0],))
                              for g in gradient(self.expr, self.n)], axis=-1)
            return self.factor * grads
        return fd_jacobian(self, pts)

    def scaled(self, factor: float) -> 'Density':
        return Density(self.n, self._weight, self.expr, self.tag, self.factor * float(factor))

    def of_vectors(self, x, Z: np.ndarray) -> float:
        """nu(Z_1, ..., Z_n)(x) = w(x) det(Z_1 | ... | Z_n)."""
        Z = np.asarray(Z, dtype=float)
        return float(self(np.asarray(x, dtype=float)[None])[0] * np.linalg.det(Z.T))


def nu0_eval(S: VectorSystem, x, Z, J0: Optional[Sequence[int]] = None) -> float:
    """|det(Z_1 | ... | Z_n)| / |det X_J0(x)|; Z holds one vector per row."""
    J0 = tuple(range(1, S.n + 1)) if J0 is None else validate_index_tuple(J0, S.n, S.q)
    x = np.asarray(x, dtype=float).reshape(-1)
    base = abs(float(np.linalg.det(S.matrix(x)[:, [j - 1 for j in J0]])))
    if base == 0.0:
        raise SpanError(f"X_J0 is degenerate at {x.tolist()}", x)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (S.n, S.n):
        raise ValueError(f"expected {S.n} vectors of length {S.n}, got shape {Z.shape}")
    return abs(float(np.linalg.det(Z.T))) / base


def lie_ratio(X: VectorField, nu: Density, x) -> Union[float, np.ndarray]:
    """f with L_X nu = f nu: div X + (X w) / w."""
    arr = np.asarray(x, dtype=float)
    pts = np.atleast_2d(arr)
    w = nu(pts)
    if np.any(w == 0.0):
        raise DomainError("the density weight vanishes; the Lie ratio is undefined")
    div = np.trace(X.jacobian(pts), axis1=-2, axis2=-1)
    Xw = np.einsum('ni,ni->n', nu.gradient(pts), X(pts))
    out = div + Xw / w
    return float(out[0]) if arr.ndim == 1 else out


def pullback_h(chart: Chart, nu: Density, t) -> Union[float, np.ndarray]:
    """h(t) = w(Phi(t)) |det dPhi(t)|, the density of Phi^* nu against Lebesgue."""
    arr = np.asarray(t, dtype=float)
    P, dphi = chart.phi_jacobian(np.atleast_2d(arr))
    h = nu(P) * np.abs(np.linalg.det(dphi))
    return float(h[0]) if arr.ndim == 1 else h


def ball_quadrature(n: int, r: float, radial: int = 16, angular: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Points and weights integrating over B^n(r): Gauss-Legendre in the radius times a sphere rule."""
    x, w = leggauss(radial)
    rho = 0.5 * r * (x + 1.0)
    w_rho = 0.5 * r * w * rho ** (n - 1)
    if n == 1:
        dirs, w_dir = np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    elif n == 2:
        ang = 2.0 * math.pi * np.arange(angular) / angular
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        w_dir = np.full(angular, 2.0 * math.pi / angular)
    elif n == 3:
        cz, wz = leggauss(angular // 2)
        ang = 2.0 * math.pi * np.arange(angular) / angular
        CZ, A = np.meshgrid(cz, ang, indexing='ij')
        sz = np.sqrt(1.0 - CZ ** 2)
        dirs = np.stack([sz * np.cos(A), sz * np.sin(A), CZ], axis=-1).reshape(-1, 3)
        w_dir = np.repeat(wz, angular) * (2.0 * math.pi / angular)
    else:
        dirs = sphere_directions(n, angular * n, include_axes=False)
        area = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
        w_dir = np.full(dirs.shape[0], area / dirs.shape[0])
    points = (rho[:, None, None] * dirs[None]).reshape(-1, n)
    weights = (w_rho[:, None] * w_dir[None]).reshape(-1)
    return points, weights


@dataclass
class MeasureEstimate:
    value: float
    stderr: float
    samples: int
    hits: int
    box_volume: float
    tag: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def weighted_ball_measure(S: VectorSystem, x, delta: float, nu: Density, N: int, seed: int = 0,
                          params: Optional[CCParams] = None) -> MeasureEstimate:
    """Monte-Carlo nu(B_X(x, delta)): uniform samples of the ball's bounding box weighted by w."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    params = params or CCParams()
    graph = CCGraph(S, x, delta, params)
    sizes = chunk_sizes(N, params.chunk)

    def run(index: int) -> Tuple[float, float, int]:
        Z = chunk_rng(seed, index).uniform(-1.0, 1.0, size=(sizes[index], S.n))
        P = graph.to_world(Z)
        inside = graph.distances(P) < delta
        v = np.zeros(P.shape[0])
        if np.any(inside):
            v[inside] = nu(P[inside])
        return float(np.sum(v)), float(np.sum(v * v)), int(np.count_nonzero(inside))

    parts = WorkerPool(params.threads).map(run, range(len(sizes)))
    total = sum(p[0] for p in parts)
    squares = sum(p[1] for p in parts)
    hits = sum(p[2] for p in parts)
    box_volume = float(np.prod(2.0 * graph.half))
    mean = total / N
    var = max(squares / N - mean * mean, 0.0)
    return MeasureEstimate(mean * box_volume, math.sqrt(var / N) * box_volume, int(N), hits, box_volume, nu.tag)


@dataclass
class MeasureComparison:
    xi2: float
    ball_X: MeasureEstimate
    ball_XJ0: MeasureEstimate
    comparator_J0: float
    comparator_max: float
    ratios: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'xi2': self.xi2, 'ball_X': self.ball_X.to_dict(), 'ball_XJ0': self.ball_XJ0.to_dict(),
                'comparator_J0': self.comparator_J0, 'comparator_max': self.comparator_max,
                'ratios': dict(self.ratios)}

    def to_rows(self, x0: Sequence[float], seed: int) -> List[list]:
        """Rows in the ball-volume CSV layout with a weight tag column."""
        return [[list(x0), self.xi2, est.value, est.stderr, est.samples, seed, f"{est.tag}:{name}"]
                for name, est in (('X', self.ball_X), ('X_J0', self.ball_XJ0))]


def ball_measure_compare(S: VectorSystem, chart: Chart, nu: Density, xi2: Optional[float] = None,
                         params: Optional[CCParams] = None, N: int = 20000, seed: int = 0) -> MeasureComparison:
    """nu of B_X(x0, xi2) and of B_X_J0(x0, xi2) against |nu(X_J0)(x0)| and max over n-tuples."""
    if xi2 is None:
        xi2 = chart.radii.xi2
    if not xi2 or xi2 <= 0:
        raise ValueError("xi2 must be positive; run radii_estimates first or pass it explicitly")
    x0 = chart.x0
    mats = S.matrix(x0)
    w0 = float(nu(x0[None])[0])
    comp_J0 = abs(w0 * float(np.linalg.det(mats[:, [j - 1 for j in chart.J0]])))
    comp_max = 0.0
    for J in itertools.combinations(range(S.q), S.n):
        comp_max = max(comp_max, abs(w0 * float(np.linalg.det(mats[:, list(J)]))))
    ball_X = weighted_ball_measure(S, x0, xi2, nu, N, seed, params)
    ball_J = weighted_ball_measure(chart.system_J0, x0, xi2, nu, N, seed, params)
    if comp_J0 == 0.0 or ball_X.value == 0.0:
        raise ConvergenceError("degenerate ball measure estimate")
    ratios = {'ball_XJ0/ball_X': ball_J.value / ball_X.value,
              'ball_X/comparator_J0': ball_X.value / comp_J0,
              'ball_XJ0/comparator_J0': ball_J.value / comp_J0,
              'comparator_max/comparator_J0': comp_max / comp_J0}
    logger.info(f"ball measures at xi2={xi2:.4g}: {ball_X.value:.6g} (X), {ball_J.value:.6g} (X_J0)")
    return MeasureComparison(float(xi2), ball_X, ball_J, comp_J0, comp_max, ratios)


@dataclass
class ChangeOfVariablesReport:
    radius: float
    mc_value: float
    mc_stderr: float
    quadrature: float
    samples: int

    @property
    def deviation(self) -> float:
        """|MC - quadrature| in units of the MC standard error."""
        return abs(self.mc_value - self.quadrature) / max(self.mc_stderr, 1e-300)

    def to_dict(self) -> dict:
        return {**self.__dict__, 'deviation': self.deviation}


def change_of_variables_check(chart: Chart, nu: Density, r: Optional[float] = None, N: int = 4000,
                              seed: int = 0, radial: int = 16, angular: int = 32) -> ChangeOfVariablesReport:
    """nu(Phi(B^n(r))) by Monte Carlo against the quadrature of h over B^n(r)."""
    r = chart.radii.eta1 if r is None else float(r)
    if not 0 < r <= chart.radii.eta0:
        raise ValueError(f"r must lie in (0, eta0], got {r}")
    n = chart.n
    pts, wts = ball_quadrature(n, r, radial, angular)
    quad = float(np.sum(wts * pullback_h(chart, nu, pts)))

    rim = chart.phi(r * sphere_directions(n, 8 * n))
    lo = np.minimum(rim.min(axis=0), chart.x0)
    hi = np.maximum(rim.max(axis=0), chart.x0)
    pad = 0.1 * (hi - lo) + 1e-12
    lo, hi = lo - pad, hi + pad
    rng = np.random.default_rng(seed)
    Y = lo + (hi - lo) * rng.uniform(size=(N, n))
    T, ok = chart.inverse_batch(Y)
    inside = ok & (np.linalg.norm(T, axis=1) <= r)
    v = np.zeros(N)
    if np.any(inside):
        v[inside] = nu(Y[inside])
    box = float(np.prod(hi - lo))
    mean = float(np.mean(v))
    stderr = float(np.std(v) / math.sqrt(N)) * box
    report = ChangeOfVariablesReport(r, mean * box, stderr, quad, N)
    logger.info(f"change of variables on B^{n}({r:.4g}): MC {report.mc_value:.6g} +- {stderr:.2g}, "
                f"quadrature {quad:.6g}")
    return report


@dataclass
class GRatioReport:
    max_value: float
    min_value: float
    sign_constant: bool
    samples: int

    @property
    def spread(self) -> float:
        return abs(self.max_value / self.min_value) if self.min_value else math.inf

    def to_dict(self) -> dict:
        return {**self.__dict__, 'spread': self.spread}


def g_ratio_sweep(chart: Chart, nu: Density, samples: int = 200, seed: int = 0) -> GRatioReport:
    """g = nu / nu0 = w |det X_J0| over sampled chart points Phi(t), |t| <= eta1."""
    rng = np.random.default_rng(seed)
    T = np.vstack([np.zeros((1, chart.n)), uniform_ball_points(rng, samples - 1, chart.n, chart.radii.eta1)])
    P = chart.phi(T)
    g = nu(P) * np.abs(np.linalg.det(chart.S.matrix(P)[:, :, [j - 1 for j in chart.J0]]))
    sign_constant = bool(np.all(g > 0) or np.all(g < 0))
    if not sign_constant:
        logger.warning("g = nu/nu0 changes sign over the chart image")
    return GRatioReport(float(np.max(g)), float(np.min(g)), sign_constant, int(T.shape[0]))
