"""
The singular matrix ODE d/dr (r A(r theta)) = -A^2 - C A - C.

A and C live on a Cartesian grid over the cube [-eta, eta]^n with the
origin as a node. Nodes outside the ball B^n(eta) carry the value at their
radial projection onto the sphere of radius eta, so multilinear
interpolation at any point of the ball only mixes values from the ball.

Solutions are fixed points of

    T(A)(x) = int_0^1 -A(sx)^2 - C(sx) A(sx) - C(sx) ds,

iterated from A_0 = 0 in the metric d(A, B) = sup_{x != 0} |A(x) - B(x)| / |x|.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RegularGridInterpolator

from .errors import GridMismatchError, PicardError
from .flows import sphere_directions

logger = logging.getLogger(__name__)

MatrixField = Callable[[np.ndarray], np.ndarray]

RATIO_FAILURE = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Cartesian nodes over [-eta, eta]^n, resolution nodes per axis (odd)."""

    n: int
    eta: float
    resolution: int

    def __post_init__(self):
        if self.n < 1 or self.eta <= 0:
            raise ValueError(f"invalid grid n={self.n} eta={self.eta}")
        if self.resolution < 3 or self.resolution % 2 == 0:
            raise ValueError(f"resolution must be odd and >= 3, got {self.resolution}")

    @cached_property
    def axis(self) -> np.ndarray:
        ax = np.linspace(-self.eta, self.eta, self.resolution)
        ax[self.resolution // 2] = 0.0
        return ax

    @property
    def spacing(self) -> float:
        return 2.0 * self.eta / (self.resolution - 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.resolution,) * self.n

    @property
    def size(self) -> int:
        return self.resolution ** self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.n), indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=1)

    @cached_property
    def mask(self) -> np.ndarray:
        """Nodes inside the closed ball."""
        return self.radii <= self.eta * (1.0 + 1e-12)

    @cached_property
    def origin_index(self) -> int:
        return int(np.ravel_multi_index((self.resolution // 2,) * self.n, self.shape))

    @cached_property
    def support_points(self) -> np.ndarray:
        pts = self.nodes.copy()
        outside = ~self.mask
        pts[outside] *= (self.eta / self.radii[outside])[:, None]
        return pts


def make_grid(n: int, eta: float, resolution: int) -> GridSpec:
    """Grid with at least `resolution` nodes per axis, bumped to odd so the origin is a node."""
    res = max(3, int(resolution))
    if res % 2 == 0:
        res += 1
    return GridSpec(int(n), float(eta), res)


class GridFunction:
    """Values (matrices by default) at the nodes of a GridSpec with multilinear interpolation."""

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != spec.size:
            raise GridMismatchError(f"{values.shape[0]} values for a grid of {spec.size} nodes")
        self.spec = spec
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def zeros(cls, spec: GridSpec, value_shape: Optional[Tuple[int, ...]] = None) -> 'GridFunction':
        shape = (spec.n, spec.n) if value_shape is None else tuple(value_shape)
        return cls(spec, np.zeros((spec.size,) + shape))

    @classmethod
    def from_function(cls, spec: GridSpec, F: MatrixField) -> 'GridFunction':
        return cls(spec, np.asarray(F(spec.support_points), dtype=float))

    @property
    def value_shape(self) -> Tuple[int, ...]:
        return self.values.shape[1:]

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        grid_values = self.values.reshape(self.spec.shape + self.value_shape)
        return RegularGridInterpolator((self.spec.axis,) * self.spec.n, grid_values,
                                       method='linear', bounds_error=False, fill_value=None)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        pts = np.clip(pts, -self.spec.eta, self.spec.eta)
        out = self._interpolator(pts)
        return out[0] if single else out

    def at_origin(self) -> np.ndarray:
        return self.values[self.spec.origin_index]

    def node_norms(self) -> np.ndarray:
        """Operator norm (matrices), Euclidean norm (vectors) or |.| per node."""
        return value_norms(self.values)

    def map_values(self, func: Callable[[np.ndarray], np.ndarray]) -> 'GridFunction':
        return GridFunction(self.spec, func(np.array(self.values)))

    def partial_derivative(self, k: int) -> 'GridFunction':
        """Central-difference d/dx_k on the grid (one-sided at the cube faces); k is 1-based."""
        grid_values = self.values.reshape(self.spec.shape + self.value_shape)
        deriv = np.gradient(grid_values, self.spec.axis, axis=k - 1)
        return GridFunction(self.spec, deriv.reshape(self.values.shape))

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['n', 'eta', 'resolution'])
            writer.writerow([self.spec.n, repr(self.spec.eta), self.spec.resolution])
            for inside, row in zip(self.spec.mask, self.values.reshape(self.spec.size, -1)):
                writer.writerow([int(inside)] + [repr(float(v)) for v in row])
        logger.info(f"grid function written to {path}")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], value_shape: Optional[Tuple[int, ...]] = None) -> 'GridFunction':
        with open(path, newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            next(reader)
            n, eta, res = next(reader)
            spec = GridSpec(int(n), float(eta), int(res))
            rows = [[float(v) for v in row[1:]] for row in reader]
        shape = (spec.n, spec.n) if value_shape is None else tuple(value_shape)
        return cls(spec, np.asarray(rows).reshape((spec.size,) + shape))


def value_norms(values: np.ndarray) -> np.ndarray:
    if values.ndim == 1:
        return np.abs(values)
    if values.ndim == 2:
        return np.linalg.norm(values, axis=1)
    return np.linalg.norm(values, ord=2, axis=(-2, -1))


def infer_dimension(C) -> int:
    """Dimension carried by a grid function or a field wrapper; callables need an explicit n."""
    if hasattr(C, 'spec'):
        return C.spec.n
    if hasattr(C, 'n'):
        return int(C.n)
    raise ValueError("cannot infer the dimension of C; pass n explicitly")


def _check_same_grid(A: GridFunction, B: GridFunction) -> None:
    if A.spec != B.spec or A.value_shape != B.value_shape:
        raise GridMismatchError(f"grid mismatch: {A.spec} vs {B.spec}")


def estimate_D(C: MatrixField, eta: float, resolution: int = 17, n: Optional[int] = None) -> float:
    """max over nonzero ball nodes of |C(x)| / |x|."""
    if n is None:
        n = infer_dimension(C)
    spec = make_grid(n, eta, resolution)
    c0 = np.asarray(C(np.zeros((1, n))))[0]
    if np.max(np.abs(c0)) > 1e-10:
        raise PicardError(f"C(0) must vanish, got norm {np.max(np.abs(c0)):.3g}")
    sel = spec.mask & (spec.radii > 0)
    pts = spec.nodes[sel]
    vals = np.asarray(C(pts), dtype=float)
    return float(np.max(value_norms(vals) / spec.radii[sel])) if pts.size else 0.0


class RadialQuadrature:
    """Gauss-Legendre nodes s_i in [0, 1] (composite over panels) times every support point."""

    def __init__(self, spec: GridSpec, quad_points: int = 16, panels: int = 1):
        x, w = leggauss(quad_points)
        edges = np.linspace(0.0, 1.0, panels + 1)
        s, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            s.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * w)
        self.spec = spec
        self.s = np.concatenate(s)
        self.weights = np.concatenate(ws)
        self.points = spec.support_points[:, None, :] * self.s[None, :, None]

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, self.spec.n)

    def sample(self, F: MatrixField) -> np.ndarray:
        vals = np.asarray(F(self.flat_points), dtype=float)
        return vals.reshape(self.points.shape[:2] + vals.shape[1:])


def apply_T(A: GridFunction, C: Optional[MatrixField], quad_points: int = 16, panels: int = 1,
            quadrature: Optional[RadialQuadrature] = None, c_samples: Optional[np.ndarray] = None) -> GridFunction:
    """Node-wise Gauss-Legendre quadrature of -A(sx)^2 - C(sx)A(sx) - C(sx) over s in [0, 1]."""
    quad = quadrature or RadialQuadrature(A.spec, quad_points, panels)
    if c_samples is None:
        c_samples = quad.sample(C)
    a_samples = A(quad.flat_points).reshape(c_samples.shape)
    integrand = -(a_samples @ a_samples) - c_samples @ a_samples - c_samples
    values = np.einsum('q,mqij->mij', quad.weights, integrand)
    values[A.spec.origin_index] = 0.0
    return GridFunction(A.spec, values)


def weighted_distance(A: GridFunction, B: GridFunction) -> float:
    """max over nonzero ball nodes of |A(x) - B(x)|_op / |x|."""
    _check_same_grid(A, B)
    spec = A.spec
    sel = spec.mask & (spec.radii > 0)
    if not np.any(sel):
        return 0.0
    diff = value_norms(A.values[sel] - B.values[sel])
    return float(np.max(diff / spec.radii[sel]))


@dataclass
class PicardReport:
    D: float
    eta_requested: float
    eta: float
    truncated: bool
    iterations: int
    distances: List[float] = field(default_factory=list)
    residual: float = 0.0
    max_norm: float = 0.0
    bound_excess: float = 0.0

    @property
    def ratios(self) -> List[float]:
        d = self.distances
        return [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]

    def to_dict(self) -> dict:
        return {'D': self.D, 'eta_requested': self.eta_requested, 'eta': self.eta,
                'truncated': self.truncated, 'iterations': self.iterations,
                'distances': self.distances, 'ratios': self.ratios, 'residual': self.residual,
                'max_norm': self.max_norm, 'bound_excess': self.bound_excess}


def effective_eta(eta_requested: float, D: float) -> float:
    return float(eta_requested) if D <= 0 else min(float(eta_requested), 1.0 / (10.0 * D))


def picard_solve(C: MatrixField, eta_requested: float, resolution: int = 17, tol: float = 1e-10,
                 n: Optional[int] = None, quad_points: int = 16, panels: int = 1,
                 A0: Optional[GridFunction] = None, D: Optional[float] = None) -> Tuple[GridFunction, PicardReport]:
    """Iterate A_{k+1} = T(A_k) from A_0 = 0 on B^n(min(eta, 1/(10D)))."""
    if eta_requested <= 0:
        raise ValueError(f"eta must be positive, got {eta_requested}")
    if n is None:
        n = A0.spec.n if A0 is not None else infer_dimension(C)
    if D is None:
        D = estimate_D(C, eta_requested, resolution, n)
    eta = effective_eta(eta_requested, D)
    truncated = eta < eta_requested
    if truncated:
        logger.warning(f"eta truncated from {eta_requested:.6g} to 1/(10D)={eta:.6g} (D={D:.6g})")
    spec = make_grid(n, eta, resolution)
    quad = RadialQuadrature(spec, quad_points, panels)
    c_samples = quad.sample(C)

    A = A0 if A0 is not None else GridFunction.zeros(spec)
    _check_same_grid(A, GridFunction.zeros(spec))
    distances: List[float] = []
    limit = None
    k = 0
    slow = 0
    while True:
        A_next = apply_T(A, C, quadrature=quad, c_samples=c_samples)
        d = weighted_distance(A_next, A)
        distances.append(d)
        k += 1
        A = A_next
        logger.debug(f"picard iteration {k}: d={d:.3e}")
        if d < tol:
            break
        if limit is None:
            limit = math.ceil(math.log(tol * 0.8 / max(d, tol)) / math.log(0.2)) + 5
        if len(distances) >= 2 and distances[-2] > 0 and d / distances[-2] > RATIO_FAILURE:
            slow += 1
            if slow >= 2:
                raise PicardError(f"contraction failure: successive ratio {d / distances[-2]:.3f} "
                                  f"at iteration {k} (grid too coarse or D misestimated)")
        else:
            slow = 0
        if k > limit:
            raise PicardError(f"no convergence to tol={tol:g} within {limit} iterations (last d={d:.3e})")

    residual = weighted_distance(apply_T(A, C, quadrature=quad, c_samples=c_samples), A)
    bounds = bound_suite(A, D)
    report = PicardReport(D=D, eta_requested=float(eta_requested), eta=eta, truncated=truncated,
                          iterations=k, distances=distances, residual=residual,
                          max_norm=bounds['max_norm'], bound_excess=bounds['excess'])
    logger.info(f"picard converged in {k} iterations on B^{n}({eta:.6g}), residual {residual:.3e}")
    return A, report


def bound_suite(A: GridFunction, D: float) -> dict:
    """Check |A(x)| <= min(5 D |x| / 8, 1/16) at every ball node."""
    spec = A.spec
    norms = A.node_norms()[spec.mask]
    caps = np.minimum(5.0 * D * spec.radii[spec.mask] / 8.0, 1.0 / 16.0)
    excess = float(np.max(norms - caps)) if norms.size else 0.0
    return {'max_norm': float(np.max(norms)) if norms.size else 0.0,
            'excess': excess, 'ok': excess <= 1e-12}


def random_admissible(spec: GridSpec, rng: np.random.Generator, cap: float = 0.1) -> GridFunction:
    """A random element of the metric space: A(0)=0, |A| <= cap, |A(x)| proportional to |x|."""
    n = spec.n
    mats = rng.standard_normal((n + 1, n, n))
    pts = spec.support_points / spec.eta
    raw = mats[0][None] + np.einsum('mk,kij->mij', pts, mats[1:])
    scale = np.max(value_norms(raw))
    radial = (np.linalg.norm(pts, axis=1) * cap / scale)[:, None, None]
    values = radial * raw
    values[spec.origin_index] = 0.0
    return GridFunction(spec, values)


def contraction_diagnostic(C: MatrixField, eta: float, trials: int = 50, seed: int = 0,
                           resolution: int = 17, n: Optional[int] = None, quad_points: int = 16) -> float:
    """max over random pairs A, B of d(T(A), T(B)) / d(A, B)."""
    if n is None:
        n = infer_dimension(C)
    D = estimate_D(C, eta, resolution, n)
    spec = make_grid(n, effective_eta(eta, D), resolution)
    quad = RadialQuadrature(spec, quad_points)
    c_samples = quad.sample(C)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        A = random_admissible(spec, rng)
        B = GridFunction.zeros(spec) if rng.random() < 0.2 else random_admissible(spec, rng)
        dab = weighted_distance(A, B)
        if dab <= 1e-300:
            continue
        tab = weighted_distance(apply_T(A, C, quadrature=quad, c_samples=c_samples),
                                apply_T(B, C, quadrature=quad, c_samples=c_samples))
        best = max(best, tab / dab)
    logger.debug(f"contraction diagnostic over {trials} pairs: max ratio {best:.4f}")
    return best


def ode_residual(A: GridFunction, C: MatrixField, theta_samples: int = 16,
                 r_grid: Optional[np.ndarray] = None) -> float:
    """max over rays and radii of |d/dr (r A(r theta)) + A^2 + C A + C|."""
    spec = A.spec
    h = spec.spacing
    if r_grid is None:
        r_grid = np.linspace(h, spec.eta - h, 24)
    r_grid = np.asarray(r_grid, dtype=float)
    thetas = sphere_directions(spec.n, theta_samples)
    worst = 0.0
    for theta in thetas:
        plus = (r_grid + h)[:, None] * theta
        minus = (r_grid - h)[:, None] * theta
        mid = r_grid[:, None] * theta
        dr = ((r_grid + h)[:, None, None] * A(plus) - (r_grid - h)[:, None, None] * A(minus)) / (2.0 * h)
        a_mid = A(mid)
        c_mid = np.asarray(C(mid), dtype=float)
        res = dr + a_mid @ a_mid + c_mid @ a_mid + c_mid
        worst = max(worst, float(np.max(value_norms(res))))
    return worst


def uniqueness_probe(C: MatrixField, eta: float, resolution: int = 17, tol: float = 1e-10,
                     seed: int = 0, n: Optional[int] = None) -> float:
    """Distance between the solutions started from 0 and from a random admissible A_0."""
    if n is None:
        n = infer_dimension(C)
    D = estimate_D(C, eta, resolution, n)
    A_zero, report = picard_solve(C, eta, resolution, tol, n=n, D=D)
    A0 = random_admissible(A_zero.spec, np.random.default_rng(seed))
    A_rand, _ = picard_solve(C, eta, resolution, tol, n=n, A0=A0, D=D)
    return weighted_distance(A_zero, A_rand)


class MatrixFunction:
    """A map (N, n) -> (N, n, n) tagged with its dimension; scalar outputs become 1x1 matrices."""

    def __init__(self, n: int, func: Callable[[np.ndarray], np.ndarray], name: str = ''):
        self.n = int(n)
        self.func = func
        self.name = name

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(self.func(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        return vals
