"""
Sup-estimators for Hoelder, Zygmund and C^{m,l,omega} norms, Euclidean and
adapted to a system of vector fields.

Every estimate is a supremum over a finite family of samples and therefore a
lower bound of the true norm. The families live on a lattice over the
region: points are lattice nodes, increments are k * (d * spacing) with k a
power of two and d in {-1, 0, 1}^n. Refining a lattice from r to 2r - 1 nodes
per axis keeps every old node and every old increment, so estimates never
decrease under refinement.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .ccmetric import CCParams, pair_distances
from .errors import DomainError
from .expr import Expr, as_expr, differentiate, mul, parse, substitution_for_affine
from .fields import Box, VectorSystem, fd_step
from .flows import FlowOptions, integrate, sphere_directions
from .odecore import GridFunction, value_norms

logger = logging.getLogger(__name__)

FD_FLOW_STEP = 1e-4


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def at_origin(cls, n: int, radius: float) -> 'Ball':
        return cls(tuple([0.0] * n), float(radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def box(self) -> Box:
        return Box.around(self.center, self.radius)

    def contains(self, points: np.ndarray, tol: float = 1e-12):
        pts = np.asarray(points, dtype=float)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        inside = d <= self.radius * (1.0 + tol)
        return bool(inside) if pts.ndim == 1 else inside


Region = Union[Box, Ball]


def region_box(region: Region) -> Box:
    return region.box if isinstance(region, Ball) else region


class ScalarFunction:
    """f: R^n -> R given by an expression (exact derivatives) or a vectorized callable (finite differences)."""

    def __init__(self, n: int, expr: Optional[Expr] = None, native: Optional[Callable] = None, name: str = ''):
        if (expr is None) == (native is None):
            raise ValueError("give exactly one of expr and native")
        self.n = int(n)
        self.expr = expr
        self.native = native
        self.name = name or (expr.to_text() if expr is not None else 'f')

    @classmethod
    def from_any(cls, f, n: int) -> 'ScalarFunction':
        if isinstance(f, ScalarFunction):
            return f
        if isinstance(f, str):
            return cls(n, expr=parse(f, n))
        if isinstance(f, (Expr, int, float)):
            return cls(n, expr=as_expr(f, n))
        if callable(f):
            return cls(n, native=f)
        raise TypeError(f"cannot use {type(f).__name__} as a scalar function")

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.expr is not None:
            return np.asarray(self.expr.evaluate(pts), dtype=float).reshape(-1)
        return np.asarray(self.native(pts), dtype=float).reshape(-1)

    def partial(self, k: int) -> 'ScalarFunction':
        """d/dx_k, k 1-based."""
        if self.expr is not None:
            return ScalarFunction(self.n, expr=differentiate(self.expr, k), name=f"d{k}({self.name})")
        base = self

        def deriv(pts):
            h = fd_step(pts)[:, None]
            e = np.zeros(self.n)
            e[k - 1] = 1.0
            return (base(pts + h * e) - base(pts - h * e)) / (2.0 * h[:, 0])
        return ScalarFunction(self.n, native=deriv, name=f"d{k}({self.name})")

    def times(self, other: 'ScalarFunction') -> 'ScalarFunction':
        if self.expr is not None and other.expr is not None:
            return ScalarFunction(self.n, expr=mul(self.expr, other.expr))
        return ScalarFunction(self.n, native=lambda p: self(p) * other(p), name=f"({self.name})*({other.name})")

    def compose_affine_inverse(self, M: np.ndarray, b: np.ndarray) -> 'ScalarFunction':
        """f o Psi^{-1} for Psi(x) = M x + b."""
        M = np.asarray(M, dtype=float)
        b = np.asarray(b, dtype=float)
        Minv = np.linalg.inv(M)
        if self.expr is not None:
            return ScalarFunction(self.n, expr=self.expr.substitute(substitution_for_affine(Minv, -Minv @ b)))
        return ScalarFunction(self.n, native=lambda p: self((np.atleast_2d(p) - b) @ Minv.T))


def safe_values(func: Callable[[np.ndarray], np.ndarray], pts: np.ndarray) -> np.ndarray:
    """Evaluate on a batch; points outside the function's domain become NaN."""
    try:
        return np.asarray(func(pts), dtype=float)
    except DomainError:
        out = []
        for p in pts:
            try:
                out.append(np.asarray(func(p[None]), dtype=float)[0])
            except DomainError:
                out.append(np.nan)
        return np.asarray(out, dtype=float)


class Lattice:
    """Tensor lattice over a region with the node mask of the region."""

    def __init__(self, region: Region, resolution: int):
        if resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {resolution}")
        box = region_box(region)
        self.region = region
        self.resolution = int(resolution)
        self.n = box.dim
        self.axes = [np.linspace(lo, hi, self.resolution) for lo, hi in zip(box.lower, box.upper)]
        self.spacing = box.widths / (self.resolution - 1)
        self.shape = (self.resolution,) * self.n
        self.index = np.indices(self.shape).reshape(self.n, -1).T
        self.points = np.stack([self.axes[i][self.index[:, i]] for i in range(self.n)], axis=-1)
        self.mask = region.contains(self.points) if isinstance(region, Ball) else np.ones(len(self.points), bool)

    def restricted(self, within: Region) -> np.ndarray:
        """Node mask of the lattice intersected with a sub-region (same nodes)."""
        inside = within.contains(self.points) if isinstance(within, Ball) else within.contains(self.points, 1e-12)
        return self.mask & inside

    def increments(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """(index offset, world increment) for k a power of two and d in a half of {-1,0,1}^n minus 0."""
        ks = [2 ** i for i in range(int(math.log2(self.resolution - 1)) + 1)]
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=self.n) if any(d) and d[next(i for i, v in enumerate(d) if v)] > 0]
        for k in ks:
            for d in dirs:
                off = k * np.asarray(d)
                yield off, off * self.spacing

    def chains(self, offset: np.ndarray, length: int, mask: Optional[np.ndarray] = None) -> List[np.ndarray]:
        """Flat indices of x, x+h, ..., x+length*h over nodes where all of them are inside."""
        mask = self.mask if mask is None else mask
        flats = []
        valid = mask.copy()
        for j in range(length + 1):
            J = self.index + j * offset
            ok = np.all((J >= 0) & (J < self.resolution), axis=1)
            flat = np.zeros(len(J), dtype=int)
            flat[ok] = np.ravel_multi_index(J[ok].T, self.shape)
            valid &= ok
            valid[ok] &= mask[flat[ok]]
            flats.append(flat)
        sel = np.flatnonzero(valid)
        return [f[sel] for f in flats]


@dataclass
class NormReport:
    family: str
    params: Dict[str, float]
    resolution: int
    value: float
    components: Dict[str, float] = field(default_factory=dict)
    semantics: str = 'lower-bound'
    skipped: int = 0
    extras: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'family': self.family, 'params': dict(self.params), 'resolution': self.resolution,
                'value': self.value, 'components': dict(self.components), 'semantics': self.semantics,
                'skipped': self.skipped, 'extras': dict(self.extras)}


def _nanmax(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0 or np.all(np.isnan(values)):
        return 0.0
    return float(np.nanmax(values))


def _sup(vals: np.ndarray, mask: np.ndarray) -> float:
    return _nanmax(np.abs(vals[mask]) if vals.ndim == 1 else value_norms(vals[mask]))


def _diff_sup(lat: Lattice, vals: np.ndarray, order: int, weight: Callable[[float], float],
              mask: Optional[np.ndarray] = None) -> float:
    """sup over lattice chains of |Delta_h^order v| / weight(|h|)."""
    best = 0.0
    for offset, h in lat.increments():
        chain = lat.chains(offset, order, mask)
        if chain[0].size == 0:
            continue
        if order == 1:
            diff = vals[chain[1]] - vals[chain[0]]
        else:
            diff = vals[chain[2]] - 2.0 * vals[chain[1]] + vals[chain[0]]
        mags = np.abs(diff) if diff.ndim == 1 else value_norms(diff)
        best = max(best, _nanmax(mags) / weight(float(np.linalg.norm(h))))
    return best


def _multi_indices(n: int, m: int) -> List[Tuple[int, ...]]:
    """Unordered multi-indices |alpha| <= m as sorted tuples of 1-based axes."""
    out: List[Tuple[int, ...]] = []
    for order in range(m + 1):
        out.extend(itertools.combinations_with_replacement(range(1, n + 1), order))
    return out


def _derivative(f: ScalarFunction, alpha: Tuple[int, ...]) -> ScalarFunction:
    g = f
    for k in alpha:
        g = g.partial(k)
    return g


def _holder_parts(lat: Lattice, vals: np.ndarray, s: float, mask: np.ndarray) -> Tuple[float, float]:
    sup = _sup(vals, mask)
    semi = _diff_sup(lat, vals, 1, lambda r: r ** s, mask) if s > 0 else 0.0
    return sup, semi


def holder_norm(f, region: Region, m: int = 0, s: float = 1.0, grid: int = 33,
                within: Optional[Region] = None) -> NormReport:
    """sum_{|alpha| <= m} sup|d^alpha f| + sup |d^alpha f(x) - d^alpha f(y)| / |x - y|^s.

    s = 0 gives the C^m norm (no difference term).
    """
    if m < 0 or not 0.0 <= s <= 1.0:
        raise ValueError(f"need m >= 0 and s in [0, 1], got m={m} s={s}")
    lat = Lattice(region, grid)
    f = ScalarFunction.from_any(f, lat.n)
    mask = lat.mask if within is None else lat.restricted(within)
    total, components, skipped = 0.0, {}, 0
    for alpha in _multi_indices(lat.n, m):
        vals = safe_values(_derivative(f, alpha), lat.points)
        skipped += int(np.count_nonzero(np.isnan(vals[mask])))
        sup, semi = _holder_parts(lat, vals, s, mask)
        key = 'd' + ''.join(map(str, alpha)) if alpha else 'f'
        components[f"{key}.sup"] = sup
        if s > 0:
            components[f"{key}.holder"] = semi
        total += sup + semi
    family = 'C^m' if s == 0 else 'H^{m,s}'
    return NormReport(family, {'m': m, 's': s}, grid, total, components, skipped=skipped)


def zygmund_norm(f, region: Region, s: float = 1.0, grid: int = 33,
                 within: Optional[Region] = None) -> NormReport:
    """||f||_{H^{0,s/2}} + sup |f(x+2h) - 2 f(x+h) + f(x)| / |h|^s; s > 1 recurses through first derivatives."""
    if s <= 0:
        raise ValueError(f"zygmund exponent must be positive, got {s}")
    lat = Lattice(region, grid)
    f = ScalarFunction.from_any(f, lat.n)
    if s > 1.0:
        parts = [zygmund_norm(g, region, s - 1.0, grid, within)
                 for g in [f] + [f.partial(k) for k in range(1, lat.n + 1)]]
        comps = {f"part{i}": p.value for i, p in enumerate(parts)}
        return NormReport('Zyg^s', {'s': s}, grid, sum(p.value for p in parts), comps,
                          skipped=sum(p.skipped for p in parts))
    mask = lat.mask if within is None else lat.restricted(within)
    vals = safe_values(f, lat.points)
    sup, semi = _holder_parts(lat, vals, s / 2.0, mask)
    second = _diff_sup(lat, vals, 2, lambda r: r ** s, mask)
    comps = {'sup': sup, 'holder_half': semi, 'second_difference': second}
    return NormReport('Zyg^s', {'s': s}, grid, sup + semi + second, comps,
                      skipped=int(np.count_nonzero(np.isnan(vals[mask]))))


def flow_derivative(S: VectorSystem, j: int, g: Callable[[np.ndarray], np.ndarray],
                    h: float = FD_FLOW_STEP) -> Callable[[np.ndarray], np.ndarray]:
    """X_j g(x) = d/dt g(e^{t X_j} x) at t = 0 by central differences along the flow."""
    X = S.fields[j - 1]
    opts = FlowOptions(domain=S.domain)

    def deriv(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        coeff = np.full((pts.shape[0], 1), h)
        fwd = integrate(lambda y, c: c[:, :1] * X(y), pts, coeff, opts)
        bwd = integrate(lambda y, c: c[:, :1] * X(y), pts, -coeff, opts)
        out = (safe_values(g, fwd.states) - safe_values(g, bwd.states)) / (2.0 * h)
        out[~(fwd.ok & bwd.ok)] = np.nan
        return out
    return deriv


def _ordered_indices(q: int, m: int) -> List[Tuple[int, ...]]:
    out: List[Tuple[int, ...]] = []
    for order in range(m + 1):
        out.extend(itertools.product(range(1, q + 1), repeat=order))
    return out


def _adapted_derivative(S: VectorSystem, f: ScalarFunction, alpha: Tuple[int, ...]) -> Callable:
    g: Callable = f
    for depth, j in enumerate(reversed(alpha)):
        g = flow_derivative(S, j, g, FD_FLOW_STEP * (10.0 ** depth))
    return g


def _adapted_semi(S: VectorSystem, lat: Lattice, vals: np.ndarray, s: float, mask: np.ndarray,
                  params: CCParams, box: Box) -> Tuple[float, int]:
    best, unreachable = 0.0, 0
    for offset, _ in lat.increments():
        a, b = lat.chains(offset, 1, mask)
        if a.size == 0:
            continue
        rho = pair_distances(S, lat.points[a], lat.points[b], box, params)
        finite = np.isfinite(rho) & (rho > 0)
        unreachable += int(np.count_nonzero(~np.isfinite(rho)))
        if np.any(finite):
            diff = np.abs(vals[b[finite]] - vals[a[finite]])
            best = max(best, _nanmax(diff / rho[finite] ** s))
    return best, unreachable


def adapted_holder_norm(f, S: VectorSystem, region: Region, m: int = 0, s: float = 1.0, grid: int = 17,
                        params: Optional[CCParams] = None, within: Optional[Region] = None) -> NormReport:
    """sum over ordered alpha of sup|X^alpha f| + sup |X^alpha f(x) - X^alpha f(y)| / rho(x, y)^s.

    rho is replaced by its direct-hop upper estimate, which keeps the
    estimate a lower bound.
    """
    if m < 0 or not 0.0 <= s <= 1.0:
        raise ValueError(f"need m >= 0 and s in [0, 1], got m={m} s={s}")
    params = params or CCParams()
    lat = Lattice(region, grid)
    f = ScalarFunction.from_any(f, lat.n)
    mask = lat.mask if within is None else lat.restricted(within)
    box = region_box(region)
    total, components, skipped, unreachable = 0.0, {}, 0, 0
    for alpha in _ordered_indices(S.q, m):
        vals = safe_values(_adapted_derivative(S, f, alpha), lat.points)
        skipped += int(np.count_nonzero(np.isnan(vals[mask])))
        sup = _sup(vals, mask)
        semi, lost = _adapted_semi(S, lat, vals, s, mask, params, box) if s > 0 else (0.0, 0)
        unreachable += lost
        key = 'X' + ''.join(map(str, alpha)) if alpha else 'f'
        components[f"{key}.sup"] = sup
        if s > 0:
            components[f"{key}.holder"] = semi
        total += sup + semi
    family = 'C_X^m' if s == 0 else 'H_X^{m,s}'
    return NormReport(family, {'m': m, 's': s}, grid, total, components, skipped=skipped,
                      extras={'unreachable_pairs': unreachable})


def control_directions(q: int, count: int = 8) -> np.ndarray:
    """Unit constant controls: signed axes plus low-discrepancy sphere points."""
    return sphere_directions(q, count if q > 1 else 0)


def adapted_zygmund_norm(f, S: VectorSystem, region: Region, s: float = 1.0, grid: int = 17,
                         params: Optional[CCParams] = None, directions: Optional[np.ndarray] = None,
                         points: Optional[np.ndarray] = None, within: Optional[Region] = None) -> NormReport:
    """H_X^{0,s/2} plus sup over constant unit controls d and steps h of
    |f(g(2h)) - 2 f(g(h)) + f(g(0))| / h^s with g(t) = e^{t d.X} x.

    Only constant controls are searched, a subfamily of the admissible paths.
    """
    if not 0.0 < s <= 1.0:
        raise ValueError(f"adapted zygmund exponent must lie in (0, 1], got {s}")
    params = params or CCParams()
    lat = Lattice(region, grid)
    f = ScalarFunction.from_any(f, lat.n)
    mask = lat.mask if within is None else lat.restricted(within)
    holder = adapted_holder_norm(f, S, region, 0, s / 2.0, grid, params, within)
    dirs = control_directions(S.q) if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    base = lat.points[mask] if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    step = float(np.min(lat.spacing))
    ks = [2 ** i for i in range(int(math.log2(grid - 1)) + 1)]
    opts = FlowOptions(domain=S.domain)
    contains = (lambda p: region.contains(p)) if within is None else (lambda p: within.contains(p))
    best, skipped, checked = 0.0, 0, 0
    for k in ks:
        h = k * step
        for d in dirs:
            coeff = np.repeat(d[None] * h, base.shape[0], axis=0)
            one = integrate(lambda y, c: S.combination(c, y), base, coeff, opts)
            two = integrate(lambda y, c: S.combination(c, y), one.states, coeff, opts)
            ok = one.ok & two.ok & contains(one.states) & contains(two.states)
            skipped += int(np.count_nonzero(~ok))
            if not np.any(ok):
                continue
            checked += int(np.count_nonzero(ok))
            v0 = safe_values(f, base[ok])
            v1 = safe_values(f, one.states[ok])
            v2 = safe_values(f, two.states[ok])
            best = max(best, _nanmax(np.abs(v2 - 2.0 * v1 + v0)) / h ** s)
    comps = {'sup': holder.components.get('f.sup', 0.0), 'holder_half': holder.components.get('f.holder', 0.0),
             'second_difference': best}
    return NormReport('Zyg_X^s', {'s': s}, grid, holder.value + best, comps, skipped=skipped + holder.skipped,
                      extras={'subfamily': 'constant-controls', 'checked_paths': checked})


def cml_norm(F, m: int = 0, l: int = 2, omega_exponent: float = 0.5, region: Optional[Region] = None,
             grid: int = 33) -> NormReport:
    """sum_{|beta| <= m} sum_{j <= l} sup omega(|h|)^{-j} |Delta_h^j d^beta F| with omega(h) = h^a.

    Grid functions are measured on their own nodes inside the ball.
    """
    if l not in (0, 1, 2):
        raise ValueError(f"l must be 0, 1 or 2, got {l}")
    if m < 0 or omega_exponent <= 0:
        raise ValueError("need m >= 0 and a positive omega exponent")
    a = float(omega_exponent)
    if isinstance(F, GridFunction):
        spec = F.spec
        lat = Lattice(Ball.at_origin(spec.n, spec.eta), spec.resolution)
        # lattice of the ball's bounding cube has the grid's own nodes in the same order
        funcs = {beta: _grid_derivative(F, beta).values for beta in _multi_indices(spec.n, m)}
    else:
        if region is None:
            raise ValueError("a region is required for function arguments")
        lat = Lattice(region, grid)
        f = ScalarFunction.from_any(F, lat.n)
        funcs = {beta: safe_values(_derivative(f, beta), lat.points) for beta in _multi_indices(lat.n, m)}
    total, comps = 0.0, {}
    for beta, vals in funcs.items():
        key = 'd' + ''.join(map(str, beta)) if beta else 'F'
        terms = [_sup(vals, lat.mask)]
        for j in range(1, l + 1):
            terms.append(_diff_sup(lat, vals, j, lambda r, j=j: (r ** a) ** j))
        for j, t in enumerate(terms):
            comps[f"{key}.j{j}"] = t
        total += sum(terms)
    return NormReport('C^{m,l,w}', {'m': m, 'l': l, 'omega_exponent': a}, lat.resolution, total, comps)


def _grid_derivative(F: GridFunction, beta: Tuple[int, ...]) -> GridFunction:
    G = F
    for k in beta:
        G = G.partial_derivative(k)
    return G


def derivative_c1_sum(f, region: Region, m: int = 0, grid: int = 33, S: Optional[VectorSystem] = None,
                      params: Optional[CCParams] = None, within: Optional[Region] = None) -> float:
    """sum_{|alpha| <= m} ||d^alpha f||_{C^1}, over the same multi-indices as the H^{m,s} norms.

    With S the derivatives are X^alpha over ordered alpha, and the sum is
    C_X^m + C_X^{m+1} - sup|f|.
    """
    if m < 0:
        raise ValueError(f"need m >= 0, got {m}")
    if S is not None:
        top = adapted_holder_norm(f, S, region, m + 1, 0.0, grid, params, within)
        low = adapted_holder_norm(f, S, region, m, 0.0, grid, params, within)
        return low.value + top.value - top.components['f.sup']
    g = ScalarFunction.from_any(f, region.dim)
    return sum(holder_norm(_derivative(g, alpha), region, 1, 0.0, grid, within).value
               for alpha in _multi_indices(region.dim, m))


@dataclass
class InclusionReport:
    items: List[dict]

    @property
    def holds(self) -> bool:
        return all(item['holds'] for item in self.items)

    def to_dict(self) -> dict:
        return {'holds': self.holds, 'items': self.items}


def _item(name: str, lhs: float, constant: float, rhs: float) -> dict:
    return {'name': name, 'lhs': lhs, 'constant': constant, 'rhs': rhs,
            'holds': bool(lhs <= constant * rhs * (1.0 + 1e-12) + 1e-15)}


def inclusion_check(f, region: Region, s1: float = 0.5, s2: float = 1.0, m: int = 0, grid: int = 33,
                    S: Optional[VectorSystem] = None, sub_region: Optional[Region] = None,
                    params: Optional[CCParams] = None) -> InclusionReport:
    """Check the elementary inclusions between the estimated norms with their explicit constants.

    With a system S the adapted norms are compared instead of the Euclidean ones.
    The Lipschitz item compares ||f||_{H^{m,1}} with sum_{|alpha| <= m} ||d^alpha f||_{C^1},
    which equals the C^{m+1} norm at m = 0.
    """
    if not 0.0 < s1 <= s2 <= 1.0:
        raise ValueError(f"need 0 < s1 <= s2 <= 1, got {s1}, {s2}")
    if S is None:
        H = lambda mm, s, within=None: holder_norm(f, region, mm, s, grid, within).value
        Z = lambda s, within=None: zygmund_norm(f, region, s, grid, within).value
    else:
        H = lambda mm, s, within=None: adapted_holder_norm(f, S, region, mm, s, grid, params, within).value
        Z = lambda s, within=None: adapted_zygmund_norm(f, S, region, s, grid, params, within=within).value
    items = [
        _item('holder_exponents', H(m, s1), 3.0, H(m, s2)),
        _item('holder_vs_derivative', H(m, 1.0), 1.0, derivative_c1_sum(f, region, m, grid, S, params)),
        _item('zygmund_vs_holder', Z(s2), 5.0, H(0, s2)),
        _item('zygmund_exponents', Z(s1), 15.0, Z(s2)),
    ]
    if sub_region is not None:
        items.append(_item('domain_monotone_holder', H(m, s2, sub_region), 1.0, H(m, s2)))
        items.append(_item('domain_monotone_zygmund', Z(s2, sub_region), 1.0, Z(s2)))
    report = InclusionReport(items)
    if not report.holds:
        logger.warning(f"inclusion violations: {[i['name'] for i in items if not i['holds']]}")
    return report


def algebra_check(f, g, region: Region, s: float = 1.0, grid: int = 33, constant: float = 6.0) -> dict:
    """Zyg^s(f g) <= constant * Zyg^s(f) * Zyg^s(g) on estimator values."""
    box = region_box(region)
    F = ScalarFunction.from_any(f, box.dim)
    G = ScalarFunction.from_any(g, box.dim)
    lhs = zygmund_norm(F.times(G), region, s, grid).value
    zf = zygmund_norm(F, region, s, grid).value
    zg = zygmund_norm(G, region, s, grid).value
    return {'lhs': lhs, 'zf': zf, 'zg': zg, 'constant': constant,
            'holds': bool(lhs <= constant * zf * zg * (1.0 + 1e-12))}


def affine_region(region: Region, M: np.ndarray, b: np.ndarray) -> Box:
    """Bounding box of Psi(region) for Psi(x) = M x + b."""
    box = region_box(region)
    corners = np.array(list(itertools.product(*zip(box.lower, box.upper))))
    image = corners @ np.asarray(M, dtype=float).T + np.asarray(b, dtype=float)
    return Box(tuple(image.min(axis=0)), tuple(image.max(axis=0)))


def pushforward_function(f, M: np.ndarray, b: np.ndarray) -> ScalarFunction:
    """f o Psi^{-1} for Psi(x) = M x + b, the partner of VectorSystem.pushforward_affine."""
    M = np.asarray(M, dtype=float)
    return ScalarFunction.from_any(f, M.shape[0]).compose_affine_inverse(M, b)
