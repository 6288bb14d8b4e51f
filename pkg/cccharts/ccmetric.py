"""
Carnot-Caratheodory distance, balls and their Monte-Carlo volumes.

rho is estimated from above by shortest paths over a graph of short
constant-control flow segments. Everything runs in coordinates normalized by
the tightened bounding box of the ball, so nodes, neighbor radius, hop
tolerance and Monte-Carlo samples are the same for every scale and
homogeneous systems produce exactly dilated estimates.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree
from scipy.special import gamma
from scipy.stats import qmc

from .errors import ConvergenceError, DomainError, GraphError
from .fields import Box, VectorSystem, is_spanning
from .flows import FlowOptions, integrate
from .workers import WorkerPool, chunk_rng, chunk_sizes

logger = logging.getLogger(__name__)

TINY_WEIGHT = 1e-300
TINY_WIDTH = 1e-300


@dataclass(frozen=True)
class CCParams:
    """Graph and Monte-Carlo knobs."""

    nodes: int = 256
    neighbors: int = 12
    hop_steps: int = 8
    corrections: int = 3
    mc_corrections: int = 1
    mc_neighbors: int = 6
    hop_tol: float = 1e-2
    segments: Optional[int] = None
    margin: float = 1.05
    floor: float = 1e-3
    chunk: int = 4096
    threads: int = 1
    max_levels: int = 40
    sup_points: int = 5

    def __post_init__(self):
        if self.nodes < 1 or self.neighbors < 1:
            raise ValueError("nodes and neighbors must be positive")
        if self.margin < 1.0:
            raise ValueError("margin must be >= 1")

    def refined(self) -> 'CCParams':
        """Twice the nodes and twice the neighbors; the neighbor radius stays put."""
        return replace(self, nodes=2 * self.nodes, neighbors=2 * self.neighbors)


def safe_matrix(S: VectorSystem, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """S.matrix on a batch with rows outside the fields' domain zeroed and flagged."""
    try:
        return S.matrix(pts), np.zeros(pts.shape[0], dtype=bool)
    except DomainError:
        mats = np.zeros((pts.shape[0], S.n, S.q))
        bad = np.zeros(pts.shape[0], dtype=bool)
        for i in range(pts.shape[0]):
            try:
                mats[i] = S.matrix(pts[i])
            except DomainError:
                bad[i] = True
        return mats, bad


def domain_speed(S: VectorSystem, sup_points: int = 9) -> float:
    """q * max_j sup |X_j| sampled over the domain box."""
    grid = S.domain.grid(sup_points if S.n <= 3 else 3)
    mats, bad = safe_matrix(S, grid)
    norms = np.linalg.norm(mats[~bad], axis=1)
    return S.q * float(np.max(norms)) if norms.size else 0.0


@dataclass
class BoundingBox:
    center: np.ndarray
    delta: float
    initial: np.ndarray
    half_widths: np.ndarray
    iterations: int

    @property
    def box(self) -> Box:
        w = np.maximum(self.half_widths, TINY_WIDTH)
        return Box.around(self.center, w)

    @property
    def degenerate_axes(self) -> List[int]:
        return [i + 1 for i, w in enumerate(self.half_widths) if w <= 0.0]

    def to_dict(self) -> dict:
        return {'center': self.center.tolist(), 'delta': self.delta, 'initial': self.initial.tolist(),
                'half_widths': self.half_widths.tolist(), 'iterations': self.iterations}


def ball_bounding_box(S: VectorSystem, x, delta: float, margin: float = 1.05, sup_points: int = 5,
                      max_iter: int = 50) -> BoundingBox:
    """Box containing B_X(x, delta).

    Starts from x +- R delta with R = q sup|X_j| over the domain; each pass
    shrinks axis i to margin * delta * sup_box sum_j |X_{j,i}|, since a
    sub-unit path that stays in the current box moves no faster than that.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float).reshape(-1)
    initial = np.full(S.n, domain_speed(S) * delta)
    w = initial.copy()
    it = 0
    for it in range(1, max_iter + 1):
        grid = Box.around(x, np.maximum(w, TINY_WIDTH)).grid(sup_points)
        mats, bad = safe_matrix(S, grid)
        rates = np.abs(mats[~bad]).sum(axis=2)
        cand = margin * delta * (np.max(rates, axis=0) if rates.size else np.zeros(S.n))
        new = np.minimum(w, cand)
        if np.allclose(new, w, rtol=1e-12, atol=0.0):
            w = new
            break
        w = new
    return BoundingBox(x, float(delta), initial, w, it)


def _unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


class Hopper:
    """Short piecewise-constant-control flows between points, in coordinates normalized by a box."""

    def __init__(self, S: VectorSystem, center, half_widths, params: Optional[CCParams] = None,
                 segments: Optional[int] = None):
        self.S = S
        self.params = params or CCParams()
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.half = np.asarray(half_widths, dtype=float)
        self.scale = np.where(self.half > 0, self.half, 1.0)
        if segments is None:
            segments = self.params.segments
        if segments is None:
            segments = 1 if S.q >= S.n and is_spanning(S, self.center) else 3
        self.segments = int(segments)
        self._opts = FlowOptions()

    def to_world(self, z: np.ndarray) -> np.ndarray:
        return self.center + z * self.half

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.center) / self.scale

    def _frame(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mats, bad = safe_matrix(self.S, self.to_world(z))
        return mats / self.scale[None, :, None], bad

    def _velocity(self, z: np.ndarray, c: np.ndarray) -> np.ndarray:
        mats = self.S.matrix(self.to_world(z))
        return np.einsum('niq,nq->ni', mats, c) / self.scale

    def _endpoint(self, P: np.ndarray, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Concatenated flows of the controls U[:, i] for time 1/segments each."""
        m = U.shape[1]
        steps = self.params.hop_steps if m == 1 else max(1, self.params.hop_steps // m + 1)
        state, ok = P, np.ones(P.shape[0], dtype=bool)
        for i in range(m):
            res = integrate(self._velocity, state, U[:, i], self._opts, r_end=1.0 / m, steps=steps)
            state, ok = res.states, ok & res.ok
        return state, ok

    def _in_domain(self, Z: np.ndarray) -> np.ndarray:
        tol = 1e-9 * max(1.0, self.S.domain.diameter)
        return self.S.domain.contains(self.to_world(Z), tol)

    def hop(self, P: np.ndarray, Q: np.ndarray, corrections: int) -> np.ndarray:
        """Control cost of a short flow from P to Q (local coordinates); inf when rejected."""
        if P.shape[0] == 0:
            return np.zeros(0)
        if self.segments == 1:
            return self._hop_single(P, Q, corrections)
        best = np.full(P.shape[0], np.inf)
        for pattern in self._patterns():
            best = np.minimum(best, self._hop_segments(P, Q, max(corrections, 8), pattern))
        return best

    def hop_world(self, P: np.ndarray, Q: np.ndarray, corrections: Optional[int] = None) -> np.ndarray:
        corr = self.params.corrections if corrections is None else corrections
        return self.hop(self.to_local(np.atleast_2d(P)), self.to_local(np.atleast_2d(Q)), corr)

    def _hop_single(self, P: np.ndarray, Q: np.ndarray, corrections: int) -> np.ndarray:
        frame, bad = self._frame(0.5 * (P + Q))
        c = np.einsum('nqi,ni->nq', np.linalg.pinv(frame), Q - P)
        cost = np.full(P.shape[0], np.inf)
        active = np.flatnonzero(~bad)
        for it in range(corrections + 1):
            if active.size == 0:
                break
            end, ok = self._endpoint(P[active], c[active][:, None, :])
            res = Q[active] - end
            done = ok & (np.max(np.abs(res), axis=1) <= self.params.hop_tol) & self._in_domain(end)
            cost[active[done]] = np.linalg.norm(c[active[done]], axis=1)
            retry = ok & ~done
            if it == corrections or not np.any(retry):
                break
            idx = active[retry]
            fr, fbad = self._frame(end[retry])
            c[idx] += np.einsum('nqi,ni->nq', np.linalg.pinv(fr), res[retry])
            active = idx[~fbad]
        return cost

    def _patterns(self) -> List[np.ndarray]:
        q, m = self.S.q, self.segments
        if q == 1:
            return [np.zeros((m, q))]
        eye = np.eye(q)
        a, b = eye[0], eye[1]
        pad = [np.zeros(q)] * max(0, m - 3)
        loop = [a, b - a, -b] + pad
        mirror = [b, a - b, -a] + pad
        return [np.array(loop[:m]), np.array(mirror[:m])]

    def _hop_segments(self, P: np.ndarray, Q: np.ndarray, iterations: int, pattern: np.ndarray) -> np.ndarray:
        """Damped Gauss-Newton on the concatenated controls, started from a small loop around the straight guess."""
        N, m, q = P.shape[0], self.segments, self.S.q
        frame, bad = self._frame(0.5 * (P + Q))
        c0 = np.einsum('nqi,ni->nq', np.linalg.pinv(frame), Q - P)
        spread = np.maximum(np.linalg.norm(c0, axis=1),
                            0.1 / np.maximum(np.linalg.norm(frame, axis=(1, 2)), 1e-300))
        U = c0[:, None, :] + spread[:, None, None] * pattern[None]
        cost = np.full(N, np.inf)
        active = np.flatnonzero(~bad)
        dim = m * q
        for it in range(iterations + 1):
            if active.size == 0:
                break
            Ua = U[active]
            end, ok = self._endpoint(P[active], Ua)
            res = Q[active] - end
            done = ok & (np.max(np.abs(res), axis=1) <= self.params.hop_tol) & self._in_domain(end)
            cost[active[done]] = np.max(np.linalg.norm(Ua[done], axis=2), axis=1)
            retry = ok & ~done
            if it == iterations or not np.any(retry):
                break
            idx = active[retry]
            Ur = U[idx].reshape(-1, dim)
            h = 1e-6 * np.maximum(1.0, np.max(np.abs(Ur), axis=1))
            k = idx.size
            perturbed = np.repeat(Ur, dim, axis=0) + np.tile(np.eye(dim), (k, 1)) * np.repeat(h, dim)[:, None]
            ends_p, _ = self._endpoint(np.repeat(P[idx], dim, axis=0), perturbed.reshape(-1, m, q))
            J = ((ends_p.reshape(k, dim, -1) - end[retry][:, None, :]) / h[:, None, None]).transpose(0, 2, 1)
            step = np.einsum('nde,ne->nd', np.linalg.pinv(J, rcond=1e-10), res[retry])
            U[idx] = (Ur + step).reshape(-1, m, q)
            active = idx
        return cost


class CCGraph:
    """Flow-segment graph over the normalized bounding box of B_X(center, delta)."""

    def __init__(self, S: VectorSystem, center, delta: float, params: Optional[CCParams] = None,
                 targets: Optional[np.ndarray] = None):
        self.S = S
        self.params = params or CCParams()
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.delta = float(delta)
        self.bounds = ball_bounding_box(S, self.center, delta, self.params.margin, self.params.sup_points)
        self.half = self.bounds.half_widths
        self.hopper = Hopper(S, self.center, self.half, self.params)

        n = S.n
        extra = np.zeros((0, n)) if targets is None else self.to_local(np.atleast_2d(targets))
        halton = qmc.Halton(d=n, scramble=False).random(self.params.nodes) * 2.0 - 1.0
        self.nodes = np.vstack([np.zeros((1, n)), extra, halton])
        self.target_slice = slice(1, 1 + extra.shape[0])
        M = self.nodes.shape[0]
        self.radius = (self.params.neighbors * 2.0 ** n / (self.params.nodes * _unit_ball_volume(n))) ** (1.0 / n)
        self.tree = cKDTree(self.nodes)
        pairs = self.tree.query_pairs(self.radius, output_type='ndarray')
        if pairs.size == 0:
            raise GraphError(f"empty graph: no node pairs within radius {self.radius:.3g}")
        costs = self.hopper.hop(self.nodes[pairs[:, 0]], self.nodes[pairs[:, 1]], self.params.corrections)
        ok = np.isfinite(costs)
        self.edges = int(np.count_nonzero(ok))
        weights = np.maximum(costs[ok], TINY_WEIGHT)
        graph = csr_matrix((weights, (pairs[ok, 0], pairs[ok, 1])), shape=(M, M))
        self.dist = dijkstra(graph, directed=False, indices=0)
        logger.debug(f"cc graph: {M} nodes, {self.edges}/{pairs.shape[0]} edges accepted, "
                     f"radius {self.radius:.3g}, {self.hopper.segments} segment(s) per hop")

    @property
    def box(self) -> Box:
        return self.bounds.box

    @property
    def segments(self) -> int:
        return self.hopper.segments

    def to_world(self, z: np.ndarray) -> np.ndarray:
        return self.hopper.to_world(z)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return self.hopper.to_local(points)

    def distances(self, points: np.ndarray, corrections: Optional[int] = None, snap: bool = True) -> np.ndarray:
        """rho estimate from the center to each world point: direct hop or best node plus hop.

        With snap, values below floor * delta read as 0.
        """
        corr = self.params.mc_corrections if corrections is None else corrections
        Z = self.to_local(np.atleast_2d(points))
        N = Z.shape[0]
        best = self.hopper.hop(np.zeros_like(Z), Z, corr)
        k = min(self.params.mc_neighbors, self.nodes.shape[0])
        _, nearest = self.tree.query(Z, k=k)
        nearest = np.asarray(nearest).reshape(N, k)
        for col in range(k):
            idx = nearest[:, col]
            base = self.dist[idx]
            use = np.isfinite(base) & (idx != 0) & (base < best)
            if not np.any(use):
                continue
            rows = np.flatnonzero(use)
            cost = self.hopper.hop(self.nodes[idx[rows]], Z[rows], corr)
            best[rows] = np.minimum(best[rows], base[rows] + cost)
        if snap:
            best[best < self.params.floor * self.delta] = 0.0
        return best


def pair_distances(S: VectorSystem, P: np.ndarray, Q: np.ndarray, region: Box,
                   params: Optional[CCParams] = None) -> np.ndarray:
    """Direct-hop upper estimates of rho(P_i, Q_i), normalized by a region box; inf when no hop is found."""
    hopper = Hopper(S, region.center, 0.5 * region.widths, params)
    return hopper.hop_world(P, Q)


@dataclass
class DistanceEstimate:
    value: float
    unreachable: bool
    delta_box: Optional[float]
    levels: int
    nodes: int = 0
    edges: int = 0

    def to_dict(self) -> dict:
        return {'value': self.value if math.isfinite(self.value) else None, 'unreachable': self.unreachable,
                'delta_box': self.delta_box, 'levels': self.levels, 'nodes': self.nodes, 'edges': self.edges}


def cc_distance(S: VectorSystem, x, y, params: Optional[CCParams] = None) -> DistanceEstimate:
    """Upper estimate of rho(x, y).

    The graph box is the bounding box of B(x, delta) for delta on a doubling
    ladder; the first rung whose box holds y and whose estimate fits inside
    delta is returned. No such rung marks y unreachable.
    """
    params = params or CCParams()
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    for p in (x, y):
        if not S.domain.contains(p):
            raise ValueError(f"point {p.tolist()} is outside the domain")
    if np.array_equal(x, y):
        return DistanceEstimate(0.0, False, None, 0)
    speed = domain_speed(S)
    if speed <= 0:
        return DistanceEstimate(math.inf, True, None, 0)
    delta = float(np.linalg.norm(y - x)) / speed
    for level in range(params.max_levels):
        bb = ball_bounding_box(S, x, delta, params.margin, params.sup_points)
        if np.all(np.abs(y - x) <= bb.half_widths * (1 + 1e-12)):
            graph = CCGraph(S, x, delta, params, targets=y[None])
            via_graph = float(graph.dist[graph.target_slice][0])
            direct = float(graph.distances(y[None], params.corrections, snap=False)[0])
            value = min(via_graph, direct)
            if value <= delta * (1.0 + 1e-9):
                return DistanceEstimate(value, False, delta, level + 1, graph.nodes.shape[0], graph.edges)
        delta *= 2.0
    logger.warning(f"{y.tolist()} unreachable from {x.tolist()} within {params.max_levels} box levels")
    return DistanceEstimate(math.inf, True, None, params.max_levels)


def ball_membership(S: VectorSystem, x, delta: float, y, params: Optional[CCParams] = None) -> bool:
    """y in B_X(x, delta) under the estimator; monotone in delta.

    Distances below floor * delta are read as 0.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    params = params or CCParams()
    value = cc_distance(S, x, y, params).value
    if value < params.floor * delta:
        value = 0.0
    return bool(value < delta)


@dataclass
class BallEstimate:
    center: Tuple[float, ...]
    delta: float
    volume: float
    stderr: float
    samples: int
    hits: int
    box: Box
    seed: int
    unreachable: int = 0

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.samples

    def to_row(self) -> list:
        return [list(self.center), self.delta, self.volume, self.stderr, self.samples, self.seed]

    def to_dict(self) -> dict:
        return {'center': list(self.center), 'delta': self.delta, 'volume': self.volume, 'stderr': self.stderr,
                'samples': self.samples, 'hits': self.hits, 'seed': self.seed, 'unreachable': self.unreachable,
                'box': {'lower': list(self.box.lower), 'upper': list(self.box.upper)}}


def graded_instance(S: VectorSystem, delta: float, degrees: Optional[Sequence[float]]) -> Tuple[VectorSystem, float]:
    """(system, radius) whose unit ball is B_{(X,d)}(x, delta); plain systems keep radius delta."""
    if degrees is None:
        return S, float(delta)
    if len(degrees) != S.q:
        raise ValueError(f"expected {S.q} degrees, got {len(degrees)}")
    return S.scaled([delta ** d for d in degrees]), 1.0


def ball_volume(S: VectorSystem, x, delta: float, N: int, seed: int = 0, params: Optional[CCParams] = None,
                degrees: Optional[Sequence[float]] = None) -> BallEstimate:
    """Monte-Carlo Lebesgue measure of B_X(x, delta) (or of the graded ball) over its bounding box."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    params = params or CCParams()
    system, radius = graded_instance(S, delta, degrees)
    graph = CCGraph(system, x, radius, params)
    sizes = chunk_sizes(N, params.chunk)

    def run(index: int) -> Tuple[int, int]:
        Z = chunk_rng(seed, index).uniform(-1.0, 1.0, size=(sizes[index], system.n))
        d = graph.distances(graph.to_world(Z))
        return int(np.count_nonzero(d < radius)), int(np.count_nonzero(~np.isfinite(d)))

    counts = WorkerPool(params.threads).map(run, range(len(sizes)))
    hits = sum(c[0] for c in counts)
    unreachable = sum(c[1] for c in counts)
    box = graph.box
    box_volume = float(np.prod(2.0 * graph.half))
    p = hits / N
    estimate = BallEstimate(tuple(map(float, graph.center)), float(delta), p * box_volume,
                            math.sqrt(p * (1.0 - p) / N) * box_volume, int(N), hits, box, int(seed), unreachable)
    logger.debug(f"ball volume at delta={delta:.4g}: {estimate.volume:.6g} +- {estimate.stderr:.2g} ({hits}/{N})")
    return estimate


@dataclass
class DoublingEstimate:
    ratio: float
    stderr: float
    small: BallEstimate
    large: BallEstimate

    def to_dict(self) -> dict:
        return {'ratio': self.ratio, 'stderr': self.stderr, 'small': self.small.to_dict(),
                'large': self.large.to_dict()}


def doubling_estimate(S: VectorSystem, x, delta: float, N: int = 20000, seed: int = 0,
                      params: Optional[CCParams] = None, degrees: Optional[Sequence[float]] = None) -> DoublingEstimate:
    small = ball_volume(S, x, delta, N, seed, params, degrees)
    large = ball_volume(S, x, 2.0 * delta, N, seed, params, degrees)
    if small.volume <= 0.0:
        raise ConvergenceError(f"degenerate ball volume at delta={delta:g}; doubling ratio undefined")
    ratio = large.volume / small.volume
    rel = math.hypot(small.stderr / small.volume, large.stderr / large.volume if large.volume > 0 else 0.0)
    return DoublingEstimate(ratio, ratio * rel, small, large)


def doubling_ratio(S: VectorSystem, x, delta: float, N: int = 20000, seed: int = 0,
                   params: Optional[CCParams] = None, degrees: Optional[Sequence[float]] = None) -> float:
    """ball_volume(2 delta) / ball_volume(delta)."""
    return doubling_estimate(S, x, delta, N, seed, params, degrees).ratio


def sample_ball_points(S: VectorSystem, x, radius: float, count: int, rng: np.random.Generator,
                       segments: int = 3, fraction: float = 0.9, starts: Optional[np.ndarray] = None) -> np.ndarray:
    """Endpoints of random piecewise-constant controls of size <= fraction * radius; certified members."""
    q = S.q
    g = rng.standard_normal((count, segments, q))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    g *= (fraction * radius * rng.uniform(0.0, 1.0, size=(count, segments, 1)) ** (1.0 / q))
    state = (np.repeat(np.asarray(x, dtype=float).reshape(1, -1), count, axis=0)
             if starts is None else np.array(starts, dtype=float))
    ok = np.ones(count, dtype=bool)
    opts = FlowOptions(domain=S.domain)
    for i in range(segments):
        res = integrate(lambda y, c: S.combination(c, y), state, g[:, i], opts, r_end=1.0 / segments)
        state, ok = res.states, ok & res.ok
    return state[ok]


@dataclass
class ContainmentReport:
    holds: bool
    pairs: int
    violations: List[dict] = field(default_factory=list)
    engulfing_C: float = 3.0
    engulfing_checked: int = 0
    engulfing_violations: List[dict] = field(default_factory=list)
    engulfing_fraction: float = 0.0

    @property
    def empirical_constant(self) -> float:
        """Smallest C' <= C consistent with the sampled engulfing chains."""
        return self.engulfing_C * self.engulfing_fraction

    def to_dict(self) -> dict:
        return {'holds': self.holds, 'pairs': self.pairs, 'violations': self.violations,
                'engulfing_C': self.engulfing_C, 'engulfing_checked': self.engulfing_checked,
                'engulfing_violations': self.engulfing_violations, 'engulfing_fraction': self.engulfing_fraction,
                'empirical_constant': self.empirical_constant}


def containment_check(S: VectorSystem, x, deltas: Sequence[float], params: Optional[CCParams] = None,
                      degrees: Optional[Sequence[float]] = None, samples: int = 200, seed: int = 0,
                      C: float = 3.0, max_witnesses: int = 8) -> ContainmentReport:
    """Sampled monotone containment B(x, d1) in B(x, d2) for d1 < d2, and engulfing with constant C."""
    params = params or CCParams()
    deltas = sorted(float(d) for d in deltas)
    x = np.asarray(x, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    npairs = len(deltas) * (len(deltas) - 1) // 2
    per_pair = max(1, samples // max(npairs, 1))
    violations: List[dict] = []
    checked = 0
    graphs = {}

    def graph_for(delta: float) -> Tuple[CCGraph, float]:
        if delta not in graphs:
            system, radius = graded_instance(S, delta, degrees)
            graphs[delta] = (CCGraph(system, x, radius, params), radius)
        return graphs[delta]

    for i, d1 in enumerate(deltas):
        sys1, r1 = graded_instance(S, d1, degrees)
        for d2 in deltas[i + 1:]:
            pts = sample_ball_points(sys1, x, r1, per_pair, rng)
            graph, r2 = graph_for(d2)
            d = graph.distances(pts, params.corrections)
            bad = np.flatnonzero(~(d < r2))
            checked += pts.shape[0]
            violations.extend({'delta1': d1, 'delta2': d2, 'point': pts[j].tolist()} for j in bad[:max_witnesses])

    eng_violations: List[dict] = []
    eng_checked = 0
    worst = 0.0
    per_delta = max(1, samples // max(len(deltas), 1))
    for delta in deltas:
        sys_d, r = graded_instance(S, delta, degrees)
        w = sample_ball_points(sys_d, x, r, per_delta, rng)
        y = sample_ball_points(sys_d, x, r, w.shape[0], rng, starts=w)
        z = sample_ball_points(sys_d, x, r, y.shape[0], rng, starts=y)
        graph, rc = graph_for(C * delta)
        d = graph.distances(z, params.corrections)
        eng_checked += z.shape[0]
        if z.shape[0]:
            worst = max(worst, float(np.max(d)) / rc)
        bad = np.flatnonzero(~(d < rc))
        eng_violations.extend({'delta': delta, 'point': z[j].tolist()} for j in bad[:max_witnesses])

    holds = not violations and not eng_violations
    logger.info(f"containment: {checked} points, {len(violations)} violations; "
                f"engulfing C={C:g}: {eng_checked} chains, {len(eng_violations)} violations")
    return ContainmentReport(holds, checked, violations[:max_witnesses], float(C), eng_checked,
                             eng_violations[:max_witnesses], worst)
