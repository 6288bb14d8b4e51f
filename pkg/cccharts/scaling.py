"""
Graded systems and multi-parameter scaling.

A graded system attaches a formal degree d_j >= 1 to each field. At scale
delta the fields become delta^{d_j} X_j; Lambda(x, delta) is the largest
|det| over n-tuples of scaled fields, and the scaling map at (x, delta) is
the canonical chart of the scaled system with J0 forced to a maximizing tuple.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .ccmetric import (CCGraph, CCParams, ContainmentReport, DoublingEstimate, ball_volume, containment_check,
                       doubling_estimate, sample_ball_points)
from .chart import Chart, ChartConfig, ChartDiagnostics, build_chart, uniform_ball_points
from .errors import ConvergenceError, SpanError
from .fields import Box, VectorField, VectorSystem, bracket_field, structure_coefficients
from .funcspaces import Ball, NormReport, holder_norm
from .workers import WorkerPool

logger = logging.getLogger(__name__)

SAMPLE_FLOOR = 1000
ZERO_TOL = 1e-12
CONSTANT_TOL = 1e-8

Word = Tuple[int, ...]
DeltaFamily = Callable[[float], VectorSystem]


@dataclass(frozen=True)
class GradedSystem:
    """Fields with formal degrees; words/flags are set by hormander_expand.

    family, when given, replaces the graded rule X^delta = delta^d X. The
    multi-scale axioms are then only checked, never assumed.
    """

    system: VectorSystem
    degrees: Tuple[float, ...]
    words: Optional[Tuple[Word, ...]] = None
    flags: Tuple[Tuple[str, ...], ...] = ()
    family: Optional[DeltaFamily] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.degrees) != self.system.q:
            raise ValueError(f"expected {self.system.q} degrees, got {len(self.degrees)}")
        if any(d < 1 for d in self.degrees):
            raise ValueError(f"degrees must be >= 1, got {list(self.degrees)}")
        if self.flags and len(self.flags) != self.system.q:
            raise ValueError("one flag tuple per field expected")

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def q(self) -> int:
        return self.system.q

    @property
    def name(self) -> str:
        return self.system.name

    @property
    def is_graded(self) -> bool:
        return self.family is None

    def scaled_system(self, delta: float) -> VectorSystem:
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        if self.family is not None:
            system = self.family(float(delta))
            if system.n != self.n:
                raise ValueError(f"delta family returned dimension {system.n}, expected {self.n}")
            return system
        return self.system.scaled([delta ** d for d in self.degrees])

    def flagged(self, flag: str) -> List[int]:
        """1-based indices of the fields carrying a flag ('zero' or 'duplicate')."""
        return [j + 1 for j, f in enumerate(self.flags) if flag in f]

    def pruned(self) -> 'GradedSystem':
        """Drop zero and duplicate brackets; a display option, the full list stays authoritative."""
        keep = [j for j in range(self.q) if not (self.flags and self.flags[j])]
        system = VectorSystem(tuple(self.system.fields[j] for j in keep), self.system.domain,
                              name=self.system.name)
        words = tuple(self.words[j] for j in keep) if self.words else None
        return GradedSystem(system, tuple(self.degrees[j] for j in keep), words, tuple(() for _ in keep))

    def to_dict(self) -> dict:
        return {'name': self.name, 'n': self.n, 'degrees': list(self.degrees),
                'fields': [f.name for f in self.system.fields],
                'words': [list(w) for w in self.words] if self.words else None,
                'flags': [list(f) for f in self.flags] if self.flags else None}


def graded(system: VectorSystem, degrees: Optional[Sequence[float]] = None) -> GradedSystem:
    """Wrap a system; all degrees default to 1."""
    degrees = tuple(float(d) for d in degrees) if degrees is not None else (1.0,) * system.q
    return GradedSystem(system, degrees)


def _word_name(word: Word, names: Sequence[str]) -> str:
    if len(word) == 1:
        return names[word[0] - 1]
    return f"[{names[word[0] - 1]},{_word_name(word[1:], names)}]"


def _flag_fields(fields: Sequence[VectorField], domain: Box) -> Tuple[Tuple[str, ...], ...]:
    pts = domain.grid(5)
    vals = [f(pts) for f in fields]
    flags = []
    for j, v in enumerate(vals):
        scale = 1.0 + float(np.max(np.abs(v)))
        if float(np.max(np.abs(v))) <= ZERO_TOL:
            flags.append(('zero',))
        elif any(min(float(np.max(np.abs(v - w))), float(np.max(np.abs(v + w)))) <= ZERO_TOL * scale
                 for w in vals[:j]):
            flags.append(('duplicate',))
        else:
            flags.append(())
    return tuple(flags)


def hormander_expand(fields: Sequence[VectorField], m: int, domain: Box, name: str = '') -> GradedSystem:
    """All right-nested brackets [V_j1,[V_j2,...,V_jk]] with k <= m, degree k.

    Self-brackets [V_j, V_j] of generators are skipped; every other bracket
    is kept, including those that vanish or repeat an earlier one, and
    flagged as such.
    """
    if m < 1:
        raise ValueError(f"order m must be >= 1, got {m}")
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one generating field")
    if not all(f.is_symbolic for f in fields):
        raise ValueError("Hormander expansion needs Expr-backed fields")
    names = [f.name or f"V{j + 1}" for j, f in enumerate(fields)]
    generators = [VectorField(f.n, f.components, name=nm) for f, nm in zip(fields, names)]
    words: List[Word] = [(j + 1,) for j in range(len(fields))]
    built: List[VectorField] = list(generators)
    degrees: List[float] = [1.0] * len(fields)
    layer = list(zip(words, built))
    for order in range(2, m + 1):
        nxt = []
        for j, V in enumerate(generators, start=1):
            for word, Z in layer:
                if word == (j,):
                    continue
                new_word = (j,) + word
                nxt.append((new_word, bracket_field(V, Z, name=_word_name(new_word, names))))
        for word, Z in nxt:
            words.append(word)
            built.append(Z)
            degrees.append(float(order))
        layer = nxt
    system = VectorSystem(tuple(built), domain, name=name or f"hormander{m}")
    flags = _flag_fields(built, domain)
    zeros = sum(1 for f in flags if 'zero' in f)
    logger.info(f"expanded {len(fields)} fields to {len(built)} brackets up to order {m} ({zeros} vanish)")
    return GradedSystem(system, tuple(degrees), tuple(words), flags)


def _max_tuple_dets(mats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-point max |det| over sorted n-tuples and the lexicographically first maximizing tuple."""
    n, q = mats.shape[-2:]
    best = np.full(mats.shape[0], -1.0)
    arg = np.zeros((mats.shape[0], n), dtype=int)
    for J in itertools.combinations(range(q), n):
        value = np.abs(np.linalg.det(mats[:, :, J]))
        better = value > best
        best = np.where(better, value, best)
        arg[better] = J
    return best, arg + 1


def lambda_(G: GradedSystem, x, delta: float):
    """Lambda(x, delta); a float for one point, an (N,) array for a batch."""
    return lambda_tuple(G, x, delta)[0]


def lambda_tuple(G: GradedSystem, x, delta: float):
    """(Lambda(x, delta), maximizing 1-based tuple)."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    mats = G.scaled_system(delta).matrix(np.atleast_2d(pts))
    values, tuples = _max_tuple_dets(mats)
    if single:
        return float(values[0]), tuple(int(j) for j in tuples[0])
    return values, tuples


@dataclass
class NSWChart:
    """The chart of {delta^{d_j} X_j} at x with J0 a Lambda-maximizing tuple."""

    graded: GradedSystem
    x: Tuple[float, ...]
    delta: float
    lam: float
    J: Tuple[int, ...]
    chart: Chart
    diagnostics: ChartDiagnostics

    def Y(self, t) -> np.ndarray:
        """Rescaled fields Y_j^{x,delta}(t), shape (N, q, n)."""
        return self.chart.Y(t)

    def to_dict(self) -> dict:
        return {'x': list(self.x), 'delta': self.delta, 'lambda': self.lam, 'J': list(self.J),
                'radii': self.chart.radii.to_dict(), 'diagnostics': self.diagnostics.to_dict()}


def nsw_chart(G: GradedSystem, x, delta: float, config: Optional[ChartConfig] = None) -> NSWChart:
    x = np.asarray(x, dtype=float).reshape(-1)
    lam, J = lambda_tuple(G, x, delta)
    if lam <= 0.0:
        raise SpanError(f"Lambda vanishes at x={x.tolist()}, delta={delta:g}", x)
    config = replace(config or ChartConfig(), J0=J)
    chart, diagnostics = build_chart(G.scaled_system(delta), x, config=config)
    logger.info(f"scaling chart at delta={delta:g}: Lambda={lam:.6g}, J={J}")
    return NSWChart(G, tuple(map(float, x)), float(delta), lam, J, chart, diagnostics)


def jacobian_band(nsw: NSWChart, samples: int = 64, seed: int = 0, radius: Optional[float] = None) -> dict:
    """min/max of |det dPhi_{x,delta}(t)| / Lambda(x, delta) over t in B^n(radius)."""
    chart = nsw.chart
    r = chart.radii.eta1 if radius is None else float(radius)
    rng = np.random.default_rng(seed)
    T = np.vstack([np.zeros((1, chart.n)), uniform_ball_points(rng, samples - 1, chart.n, r)])
    _, dphi = chart.phi_jacobian(T)
    ratios = np.abs(np.linalg.det(dphi)) / nsw.lam
    return {'delta': nsw.delta, 'radius': r, 'min': float(np.min(ratios)), 'max': float(np.max(ratios)),
            'samples': int(T.shape[0])}


def rescaled_field_norms(nsw: NSWChart, m: int = 1, radius: Optional[float] = None, grid: int = 9) -> List[NormReport]:
    """C^m norm of each Y_j^{x,delta} on B^n(radius), max over components."""
    chart = nsw.chart
    r = chart.radii.eta1 if radius is None else float(radius)
    region = Ball.at_origin(chart.n, r)
    reports = []
    for j in range(chart.S.q):
        parts = [holder_norm(lambda t, j=j, i=i: chart.Y(t)[:, j, i], region, m=m, s=0.0, grid=grid)
                 for i in range(chart.n)]
        worst = max(parts, key=lambda p: p.value)
        worst.extras['field'] = j + 1
        reports.append(worst)
    return reports


@dataclass
class VolumeLawReport:
    x: Tuple[float, ...]
    deltas: List[float]
    volumes: List[float]
    stderrs: List[float]
    lambdas: List[float]
    samples: int
    seed: int
    slope: Optional[float] = None
    intercept: Optional[float] = None
    residuals: List[float] = field(default_factory=list)

    @property
    def ratios(self) -> List[float]:
        return [v / lam if lam > 0 else math.inf for v, lam in zip(self.volumes, self.lambdas)]

    @property
    def band(self) -> float:
        """max/min of Vol/Lambda across the deltas."""
        r = self.ratios
        return max(r) / min(r) if min(r) > 0 else math.inf

    def to_rows(self) -> List[list]:
        return [[d, v, e, lam, r] for d, v, e, lam, r in
                zip(self.deltas, self.volumes, self.stderrs, self.lambdas, self.ratios)]

    def to_dict(self) -> dict:
        return {'x': list(self.x), 'samples': self.samples, 'seed': self.seed, 'slope': self.slope,
                'intercept': self.intercept, 'residuals': self.residuals, 'band': self.band,
                'rows': [dict(zip(VOLUME_HEADER, row)) for row in self.to_rows()]}


VOLUME_HEADER = ('delta', 'volume', 'stderr', 'lambda', 'ratio')


def delta_seed(seed: int, index: int) -> int:
    """Seed of the index-th delta of an experiment."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def fit_slope(deltas: Sequence[float], values: Sequence[float]) -> Tuple[float, float, List[float]]:
    """Least-squares line through (log delta, log value): (slope, intercept, residuals)."""
    X = np.log(np.asarray(deltas, dtype=float))
    Y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(X, Y, 1)
    return float(slope), float(intercept), (Y - (slope * X + intercept)).tolist()


def _graded_ball(G: GradedSystem, x, delta: float, N: int, seed: int, params: CCParams):
    if G.is_graded:
        return ball_volume(G.system, x, delta, N, seed, params, degrees=G.degrees)
    return ball_volume(G.scaled_system(delta), x, 1.0, N, seed, params)


def volume_vs_lambda(G: GradedSystem, x, deltas: Sequence[float], N: int = 20000, seed: int = 0,
                     params: Optional[CCParams] = None) -> VolumeLawReport:
    """Monte-Carlo Leb(B_{(X,d)}(x, delta)) against Lambda(x, delta) and the log-log slope."""
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("need at least one delta")
    if any(not 0.0 < d <= 1.0 for d in deltas):
        raise ValueError(f"deltas must lie in (0, 1], got {deltas}")
    if N < SAMPLE_FLOOR:
        logger.warning(f"raising Monte-Carlo samples from {N} to the floor {SAMPLE_FLOOR}")
        N = SAMPLE_FLOOR
    params = params or CCParams()
    inner = replace(params, threads=1)
    x = np.asarray(x, dtype=float).reshape(-1)

    def run(index: int):
        return _graded_ball(G, x, deltas[index], N, delta_seed(seed, index), inner)

    estimates = WorkerPool(params.threads).map(run, range(len(deltas)))
    for est in estimates:
        if est.hits == 0:
            raise ConvergenceError(f"no Monte-Carlo sample hit the ball at delta={est.delta:g}; raise N")
    report = VolumeLawReport(tuple(map(float, x)), deltas, [e.volume for e in estimates],
                             [e.stderr for e in estimates], [lambda_(G, x, d) for d in deltas], int(N), int(seed))
    if len(deltas) > 1:
        report.slope, report.intercept, report.residuals = fit_slope(deltas, report.volumes)
        logger.info(f"volume law slope {report.slope:.4f} over {len(deltas)} deltas")
    return report


def doubling_ladder(G: GradedSystem, x, deltas: Sequence[float], N: int = 20000, seed: int = 0,
                    params: Optional[CCParams] = None) -> List[DoublingEstimate]:
    """Vol B(x, 2 delta) / Vol B(x, delta) for each delta."""
    out = []
    for index, delta in enumerate(deltas):
        s = delta_seed(seed, index)
        if G.is_graded:
            out.append(doubling_estimate(G.system, x, delta, N, s, params, degrees=G.degrees))
        else:
            small = _graded_ball(G, x, delta, N, s, params or CCParams())
            large = _graded_ball(G, x, 2.0 * delta, N, s, params or CCParams())
            if small.volume <= 0.0:
                raise ConvergenceError(f"degenerate ball volume at delta={delta:g}; doubling ratio undefined")
            ratio = large.volume / small.volume
            out.append(DoublingEstimate(ratio, ratio * math.hypot(small.stderr / small.volume,
                                                                  large.stderr / max(large.volume, 1e-300)),
                                        small, large))
        logger.debug(f"doubling at delta={delta:g}: {out[-1].ratio:.4g}")
    return out


def scaled_structure_coefficients(G: GradedSystem, x, delta: float) -> np.ndarray:
    """c^{l,delta}_{j,k} = delta^{d_j + d_k - d_l} c^l_{j,k}."""
    c = structure_coefficients(G.system, x)
    d = np.asarray(G.degrees, dtype=float)
    factor = float(delta) ** (d[:, None, None] + d[None, :, None] - d[None, None, :])
    return c * factor


def constant_structure_check(G: GradedSystem, points, m: Optional[int] = None, tol: float = CONSTANT_TOL) -> dict:
    """For d_j + d_k <= m, fit [X_j, X_k] = sum_l c_l X_l with constant c over all points.

    Only fields with d_l <= d_j + d_k enter the fit. The check holds when
    every pair is reproduced to tol.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = int(max(G.degrees)) if m is None else int(m)
    fields = G.system.fields
    vals = np.stack([f(pts) for f in fields], axis=-1)
    worst, pairs = 0.0, []
    for j, k in itertools.combinations(range(G.q), 2):
        order = G.degrees[j] + G.degrees[k]
        if order > m:
            continue
        cols = [l for l in range(G.q) if G.degrees[l] <= order]
        target = (np.einsum('nik,nk->ni', fields[k].jacobian(pts), vals[:, :, j])
                  - np.einsum('nik,nk->ni', fields[j].jacobian(pts), vals[:, :, k]))
        B = vals[:, :, cols].reshape(-1, len(cols))
        coeffs = np.linalg.lstsq(B, target.reshape(-1), rcond=None)[0]
        residual = float(np.max(np.abs(B @ coeffs - target.reshape(-1)))) if B.size else 0.0
        worst = max(worst, residual)
        pairs.append({'j': j + 1, 'k': k + 1, 'residual': residual,
                      'coefficients': {str(cols[i] + 1): float(c) for i, c in enumerate(coeffs) if abs(c) > tol}})
    return {'holds': worst <= tol, 'max_residual': worst, 'm': m, 'pairs': pairs}


def graded_membership_check(G: GradedSystem, x, delta: float, samples: int = 500, seed: int = 0,
                            params: Optional[CCParams] = None) -> dict:
    """Points reached by controls of size < delta in the graded sense lie in the graph ball of delta^d X at radius 1."""
    params = params or CCParams()
    rng = np.random.default_rng(seed)
    scaled = G.scaled_system(delta)
    pts = sample_ball_points(scaled, x, 1.0, samples, rng)
    graph = CCGraph(scaled, x, 1.0, params)
    d = graph.distances(pts, params.corrections)
    inside = d < 1.0
    return {'delta': float(delta), 'checked': int(pts.shape[0]), 'agree': int(np.count_nonzero(inside)),
            'agreement': float(np.mean(inside)) if pts.shape[0] else 1.0}


@dataclass
class MultiscaleReport:
    containment: List[ContainmentReport] = field(default_factory=list)
    lambda_violations: List[dict] = field(default_factory=list)
    doubling: List[dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return (all(c.holds for c in self.containment) and not self.lambda_violations
                and all(math.isfinite(row['ratio']) for row in self.doubling))

    @property
    def engulfing_constant(self) -> float:
        return max((c.empirical_constant for c in self.containment), default=0.0)

    def to_dict(self) -> dict:
        return {'holds': self.holds, 'containment': [c.to_dict() for c in self.containment],
                'lambda_violations': self.lambda_violations, 'doubling': self.doubling,
                'engulfing_constant': self.engulfing_constant, 'notes': self.notes}


def multiscale_axioms(G: GradedSystem, x_samples, deltas: Sequence[float], params: Optional[CCParams] = None,
                      samples: int = 200, seed: int = 0, N: int = 20000, C: float = 3.0) -> MultiscaleReport:
    """Sampled containment, engulfing, Lambda monotonicity and doubling; violations are data."""
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    deltas = sorted(float(d) for d in deltas)
    report = MultiscaleReport()
    for i, x in enumerate(X):
        if G.is_graded:
            report.containment.append(containment_check(G.system, x, deltas, params, degrees=G.degrees,
                                                        samples=samples, seed=delta_seed(seed, i), C=C))
        lams = [lambda_(G, x, d) for d in deltas if d <= 1.0]
        for a, b in itertools.combinations(range(len(lams)), 2):
            if lams[a] > lams[b]:
                report.lambda_violations.append({'x': x.tolist(), 'delta1': deltas[a], 'delta2': deltas[b],
                                                 'lambda1': lams[a], 'lambda2': lams[b]})
        for delta, est in zip(deltas, doubling_ladder(G, x, deltas, N, delta_seed(seed, i), params)):
            report.doubling.append({'x': x.tolist(), 'delta': delta, 'ratio': est.ratio, 'stderr': est.stderr})
    if not G.is_graded:
        report.notes.append('containment sampling needs graded degrees; skipped for a custom delta family')
    logger.info(f"multiscale axioms over {X.shape[0]} points: holds={report.holds}")
    return report


def doubling_rows(estimates: Sequence[DoublingEstimate]) -> List[list]:
    return [[e.small.delta, e.ratio, e.stderr, e.small.volume, e.large.volume] for e in estimates]


DOUBLING_HEADER = ('delta', 'ratio', 'stderr', 'volume_delta', 'volume_2delta')
