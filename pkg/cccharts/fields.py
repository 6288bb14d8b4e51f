"""
Vector fields, systems of fields and their pointwise algebra.

Index tuples J are 1-based, as in configs and reports. Tensors returned by
structure_coefficients are numpy arrays indexed from 0:
c[j, k, l] is the coefficient of X_l in [X_j, X_k].
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, SpanError
from .expr import Const, Expr, add, as_expr, differentiate, mul, sub, substitution_for_affine

logger = logging.getLogger(__name__)

H_FD = 1e-5
SPAN_THRESHOLD = 1e-10

IndexTuple = Tuple[int, ...]
NativeFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box prod [lower_i, upper_i]."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds differ in length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"degenerate box {self.lower} .. {self.upper}")

    @classmethod
    def around(cls, center: Sequence[float], half_widths: Union[float, Sequence[float]]) -> 'Box':
        c = np.asarray(center, dtype=float)
        w = np.broadcast_to(np.asarray(half_widths, dtype=float), c.shape)
        return cls(tuple(map(float, c - w)), tuple(map(float, c + w)))

    @classmethod
    def cube(cls, n: int, half_width: float) -> 'Box':
        return cls.around(np.zeros(n), half_width)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, points: np.ndarray, tol: float = 0.0):
        pts = np.asarray(points, dtype=float)
        inside = np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=-1)
        return bool(inside) if pts.ndim == 1 else inside

    def intersect(self, other: 'Box') -> 'Box':
        return Box(tuple(np.maximum(self.lo, other.lo)), tuple(np.minimum(self.hi, other.hi)))

    def clip(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, self.lo, self.hi)

    def grid(self, resolution: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)


def fd_step(x: np.ndarray, h_fd: float = H_FD) -> np.ndarray:
    """Relative finite-difference step h_fd * max(1, |x|) per point."""
    x = np.asarray(x, dtype=float)
    return h_fd * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def _as_batch(x) -> Tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        return pts[None, :], True
    return pts, False


@dataclass(frozen=True)
class VectorField:
    """A vector field on R^n, Expr-backed or given by a native batch callable."""

    n: int
    components: Optional[Tuple[Expr, ...]] = None
    native: Optional[NativeFn] = field(default=None, compare=False)
    native_jacobian: Optional[NativeFn] = field(default=None, compare=False)
    name: str = ''

    def __post_init__(self):
        if self.components is None and self.native is None:
            raise ValueError("a vector field needs components or a native evaluator")
        if self.components is not None:
            if len(self.components) != self.n:
                raise ValueError(f"field {self.name!r} has {len(self.components)} components, expected {self.n}")
            for c in self.components:
                if c.max_variable() > self.n:
                    raise ValueError(f"field {self.name!r} uses a variable beyond x{self.n}")

    @classmethod
    def from_strings(cls, texts: Sequence[Union[str, float, Expr]], n: int, name: str = '') -> 'VectorField':
        return cls(n=n, components=tuple(as_expr(t, n) for t in texts), name=name)

    @classmethod
    def constant(cls, vector: Sequence[float], name: str = '') -> 'VectorField':
        return cls(n=len(vector), components=tuple(Const(float(v)) for v in vector), name=name)

    @property
    def is_symbolic(self) -> bool:
        return self.components is not None

    @cached_property
    def exact_jacobian(self) -> Optional[Tuple[Tuple[Expr, ...], ...]]:
        if self.components is None:
            return None
        return tuple(tuple(differentiate(c, k) for k in range(1, self.n + 1)) for c in self.components)

    def __call__(self, x) -> np.ndarray:
        pts, single = _as_batch(x)
        if self.components is not None:
            vals = np.stack([c.evaluate(pts) for c in self.components], axis=-1)
        else:
            vals = np.asarray(self.native(pts), dtype=float).reshape(pts.shape[0], self.n)
            if not np.all(np.isfinite(vals)):
                raise DomainError(f"non-finite value of field {self.name!r}")
        return vals[0] if single else vals

    def jacobian(self, x, h_fd: float = H_FD) -> np.ndarray:
        pts, single = _as_batch(x)
        if self.components is not None:
            jac = np.empty((pts.shape[0], self.n, self.n))
            for i, row in enumerate(self.exact_jacobian):
                for k, entry in enumerate(row):
                    jac[:, i, k] = entry.evaluate(pts)
        elif self.native_jacobian is not None:
            jac = np.asarray(self.native_jacobian(pts), dtype=float).reshape(pts.shape[0], self.n, self.n)
        else:
            jac = fd_jacobian(self, pts, h_fd)
        return jac[0] if single else jac

    def scaled(self, factor: float) -> 'VectorField':
        if self.components is not None:
            return VectorField(self.n, tuple(mul(Const(float(factor)), c) for c in self.components),
                               name=self.name)
        base, base_jac = self.native, self.native_jacobian
        return VectorField(
            self.n,
            native=lambda p: factor * base(p),
            native_jacobian=None if base_jac is None else (lambda p: factor * base_jac(p)),
            name=self.name,
        )


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], pts: np.ndarray, h_fd: float = H_FD) -> np.ndarray:
    """Central-difference Jacobian of a batch map R^n -> R^m, shape (N, m, n)."""
    pts = np.asarray(pts, dtype=float)
    h = fd_step(pts, h_fd)[:, None]
    cols = []
    for k in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[k] = 1.0
        plus = np.asarray(f(pts + h * e))
        minus = np.asarray(f(pts - h * e))
        cols.append((plus - minus) / (2.0 * h))
    return np.stack(cols, axis=-1)


def combine(coeffs: Sequence[float], fields: Sequence[VectorField], name: str = '') -> VectorField:
    """The constant-coefficient combination sum_j a_j X_j."""
    n = fields[0].n
    if all(f.is_symbolic for f in fields):
        comps = []
        for i in range(n):
            term: Expr = Const(0.0)
            for a, f in zip(coeffs, fields):
                term = add(term, mul(Const(float(a)), f.components[i]))
            comps.append(term)
        return VectorField(n, tuple(comps), name=name)
    coeffs = [float(a) for a in coeffs]
    return VectorField(n, native=lambda p: sum(a * f(p) for a, f in zip(coeffs, fields)), name=name)


def jacobian(X: VectorField, x, h_fd: float = H_FD) -> np.ndarray:
    """Jacobian DX at x: exact for Expr-backed fields, central differences otherwise."""
    return X.jacobian(x, h_fd)


def commutator(Xa: VectorField, Xb: VectorField, x) -> np.ndarray:
    """[Xa, Xb](x) = (DXb) Xa - (DXa) Xb."""
    if Xa.n != Xb.n:
        raise ValueError("fields of different dimension")
    pts, single = _as_batch(x)
    val = (np.einsum('nik,nk->ni', Xb.jacobian(pts), Xa(pts))
           - np.einsum('nik,nk->ni', Xa.jacobian(pts), Xb(pts)))
    return val[0] if single else val


def bracket_field(V: VectorField, W: VectorField, name: str = '') -> VectorField:
    """Symbolic Lie bracket [V, W] as an Expr-backed field."""
    if not (V.is_symbolic and W.is_symbolic):
        raise ValueError("symbolic brackets need Expr-backed fields")
    n = V.n
    comps = []
    for i in range(n):
        term: Expr = Const(0.0)
        for k in range(n):
            term = add(term, mul(V.components[k], W.exact_jacobian[i][k]))
            term = sub(term, mul(W.components[k], V.exact_jacobian[i][k]))
        comps.append(term)
    return VectorField(n, tuple(comps), name=name or f"[{V.name},{W.name}]")


StructureTable = Tuple[Tuple[Tuple[Expr, ...], ...], ...]


@dataclass(frozen=True)
class VectorSystem:
    """q fields of a common dimension n on a box domain."""

    fields: Tuple[VectorField, ...]
    domain: Box
    structure: Optional[StructureTable] = None
    name: str = ''

    def __post_init__(self):
        if not self.fields:
            raise ValueError("a system needs at least one field")
        dims = {f.n for f in self.fields}
        if len(dims) != 1:
            raise ValueError(f"fields have mixed dimensions {sorted(dims)}")
        if self.domain.dim != self.n:
            raise ValueError(f"domain dimension {self.domain.dim} does not match n={self.n}")
        if self.structure is not None:
            q = self.q
            if len(self.structure) != q or any(len(r) != q or any(len(c) != q for c in r) for r in self.structure):
                raise ValueError(f"structure table must be {q}x{q}x{q}")

    @property
    def n(self) -> int:
        return self.fields[0].n

    @property
    def q(self) -> int:
        return len(self.fields)

    @property
    def is_symbolic(self) -> bool:
        return all(f.is_symbolic for f in self.fields)

    def matrix(self, x) -> np.ndarray:
        """Columns X_1(x) .. X_q(x): shape (n, q), or (N, n, q) for a batch."""
        pts, single = _as_batch(x)
        mat = np.stack([f(pts) for f in self.fields], axis=-1)
        return mat[0] if single else mat

    def jacobians(self, x) -> np.ndarray:
        pts, single = _as_batch(x)
        jac = np.stack([f.jacobian(pts) for f in self.fields], axis=1)
        return jac[0] if single else jac

    def combination(self, a, x) -> np.ndarray:
        """sum_j a_j X_j(x) for per-point coefficient rows a (N, q)."""
        pts, single = _as_batch(x)
        coeffs = np.broadcast_to(np.asarray(a, dtype=float), (pts.shape[0], self.q))
        val = np.einsum('niq,nq->ni', self.matrix(pts), coeffs)
        return val[0] if single else val

    def restrict(self, J: IndexTuple) -> 'VectorSystem':
        idx = [j - 1 for j in J]
        return VectorSystem(tuple(self.fields[j] for j in idx), self.domain, name=f"{self.name}{list(J)}")

    def scaled(self, factors: Sequence[float]) -> 'VectorSystem':
        """The system {f_j X_j}; user structure coefficients become f_j f_k / f_l c."""
        factors = [float(f) for f in factors]
        if len(factors) != self.q:
            raise ValueError("one factor per field expected")
        structure = None
        if self.structure is not None:
            if any(f == 0.0 for f in factors):
                raise ValueError("structure coefficients need non-zero factors")
            structure = tuple(tuple(tuple(
                mul(Const(factors[j] * factors[k] / factors[l]), self.structure[j][k][l])
                for l in range(self.q)) for k in range(self.q)) for j in range(self.q))
        return VectorSystem(tuple(f.scaled(a) for f, a in zip(self.fields, factors)),
                            self.domain, structure, self.name)

    def with_domain(self, domain: Box) -> 'VectorSystem':
        return VectorSystem(self.fields, domain, self.structure, self.name)

    def pushforward_affine(self, M: np.ndarray, b: np.ndarray) -> 'VectorSystem':
        """The system Psi_* X for Psi(x) = M x + b."""
        if not self.is_symbolic:
            raise ValueError("affine push-forward needs Expr-backed fields")
        M = np.asarray(M, dtype=float)
        b = np.asarray(b, dtype=float)
        Minv = np.linalg.inv(M)
        back = substitution_for_affine(Minv, -Minv @ b)
        new_fields = []
        for f in self.fields:
            pulled = [c.substitute(back) for c in f.components]
            comps = []
            for i in range(self.n):
                term: Expr = Const(0.0)
                for k in range(self.n):
                    term = add(term, mul(Const(float(M[i, k])), pulled[k]))
                comps.append(term)
            new_fields.append(VectorField(self.n, tuple(comps), name=f.name))
        corners = np.array(list(itertools.product(*zip(self.domain.lower, self.domain.upper))))
        image = corners @ M.T + b
        domain = Box(tuple(image.min(axis=0)), tuple(image.max(axis=0)))
        structure = None
        if self.structure is not None:
            structure = tuple(tuple(tuple(e.substitute(back) for e in row) for row in plane)
                              for plane in self.structure)
        return VectorSystem(tuple(new_fields), domain, structure, f"{self.name}*")


def span_measure(mats: np.ndarray) -> np.ndarray:
    """sqrt(det(X X^T)) per point and the scale-aware threshold for it."""
    gram = np.einsum('...iq,...jq->...ij', mats, mats)
    return np.sqrt(np.abs(np.linalg.det(gram)))


def span_threshold(mats: np.ndarray) -> np.ndarray:
    n = mats.shape[-2]
    col_norm = np.max(np.linalg.norm(mats, axis=-2), axis=-1)
    return SPAN_THRESHOLD * col_norm ** n


def is_spanning(S: VectorSystem, x) -> bool:
    _, ratio_ok = _max_det(S.matrix(np.asarray(x, dtype=float)))
    return ratio_ok


def _max_det(mat: np.ndarray) -> Tuple[float, bool]:
    n, q = mat.shape
    best = 0.0
    for J in itertools.combinations(range(q), n):
        best = max(best, abs(float(np.linalg.det(mat[:, J]))))
    col_norm = float(np.max(np.linalg.norm(mat, axis=0)))
    return best, best > 0.0 and best >= SPAN_THRESHOLD * col_norm ** n


def brackets(S: VectorSystem, x) -> np.ndarray:
    """All brackets [X_j, X_k](x), shape (q, q, n) or (N, q, q, n); exactly antisymmetric."""
    pts, single = _as_batch(x)
    vals = S.matrix(pts)
    jacs = S.jacobians(pts)
    out = np.zeros((pts.shape[0], S.q, S.q, S.n))
    for j in range(S.q):
        for k in range(j + 1, S.q):
            br = (np.einsum('nik,nk->ni', jacs[:, k], vals[:, :, j])
                  - np.einsum('nik,nk->ni', jacs[:, j], vals[:, :, k]))
            out[:, j, k] = br
            out[:, k, j] = -br
    return out[0] if single else out


def structure_coefficients(S: VectorSystem, x) -> np.ndarray:
    """Coefficients c[j, k, l] with [X_j, X_k] = sum_l c[j, k, l] X_l.

    User-supplied coefficient expressions are returned when present;
    otherwise the minimum-norm solution of the pointwise linear system.
    """
    pts, single = _as_batch(x)
    if S.structure is not None:
        out = np.empty((pts.shape[0], S.q, S.q, S.q))
        for j in range(S.q):
            for k in range(S.q):
                for l in range(S.q):
                    out[:, j, k, l] = S.structure[j][k][l].evaluate(pts)
        return out[0] if single else out
    mats = S.matrix(pts)
    bad = span_measure(mats) < span_threshold(mats)
    bad |= span_measure(mats) == 0.0
    if np.any(bad):
        witness = pts[np.argmax(bad)]
        raise SpanError(f"fields of {S.name!r} do not span at {witness.tolist()}", witness)
    pinv = np.linalg.pinv(mats)
    br = brackets(S, pts)
    out = np.einsum('nli,njki->njkl', pinv, br)
    return out[0] if single else out


def structure_residual(S: VectorSystem, x) -> float:
    """max |[X_j,X_k] - sum_l c_{j,k}^l X_l| over the given points."""
    pts, _ = _as_batch(x)
    c = structure_coefficients(S, pts)
    br = brackets(S, pts)
    recon = np.einsum('njkl,nil->njki', c, S.matrix(pts))
    return float(np.max(np.linalg.norm(br - recon, axis=-1)))


def validate_index_tuple(J: Sequence[int], n: int, q: int) -> IndexTuple:
    J = tuple(int(j) for j in J)
    if len(J) != n:
        raise ValueError(f"index tuple {J} has length {len(J)}, expected {n}")
    if any(not 1 <= j <= q for j in J):
        raise ValueError(f"index tuple {J} has entries outside 1..{q}")
    return J


def wedge_det(S: VectorSystem, J: Sequence[int], x) -> Union[float, np.ndarray]:
    """det(X_{j1}(x) | ... | X_{jn}(x))."""
    J = validate_index_tuple(J, S.n, S.q)
    mats = S.matrix(x)
    cols = [j - 1 for j in J]
    return np.linalg.det(mats[..., cols]) if mats.ndim == 3 else float(np.linalg.det(mats[:, cols]))


def select_J0(S: VectorSystem, x0, zeta: float = 1.0) -> Tuple[IndexTuple, float]:
    """Lexicographically smallest n-tuple maximizing |wedge_det| at x0.

    Returns the tuple (1-based) and max_J |det_J| / |det_J0|.
    """
    if not 0.0 < zeta <= 1.0:
        raise ValueError(f"zeta must lie in (0, 1], got {zeta}")
    mat = S.matrix(np.asarray(x0, dtype=float))
    top, spanning = _max_det(mat)
    if not spanning:
        raise SpanError(f"fields of {S.name!r} do not span at {list(map(float, x0))}", x0)
    best_J, best = None, -1.0
    for J in itertools.combinations(range(S.q), S.n):
        value = abs(float(np.linalg.det(mat[:, J])))
        if value > best:
            best_J, best = J, value
    ratio = top / best
    if ratio > 1.0 / zeta:
        raise SpanError(f"zeta condition fails at {list(map(float, x0))}: ratio {ratio} > {1.0 / zeta}", x0)
    J0 = tuple(j + 1 for j in best_J)
    logger.debug(f"J0={J0} with |det|={best:.6g} at {list(map(float, x0))}")
    return J0, ratio


def wedge_ratios(S: VectorSystem, J0: Sequence[int], x) -> np.ndarray:
    """max_J |det_J / det_J0| at each point of a batch."""
    pts, _ = _as_batch(x)
    mats = S.matrix(pts)
    base = np.abs(np.linalg.det(mats[..., [j - 1 for j in J0]]))
    best = np.zeros(pts.shape[0])
    for J in itertools.combinations(range(S.q), S.n):
        best = np.maximum(best, np.abs(np.linalg.det(mats[..., list(J)])))
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(base > 0, best / base, np.inf)


def cramer_solve(B: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coefficients b with y = B b via determinant quotients; batch aware."""
    B = np.asarray(B, dtype=float)
    y = np.asarray(y, dtype=float)
    det = np.linalg.det(B)
    scale = np.max(np.linalg.norm(B, axis=-2), axis=-1) ** B.shape[-1]
    if np.any(np.abs(det) <= SPAN_THRESHOLD * scale) or np.any(det == 0.0):
        raise SpanError("singular basis in Cramer's rule")
    n = B.shape[-1]
    out = np.empty(y.shape)
    for l in range(n):
        Bl = np.array(B, copy=True)
        Bl[..., :, l] = y
        out[..., l] = np.linalg.det(Bl) / det
    return out


def cramer_coeffs(basis: Sequence[VectorField], y: VectorField, x) -> np.ndarray:
    """b_l with y(x) = sum_l b_l basis_l(x)."""
    if len(basis) != basis[0].n:
        raise ValueError("Cramer's rule needs exactly n basis fields")
    pts, single = _as_batch(x)
    B = np.stack([f(pts) for f in basis], axis=-1)
    b = cramer_solve(B, y(pts))
    return b[0] if single else b


