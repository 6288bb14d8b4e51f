"""Built-in example systems and the catalog the CLI, configs and verify suites draw from."""

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

from .fields import Box, VectorField, VectorSystem
from .scaling import GradedSystem, graded, hormander_expand


def euclidean(n: int = 2, half_width: float = 4.0) -> GradedSystem:
    """Coordinate fields d/dx_1 .. d/dx_n."""
    fields = tuple(VectorField.constant([1.0 if i == j else 0.0 for i in range(n)], name=f"d{j + 1}")
                   for j in range(n))
    return graded(VectorSystem(fields, Box.cube(n, half_width), name=f"euclidean{n}"))


def heisenberg(with_T: bool = True, half_width: float = 3.0) -> GradedSystem:
    """X = d1 - x2/2 d3, Y = d2 + x1/2 d3 and, optionally, T = d3 of degree 2."""
    X = VectorField.from_strings(['1', '0', '-x2/2'], 3, name='X')
    Y = VectorField.from_strings(['0', '1', 'x1/2'], 3, name='Y')
    fields = (X, Y)
    degrees = (1.0, 1.0)
    if with_T:
        fields += (VectorField.constant([0.0, 0.0, 1.0], name='T'),)
        degrees += (2.0,)
    name = 'heisenberg' if with_T else 'heisenberg-xy'
    return GradedSystem(VectorSystem(fields, Box.cube(3, half_width), name=name), degrees)


def grushin(m: int = 2, half_width: float = 3.0) -> GradedSystem:
    """d/dx and x d/dy expanded by brackets up to order m."""
    V1 = VectorField.from_strings(['1', '0'], 2, name='V1')
    V2 = VectorField.from_strings(['0', 'x1'], 2, name='V2')
    return hormander_expand([V1, V2], m, Box.cube(2, half_width), name=f"grushin{m}")


def rotation(K: float = 10.0, radial: bool = True, outer: float = 1.5) -> GradedSystem:
    """K(-x2 d1 + x1 d2), with the radial unit field x/|x| when radial is set.

    The annulus around the unit circle is meant; the domain is its bounding box
    and base points stay away from the origin.
    """
    k = repr(float(K))
    fields = (VectorField.from_strings([f"-{k}*x2", f"{k}*x1"], 2, name='R'),)
    if radial:
        fields += (VectorField.from_strings(['x1/sqrt(x1^2+x2^2)', 'x2/sqrt(x1^2+x2^2)'], 2, name='N'),)
    return graded(VectorSystem(fields, Box.cube(2, outer), name=f"rotation{K:g}"))


def quadratic_line(half_width: float = 100.0) -> GradedSystem:
    """x1^2 d1 and d2; the flow of the first field blows up at time 1/x1."""
    fields = (VectorField.from_strings(['x1^2', '0'], 2, name='Q'),
              VectorField.constant([0.0, 1.0], name='d2'))
    return graded(VectorSystem(fields, Box.cube(2, half_width), name='quadratic-line'))


@dataclass(frozen=True)
class Builtin:
    factory: Callable[[], GradedSystem]
    base_point: Tuple[float, ...]
    description: str

    def build(self) -> GradedSystem:
        return self.factory()


CATALOG: Dict[str, Builtin] = {
    'euclidean2': Builtin(lambda: euclidean(2), (0.0, 0.0), 'coordinate fields on R^2'),
    'euclidean3': Builtin(lambda: euclidean(3), (0.0, 0.0, 0.0), 'coordinate fields on R^3'),
    'heisenberg': Builtin(heisenberg, (0.0, 0.0, 0.0), 'Heisenberg X, Y, T with degrees 1, 1, 2'),
    'heisenberg-xy': Builtin(lambda: heisenberg(with_T=False), (0.0, 0.0, 0.0), 'Heisenberg X, Y'),
    'grushin': Builtin(grushin, (0.0, 0.0), 'd/dx, x d/dy expanded to order 2'),
    'rotation': Builtin(rotation, (1.0, 0.0), 'rotation K=10 with the radial field on an annulus'),
    'quadratic-line': Builtin(quadratic_line, (1.0, 0.0), 'x^2 d/dx and d/dy'),
}


def get_builtin(name: str) -> Builtin:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown built-in system {name!r}; choose from {sorted(CATALOG)}") from None


def get_system(name: str) -> GradedSystem:
    return get_builtin(name).build()
