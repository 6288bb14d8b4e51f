import numpy as np

from ..fields import commutator, select_J0, structure_coefficients, structure_residual, wedge_det
from .base import Suite, SuiteResult, expect


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('fields', seed, catalog)
    rng = np.random.default_rng(seed)

    def heisenberg_bracket():
        S = suite.system('heisenberg').system
        pts = rng.uniform(-1.0, 1.0, size=(10, 3))
        err = float(np.max(np.abs(commutator(S.fields[0], S.fields[1], pts) - [0.0, 0.0, 1.0])))
        expect(err <= 1e-14, f"[X, Y] differs from d3 by {err:.3g}")
        return {'error': err}

    def heisenberg_structure():
        S = suite.system('heisenberg').system
        pts = rng.uniform(-1.0, 1.0, size=(10, 3))
        c = structure_coefficients(S, pts)
        expected = np.zeros((3, 3, 3))
        expected[0, 1, 2], expected[1, 0, 2] = 1.0, -1.0
        err = float(np.max(np.abs(c - expected)))
        expect(err <= 1e-12, f"structure coefficients off by {err:.3g}")
        expect(structure_residual(S, pts) <= 1e-12, "bracket reconstruction residual too large")
        return {'error': err}

    def j0_selection():
        G = suite.system('grushin')
        J0, ratio = select_J0(G.system, [0.0, 0.0])
        expect(abs(wedge_det(G.system, J0, [0.0, 0.0])) > 0.0, f"J0={J0} is degenerate")
        expect(ratio == 1.0, f"selected tuple is not maximal (ratio {ratio})")
        return {'J0': list(J0)}

    suite.check('heisenberg_bracket', heisenberg_bracket)
    suite.check('heisenberg_structure', heisenberg_structure)
    suite.check('j0_selection', j0_selection)
    return suite.result
