import numpy as np

from ..odecore import MatrixFunction, bound_suite, contraction_diagnostic, ode_residual, picard_solve
from .base import Suite, SuiteResult, expect


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('ode', seed, catalog)
    C = MatrixFunction(1, lambda p: p[:, 0], name='x')

    def scalar_power_series():
        A, report = picard_solve(C, 0.1, 17, 1e-12, n=1)
        value = float(A(np.array([[0.1]]))[0, 0, 0])
        expect(abs(value + 0.04917) <= 2e-4, f"A(0.1) = {value}, expected -0.04917")
        return {'A(0.1)': value, 'iterations': report.iterations}

    def explicit_bounds():
        A, report = picard_solve(C, 0.1, 17, 1e-12, n=1)
        bounds = bound_suite(A, report.D)
        expect(bounds['ok'], f"|A| exceeds min(5|x|/8, 1/16) by {bounds['excess']:.3g}")
        residual = ode_residual(A, C)
        return {'max_norm': bounds['max_norm'], 'ode_residual': residual}

    def contraction():
        ratio = contraction_diagnostic(C, 0.1, trials=50, seed=seed, n=1)
        expect(ratio <= 0.25, f"contraction ratio {ratio}")
        return {'ratio': ratio}

    suite.check('scalar_power_series', scalar_power_series)
    suite.check('explicit_bounds', explicit_bounds)
    suite.check('contraction', contraction)
    return suite.result
