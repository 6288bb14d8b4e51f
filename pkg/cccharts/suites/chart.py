import numpy as np

from ..chart import ChartConfig, build_chart
from .base import Suite, SuiteResult, expect


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('chart', seed, catalog)
    config = ChartConfig(seed=seed)

    def euclidean_degenerate():
        S = suite.system('euclidean2').system
        chart, _ = build_chart(S, [0.0, 0.0], config=config)
        a_max = float(np.max(np.abs(chart.A.values)))
        t = np.array([[0.01, -0.02], [0.0, 0.015]])
        phi_err = float(np.max(np.abs(chart.phi(t) - t)))
        expect(a_max <= 1e-10, f"|A| = {a_max:.3g} for coordinate fields")
        expect(phi_err <= 1e-8, f"Phi(t) differs from t by {phi_err:.3g}")
        return {'A_max': a_max, 'phi_error': phi_err}

    def heisenberg_consistency():
        G = suite.system('heisenberg')
        _, diag = build_chart(G.system, suite.base_point('heisenberg'), config=config)
        pull = diag.residuals['pullback']['max']
        det = diag.residuals['determinant']['max_relative']
        expect(pull <= 1e-5, f"pullback residual {pull:.3g}")
        expect(det <= 1e-4, f"determinant identity residual {det:.3g}")
        return {'pullback': pull, 'determinant': det}

    suite.check('euclidean_degenerate', euclidean_degenerate)
    suite.check('heisenberg_consistency', heisenberg_consistency)
    return suite.result
