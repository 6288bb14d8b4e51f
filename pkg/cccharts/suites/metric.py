from ..ccmetric import CCParams, cc_distance, containment_check, doubling_estimate
from .base import Suite, SuiteResult, expect

MC_SAMPLES = 4000


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('metric', seed, catalog)
    params = CCParams()

    def euclidean_distance():
        S = suite.system('euclidean2').system
        est = cc_distance(S, [0.0, 0.0], [0.5, 0.0], params)
        expect(abs(est.value - 0.5) <= 0.025, f"rho((0,0), (0.5,0)) estimated as {est.value}")
        return est.to_dict()

    def euclidean_doubling():
        S = suite.system('euclidean2').system
        est = doubling_estimate(S, [0.0, 0.0], 0.25, MC_SAMPLES, seed, params)
        expect(abs(est.ratio - 4.0) <= 0.4, f"Euclidean doubling ratio {est.ratio}")
        return {'ratio': est.ratio}

    def heisenberg_doubling():
        G = suite.system('heisenberg')
        ratios = [doubling_estimate(G.system, [0.0, 0.0, 0.0], d, MC_SAMPLES, seed, params, G.degrees).ratio
                  for d in (0.1, 0.2, 0.4)]
        expect(all(8.0 <= r <= 32.0 for r in ratios), f"Heisenberg doubling ratios {ratios}")
        return {'ratios': ratios}

    def heisenberg_containment():
        G = suite.system('heisenberg')
        report = containment_check(G.system, [0.0, 0.0, 0.0], [0.25, 0.5, 1.0], params, G.degrees,
                                   samples=60, seed=seed)
        expect(report.holds, f"containment violations: {report.violations[:2]}")
        return {'pairs': report.pairs}

    suite.check('euclidean_distance', euclidean_distance)
    suite.check('euclidean_doubling', euclidean_doubling)
    suite.check('heisenberg_doubling', heisenberg_doubling)
    suite.check('heisenberg_containment', heisenberg_containment)
    return suite.result
