import numpy as np

from ..ccmetric import CCParams
from ..scaling import constant_structure_check, lambda_, volume_vs_lambda
from .base import Suite, SuiteResult, expect

MC_SAMPLES = 4000
DELTAS = (0.2, 0.4, 0.6, 0.8, 1.0)


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('scaling', seed, catalog)

    def heisenberg_lambda():
        G = suite.system('heisenberg')
        value = lambda_(G, [0.0, 0.0, 0.0], 0.5)
        expect(abs(value - 0.0625) <= 1e-15, f"Lambda(0, 0.5) = {value}")
        return {'lambda': value}

    def grushin_expansion():
        G = suite.system('grushin')
        expect(G.words == ((1,), (2,), (1, 2), (2, 1)), f"bracket words {G.words}")
        expect(G.degrees == (1.0, 1.0, 2.0, 2.0), f"degrees {G.degrees}")
        value = lambda_(G, [0.0, 0.0], 0.5)
        expect(abs(value - 0.125) <= 1e-15, f"Lambda(0, 0.5) = {value}")
        return {'fields': [f.name for f in G.system.fields]}

    def bracket_closure():
        out = {}
        rng = np.random.default_rng(seed)
        for name in ('heisenberg', 'grushin'):
            G = suite.system(name)
            pts = rng.uniform(-1.0, 1.0, size=(16, G.n))
            report = constant_structure_check(G, pts, m=2)
            expect(report['holds'], f"{name}: non-constant structure coefficients ({report['max_residual']:.3g})")
            out[name] = report['max_residual']
        return out

    def volume_law():
        out = {}
        for name, slope in (('heisenberg', 4.0), ('grushin', 3.0)):
            G = suite.system(name)
            report = volume_vs_lambda(G, suite.base_point(name), DELTAS, MC_SAMPLES, seed, CCParams())
            expect(abs(report.slope - slope) <= 0.25, f"{name}: volume slope {report.slope:.3f}, expected {slope}")
            expect(report.band <= 10.0, f"{name}: Vol/Lambda band {report.band:.3g}")
            out[name] = report.slope
        return out

    suite.check('heisenberg_lambda', heisenberg_lambda)
    suite.check('grushin_expansion', grushin_expansion)
    suite.check('bracket_closure', bracket_closure)
    suite.check('volume_law', volume_law)
    return suite.result
