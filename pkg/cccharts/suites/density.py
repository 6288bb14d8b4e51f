import math

from ..ccmetric import CCParams
from ..chart import ChartConfig, build_chart
from ..density import Density, ball_measure_compare
from .base import Suite, SuiteResult, expect

MC_SAMPLES = 8000


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('density', seed, catalog)

    def lebesgue_unit_balls():
        S = suite.system('euclidean2').system
        chart, _ = build_chart(S, [0.0, 0.0], config=ChartConfig(seed=seed))
        nu = Density.lebesgue(2)
        base = ball_measure_compare(S, chart, nu, 1.0, CCParams(), MC_SAMPLES, seed)
        for est in (base.ball_X, base.ball_XJ0):
            expect(abs(est.value - math.pi) <= 3.0 * est.stderr + 1e-12,
                   f"ball measure {est.value} vs pi (stderr {est.stderr:.3g})")
        scaled = ball_measure_compare(S, chart, nu.scaled(10.0), 1.0, CCParams(), MC_SAMPLES, seed)
        expect(abs(scaled.ball_X.value / base.ball_X.value - 10.0) <= 1e-9, "ball measure is not linear in nu")
        for key, value in base.ratios.items():
            expect(abs(scaled.ratios[key] - value) <= 1e-10, f"ratio {key} changes under nu -> 10 nu")
        return base.to_dict()

    suite.check('lebesgue_unit_balls', lebesgue_unit_balls)
    return suite.result
