import numpy as np

from ..fields import Box
from ..flows import FlowOptions, check_condition_C, flow, probe_delta0
from .base import Suite, SuiteResult, expect


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('flows', seed, catalog)

    def blow_up_closed_form():
        S = suite.system('quadratic-line').system
        x = flow(S.fields[0], [1.0, 0.0], 0.5, FlowOptions(domain=S.domain))
        expect(abs(x[0] - 2.0) <= 1e-6, f"x^2 d/dx flow gave {x[0]!r} at t=0.5, expected 2")
        return {'x': float(x[0])}

    def reversibility():
        S = suite.system('heisenberg').system
        opts = FlowOptions(domain=S.domain)
        x0 = np.array([0.3, -0.2, 0.1])
        back = flow(S.fields[0], flow(S.fields[0], x0, 0.7, opts), -0.7, opts)
        err = float(np.max(np.abs(back - x0)))
        expect(err <= 1e-7, f"forward/backward flow drifts by {err:.3g}")
        return {'error': err}

    def condition_C_sharpness():
        S = suite.system('quadratic-line').system.restrict((1,))
        x0 = suite.base_point('quadratic-line')
        good = check_condition_C(S, x0, 0.9)
        bad = check_condition_C(S, x0, 1.1)
        expect(good.holds, "condition C fails at eta=0.9")
        expect(not bad.holds, "condition C holds at eta=1.1")
        return {'witness': bad.witnesses[0]}

    def rotation_return():
        S = suite.system('rotation').system
        K = Box.around(suite.base_point('rotation'), 0.1)
        report = probe_delta0(S, K, np.linspace(0.05, 1.0, 20))
        expect(0.31 <= report.delta0 <= 0.66, f"delta0 estimate {report.delta0} outside [0.31, 0.66]")
        return {'delta0': report.delta0}

    suite.check('blow_up_closed_form', blow_up_closed_form)
    suite.check('reversibility', reversibility)
    suite.check('condition_C_sharpness', condition_C_sharpness)
    suite.check('rotation_return', rotation_return)
    return suite.result
