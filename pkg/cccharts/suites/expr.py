import math

import numpy as np

from ..errors import UnknownIdentifierError
from ..expr import differentiate, parse
from .base import Suite, SuiteResult, expect


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('expr', seed, catalog)
    rng = np.random.default_rng(seed)

    def evaluation():
        value = parse('x1^2 + sin(x2)', 2).evaluate([1.0, 0.5])
        expect(abs(value - (1.0 + math.sin(0.5))) <= 1e-15, f"x1^2 + sin(x2) at (1, 0.5) gave {value}")
        return {'value': value}

    def derivative():
        e = parse('x1*exp(x2) - x2^3/(1 + x1^2)', 2)
        pts = rng.uniform(-1.0, 1.0, size=(20, 2))
        h = 1e-6
        for k in (1, 2):
            step = np.zeros(2)
            step[k - 1] = h
            fd = (e.evaluate(pts + step) - e.evaluate(pts - step)) / (2 * h)
            err = float(np.max(np.abs(differentiate(e, k).evaluate(pts) - fd)))
            expect(err <= 1e-6, f"d/dx{k} disagrees with central differences by {err:.3g}")
        return {}

    def print_round_trip():
        e = parse('-x1/3 + 0.1*cos(x2)^2', 2)
        again = parse(e.to_text(), 2)
        pts = rng.uniform(-2.0, 2.0, size=(20, 2))
        expect(np.array_equal(e.evaluate(pts), again.evaluate(pts)), "printed expression evaluates differently")
        return {'text': e.to_text()}

    def unknown_identifier():
        try:
            parse('x1 + y', 2)
        except UnknownIdentifierError as err:
            expect(err.offset == 5, f"offset {err.offset}, expected 5")
            return {'offset': err.offset}
        expect(False, "unknown identifier was accepted")

    suite.check('evaluation', evaluation)
    suite.check('derivative', derivative)
    suite.check('print_round_trip', print_round_trip)
    suite.check('unknown_identifier', unknown_identifier)
    return suite.result
