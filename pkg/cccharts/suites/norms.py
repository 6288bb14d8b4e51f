from ..fields import Box
from ..funcspaces import inclusion_check, zygmund_norm
from .base import Suite, SuiteResult, expect

INTERVAL = Box((-1.0,), (1.0,))


def run(seed: int, catalog=None) -> SuiteResult:
    suite = Suite('norms', seed, catalog)

    def second_difference_abs():
        value = zygmund_norm('abs(x1)', INTERVAL, 1.0).components['second_difference']
        expect(abs(value - 2.0) <= 0.05, f"second difference part of |x| is {value}")
        return {'value': value}

    def second_difference_affine():
        value = zygmund_norm('3*x1 - 1', INTERVAL, 1.0).components['second_difference']
        expect(value <= 1e-12, f"second difference part of an affine function is {value}")
        return {'value': value}

    def inclusions():
        out = {}
        for f in ('x1', 'x1^2', 'abs(x1)'):
            report = inclusion_check(f, INTERVAL, 0.5, 1.0, sub_region=Box((-0.5,), (0.5,)))
            bad = [i['name'] for i in report.items if not i['holds']]
            expect(not bad, f"inclusions fail for {f}: {bad}")
            out[f] = report.holds
        return out

    suite.check('second_difference_abs', second_difference_abs)
    suite.check('second_difference_affine', second_difference_affine)
    suite.check('inclusions', inclusions)
    return suite.result
