"""
cccharts verify suites

One module per library area, each exposing run(seed, catalog) -> SuiteResult:
- expr, fields, flows: parsing, brackets, integration and the probes
- metric, norms: Carnot-Caratheodory balls and function-space estimators
- ode, chart, density, scaling: Picard solver, charts, densities, graded scaling
"""

import logging
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

from ..config import ensure_output_directory
from ..systems import CATALOG, Builtin
from . import chart, density, expr, fields, flows, metric, norms, ode, scaling
from .base import CheckResult, SuiteResult, expect

logger = logging.getLogger(__name__)

SUITES: Dict[str, Callable[[int, Mapping[str, Builtin]], SuiteResult]] = {
    'expr': expr.run,
    'fields': fields.run,
    'flows': flows.run,
    'metric': metric.run,
    'norms': norms.run,
    'ode': ode.run,
    'chart': chart.run,
    'density': density.run,
    'scaling': scaling.run,
}


def run_suites(names: Optional[Sequence[str]] = None, seed: int = 0,
               catalog: Optional[Mapping[str, Builtin]] = None) -> List[SuiteResult]:
    """Run the named suites (all when names is empty) in registry order."""
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    catalog = catalog if catalog is not None else CATALOG
    results = []
    for name in SUITES:
        if name in names:
            logger.info(f"running suite {name}")
            result = SUITES[name](seed, catalog)
            logger.info(f"suite {name}: {len(result.checks) - result.failures}/{len(result.checks)} checks passed")
            results.append(result)
    return results


def write_junit(results: Sequence[SuiteResult], path: Union[str, Path]) -> Path:
    """JUnit-style XML report; no timings, so equal runs give equal bytes."""
    path = Path(path)
    ensure_output_directory(path.parent)
    root = ET.Element('testsuites', name='cccharts', tests=str(sum(len(r.checks) for r in results)),
                      failures=str(sum(r.failures for r in results)))
    for r in results:
        suite = ET.SubElement(root, 'testsuite', name=r.name, tests=str(len(r.checks)),
                              failures=str(r.failures))
        ET.SubElement(ET.SubElement(suite, 'properties'), 'property', name='seed', value=str(r.seed))
        for c in r.checks:
            case = ET.SubElement(suite, 'testcase', classname=f"cccharts.{r.name}", name=c.name)
            if not c.passed:
                ET.SubElement(case, 'failure', message=c.message)
    ET.ElementTree(root).write(path, encoding='utf-8', xml_declaration=True)
    logger.info(f"Verify report saved to {path}")
    return path


__all__ = [
    'SUITES',
    'CheckResult',
    'SuiteResult',
    'expect',
    'run_suites',
    'write_junit',
]
