"""Acceptance criteria, each run once at its stated tolerance.

Every criterion prints a single pass/fail line; the lines are repeated in the
terminal summary so they are visible without ``-s``.  Criterion 11 re-executes
criteria 1-10 and compares artifacts byte for byte.
"""
import pytest

from coercive import experiments as E

_CACHE = {}


def _result(k):
    if k not in _CACHE:
        _CACHE[k] = E.CRITERIA[k]()
    return _CACHE[k]


def _report(res, lines):
    line = res.line()
    print(line)
    lines.append(line)
    assert res.passed, line + "\n" + repr(res.details)


@pytest.mark.parametrize("k", sorted(E.CRITERIA))
def test_criterion(k, criterion_lines):
    _report(_result(k), criterion_lines)


def test_criterion_11_reproducibility(criterion_lines):
    first = {k: _result(k) for k in E.CRITERIA}
    _report(E.criterion_11(first), criterion_lines)
