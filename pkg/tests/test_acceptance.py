"""Each acceptance criterion at its stated tolerance; a summary line per criterion is printed at the end."""

from __future__ import annotations

import pytest

from conftest import ACCEPTANCE_LINES
from wicknls.acceptance import CRITERIA

SLOW = {8, 9, 10, 11, 13}


@pytest.mark.parametrize(
    "number", [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n for n in sorted(CRITERIA)]
)
def test_criterion(number):
    result = CRITERIA[number]()
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    assert result.passed, result.detail
