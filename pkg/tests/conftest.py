import numpy as np
import pytest

from reer import Batch


def random_batches(rng, n_rows, p, n_batches, noise=1.0, min_rows=None):
    """Full-rank design with intercept, split into ``n_batches`` random pieces.

    Each piece has at least ``min_rows`` rows (default ``p + 1``).
    """
    min_rows = p + 1 if min_rows is None else min_rows
    x = np.column_stack([np.ones(n_rows), rng.normal(size=(n_rows, p - 1))])
    y = x @ rng.normal(size=p) + noise * rng.standard_normal(n_rows)
    sizes = min_rows + rng.multinomial(n_rows - min_rows * n_batches, np.full(n_batches, 1.0 / n_batches))
    cuts = np.cumsum(sizes)[:-1]
    return [Batch(xb, yb) for xb, yb in zip(np.split(x, cuts), np.split(y, cuts))], x, y


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_LINES = pytest.StashKey[list]()


class Criterion:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self):
        self.number = None
        self.title = ""
        self.line = None

    def start(self, number, title):
        self.number, self.title = number, title

    def verdict(self, ok, detail):
        self.line = f"criterion {self.number:>2} [{'PASS' if ok else 'FAIL'}] {self.title}: {detail}"
        print(self.line)
        return ok


@pytest.fixture
def criterion(request):
    rec = Criterion()
    yield rec
    line = rec.line or f"criterion {rec.number:>2} [FAIL] {rec.title}: raised before reaching a verdict"
    request.config.stash.setdefault(_LINES, []).append((rec.number, line))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0] or 0):
            terminalreporter.write_line(line)
