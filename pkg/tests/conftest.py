import numpy as np
import pytest

from tifctr import data


def central_diff(f, x, step=1e-6):
    """Numerical gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        g[i] = (up - down) / (2 * step)
    return grad


def rel_error(analytic, numeric):
    a = np.asarray(analytic, dtype=float).ravel()
    n = np.asarray(numeric, dtype=float).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
    return np.linalg.norm(a - n) / scale


@pytest.fixture(scope="session")
def small_drift():
    cfg = data.DriftConfig(n_days=6, samples_per_day=300, field_count=4, cardinality=8,
                           drift_rate=0.8, seed=3)
    return data.generate_drift(cfg)


@pytest.fixture(scope="session")
def small_dataset(small_drift):
    return small_drift.dataset


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        line = f"[{'PASS' if ok else 'FAIL'}] AC{number:<2} {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
