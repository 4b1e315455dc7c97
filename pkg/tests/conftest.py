import os
from pathlib import Path

import numpy as np
import pytest

from mltrace.matio import ExplicitOperator, SparseMatrix

DATA_DIR = Path(os.environ.get("MLTRACE_DATA_DIR", Path(__file__).parent / "data"))


def random_symmetric(d, rng, radius=None):
    M = rng.standard_normal((d, d))
    M = 0.5 * (M + M.T)
    if radius is not None:
        M *= radius / np.max(np.abs(np.linalg.eigvalsh(M)))
    return M


def random_spsd(d, rng):
    X = rng.standard_normal((d, d))
    return X @ X.T / d + 0.05 * np.eye(d)


def explicit(M):
    return ExplicitOperator(SparseMatrix.from_dense(M, symmetric=True))


def graph_from_edges(d, edges):
    rows = [i for i, j in edges] + [j for i, j in edges]
    cols = [j for i, j in edges] + [i for i, j in edges]
    return SparseMatrix.from_coo(rows, cols, np.ones(len(rows)), (d, d), symmetric=True)


def complete_graph(d):
    return graph_from_edges(d, [(i, j) for i in range(d) for j in range(i + 1, d)])


def path_graph(d):
    return graph_from_edges(d, [(i, i + 1) for i in range(d - 1)])


def geometric_graph(d, radius, seed):
    """Random geometric graph in the unit square (many triangles)."""
    rng = np.random.default_rng(seed)
    pts = rng.random((d, 2))
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    iu = np.triu_indices(d, 1)
    mask = D[iu] < radius
    return graph_from_edges(d, list(zip(iu[0][mask], iu[1][mask])))


def data_file(name):
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(f"{name} not found in {DATA_DIR} (set MLTRACE_DATA_DIR)")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# filled by the acceptance module, echoed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
