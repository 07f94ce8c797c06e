import numpy as np
import pytest
from hypothesis import settings

from hoianomaly import _pykernels
from hoianomaly.detector import NormalityModel
from hoianomaly.gmm import GmmModel
from hoianomaly.hoi_model import BlockLayout, Vocabulary
from hoianomaly.pca import PcaModel

settings.register_profile("default", deadline=None)
settings.load_profile("default")

try:
    from hoianomaly import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_BACKENDS = [pytest.param(_pykernels, id="python"),
                   pytest.param(_ckernels, id="cython",
                                marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


@pytest.fixture(params=KERNEL_BACKENDS)
def kernels(request):
    return request.param


def make_model(layout, W, mean, weights, means, covs, vocab=None):
    """NormalityModel from explicit PCA and GMM parameters."""
    W = np.asarray(W, dtype=float)
    pca = PcaModel(mean=np.asarray(mean, dtype=float), components=W,
                   eigenvalues=np.ones(W.shape[1]), variance_captured=1.0, total_variance=float(W.shape[1]))
    gmm = GmmModel(np.asarray(weights, dtype=float), np.asarray(means, dtype=float),
                   np.asarray(covs, dtype=float))
    return NormalityModel(layout, vocab or Vocabulary.generic(layout), pca, gmm)


def random_model(rng, layout=BlockLayout(3, 4, 2), d=None, M=None):
    """Random model with orthonormal W and well-conditioned covariances."""
    D = layout.dim
    d = d or int(rng.integers(1, D + 1))
    M = M or int(rng.integers(1, 4))
    W, _ = np.linalg.qr(rng.normal(size=(D, d)))
    covs = []
    for _ in range(M):
        A = rng.normal(size=(d, d))
        covs.append(A @ A.T + 0.1 * np.eye(d))
    w = rng.dirichlet(np.ones(M))
    return make_model(layout, W, rng.normal(size=D), w, rng.normal(scale=2.0, size=(M, d)), covs)


# -- acceptance reporting -----------------------------------------------------

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome; summarised at the end of the run."""
    def record(name, ok, detail=""):
        _CRITERIA.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
