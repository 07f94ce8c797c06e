import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_model, random_model
from hoianomaly.explain import (aggregate_frame_scores, closest_normal, frame_explanation_scores,
                                read_pgm, saliency_heatmap, write_heatmap_csv, write_heatmap_pgm)
from hoianomaly.hoi_model import Block, BlockLayout, FrameRecord, HoiVector, ValidationError, unflatten
from hoianomaly.pca import back_project, project

LAYOUT = BlockLayout(2, 3, 2)   # D = 7


def identity_model(mean=None):
    D = LAYOUT.dim
    return make_model(LAYOUT, np.eye(D), np.zeros(D), [1.0], [np.zeros(D) if mean is None else mean],
                      [np.eye(D)])


def random_hoi(rng, layout):
    D = layout.dim
    v = np.r_[rng.uniform(0, 1, layout.k_int), np.zeros(layout.k_obj), rng.uniform(0.5, 3, 2)]
    v[layout.k_int + rng.integers(layout.k_obj)] = rng.uniform(0.1, 1)
    assert v.size == D
    return unflatten(v, layout)


def test_identity_case():
    # normal event at (0, 0, ...), box (0, 0); the test vector sits 3 and 4 away on the first two axes
    h = HoiVector([3.0, 4.0], [0, 0, 0], [0.0, 0.0])
    e = saliency_heatmap(identity_model(), h)
    expected = np.zeros((7, 7))
    expected[0, 0], expected[1, 1] = 9.0, 16.0
    np.testing.assert_allclose(e.heatmap, expected)
    assert e.total == pytest.approx(25.0)
    assert e.dominant_block() is Block.INTERACTION
    assert e.class_scores == {"action:interaction_0": 9.0, "action:interaction_1": 16.0,
                              "object:object_0": 0.0, "object:object_1": 0.0, "object:object_2": 0.0}


def test_zero_at_normal_event():
    y = np.array([0.2, 0.1, 0.0, 0.8, 0.0, 1.5, 2.5])
    e = saliency_heatmap(identity_model(y), unflatten(y, LAYOUT))
    assert np.all(e.heatmap == 0.0)
    np.testing.assert_allclose(e.normal_event, y)


def test_location_score_sums_box_diagonal():
    mean = np.r_[np.zeros(5), [1.0, 1.0]]
    e = saliency_heatmap(identity_model(mean), HoiVector([0, 0], [0, 0, 0], [3.0, 2.0]))
    assert e.location_score == pytest.approx(4.0 + 1.0)
    assert e.dominant_block() is Block.BOX


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_decomposition_and_structure(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, LAYOUT)
    h = random_hoi(rng, LAYOUT)
    e = saliency_heatmap(model, h)
    H = e.heatmap
    # exact decomposition, recomputed in reduced space
    x = project(model.pca, np.r_[h.interactions, h.objects, h.box])
    m = e.normal_mode
    v = np.r_[h.interactions, h.objects, h.box]
    delta = project(model.pca, v - e.normal_event + model.pca.mean)
    q = delta @ np.linalg.solve(model.gmm.covariances[m], delta)
    assert H.sum() == pytest.approx(q, rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(H, H.T, atol=1e-12 * max(1.0, np.abs(H).max()))
    assert np.all(np.diag(H) >= -1e-12)
    # coarse 3x3 is a block partition of H
    ids = LAYOUT.block_ids()
    for a in range(3):
        for b in range(3):
            assert e.coarse[a, b] == pytest.approx(H[np.ix_(ids == a, ids == b)].sum(), abs=1e-9)
    assert e.coarse.sum() == pytest.approx(H.sum(), rel=1e-9, abs=1e-12)
    # closest normal event is the posterior argmax and sits on the model's subspace
    post = np.log(model.gmm.weights) + [
        -0.5 * np.linalg.slogdet(c)[1] - 0.5 * (x - mu) @ np.linalg.solve(c, x - mu)
        for mu, c in zip(model.gmm.means, model.gmm.covariances)]
    assert m == int(np.argmax(post))
    np.testing.assert_allclose(e.normal_event, back_project(model.pca, model.gmm.means[m]))


def test_closest_normal():
    g_means = [[0.0], [10.0]]
    model = make_model(BlockLayout(0, 0, 2), np.array([[1.0], [0.0]]), np.zeros(2), [0.5, 0.5], g_means,
                       [[[1.0]], [[1.0]]])
    assert closest_normal(model, [10.0])[0] == 1
    assert closest_normal(model, [0.0])[0] == 0
    # at the midpoint the heavier component wins
    heavy = make_model(BlockLayout(0, 0, 2), np.array([[1.0], [0.0]]), np.zeros(2), [0.3, 0.7], g_means,
                       [[[1.0]], [[1.0]]])
    assert closest_normal(heavy, [5.0])[0] == 1
    # posteriors tie where 10x - 50 = -log(7/3), i.e. x = 4.9153
    assert closest_normal(heavy, [4.92])[0] == 1
    assert closest_normal(heavy, [4.91])[0] == 0
    _, dens = closest_normal(heavy, [10.0])
    assert dens == pytest.approx(1 / np.sqrt(2 * np.pi))


def test_argmax_stability():
    rng = np.random.default_rng(3)
    model = random_model(rng, LAYOUT, d=LAYOUT.dim, M=1)
    h = random_hoi(rng, LAYOUT)
    y = saliency_heatmap(model, h).normal_event
    v = np.r_[h.interactions, h.objects, h.box]
    i = 0
    prev = -np.inf
    for scale in (1.0, 1.5, 2.0, 4.0):
        w = v.copy()
        w[i] = y[i] + scale * (v[i] - y[i])
        e = saliency_heatmap(model, unflatten(w, LAYOUT))
        assert e.heatmap[i, i] >= prev
        prev = e.heatmap[i, i]


def test_frame_scores_take_class_max():
    model = identity_model()
    a = HoiVector([5.0, 0.0], [0, 0, 0], [0.0, 0.0])
    b = HoiVector([2.0, 1.0], [0, 0, 0], [0.0, 1.0])
    scores, loc = frame_explanation_scores(model, FrameRecord("v", 0, (a, b)))
    assert scores["action:interaction_0"] == 25.0 and scores["action:interaction_1"] == 1.0
    assert loc == 1.0
    single, single_loc = frame_explanation_scores(model, FrameRecord("v", 0, (a,)))
    e = saliency_heatmap(model, a)
    assert single == e.class_scores and single_loc == e.location_score
    rev, _ = frame_explanation_scores(model, FrameRecord("v", 0, (b, a)))
    assert rev == scores


def test_frame_scores_need_detections():
    with pytest.raises(ValidationError):
        frame_explanation_scores(identity_model(), FrameRecord("v", 0))
    with pytest.raises(ValidationError):
        aggregate_frame_scores([])


def test_heatmap_exports(tmp_path):
    H = np.array([[1.0, -2.0], [-2.0, 0.4]])
    write_heatmap_csv(tmp_path / "h.csv", H)
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "h.csv", delimiter=","), H)
    sidecar = write_heatmap_pgm(tmp_path / "h.pgm", H)
    img = read_pgm(tmp_path / "h.pgm")
    np.testing.assert_array_equal(img, [[255, 0], [0, 204]])
    assert sidecar.read_text().split() == ["min", "-2.0", "max", "1.0"]


def test_flat_heatmap_pgm(tmp_path):
    write_heatmap_pgm(tmp_path / "z.pgm", np.zeros((3, 3)))
    assert np.all(read_pgm(tmp_path / "z.pgm") == 0)
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValidationError):
        read_pgm(tmp_path / "bad.pgm")
