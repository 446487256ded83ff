import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edgereg.cost_map import CostMap, build, sample, sample_gradient
from edgereg.errors import OutOfBounds
from edgereg.imaging import EdgeMap

from conftest import brute_force_distance

masks = arrays(np.bool_, st.tuples(st.integers(1, 64), st.integers(1, 64)), elements=st.booleans())
sparse_masks = st.tuples(st.integers(1, 64), st.integers(1, 64), st.floats(0, 0.05), st.integers(0, 2**32 - 1)).map(
    lambda a: np.random.default_rng(a[3]).random((a[0], a[1])) < a[2])


@given(st.one_of(masks, sparse_masks), st.sampled_from([50.0, 3.5, 10.0]))
def test_build_equals_brute_force(mask, tau):
    got = build(EdgeMap(mask), tau).cost
    assert np.array_equal(got, np.minimum(brute_force_distance(mask), tau))


def test_examples():
    cm = build(EdgeMap.from_pixels(64, 64, [(10, 10)]))
    assert sample(cm, (13, 14)) == 5.0
    assert cm.cost[10, 10] == 0.0
    assert cm.cost[63, 63] == 50.0


def test_empty_edge_set_is_all_truncation():
    cm = build(EdgeMap(np.zeros((7, 9), bool)), 12.0)
    assert np.all(cm.cost == 12.0)


def test_invalid_truncation():
    with pytest.raises(ValueError):
        build(EdgeMap(np.zeros((3, 3), bool)), 0.0)


@given(sparse_masks)
def test_grid_invariants(mask):
    c = build(EdgeMap(mask)).cost
    assert np.all(c[mask] == 0) and np.all((c >= 0) & (c <= 50))
    # 1-Lipschitz between 4- and 8-neighbours
    assert np.all(np.abs(np.diff(c, axis=0)) <= 1 + 1e-12)
    assert np.all(np.abs(np.diff(c, axis=1)) <= 1 + 1e-12)
    assert np.all(np.abs(c[1:, 1:] - c[:-1, :-1]) <= np.sqrt(2) + 1e-12)


@given(sparse_masks, st.integers(0, 63), st.integers(0, 63))
def test_adding_an_edge_never_raises_cost(mask, r, c):
    more = mask.copy()
    more[r % mask.shape[0], c % mask.shape[1]] = True
    assert np.all(build(EdgeMap(more)).cost <= build(EdgeMap(mask)).cost)


def test_sample_at_nodes_and_midpoints():
    cm = CostMap(np.array([[2.0, 4.0], [2.0, 4.0]]))
    assert sample(cm, (0, 0)) == 2.0 and sample(cm, (1, 1)) == 4.0
    assert sample(cm, (0.5, 0.3)) == pytest.approx(3.0, abs=1e-12)


def test_sample_stays_within_corner_range(rng):
    cm = build(EdgeMap(rng.random((40, 50)) < 0.02))
    uv = rng.uniform([0, 0], [49, 39], size=(10_000, 2))
    vals = cm.sample_many(uv)
    u0, v0 = np.minimum(np.floor(uv).astype(int), [48, 38]).T
    corners = np.stack([cm.cost[v0, u0], cm.cost[v0, u0 + 1], cm.cost[v0 + 1, u0], cm.cost[v0 + 1, u0 + 1]])
    assert np.all(vals >= corners.min(axis=0) - 1e-12) and np.all(vals <= corners.max(axis=0) + 1e-12)


def test_gradient_examples():
    planar = CostMap(np.array([[0.0, 1.0], [0.0, 1.0]]))
    assert np.allclose(sample_gradient(planar, (0.3, 0.6)), [1, 0])
    flat = CostMap(np.full((3, 3), 50.0))
    assert np.array_equal(sample_gradient(flat, (1.2, 0.7)), [0, 0])


def test_gradient_matches_central_differences(rng):
    cm = build(EdgeMap(rng.random((40, 50)) < 0.02))
    h = 1e-4
    cells = rng.integers([0, 0], [49, 39], size=(2000, 2))
    uv = cells + rng.uniform(0.01, 0.99, size=(2000, 2))
    g = cm.gradient_many(uv)
    fd = np.stack([
        (cm.sample_many(uv + [h, 0]) - cm.sample_many(uv - [h, 0])) / (2 * h),
        (cm.sample_many(uv + [0, h]) - cm.sample_many(uv - [0, h])) / (2 * h),
    ], axis=1)
    scale = np.maximum(np.linalg.norm(fd, axis=1), 1.0)
    assert np.max(np.linalg.norm(g - fd, axis=1) / scale) <= 1e-6


@given(sparse_masks, st.integers(0, 2**32 - 1))
def test_gradient_bounded_and_zero_when_saturated(mask, seed):
    if min(mask.shape) < 2:
        return
    cm = build(EdgeMap(mask), 6.0)
    rng = np.random.default_rng(seed)
    uv = rng.uniform([0, 0], [mask.shape[1] - 1, mask.shape[0] - 1], size=(200, 2))
    g = cm.gradient_many(uv)
    assert np.all(np.linalg.norm(g, axis=1) <= np.sqrt(2) + 1e-12)
    u0 = np.minimum(np.floor(uv[:, 0]).astype(int), mask.shape[1] - 2)
    v0 = np.minimum(np.floor(uv[:, 1]).astype(int), mask.shape[0] - 2)
    c = cm.cost
    plateau = (c[v0, u0] == 6) & (c[v0, u0 + 1] == 6) & (c[v0 + 1, u0] == 6) & (c[v0 + 1, u0 + 1] == 6)
    assert np.all(g[plateau] == 0)


@pytest.mark.parametrize("p", [(-0.01, 0), (0, -1e-9), (9.001, 0), (0, 5.5)])
def test_out_of_bounds(p):
    cm = CostMap(np.zeros((5, 10)))
    with pytest.raises(OutOfBounds):
        sample(cm, p)
    with pytest.raises(OutOfBounds):
        sample_gradient(cm, p)


def test_pgm_export_is_linear():
    cm = CostMap(np.array([[0.0, 25.0, 50.0]]))
    assert cm.to_pgm_array().tolist() == [[0, 128, 255]]


def test_build_is_deterministic(rng):
    mask = rng.random((64, 64)) < 0.03
    assert build(EdgeMap(mask)).cost.tobytes() == build(EdgeMap(mask.copy())).cost.tobytes()
