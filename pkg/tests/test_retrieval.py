"""Embedding table construction and softmax retrieval."""

import math

import numpy as np
import pytest

from replan import (
    BufferPolicy,
    DistanceMetric,
    RetrievalConfig,
    Video,
    build_table,
    default_tau,
    embedding_distance,
    load_table,
    retrieval_probabilities,
    retrieve,
    save_table,
)
from replan.core import ExperienceDataset, ExperienceTuple
from replan.encoders import PcaProjection


def coord_video(x: float, y: float) -> Video:
    """A 1x1x2 video whose two pixels carry 2D coordinates.

    Coordinates are stored divided by 16, so small integers survive the
    float32 pixel format exactly and the encoder recovers them bit-exact.
    """
    return Video(np.array([[[x / 16.0, y / 16.0]]], dtype=np.float32))


def coord_encoder(video: Video) -> np.ndarray:
    return video.pixels.reshape(-1).astype(np.float64) * 16.0


IDENTITY_2D = PcaProjection(mean=np.zeros(2), components=np.eye(2), k=2)


def make_table(points, successes=None, object_ids=None):
    """Table whose entry embeddings sit exactly at ``points``."""
    n = len(points)
    successes = successes if successes is not None else [True] * n
    object_ids = object_ids if object_ids is not None else [f"obj/{i}" for i in range(n)]
    tuples = tuple(
        ExperienceTuple(coord_video(x, y), oid, ok)
        for (x, y), oid, ok in zip(points, object_ids, successes)
    )
    return build_table(ExperienceDataset(tuples), IDENTITY_2D, encoder=coord_encoder)


def probs(table, query_xy, **config_kwargs):
    query = coord_video(*query_xy)
    return retrieval_probabilities(
        table, query, RetrievalConfig(**config_kwargs), encoder=coord_encoder
    )


def test_softmax_worked_example():
    # distances 1 and 2 at tau=1: p0 = 1 / (1 + e^-1)
    table = make_table([(1, 0), (2, 0)])
    p = probs(table, (0, 0), tau=1.0)
    assert p[0] == pytest.approx(0.7310585786300049, rel=1e-12)
    assert p[1] == pytest.approx(0.2689414213699951, rel=1e-12)
    assert p.sum() == pytest.approx(1.0, rel=1e-12)


def test_softmax_equidistant_and_sharp():
    table = make_table([(1, 0), (0, 1)])
    p = probs(table, (0, 0), tau=1.0)
    assert p[0] == pytest.approx(0.5, rel=1e-12)

    # temperature -> 0 concentrates on the nearest entry
    table = make_table([(1, 0), (3, 0)])
    p = probs(table, (0, 0), tau=1e-3)
    assert p[0] == pytest.approx(1.0, abs=1e-12)


def test_probabilities_brute_force_oracle():
    rng = np.random.default_rng(31)
    pts = [(float(x), float(y)) for x, y in rng.uniform(0, 9, size=(6, 2))]
    table = make_table(pts)
    q = (4.5, 4.5)
    tau = 0.7
    p = probs(table, q, tau=tau)

    dists = [math.hypot(x - q[0], y - q[1]) for x, y in pts]
    weights = [math.exp(-d / tau) for d in dists]
    expected = np.array(weights) / sum(weights)
    assert np.allclose(p, expected, rtol=1e-10)


def test_default_tau():
    table = make_table([(1, 0), (2, 0)])  # canonical distance 1
    assert default_tau(table) == pytest.approx(0.1, rel=1e-12)

    # a single object has no pairwise distances; falls back to 1.0
    single = make_table([(1, 0), (2, 0)], object_ids=["obj/0", "obj/0"])
    assert default_tau(single) == 1.0

    # config tau=None resolves through the same default
    p_default = probs(table, (0, 0))
    p_explicit = probs(table, (0, 0), tau=default_tau(table))
    assert np.allclose(p_default, p_explicit, rtol=1e-12)


def test_buffer_policies():
    table = make_table([(1, 0), (5, 0)])
    q_old = coord_video(0, 0)
    q_new = coord_video(6, 0)
    buffer = [q_old, q_new]

    latest = retrieval_probabilities(
        table, buffer, RetrievalConfig(tau=1.0), encoder=coord_encoder
    )
    only_new = retrieval_probabilities(
        table, q_new, RetrievalConfig(tau=1.0), encoder=coord_encoder
    )
    assert np.allclose(latest, only_new, rtol=1e-12)

    agg = retrieval_probabilities(
        table,
        buffer,
        RetrievalConfig(tau=1.0, buffer_policy=BufferPolicy.AGGREGATE),
        encoder=coord_encoder,
    )
    # mean logits: entry0 -(1+5)/2 = -3, entry1 -(5+1)/2 = -3 => uniform
    assert np.allclose(agg, [0.5, 0.5], rtol=1e-12)
    assert not np.allclose(agg, latest, rtol=1e-3)


def test_canonical_is_first_success_per_object():
    # object "a": fail at (0,0), success at (3,0), success at (9,0)
    table = make_table(
        [(0, 0), (3, 0), (9, 0), (7, 7)],
        successes=[False, True, True, True],
        object_ids=["a", "a", "a", "b"],
    )
    assert table.object_ids == ("a", "b")
    assert np.allclose(table.canonical_for("a"), [3.0, 0.0])
    assert np.allclose(table.canonical_for("b"), [7.0, 7.0])
    assert len(table) == 4
    assert [table.entry_object_id(i) for i in range(4)] == ["a", "a", "a", "b"]


def test_build_table_errors():
    with pytest.raises(ValueError):
        build_table(ExperienceDataset(()), IDENTITY_2D, encoder=coord_encoder)
    no_success = ExperienceDataset(
        (ExperienceTuple(coord_video(1, 1), "a", False),)
    )
    with pytest.raises(ValueError):
        build_table(no_success, IDENTITY_2D, encoder=coord_encoder)


def test_empty_buffer_rejected():
    table = make_table([(1, 0), (2, 0)])
    with pytest.raises(ValueError):
        retrieval_probabilities(table, [], RetrievalConfig(tau=1.0), encoder=coord_encoder)
    with pytest.raises(ValueError):
        RetrievalConfig(tau=0.0)
    with pytest.raises(ValueError):
        RetrievalConfig(tau=-1.0)


def test_retrieve_sampling_frequencies():
    table = make_table([(1, 0), (2, 0)])
    p = probs(table, (0, 0), tau=1.0)
    rng = np.random.default_rng(32)
    query = coord_video(0, 0)
    config = RetrievalConfig(tau=1.0)
    n = 10_000
    hits = 0
    for _ in range(n):
        emb = retrieve(table, query, config, rng, encoder=coord_encoder)
        if np.allclose(emb, [1.0, 0.0]):
            hits += 1
        else:
            assert np.allclose(emb, [2.0, 0.0])
    sigma = math.sqrt(n * p[0] * (1 - p[0]))
    assert abs(hits - n * p[0]) < 3 * sigma


def test_retrieve_returns_copy():
    table = make_table([(1, 0), (2, 0)])
    rng = np.random.default_rng(33)
    emb = retrieve(table, coord_video(0, 0), RetrievalConfig(tau=1.0), rng, encoder=coord_encoder)
    emb[:] = -99.0
    assert not np.allclose(table.canonical, -99.0)
    assert table.canonical.min() >= 0.0


def test_embedding_distance():
    assert embedding_distance(DistanceMetric.L2, [0.0, 3.0], [4.0, 0.0]) == 5.0
    assert embedding_distance(DistanceMetric.COSINE, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert embedding_distance(DistanceMetric.COSINE, [2.0, 0.0], [5.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        embedding_distance(DistanceMetric.COSINE, [0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        embedding_distance(DistanceMetric.L2, [1.0], [1.0, 2.0])


def test_table_roundtrip(tmp_path):
    table = make_table(
        [(0, 0), (3, 0), (9, 0), (7, 7)],
        successes=[False, True, True, True],
        object_ids=["a", "a", "a", "b"],
    )
    path = tmp_path / "table.npz"
    save_table(table, path)
    back = load_table(path)
    assert back.object_ids == table.object_ids
    assert np.array_equal(back.canonical, table.canonical)
    assert np.array_equal(back.entry_embeddings, table.entry_embeddings)
    assert np.array_equal(back.entry_object_index, table.entry_object_index)
    assert back.median_canonical_distance == table.median_canonical_distance

    p_a = retrieval_probabilities(table, coord_video(2, 2), RetrievalConfig(tau=1.0), encoder=coord_encoder)
    p_b = retrieval_probabilities(back, coord_video(2, 2), RetrievalConfig(tau=1.0), encoder=coord_encoder)
    assert np.allclose(p_a, p_b, rtol=1e-12)
