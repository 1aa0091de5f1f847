import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitsched.clustering import (
    CLUSTER_METHODS, GreatCircleKMeans, bunch_sort, dto_bunch, karcher_mean, kmeans, make_clusters,
    priority_bunch, split_clusters,
)
from orbitsched.core import AcquisitionRequest
from orbitsched.geometry import GeoPoint, destination

from conftest import tiny_instance


def _req(i, start, end, prio=4, lat=0.0, lon=0.0):
    p = GeoPoint(lat, lon)
    return AcquisitionRequest(f"r{i:03d}", prio, start, end, p, p, "S")


windows = st.lists(st.tuples(st.integers(0, 10_000), st.integers(1, 3000), st.integers(1, 4)),
                   min_size=1, max_size=25)


def _reqs(ws):
    return [_req(i, s, s + d, p) for i, (s, d, p) in enumerate(ws)]


def _ids(clusters):
    return [i for c in clusters for i in c.request_ids]


def _sph_dist(a, b):
    a, b = np.radians(a), np.radians(b)
    h = np.sin((b[0] - a[0]) / 2) ** 2 + np.cos(a[0]) * np.cos(b[0]) * np.sin((b[1] - a[1]) / 2) ** 2
    return 2 * np.arcsin(np.sqrt(np.clip(h, 0, 1)))


def _blob(rng, lat, lon, n, spread_km=30.0):
    c = GeoPoint(lat, lon)
    return [destination(c, rng.uniform(0, 360), rng.uniform(0, spread_km)) for _ in range(n)]


# -- k-means -------------------------------------------------------------------------------

def test_two_separable_groups():
    rng = np.random.default_rng(1)
    pts = _blob(rng, 0, 0, 50) + _blob(rng, 10, 10, 50)
    reqs = [_req(i, i, i + 10, lat=p.latitude_deg, lon=p.longitude_deg) for i, p in enumerate(pts)]
    clusters = kmeans(reqs, 2, seed=0)
    assert sorted(len(c) for c in clusters) == [50, 50]
    for c in clusters:
        members = np.array([[pts[int(i[1:])].latitude_deg, pts[int(i[1:])].longitude_deg] for i in c.request_ids])
        mean = members.mean(axis=0)
        assert abs(c.centroid.latitude_deg - mean[0]) < 0.1 and abs(c.centroid.longitude_deg - mean[1]) < 0.1


def test_single_cluster_centroid_is_spherical_mean():
    rng = np.random.default_rng(2)
    pts = np.array([[p.latitude_deg, p.longitude_deg] for p in _blob(rng, 40, -70, 30, 800)])
    est = GreatCircleKMeans(1, random_state=0).fit(pts)
    c = est.cluster_centers_[0]
    # independent check: the centroid minimises the sum of squared great-circle distances
    f = lambda q: float((_sph_dist(q, pts.T) ** 2).sum())  # noqa: E731
    base = f(c)
    for dlat, dlon in [(1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)]:
        assert f(c + np.array([dlat, dlon])) >= base - 1e-12


def test_random_assignment_is_a_fixed_point():
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(-60, 60, 200), rng.uniform(-180, 180, 200)])
    est = GreatCircleKMeans(5, random_state=4).fit(pts)
    d = np.array([[_sph_dist(p, c) for c in est.cluster_centers_] for p in pts])
    assert (d.argmin(axis=1) == est.labels_).all()
    assert (est.predict(pts) == est.labels_).all()


def test_inertia_never_increases():
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(-50, 50, 300), rng.uniform(-100, 100, 300)])
    for seed in range(5):
        h = GreatCircleKMeans(8, random_state=seed).fit(pts).inertia_history_
        assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_kmeans_rejects_bad_k():
    with pytest.raises(ValueError):
        GreatCircleKMeans(5).fit(np.zeros((3, 2)))


def test_karcher_mean_of_symmetric_pair():
    a = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(karcher_mean(a), [math.sqrt(0.5), math.sqrt(0.5), 0.0])


# -- bunching ------------------------------------------------------------------------------

def test_disjoint_windows_give_singletons():
    reqs = [_req(i, 100 * i, 100 * i + 50) for i in range(6)]
    assert [len(c) for c in dto_bunch(reqs)] == [1] * 6


def test_identical_windows_give_one_cluster():
    reqs = [_req(i, 0, 500, p) for i, p in enumerate([3, 1, 4, 2])]
    assert len(dto_bunch(reqs)) == 1


@given(windows)
def test_bunches_share_a_common_window(ws):
    reqs = _reqs(ws)
    by_id = {r.request_id: r for r in reqs}
    for c in dto_bunch(reqs):
        members = [by_id[i] for i in c.request_ids]
        for a in members:
            for b in members:
                assert max(a.dto_start_ms, b.dto_start_ms) < min(a.dto_end_ms, b.dto_end_ms)


@given(windows)
def test_bunches_are_intervals_in_start_order(ws):
    reqs = _reqs(ws)
    order = [r.request_id for r in sorted(reqs, key=lambda r: (r.dto_start_ms, r.dto_end_ms, r.request_id))]
    assert _ids(dto_bunch(reqs)) == order


def test_priority_bunch_cases():
    assert len(priority_bunch([_req(i, i, i + 5, 2) for i in range(4)])) == 1
    reqs = [_req(i, 10 - i, 20, p) for i, p in enumerate([3, 1, 4, 2])]
    assert [len(c) for c in priority_bunch(reqs)] == [1, 1, 1, 1]
    by_id = {r.request_id: r for r in reqs}
    assert [by_id[c.request_ids[0]].priority for c in priority_bunch(reqs)] == [1, 2, 3, 4]


def test_bunch_sort_orders_within_cluster():
    reqs = [_req(0, 0, 900, 2), _req(1, 10, 500, 2), _req(2, 20, 800, 1), _req(3, 30, 700, 3)]
    (c,) = bunch_sort(reqs)
    assert c.request_ids == ("r002", "r001", "r000", "r003")


@given(windows)
def test_bunch_sort_groups_like_dto_bunch(ws):
    reqs = _reqs(ws)
    a = [set(c.request_ids) for c in dto_bunch(reqs)]
    b = [set(c.request_ids) for c in bunch_sort(reqs)]
    assert a == b


@given(windows, st.sampled_from(CLUSTER_METHODS), st.integers(1, 6))
def test_every_method_is_a_bijection(ws, method, k):
    reqs = _reqs(ws)
    ids = _ids(make_clusters(method, reqs, k=k))
    assert Counter(ids) == Counter(r.request_id for r in reqs)


@given(windows, st.integers(1, 5))
def test_split_keeps_order(ws, size):
    clusters = dto_bunch(_reqs(ws))
    parts = split_clusters(clusters, size)
    assert _ids(parts) == _ids(clusters)
    assert all(len(c) <= size for c in parts)


def test_kmeans_on_generated_requests():
    inst = tiny_instance(1, 40, 6, 8, 7200)
    clusters = make_clusters("kmeans", inst.requests, seed=0)
    assert len(clusters) <= 5
    assert sorted(_ids(clusters)) == sorted(r.request_id for r in inst.requests)


def test_unknown_method():
    with pytest.raises(ValueError):
        make_clusters("spectral", [_req(0, 0, 1)])
