"""
Request pre-processing: geographic K-means and the DTO/priority bunching rules.

Every partition function returns an ordered list of :class:`Cluster` objects
that together contain each input request exactly once. Clusters are ordered
by the earliest DTO start of their members unless the rule says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .geometry import GeoPoint, midpoint

CLUSTER_METHODS = ("kmeans", "dto-bunch", "priority-bunch", "bunch-sort", "none")


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    request_ids: tuple
    centroid: Optional[GeoPoint] = None

    def __post_init__(self):
        if not self.request_ids:
            raise ValueError("a cluster cannot be empty")
        if len(set(self.request_ids)) != len(self.request_ids):
            raise ValueError("duplicate request ids in cluster")

    def __len__(self):
        return len(self.request_ids)


# -- spherical helpers ------------------------------------------------------------------

def _to_xyz(latlon_deg: np.ndarray) -> np.ndarray:
    lat, lon = np.radians(latlon_deg[:, 0]), np.radians(latlon_deg[:, 1])
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)


def _to_latlon(xyz: np.ndarray) -> np.ndarray:
    lat = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
    lon = np.degrees(np.arctan2(xyz[:, 1], xyz[:, 0]))
    return np.stack([lat, lon], axis=1)


def _central_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise central angles (rad) between unit vectors, shape (len(a), len(b))."""
    cross = np.linalg.norm(np.cross(a[:, None, :], b[None, :, :]), axis=2)
    dot = a @ b.T
    return np.arctan2(cross, dot)


def karcher_mean(xyz: np.ndarray, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Point minimising the sum of squared great-circle distances (unit vector)."""
    m = xyz.sum(axis=0)
    norm = np.linalg.norm(m)
    m = m / norm if norm > 0 else xyz[0]
    for _ in range(max_iter):
        cos = np.clip(xyz @ m, -1.0, 1.0)
        theta = np.arccos(cos)
        perp = xyz - cos[:, None] * m
        pn = np.linalg.norm(perp, axis=1)
        scale = np.where(pn > 1e-15, theta / np.where(pn > 1e-15, pn, 1.0), 0.0)
        step = (perp * scale[:, None]).mean(axis=0)
        s = np.linalg.norm(step)
        if s < tol:
            break
        m = math.cos(s) * m + math.sin(s) * step / s
        m = m / np.linalg.norm(m)
    return m


class GreatCircleKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's K-means on the sphere with great-circle distance.

    Parameters
    ----------
    n_clusters : int
    tol_deg : float
        Stop once no centroid moves by more than this many degrees.
    max_iter : int
    random_state : int or None
        Initial centroids are drawn uniformly without replacement from the data.

    Attributes
    ----------
    cluster_centers_ : ndarray (k, 2) of latitude/longitude degrees
    labels_ : ndarray (n,)
    inertia_history_ : list of float
        Sum of squared great-circle distances (rad^2) after each assignment.
    n_iter_ : int
    """

    def __init__(self, n_clusters=8, tol_deg=1e-6, max_iter=300, random_state=None):
        self.n_clusters = n_clusters
        self.tol_deg = tol_deg
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: latitude and longitude in degrees")
        n = X.shape[0]
        if not 1 <= self.n_clusters <= n:
            raise ValueError(f"n_clusters={self.n_clusters} must lie in [1, {n}]")
        rng = check_random_state(self.random_state)
        pts = _to_xyz(X)
        centres = pts[rng.choice(n, size=self.n_clusters, replace=False)].copy()
        history = []
        labels = np.zeros(n, dtype=int)
        for it in range(1, self.max_iter + 1):
            dist = _central_angles(pts, centres)
            labels = dist.argmin(axis=1)
            history.append(float((dist[np.arange(n), labels] ** 2).sum()))
            new = centres.copy()
            for j in range(self.n_clusters):
                members = pts[labels == j]
                if len(members):
                    new[j] = karcher_mean(members)
            empty = [j for j in range(self.n_clusters) if not (labels == j).any()]
            for j in empty:
                # re-seed at the point farthest from its nearest centroid
                near = _central_angles(pts, new).min(axis=1)
                new[j] = pts[int(near.argmax())]
            shift = np.degrees(np.arccos(np.clip((new * centres).sum(axis=1), -1.0, 1.0)))
            centres = new
            if not empty and shift.max() < self.tol_deg:
                break
        dist = _central_angles(pts, centres)
        self.labels_ = dist.argmin(axis=1)
        self.inertia_history_ = history
        self.inertia_ = float((dist[np.arange(n), self.labels_] ** 2).sum())
        self.cluster_centers_ = _to_latlon(centres)
        self.n_iter_ = it
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=float)
        return _central_angles(_to_xyz(X), _to_xyz(self.cluster_centers_)).argmin(axis=1)


# -- partitions over requests -------------------------------------------------------------

def _centre(r) -> GeoPoint:
    return midpoint(r.median_start, r.median_end)


def _by_start(reqs):
    return sorted(reqs, key=lambda r: (r.dto_start_ms, r.dto_end_ms, r.request_id))


def _number(groups, centroids=None) -> List[Cluster]:
    out = []
    order = sorted(range(len(groups)), key=lambda i: (groups[i][0].dto_start_ms, groups[i][0].request_id))
    for cid, i in enumerate(order):
        c = centroids[i] if centroids is not None else None
        out.append(Cluster(cid, tuple(r.request_id for r in groups[i]), c))
    return out


def kmeans(requests: Sequence, k: int, tol_deg: float = 1e-6, max_iter: int = 300,
           seed: int = 0) -> List[Cluster]:
    """Partition requests by the great-circle K-means of their median-line midpoints.

    Clusters come back ordered by earliest DTO start, members in DTO-start
    order. Duplicate locations can leave fewer than ``k`` non-empty clusters.
    """
    if not requests:
        raise ValueError("kmeans needs at least one request")
    pts = np.array([[c.latitude_deg, c.longitude_deg] for c in map(_centre, requests)])
    est = GreatCircleKMeans(k, tol_deg=tol_deg, max_iter=max_iter, random_state=seed).fit(pts)
    groups, cents = [], []
    for j in range(k):
        members = [r for r, lab in zip(requests, est.labels_) if lab == j]
        if members:
            groups.append(_by_start(members))
            lat, lon = est.cluster_centers_[j]
            cents.append(GeoPoint(float(lat), float(lon)))
    return _number(groups, cents)


def _dto_groups(requests):
    groups, hi = [], None
    for r in _by_start(requests):
        if groups and r.dto_start_ms < hi:
            groups[-1].append(r)
            hi = min(hi, r.dto_end_ms)
        else:
            groups.append([r])
            hi = r.dto_end_ms
    return groups


def dto_bunch(requests: Sequence) -> List[Cluster]:
    """Group DTO-sorted requests while they share a common window portion."""
    return _number(_dto_groups(requests))


def priority_bunch(requests: Sequence) -> List[Cluster]:
    """One cluster per present priority, ordered 1..4, members in DTO-start order."""
    out = []
    for p in (1, 2, 3, 4):
        members = _by_start([r for r in requests if r.priority == p])
        if members:
            out.append(Cluster(len(out), tuple(r.request_id for r in members)))
    return out


def bunch_sort(requests: Sequence) -> List[Cluster]:
    """``dto_bunch`` grouping, each cluster sorted by (priority, DTO end)."""
    groups = [sorted(g, key=lambda r: (r.priority, r.dto_end_ms, r.request_id))
              for g in _dto_groups(requests)]
    return [Cluster(i, tuple(r.request_id for r in g)) for i, g in enumerate(groups)]


def single_cluster(requests: Sequence) -> List[Cluster]:
    return _number([_by_start(requests)]) if requests else []


def split_clusters(clusters: Sequence[Cluster], max_size: Optional[int]) -> List[Cluster]:
    """Cut clusters into consecutive chunks of at most ``max_size`` members, keeping order."""
    if not max_size:
        return list(clusters)
    out = []
    for c in clusters:
        for i in range(0, len(c.request_ids), max_size):
            out.append(Cluster(len(out), c.request_ids[i:i + max_size], c.centroid))
    return out


def default_k(n_requests: int, per_cluster: int = 8) -> int:
    return max(1, math.ceil(n_requests / per_cluster))


def make_clusters(method: str, requests: Sequence, k: Optional[int] = None,
                  seed: int = 0) -> List[Cluster]:
    """Dispatch on one of :data:`CLUSTER_METHODS`."""
    if method not in CLUSTER_METHODS:
        raise ValueError(f"unknown clustering method {method!r}")
    if not requests:
        return []
    if method == "kmeans":
        kk = default_k(len(requests)) if k is None else min(k, len(requests))
        return kmeans(requests, kk, seed=seed)
    if method == "dto-bunch":
        return dto_bunch(requests)
    if method == "priority-bunch":
        return priority_bunch(requests)
    if method == "bunch-sort":
        return bunch_sort(requests)
    return single_cluster(requests)
