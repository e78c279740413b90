"""Multilateration: fix a phone's position from several station range readings."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError, InsufficientReadingsError

Point = tuple[float, float]

# Collinearity tolerance on the normalized triangle area of the centroid spread.
_COLLINEAR_EPS = 1e-9


def triangulate(readings: Sequence[tuple[Point, float]]) -> tuple[Point, float]:
    """Least-squares position estimate from >= 3 (station centroid, distance) readings.

    Subtracting the squared-range equation of the last station from the others
    linearizes the system; its least-squares solution seeds a short
    Gauss-Newton refinement of the actual range residuals. Returns the
    estimated point and the root-mean-square range residual over all readings.
    """
    if len(readings) < 3:
        raise InsufficientReadingsError(f"need >= 3 readings, got {len(readings)}")
    centroids = np.array([c for c, _ in readings], dtype=float)
    dists = np.array([d for _, d in readings], dtype=float)
    if _collinear(centroids):
        raise DegenerateGeometryError("station centroids are collinear")

    ref = centroids[-1]
    d_ref = dists[-1]
    a = 2.0 * (centroids[:-1] - ref)
    b = (
        np.sum(centroids[:-1] ** 2, axis=1)
        - np.sum(ref**2)
        - dists[:-1] ** 2
        + d_ref**2
    )
    solution, *_ = np.linalg.lstsq(a, b, rcond=None)
    solution = _gauss_newton(centroids, dists, solution)
    point = (float(solution[0]), float(solution[1]))
    residual = math.sqrt(float(np.mean((np.linalg.norm(centroids - solution, axis=1) - dists) ** 2)))
    return point, residual


def _gauss_newton(centroids: np.ndarray, dists: np.ndarray, x0: np.ndarray, iterations: int = 25) -> np.ndarray:
    x = x0.copy()
    for _ in range(iterations):
        delta = x - centroids
        ranges = np.linalg.norm(delta, axis=1)
        safe = np.maximum(ranges, 1e-12)
        jac = delta / safe[:, None]
        res = ranges - dists
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        x = x + step
        if np.linalg.norm(step) < 1e-12:
            break
    return x


def _collinear(centroids: np.ndarray) -> bool:
    base = centroids[0]
    rel = centroids[1:] - base
    spread = np.linalg.norm(rel, axis=1).max()
    if spread == 0.0:
        return True
    for i in range(len(rel)):
        for j in range(i + 1, len(rel)):
            cross = rel[i, 0] * rel[j, 1] - rel[i, 1] * rel[j, 0]
            if abs(cross) / (spread * spread) > _COLLINEAR_EPS:
                return False
    return True
