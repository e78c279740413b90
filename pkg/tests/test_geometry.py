import math

import pytest

from epitrace.errors import DegenerateGeometryError, InsufficientReadingsError
from epitrace.geometry import triangulate


def grid_minimizer(readings, span, resolution):
    """Brute-force reference: scan a grid for the least-squares range fit."""
    best, best_cost = None, math.inf
    steps = int(span / resolution)
    for ix in range(-steps, steps + 1):
        for iy in range(-steps, steps + 1):
            x, y = ix * resolution, iy * resolution
            cost = sum((math.dist((x, y), c) - d) ** 2 for c, d in readings)
            if cost < best_cost:
                best, best_cost = (x, y), cost
    return best


class TestTriangulate:
    def test_exact_fix_from_three_stations(self):
        # Distances from (3, 4), computed with the Euclidean formula.
        readings = [((0.0, 0.0), 5.0), ((10.0, 0.0), 8.06225774829855), ((0.0, 10.0), 6.708203932499369)]
        point, residual = triangulate(readings)
        assert point == pytest.approx((3.0, 4.0), abs=1e-6)
        assert residual < 1e-6

    def test_point_at_a_centroid(self):
        readings = [((2.0, 2.0), 0.0), ((10.0, 0.0), math.dist((10, 0), (2, 2))), ((0.0, 10.0), math.dist((0, 10), (2, 2)))]
        point, residual = triangulate(readings)
        assert point == pytest.approx((2.0, 2.0), abs=1e-6)
        assert residual < 1e-6

    def test_noisy_distances_match_grid_search(self):
        true = (3.0, 4.0)
        noise = 1.0
        readings = [((0.0, 0.0), math.dist((0, 0), true) + noise),
                    ((10.0, 0.0), math.dist((10, 0), true) + noise),
                    ((0.0, 10.0), math.dist((0, 10), true) + noise)]
        point, residual = triangulate(readings)
        assert residual > 0.0
        assert math.dist(point, true) <= noise + 0.5
        # Against the brute-force grid minimizer at 0.01 m resolution.
        reference = grid_minimizer(readings, span=8.0, resolution=0.01)
        assert math.dist(point, reference) <= 0.02

    def test_four_stations_overdetermined(self):
        true = (5.5, -2.25)
        centroids = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (12.0, 9.0)]
        readings = [(c, math.dist(c, true)) for c in centroids]
        point, residual = triangulate(readings)
        assert point == pytest.approx(true, abs=1e-6)
        assert residual < 1e-6

    def test_too_few_readings(self):
        with pytest.raises(InsufficientReadingsError):
            triangulate([((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0)])

    def test_collinear_centroids(self):
        readings = [((0.0, 0.0), 1.0), ((5.0, 0.0), 2.0), ((10.0, 0.0), 3.0)]
        with pytest.raises(DegenerateGeometryError):
            triangulate(readings)
