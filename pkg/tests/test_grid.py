import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popflux.errors import InputError, OutOfExtentError
from popflux.grid import (
    CellId,
    Extent,
    IntervalId,
    Projection,
    SpatialScheme,
    TemporalScheme,
    children_of,
    parent_of,
)


class TestProjection:
    def test_origin(self):
        proj = Projection(0.0)
        assert proj.to_planar(0.0, 0.0) == (0.0, 0.0)

    def test_longitude_symmetry(self):
        proj = Projection(0.0)
        x1, _ = proj.to_planar(12.5, 0.0)
        x2, _ = proj.to_planar(-12.5, 0.0)
        assert x1 == -x2

    def test_berlin_value(self):
        # recomputed from x = R*lon_rad*cos(ref), y = R*lat_rad with R = 6,371,000
        proj = Projection(52.52)
        x, y = proj.to_planar(13.4, 52.52)
        assert x == pytest.approx(906649.1566387576, rel=1e-12)
        assert y == pytest.approx(5839957.547372225, rel=1e-12)

    def test_latitude_out_of_range(self):
        with pytest.raises(InputError):
            Projection(0.0).to_planar(0.0, 90.0)
        with pytest.raises(InputError):
            Projection(0.0).to_planar(0.0, -95.0)

    def test_inverse_round_trip(self, rng):
        proj = Projection(48.0)
        lon = rng.uniform(-179, 179, size=100)
        lat = rng.uniform(-80, 80, size=100)
        x, y = proj.to_planar(lon, lat)
        lon2, lat2 = proj.to_lonlat(x, y)
        np.testing.assert_allclose(lon2, lon, atol=1e-9)
        np.testing.assert_allclose(lat2, lat, atol=1e-9)

    def test_arrays(self):
        proj = Projection(0.0)
        x, y = proj.to_planar(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert x.shape == (2,)


class TestCellOf:
    def test_center_of_origin_cell(self, scheme_1km):
        assert scheme_1km.cell_of(500.0, 500.0) == CellId(0, 0, 0)

    def test_boundary_goes_upper_right(self, scheme_1km):
        assert scheme_1km.cell_of(1000.0, 0.0).ix == 1
        assert scheme_1km.cell_of(0.0, 1000.0).iy == 1

    def test_out_of_extent(self, scheme_1km):
        with pytest.raises(OutOfExtentError):
            scheme_1km.cell_of(-1.0, 0.0)
        with pytest.raises(OutOfExtentError):
            scheme_1km.cell_of(20_000.0, 0.0)  # extent is half-open

    def test_random_points_contained(self, scheme_1km, rng):
        for _ in range(1000):
            x = rng.uniform(0, 20_000)
            y = rng.uniform(0, 20_000)
            c = scheme_1km.cell_of(x, y)
            x0, y0, x1, y1 = scheme_1km.cell_rect(c)
            assert x0 <= x < x1 and y0 <= y < y1


class TestHierarchy:
    def test_children_example(self):
        kids = children_of(CellId(0, 0, 0))
        assert kids == [CellId(0, 0, 1), CellId(1, 0, 1), CellId(0, 1, 1), CellId(1, 1, 1)]

    def test_parent_round_trip_random(self, rng):
        for _ in range(100):
            c = CellId(int(rng.integers(-50, 50)), int(rng.integers(-50, 50)), int(rng.integers(0, 5)))
            for k in children_of(c):
                assert parent_of(k) == c

    def test_children_tile_parent_area(self, scheme_1km):
        parent = CellId(3, 2, 0)
        px0, py0, px1, py1 = scheme_1km.cell_rect(parent)
        parent_area = (px1 - px0) * (py1 - py0)
        total = 0.0
        for k in children_of(parent):
            x0, y0, x1, y1 = scheme_1km.cell_rect(k)
            assert px0 <= x0 and x1 <= px1 and py0 <= y0 and y1 <= py1
            total += (x1 - x0) * (y1 - y0)
        assert total == pytest.approx(parent_area, rel=1e-12)

    def test_parent_of_level0_raises(self):
        with pytest.raises(InputError):
            parent_of(CellId(0, 0, 0))

    @given(
        x=st.floats(min_value=0, max_value=19_999.999),
        y=st.floats(min_value=0, max_value=19_999.999),
        level=st.integers(min_value=0, max_value=3),
    )
    @settings(max_examples=200, deadline=None)
    def test_hierarchical_consistency(self, x, y, level):
        ss = SpatialScheme(0.0, 0.0, 1000.0, 0, Extent(0.0, 0.0, 20_000.0, 20_000.0))
        coarse = ss.at_level(level).cell_of(x, y)
        fine = ss.at_level(level + 1).cell_of(x, y)
        assert parent_of(fine) == coarse


class TestScheme:
    def test_cells_enumeration(self, scheme_small):
        cells = list(scheme_small.cells())
        assert len(cells) == scheme_small.n_cells == 64
        assert len(set(cells)) == 64

    def test_at_level_cell_size(self, scheme_1km):
        assert scheme_1km.at_level(2).cell_size == 250.0

    def test_misaligned_extent_rejected(self):
        with pytest.raises(InputError):
            SpatialScheme(0.0, 0.0, 1000.0, 0, Extent(0.0, 0.0, 20_500.0, 20_000.0))

    def test_polygon_rect_example(self, scheme_1km):
        poly = scheme_1km.cell_polygon(CellId(0, 0, 0))
        assert poly == [(0.0, 0.0), (1000.0, 0.0), (1000.0, 1000.0), (0.0, 1000.0)]

    def test_polygon_area_is_cell_size_squared(self, scheme_1km):
        x0, y0, x1, y1 = scheme_1km.cell_rect(CellId(7, 11, 0))
        assert (x1 - x0) * (y1 - y0) == pytest.approx(1000.0 ** 2, rel=1e-12)

    def test_lonlat_ring_closed(self, scheme_1km):
        ring = scheme_1km.cell_lonlat_ring(CellId(1, 1, 0))
        assert len(ring) == 5
        assert ring[0] == ring[-1]


class TestTemporal:
    def test_epoch_maps_to_zero(self, hourly):
        assert hourly.interval_of(0) == IntervalId(0)

    def test_boundary_goes_right(self, hourly):
        assert hourly.interval_of(3_600_000) == IntervalId(1)
        assert hourly.interval_of(3_599_999) == IntervalId(0)

    def test_random_containment(self, hourly, rng):
        for _ in range(1000):
            ts = int(rng.integers(-10**12, 10**12))
            idx = hourly.interval_of(ts).index
            start = hourly.start_ms(idx)
            assert start <= ts < start + hourly.interval_len_ms

    def test_negative_times(self, hourly):
        assert hourly.interval_of(-1) == IntervalId(-1)

    def test_start_exact(self):
        tsch = TemporalScheme(1_554_076_800_000, 1800.0)
        assert tsch.start_ms(IntervalId(3)) == 1_554_076_800_000 + 3 * 1_800_000

    def test_merged(self, hourly):
        m = hourly.merged(2)
        assert m.interval_len_s == 7200.0
        with pytest.raises(InputError):
            hourly.merged(1)

    @given(ts=st.integers(min_value=-(10 ** 13), max_value=10 ** 13))
    @settings(max_examples=200, deadline=None)
    def test_contiguity(self, ts):
        tsch = TemporalScheme(123_000, 1800.0)
        idx = tsch.interval_of(ts).index
        assert tsch.start_ms(idx) <= ts < tsch.start_ms(idx + 1)

    def test_bad_interval_len(self):
        with pytest.raises(InputError):
            TemporalScheme(0, 0.0)
