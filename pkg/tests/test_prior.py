import io

import numpy as np
import pytest

from popflux.errors import InputError, SchemeMismatchError
from popflux.grid import CellId, Extent, SpatialScheme
from popflux.prior import (
    SourceZone,
    StaticPopulation,
    coarsen,
    disaggregate,
    load_static_population,
    refine,
)

from oracles import rasterized_shares

CENSUS_HEADER = "cell_ix,cell_iy,level,population\n"


def _load(text, scheme):
    return load_static_population(io.StringIO(text), scheme)


class TestLoad:
    def test_two_rows(self, scheme_1km):
        pop, rejects = _load(CENSUS_HEADER + "0,0,0,100\n1,0,0,300\n", scheme_1km)
        assert pop.total == 400.0
        assert pop.value(CellId(0, 0, 0)) == 100.0
        assert pop.value(CellId(5, 5, 0)) == 0.0
        assert rejects == []

    def test_empty_body(self, scheme_1km):
        pop, _ = _load(CENSUS_HEADER, scheme_1km)
        assert pop.total == 0.0

    def test_duplicate_cell_fatal(self, scheme_1km):
        with pytest.raises(InputError, match="duplicate"):
            _load(CENSUS_HEADER + "0,0,0,1\n0,0,0,2\n", scheme_1km)

    def test_negative_population_rejected(self, scheme_1km):
        pop, rejects = _load(CENSUS_HEADER + "0,0,0,-5\n1,0,0,7\n", scheme_1km)
        assert pop.total == 7.0
        assert len(rejects) == 1 and "negative" in rejects[0].reason

    def test_level_mismatch_fatal(self, scheme_1km):
        with pytest.raises(SchemeMismatchError):
            _load(CENSUS_HEADER + "0,0,2,10\n", scheme_1km)

    def test_out_of_extent_rejected(self, scheme_1km):
        pop, rejects = _load(CENSUS_HEADER + "999,0,0,10\n", scheme_1km)
        assert pop.total == 0.0
        assert len(rejects) == 1 and "extent" in rejects[0].reason

    def test_bad_header_fatal(self, scheme_1km):
        with pytest.raises(InputError):
            _load("x,y,l,p\n", scheme_1km)

    def test_country_scale_fixture(self):
        # 361,478 rows, the size of a 1 km national census grid
        n_target = 361_478
        nx = 602  # 602 * 601 = 361,802 cells >= target
        ny = 601
        scheme = SpatialScheme(0.0, 0.0, 1000.0, 0, Extent(0.0, 0.0, nx * 1000.0, ny * 1000.0))
        rng = np.random.default_rng(1)
        pops = rng.integers(0, 500, size=n_target)
        buf = io.StringIO()
        buf.write(CENSUS_HEADER)
        k = 0
        for iy in range(ny):
            for ix in range(nx):
                if k >= n_target:
                    break
                buf.write(f"{ix},{iy},0,{pops[k]}\n")
                k += 1
        buf.seek(0)
        pop, rejects = load_static_population(buf, scheme)
        assert rejects == []
        assert len(pop.values) == n_target
        # integer populations make the column-sum oracle exact
        assert pop.total == float(pops.sum())


def _zone_rect(x0, y0, x1, y1, population):
    return SourceZone(population=population, polygon=((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


class TestDisaggregate:
    def test_identity_square(self, scheme_1km):
        out = disaggregate([_zone_rect(3000, 4000, 4000, 5000, 100.0)], scheme_1km)
        assert out.value(CellId(3, 4, 0)) == pytest.approx(100.0, rel=1e-12)
        assert out.total == pytest.approx(100.0, rel=1e-12)

    def test_four_cell_symmetry(self, scheme_1km):
        out = disaggregate([_zone_rect(500, 500, 1500, 1500, 100.0)], scheme_1km)
        for c in [(0, 0), (1, 0), (0, 1), (1, 1)]:
            assert out.value(CellId(c[0], c[1], 0)) == pytest.approx(25.0, rel=1e-12)

    def test_random_rectangles_vs_raster_oracle(self, scheme_1km, rng):
        for _ in range(5):
            x0 = rng.uniform(500, 15_000)
            y0 = rng.uniform(500, 15_000)
            w = rng.uniform(1200, 3500)
            h = rng.uniform(1200, 3500)
            ring = ((x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h))
            out = disaggregate([SourceZone(population=1000.0, polygon=ring)], scheme_1km)
            shares = rasterized_shares(ring, scheme_1km, step=10.0)
            for (ix, iy), share in shares.items():
                got = out.value(CellId(ix, iy, 0)) / 1000.0
                assert abs(got - share) < 0.01

    def test_triangle_vs_raster_oracle(self, scheme_1km):
        ring = ((1100.0, 1100.0), (4900.0, 1300.0), (2100.0, 4700.0))
        out = disaggregate([SourceZone(population=600.0, polygon=ring)], scheme_1km)
        assert out.total == pytest.approx(600.0, rel=1e-9)
        shares = rasterized_shares(ring, scheme_1km, step=10.0)
        for (ix, iy), share in shares.items():
            got = out.value(CellId(ix, iy, 0)) / 600.0
            assert abs(got - share) < 0.01

    def test_conservation_many_zones(self, scheme_1km, rng):
        zones = []
        for _ in range(25):
            x0 = rng.uniform(0, 18_000)
            y0 = rng.uniform(0, 18_000)
            zones.append(_zone_rect(x0, y0, x0 + rng.uniform(100, 2000), y0 + rng.uniform(100, 2000), rng.uniform(0, 500)))
        out = disaggregate(zones, scheme_1km)
        assert out.total == pytest.approx(sum(z.population for z in zones), rel=1e-9)
        assert all(v >= 0 for v in out.values.values())

    def test_cell_zone_needs_source_scheme(self, scheme_1km):
        zone = SourceZone(population=10.0, cell=CellId(0, 0, 0))
        with pytest.raises(InputError):
            disaggregate([zone], scheme_1km)

    def test_cell_zone_disaggregates(self, scheme_1km):
        # one coarse cell spread over its 4 children
        coarse = scheme_1km
        fine = scheme_1km.at_level(1)
        zone = SourceZone(population=100.0, cell=CellId(1, 1, 0))
        out = disaggregate([zone], fine, source_scheme=coarse)
        for ch in [(2, 2), (3, 2), (2, 3), (3, 3)]:
            assert out.value(CellId(ch[0], ch[1], 1)) == pytest.approx(25.0, rel=1e-12)

    def test_degenerate_polygon_rejected(self):
        with pytest.raises(InputError):
            SourceZone(population=5.0, polygon=((0, 0), (1, 1), (2, 2)))
        with pytest.raises(InputError):
            SourceZone(population=5.0, polygon=((0, 0), (1, 1)))

    def test_zone_outside_extent_errors(self, scheme_1km):
        with pytest.raises(InputError, match="overlap"):
            disaggregate([_zone_rect(30_000, 30_000, 31_000, 31_000, 10.0)], scheme_1km)

    def test_proposition3_coarsen_consistency(self, scheme_1km, rng):
        # disaggregate to level L then coarsen == disaggregate directly to L-1
        fine = scheme_1km.at_level(1)
        zones = []
        for _ in range(10):
            x0 = rng.uniform(0, 16_000)
            y0 = rng.uniform(0, 16_000)
            zones.append(_zone_rect(x0, y0, x0 + rng.uniform(300, 3000), y0 + rng.uniform(300, 3000), rng.uniform(1, 100)))
        via_fine = coarsen(disaggregate(zones, fine))
        direct = disaggregate(zones, scheme_1km)
        cells = set(via_fine.values) | set(direct.values)
        for c in cells:
            assert via_fine.value(c) == pytest.approx(direct.value(c), rel=1e-9, abs=1e-12)


class TestCoarsenRefine:
    def test_coarsen_sums_children(self, scheme_1km):
        fine = scheme_1km.at_level(1)
        pop = StaticPopulation(
            {CellId(0, 0, 1): 1.0, CellId(1, 0, 1): 2.0, CellId(0, 1, 1): 3.0, CellId(1, 1, 1): 4.0},
            fine,
        )
        c = coarsen(pop)
        assert c.values == {CellId(0, 0, 0): 10.0}
        assert c.total == 10.0

    def test_coarsen_level0_raises(self, scheme_1km):
        with pytest.raises(InputError):
            coarsen(StaticPopulation({}, scheme_1km))

    def test_refine_then_coarsen_round_trip(self, scheme_1km):
        pop = StaticPopulation({CellId(2, 3, 0): 40.0, CellId(4, 4, 0): 4.0}, scheme_1km)
        back = coarsen(refine(pop))
        for c, v in pop.values.items():
            assert back.value(c) == pytest.approx(v, rel=1e-12)

    def test_negative_population_rejected(self, scheme_1km):
        with pytest.raises(InputError):
            StaticPopulation({CellId(0, 0, 0): -1.0}, scheme_1km)
