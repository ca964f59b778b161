import io
import json

import pytest

from popflux import __version__, fileio
from popflux.errors import InputError, SchemeMismatchError
from popflux.grid import CellId, IntervalId, Projection
from popflux.prior import disaggregate
from popflux.transform import PseudoCountField


class TestVersionHeader:
    def test_format(self):
        line = fileio.version_line()
        assert line == f"#popflux-{__version__},schema-{fileio.SCHEMA_VERSION}"

    def test_all_writers_emit_it(self, scheme_1km, hourly):
        buf = io.StringIO()
        fileio.write_counts(buf, PseudoCountField({}, scheme_1km, hourly))
        assert buf.getvalue().splitlines()[0] == fileio.version_line()


class TestCountsRoundTrip:
    def test_values_survive_to_nine_digits(self, scheme_1km, hourly, rng):
        entries = {
            (CellId(int(rng.integers(0, 20)), int(rng.integers(0, 20)), 0), IntervalId(t)): float(v)
            for t, v in enumerate(rng.uniform(0, 100, size=50))
        }
        field = PseudoCountField(entries, scheme_1km, hourly)
        buf = io.StringIO()
        fileio.write_counts(buf, field)
        buf.seek(0)
        back = fileio.read_counts(buf, scheme_1km, hourly)
        assert set(back.entries) == set(field.entries)
        for k, v in field.entries.items():
            assert back.entries[k] == pytest.approx(v, rel=1e-8)

    def test_level_mismatch_raises(self, scheme_1km, hourly):
        text = fileio.version_line() + "\ncell_ix,cell_iy,level,interval_index,count_device_hours\n0,0,3,0,1\n"
        with pytest.raises(SchemeMismatchError):
            fileio.read_counts(io.StringIO(text), scheme_1km, hourly)

    def test_bad_header_raises(self, scheme_1km, hourly):
        with pytest.raises(InputError):
            fileio.read_counts(io.StringIO("a,b\n"), scheme_1km, hourly)

    def test_rows_sorted_canonically(self, scheme_1km, hourly):
        entries = {
            (CellId(1, 1, 0), IntervalId(1)): 1.0,
            (CellId(0, 0, 0), IntervalId(0)): 2.0,
            (CellId(1, 0, 0), IntervalId(0)): 3.0,
        }
        buf = io.StringIO()
        fileio.write_counts(buf, PseudoCountField(entries, scheme_1km, hourly))
        data = [l for l in buf.getvalue().splitlines() if not l.startswith(("#", "cell_ix"))]
        assert data == ["0,0,0,0,2", "1,0,0,0,3", "1,1,0,1,1"]


class TestGeoJsonZones:
    def _doc(self, features):
        return json.dumps({"type": "FeatureCollection", "features": features})

    def _square(self, lon0, lat0, dlon, dlat, population):
        ring = [
            [lon0, lat0],
            [lon0 + dlon, lat0],
            [lon0 + dlon, lat0 + dlat],
            [lon0, lat0 + dlat],
            [lon0, lat0],
        ]
        return {
            "type": "Feature",
            "properties": {"population": population},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        }

    def test_polygon_zone_loads_and_disaggregates(self, scheme_1km):
        proj = scheme_1km.projection
        lon0, lat0 = proj.to_lonlat(3000.0, 4000.0)
        lon1, lat1 = proj.to_lonlat(4000.0, 5000.0)
        doc = self._doc([self._square(lon0, lat0, lon1 - lon0, lat1 - lat0, 250.0)])
        zones = fileio.load_geojson_zones(io.StringIO(doc), proj)
        assert len(zones) == 1
        pop = disaggregate(zones, scheme_1km)
        assert pop.total == pytest.approx(250.0, rel=1e-9)
        assert pop.value(CellId(3, 4, 0)) == pytest.approx(250.0, rel=1e-6)

    def test_multipolygon_splits_by_area(self):
        proj = Projection(0.0)
        ring1 = [[0, 0], [0.01, 0], [0.01, 0.01], [0, 0.01], [0, 0]]
        ring2 = [[0.1, 0], [0.12, 0], [0.12, 0.02], [0.1, 0.02], [0.1, 0]]
        feat = {
            "type": "Feature",
            "properties": {"population": 100.0},
            "geometry": {"type": "MultiPolygon", "coordinates": [[ring1], [ring2]]},
        }
        zones = fileio.load_geojson_zones(io.StringIO(self._doc([feat])), proj)
        assert len(zones) == 2
        assert sum(z.population for z in zones) == pytest.approx(100.0, rel=1e-9)
        assert zones[1].population == pytest.approx(80.0, rel=1e-6)  # 4x the area

    def test_missing_population_rejected(self):
        feat = self._square(0, 0, 0.01, 0.01, 1.0)
        del feat["properties"]["population"]
        with pytest.raises(InputError, match="population"):
            fileio.load_geojson_zones(io.StringIO(self._doc([feat])), Projection(0.0))

    def test_holes_rejected(self):
        feat = self._square(0, 0, 0.1, 0.1, 1.0)
        inner = [[0.04, 0.04], [0.06, 0.04], [0.06, 0.06], [0.04, 0.06], [0.04, 0.04]]
        feat["geometry"]["coordinates"].append(inner)
        with pytest.raises(InputError, match="holes"):
            fileio.load_geojson_zones(io.StringIO(self._doc([feat])), Projection(0.0))

    def test_non_collection_rejected(self):
        with pytest.raises(InputError):
            fileio.load_geojson_zones(io.StringIO('{"type": "Feature"}'), Projection(0.0))


class TestGeoJsonCensusThroughCli:
    def test_estimate_accepts_geojson_census(self, tmp_path):
        from popflux import cli

        cfgp = tmp_path / "run.cfg"
        cfgp.write_text("cell_size_m = 1000\nextent_w_m = 2000\nextent_h_m = 1000\n")
        with open(cfgp) as fh:
            cfg = fileio.parse_config(fh)
        ss, tsch = cfg.spatial_scheme(), cfg.temporal_scheme()
        counts = PseudoCountField({(CellId(0, 0, 0), IntervalId(0)): 1.0}, ss, tsch)
        with open(tmp_path / "cnt.csv", "w") as fh:
            fileio.write_counts(fh, counts)
        proj = ss.projection
        lon0, lat0 = proj.to_lonlat(0.0, 0.0)
        lon1, lat1 = proj.to_lonlat(2000.0, 1000.0)
        ring = [[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"population": 500.0},
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                }
            ],
        }
        (tmp_path / "census.geojson").write_text(json.dumps(doc))
        rc = cli.main(
            [
                "estimate",
                "--config",
                str(cfgp),
                str(tmp_path / "cnt.csv"),
                str(tmp_path / "census.geojson"),
                "--out",
                str(tmp_path / "est.csv"),
            ]
        )
        assert rc == 0
        with open(tmp_path / "est.csv") as fh:
            rows = fileio.read_estimates(fh)
        assert sum(pop for _, _, _, pop in rows) == pytest.approx(500.0, rel=1e-6)
