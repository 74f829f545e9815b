import numpy as np
import pytest

from soilmap.geo import GeoTransform
from soilmap.observations import (
    SOIL_ORDERS,
    FieldObservation,
    RegionPartition,
    load_observations,
    save_observations,
)


class TestFieldObservation:
    def test_needs_some_label(self):
        with pytest.raises(ValueError, match="at least one"):
            FieldObservation(x=0, y=0)

    def test_label_ranges(self):
        with pytest.raises(ValueError):
            FieldObservation(x=0, y=0, nsp_label=2)
        with pytest.raises(ValueError):
            FieldObservation(x=0, y=0, tax_label=7)
        FieldObservation(x=0, y=0, nsp_label=1, tax_label=6)

    def test_csv_round_trip(self, tmp_path):
        obs = [
            FieldObservation(x=1.5, y=2.25, nsp_label=1, tax_label=2,
                             date="2001-07-14", source="survey_a"),
            FieldObservation(x=-3.0, y=9.0, nsp_label=0, tax_label=None,
                             date="1999-01-02", source="survey_b"),
            FieldObservation(x=0.1, y=0.2, nsp_label=None, tax_label=6,
                             date="2020-06-30", source="survey_c"),
        ]
        path = tmp_path / "obs.csv"
        save_observations(obs, path, header_comment="seed=1")
        back = load_observations(path)
        assert back == obs
        text = path.read_text()
        assert text.splitlines()[1] == "x,y,nsp,tax,date,source"
        assert "Gelisols" in text  # labels stored by order name


class TestRegionPartition:
    def test_lookup_and_round_trip(self, tmp_path):
        labels = np.array([[0, 0, 1], [2, 2, 1]], dtype=np.int32)
        t = GeoTransform(0.0, 20.0, 10.0, -10.0)
        part = RegionPartition("zones", labels, t,
                               {0: "low", 1: "mid", 2: "high"})
        ids = part.region_of([5.0, 25.0, 5.0, -100.0], [15.0, 15.0, 5.0, 15.0])
        np.testing.assert_array_equal(ids, [0, 1, 2, -1])

        part.save(tmp_path / "zones.rast", tmp_path / "zones.csv")
        back = RegionPartition.load(tmp_path / "zones.rast", tmp_path / "zones.csv")
        np.testing.assert_array_equal(back.labels, labels)
        assert back.region_names == part.region_names
        assert back.name == "zones"

    def test_every_point_gets_one_region(self, small_world):
        stack, obs, part = small_world
        xy = np.array([[o.x, o.y] for o in obs])
        ids = part.region_of(xy[:, 0], xy[:, 1])
        assert (ids >= 0).all()
        assert set(np.unique(ids)) <= set(part.region_ids)
