from __future__ import annotations

import copy
import json
import logging

import pytest
from hypothesis import given, strategies as st

from abnflow.catalog import (
    DuplicateId,
    MissingFile,
    SchemaViolation,
    UnknownTier,
    base_price,
    catalog_from_dict,
    catalog_to_dict,
    dump_catalog,
    find_amenity,
    load_catalog,
)


def _sight_tour_only(catalog) -> dict:
    return {"sight_tour": catalog_to_dict(catalog)["sight_tour"]}


def _write(tmp_path, payload) -> str:
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_bundled_catalog_has_ten_packages(catalog):
    assert len(catalog) == 10
    assert len({p.name for p in catalog}) == 10
    for pkg in catalog:
        assert len(pkg.bands) == 4
        assert all(pkg.services[c] for c in ("accommodation", "meals", "transportation"))


def test_sight_tour_file_loads_as_single_package(tmp_path, catalog):
    loaded = load_catalog(_write(tmp_path, _sight_tour_only(catalog)))
    assert len(loaded) == 1
    pkg = loaded.packages[0]
    assert pkg.name == "Sight Tour"
    assert len(pkg.services["accommodation"]) == 4
    assert [len(b) for b in pkg.bands] == [5, 5, 5, 5]


def test_sight_tour_matches_reference_prices(sight_tour):
    tiers = {t.name: t.price for c in sight_tour.services.values() for t in c}
    assert tiers["cozy cottage"] == 15000
    assert tiers["fine dining"] == 9000
    assert tiers["private standard"] == 15000
    assert sight_tour.amenity("local guides").price == 3404
    assert sight_tour.amenity("local guides").band == 2


def test_empty_catalog_rejected(tmp_path):
    with pytest.raises(SchemaViolation):
        load_catalog(_write(tmp_path, {}))


def test_zero_amenity_price_rejected(tmp_path, catalog):
    raw = _sight_tour_only(catalog)
    raw["sight_tour"]["options"][1][2][1] = 0
    with pytest.raises(SchemaViolation) as err:
        load_catalog(_write(tmp_path, raw))
    assert "options[1][2]" in str(err.value)


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_catalog(tmp_path / "absent.json")


def test_wrong_band_count_rejected(catalog):
    raw = _sight_tour_only(catalog)
    raw["sight_tour"]["options"] = raw["sight_tour"]["options"][:3]
    with pytest.raises(SchemaViolation):
        catalog_from_dict(raw)


def test_duplicate_amenity_rejected(catalog):
    raw = _sight_tour_only(catalog)
    raw["sight_tour"]["options"][3][0][0] = "Local Guides"
    with pytest.raises(SchemaViolation):
        catalog_from_dict(raw)


def test_duplicate_package_id_rejected(catalog):
    from abnflow.catalog import Catalog

    pkg = catalog.get("sight_tour")
    with pytest.raises(DuplicateId):
        Catalog((pkg, pkg))


def test_band_ordering_violation_only_warns(catalog, caplog):
    raw = _sight_tour_only(catalog)
    raw["sight_tour"]["options"][0], raw["sight_tour"]["options"][3] = (
        raw["sight_tour"]["options"][3],
        raw["sight_tour"]["options"][0],
    )
    with caplog.at_level(logging.WARNING, logger="abnflow.catalog"):
        loaded = catalog_from_dict(raw)
    assert len(loaded) == 1
    assert "not below band" in caplog.text


def test_base_price_examples(sight_tour):
    chosen = {"accommodation": "cozy cottage", "meals": "fine dining", "transportation": "private standard"}
    assert base_price(sight_tour, chosen) == 39000
    cheapest = {"accommodation": "economy suite", "meals": "premium buffet", "transportation": "bus"}
    assert base_price(sight_tour, cheapest) == 12000


def test_base_price_missing_category(sight_tour):
    with pytest.raises(UnknownTier):
        base_price(sight_tour, {"accommodation": "cozy cottage", "transportation": "bus"})


def test_base_price_unknown_tier(sight_tour):
    with pytest.raises(UnknownTier):
        base_price(sight_tour, {"accommodation": "tent", "meals": "fine dining", "transportation": "bus"})


@given(st.data())
def test_base_price_is_order_free_and_positive(catalog, data):
    pkg = data.draw(st.sampled_from(catalog.packages))
    selection = {c: data.draw(st.sampled_from([t.name for t in tiers])) for c, tiers in pkg.services.items()}
    flipped = dict(reversed(list(selection.items())))
    assert base_price(pkg, selection) == base_price(pkg, flipped) > 0


def test_find_amenity_exact_and_case(sight_tour):
    hit = find_amenity(sight_tour, "local guides")
    assert hit.exact and hit.option.price == 3404
    assert find_amenity(sight_tour, "LOCAL Guides").option.name == "local guides"


def test_find_amenity_overlap_tie_goes_to_lowest_band(sight_tour):
    hit = find_amenity(sight_tour, "guides")
    assert not hit.exact
    assert hit.option.name == "history and information guides"


def test_find_amenity_band_preference(sight_tour):
    assert find_amenity(sight_tour, "guides", band=2).option.name == "local guides"


def test_find_amenity_absent_is_none(sight_tour):
    assert find_amenity(sight_tour, "helicopter") is None


def test_round_trip(tmp_path, catalog):
    path = tmp_path / "out.json"
    dump_catalog(catalog, path)
    assert load_catalog(path) == catalog
    assert catalog_to_dict(load_catalog(path)) == catalog_to_dict(catalog)


def test_round_trip_does_not_alias(catalog):
    raw = catalog_to_dict(catalog)
    before = copy.deepcopy(raw)
    catalog_from_dict(raw)
    assert raw == before
