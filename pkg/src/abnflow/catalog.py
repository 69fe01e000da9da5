"""Travel package catalog: the priced substrate every negotiation is grounded in.

The on-disk format is a JSON object keyed by package id::

    {"sight_tour": {"Travel_Package_Name": ..., "Description": ...,
                    "Services": {"accommodation": {tier: price}, "meals": ..., "transportation": ...},
                    "Optional_amenities": [theme x5],
                    "options": [[[name, price] x5] x4]}}
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ABNFlowError

logger = logging.getLogger(__name__)

CATEGORIES = ("accommodation", "meals", "transportation")
N_BANDS = 4

_STOPWORDS = frozenset({"a", "an", "and", "the", "of", "for", "with", "to", "in"})


class CatalogError(ABNFlowError):
    pass


class MissingFile(CatalogError):
    pass


class SchemaViolation(CatalogError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateId(CatalogError):
    pass


class UnknownTier(CatalogError):
    def __init__(self, category: str, name: str | None):
        super().__init__(f"unknown {category} tier: {name!r}")
        self.category = category
        self.name = name


@dataclass(frozen=True)
class ServiceTier:
    category: str
    name: str
    price: int


@dataclass(frozen=True)
class AmenityOption:
    name: str
    price: int
    band: int
    theme: str = ""


@dataclass(frozen=True)
class AmenityMatch:
    option: AmenityOption
    exact: bool
    overlap: int = 0


@dataclass(frozen=True)
class TravelPackage:
    id: str
    name: str
    description: str
    services: Mapping[str, tuple[ServiceTier, ...]]
    amenity_themes: tuple[str, ...]
    bands: tuple[tuple[AmenityOption, ...], ...]

    def tier(self, category: str, name: str | None) -> ServiceTier:
        for t in self.services.get(category, ()):
            if t.name == name:
                return t
        raise UnknownTier(category, name)

    def amenities(self) -> list[AmenityOption]:
        return [a for band in self.bands for a in band]

    def amenity(self, name: str) -> AmenityOption:
        """Exact (case-insensitive) lookup; raises KeyError when absent."""
        key = name.strip().lower()
        for a in self.amenities():
            if a.name.lower() == key:
                return a
        raise KeyError(name)

    def band_means(self) -> list[float]:
        return [sum(a.price for a in band) / len(band) for band in self.bands]


@dataclass(frozen=True)
class Catalog:
    packages: tuple[TravelPackage, ...]

    def __post_init__(self):
        if not self.packages:
            raise SchemaViolation("$", "catalog must contain at least one package")
        ids = [p.id for p in self.packages]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise DuplicateId(f"duplicate package ids: {dupes}")

    def __len__(self) -> int:
        return len(self.packages)

    def __iter__(self):
        return iter(self.packages)

    def get(self, package_id: str) -> TravelPackage:
        for p in self.packages:
            if p.id == package_id:
                return p
        raise KeyError(package_id)


def _positive_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise SchemaViolation(path, f"expected an integer price, got {value!r}")
    if value <= 0:
        raise SchemaViolation(path, f"price must be positive, got {value!r}")
    return int(value)


def _nonempty_str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaViolation(path, "expected a non-empty string")
    return value


def parse_package(pid: str, raw: Any) -> TravelPackage:
    base = f"$.{pid}"
    if not isinstance(raw, dict):
        raise SchemaViolation(base, "package entry must be an object")
    for key in ("Travel_Package_Name", "Description", "Services", "Optional_amenities", "options"):
        if key not in raw:
            raise SchemaViolation(f"{base}.{key}", "missing field")
    name = _nonempty_str(raw["Travel_Package_Name"], f"{base}.Travel_Package_Name")
    description = raw["Description"]
    if not isinstance(description, str):
        raise SchemaViolation(f"{base}.Description", "expected a string")

    svc = raw["Services"]
    if not isinstance(svc, dict):
        raise SchemaViolation(f"{base}.Services", "expected an object")
    unknown = set(svc) - set(CATEGORIES)
    if unknown:
        raise SchemaViolation(f"{base}.Services", f"unknown categories {sorted(unknown)}")
    services: dict[str, tuple[ServiceTier, ...]] = {}
    for cat in CATEGORIES:
        tiers = svc.get(cat)
        if not isinstance(tiers, dict) or not tiers:
            raise SchemaViolation(f"{base}.Services.{cat}", "need at least one tier")
        services[cat] = tuple(
            ServiceTier(cat, _nonempty_str(t, f"{base}.Services.{cat}"), _positive_int(p, f"{base}.Services.{cat}.{t}"))
            for t, p in tiers.items()
        )

    themes = raw["Optional_amenities"]
    if not isinstance(themes, list) or not all(isinstance(t, str) for t in themes):
        raise SchemaViolation(f"{base}.Optional_amenities", "expected a list of strings")

    opts = raw["options"]
    if not isinstance(opts, list) or len(opts) != N_BANDS:
        raise SchemaViolation(f"{base}.options", f"expected exactly {N_BANDS} bands")
    bands = []
    seen: set[str] = set()
    for b, band in enumerate(opts):
        bpath = f"{base}.options[{b}]"
        if not isinstance(band, list) or not band:
            raise SchemaViolation(bpath, "band must be a non-empty list")
        items = []
        for j, entry in enumerate(band):
            epath = f"{bpath}[{j}]"
            if not isinstance(entry, list) or len(entry) != 2:
                raise SchemaViolation(epath, "expected [name, price]")
            aname = _nonempty_str(entry[0], epath)
            if aname.lower() in seen:
                raise SchemaViolation(epath, f"duplicate amenity {aname!r}")
            seen.add(aname.lower())
            theme = themes[j] if j < len(themes) else ""
            items.append(AmenityOption(aname, _positive_int(entry[1], epath), b, theme))
        bands.append(tuple(items))

    pkg = TravelPackage(pid, name, description, services, tuple(themes), tuple(bands))
    means = pkg.band_means()
    for i in range(N_BANDS - 1):
        if not means[i] < means[i + 1]:
            logger.warning("package %s: mean price of band %d (%.1f) is not below band %d (%.1f)",
                           pid, i, means[i], i + 1, means[i + 1])
    return pkg


def catalog_from_dict(raw: Any) -> Catalog:
    if not isinstance(raw, dict):
        raise SchemaViolation("$", "top level must be an object keyed by package id")
    if not raw:
        raise SchemaViolation("$", "catalog must contain at least one package")
    return Catalog(tuple(parse_package(pid, entry) for pid, entry in raw.items()))


def load_catalog(path: str | Path | None = None) -> Catalog:
    """Load and validate a catalog file; ``None`` loads the bundled catalog."""
    if path is None:
        text = resources.files("abnflow.data").joinpath("catalog.json").read_text(encoding="utf-8")
    else:
        p = Path(path)
        if not p.is_file():
            raise MissingFile(f"catalog file not found: {p}")
        text = p.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}") from exc
    return catalog_from_dict(raw)


def catalog_to_dict(catalog: Catalog) -> dict:
    out = {}
    for p in catalog:
        out[p.id] = {
            "Travel_Package_Name": p.name,
            "Description": p.description,
            "Services": {c: {t.name: t.price for t in p.services[c]} for c in CATEGORIES},
            "Optional_amenities": list(p.amenity_themes),
            "options": [[[a.name, a.price] for a in band] for band in p.bands],
        }
    return out


def dump_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(catalog_to_dict(catalog), f, indent=2, ensure_ascii=False)
        f.write("\n")


def base_price(pkg: TravelPackage, selection: Mapping[str, str]) -> int:
    """Sum of the selected accommodation, meals and transportation tier prices."""
    return sum(pkg.tier(cat, selection.get(cat)).price for cat in CATEGORIES)


def tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9']+", text.lower()) if t not in _STOPWORDS}


def find_amenity(pkg: TravelPackage, name: str, band: int | None = None) -> AmenityMatch | None:
    """Resolve an amenity by name, falling back to the closest lexical match.

    An exact, case-insensitive hit wins. Otherwise the option sharing the most
    content tokens with the query is returned, searching ``band`` first when
    given; ties go to the lowest band, then the earliest listed option.
    Returns None when nothing overlaps.
    """
    try:
        return AmenityMatch(pkg.amenity(name), exact=True)
    except KeyError:
        pass
    query = tokens(name)
    if not query:
        return None

    def best(options):
        scored = [(len(query & tokens(a.name)), -a.band, -i, a) for i, a in enumerate(options)]
        scored = [s for s in scored if s[0] > 0]
        if not scored:
            return None
        top = max(scored, key=lambda s: s[:3])
        return AmenityMatch(top[3], exact=False, overlap=top[0])

    if band is not None and 0 <= band < len(pkg.bands):
        hit = best(pkg.bands[band])
        if hit is not None:
            return hit
    return best(pkg.amenities())
