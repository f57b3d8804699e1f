"""MEBF raster files, JSON manifests and query grouping."""

from __future__ import annotations

import json
import os
import struct
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import ImageMeta, MultiBandImage, RasterError, SatelliteSource

MAGIC = b"MEBF"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0
HEADER = struct.Struct("<4sIIIII")

KINDS = ("imagery", "prob_mask", "label")
_ENTRY_KEYS = {"path", "source", "lat", "lon", "year", "month", "kind", "view", "band_names"}


class FormatError(RasterError):
    """Bad magic, version or dtype in a raster header."""


class LengthError(RasterError):
    """Payload shorter or longer than the header declares."""


class DataError(RasterError):
    """Non-finite samples in a raster payload."""


class ManifestError(ValueError):
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"entry {index}: {message}"
        super().__init__(message)


def write_raster(img: MultiBandImage, path) -> None:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, img.width, img.height, img.bands, DTYPE_FLOAT32)
    payload = np.ascontiguousarray(img.samples, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_raster(path, meta: ImageMeta | None = None) -> MultiBandImage:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not an MEBF raster")
    _, version, width, height, bands, dtype = HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported MEBF version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    expected = width * height * bands * 4
    actual = len(blob) - HEADER.size
    if actual != expected:
        raise LengthError(f"{path}: payload is {actual} bytes, header implies {expected}")
    samples = np.frombuffer(blob, dtype="<f4", offset=HEADER.size).reshape(bands, height, width)
    if not np.isfinite(samples).all():
        raise DataError(f"{path}: non-finite samples")
    return MultiBandImage(samples, meta)


@dataclass(frozen=True)
class QueryKey:
    lat: float
    lon: float
    year: int
    month: int

    @property
    def month_index(self) -> int:
        return 12 * self.year + self.month

    def filename(self, prefix="pred") -> str:
        return f"{prefix}_{self.lat:.6f}_{self.lon:.6f}_{self.year:04d}_{self.month:02d}.mebf"

    def __str__(self):
        return f"({self.lat:g}, {self.lon:g}, {self.year}-{self.month:02d})"


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    source: SatelliteSource | None
    lat: float
    lon: float
    year: int
    month: int
    kind: str
    view: int = 0
    band_names: tuple[str, ...] = ()

    @property
    def key(self) -> QueryKey:
        return QueryKey(self.lat, self.lon, self.year, self.month)

    def meta(self, bands: int | None = None) -> ImageMeta:
        names = self.band_names
        if not names and self.source is not None and bands is not None:
            names = default_band_names(self.source, bands)
        return ImageMeta(self.source, self.lat, self.lon, self.year, self.month, names, self.view)

    def load(self) -> MultiBandImage:
        img = read_raster(self.path)
        return MultiBandImage(img.samples, self.meta(img.bands))

    def to_json(self, root: Path | None = None) -> dict:
        path = self.path
        if root is not None:
            path = Path(os.path.relpath(path, root))
        out = {
            "path": path.as_posix(),
            "source": self.source.value if self.source is not None else None,
            "lat": self.lat,
            "lon": self.lon,
            "year": self.year,
            "month": self.month,
            "kind": self.kind,
        }
        if self.view:
            out["view"] = self.view
        if self.band_names:
            out["band_names"] = list(self.band_names)
        return out


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...] = ()
    version: int = 1

    def of_kind(self, kind: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.kind == kind]


@dataclass(frozen=True)
class GroupMember:
    entry: ManifestEntry
    offset: int


def default_band_names(source: SatelliteSource, bands: int) -> tuple[str, ...]:
    if source is SatelliteSource.Sentinel1 and bands == 2:
        return ("VV", "VH")
    if source is SatelliteSource.Sentinel2 and bands == 12:
        return ("B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B11", "B12")
    if bands == 3 and not source.is_sar:
        # already reduced to true colour
        return ("B4", "B3", "B2")
    return tuple(f"B{i + 1}" for i in range(bands))


def _parse_entry(raw, index: int, root: Path, check_paths: bool) -> ManifestEntry:
    if not isinstance(raw, dict):
        raise ManifestError("entry must be an object", index)
    unknown = set(raw) - _ENTRY_KEYS
    if unknown:
        raise ManifestError(f"unknown keys {sorted(unknown)}", index)
    missing = {"path", "lat", "lon", "year", "month", "kind"} - set(raw)
    if missing:
        raise ManifestError(f"missing keys {sorted(missing)}", index)

    kind = raw["kind"]
    if kind not in KINDS:
        raise ManifestError(f"unknown kind {kind!r}", index)
    source = None
    if kind != "label":
        try:
            source = SatelliteSource(raw.get("source"))
        except ValueError:
            raise ManifestError(f"unknown source {raw.get('source')!r}", index) from None

    for name in ("year", "month", "view"):
        value = raw.get(name, 0)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ManifestError(f"{name} must be an integer", index)
    for name in ("lat", "lon"):
        if not isinstance(raw[name], (int, float)) or isinstance(raw[name], bool):
            raise ManifestError(f"{name} must be a number", index)
    if not 1 <= raw["month"] <= 12:
        raise ManifestError(f"month {raw['month']} outside 1..12", index)

    path = Path(raw["path"])
    if not path.is_absolute():
        path = root / path
    if check_paths and not path.exists():
        raise ManifestError(f"file not found: {path}", index)

    return ManifestEntry(
        path=path,
        source=source,
        lat=float(raw["lat"]),
        lon=float(raw["lon"]),
        year=raw["year"],
        month=raw["month"],
        kind=kind,
        view=raw.get("view", 0),
        band_names=tuple(raw.get("band_names", ())),
    )


def parse_manifest(doc, root=".", check_paths=True) -> Manifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    unknown = set(doc) - {"version", "entries"}
    if unknown:
        raise ManifestError(f"unknown top-level keys {sorted(unknown)}")
    if doc.get("version") != 1:
        raise ManifestError(f"unsupported manifest version {doc.get('version')!r}")
    entries = doc.get("entries")
    if not isinstance(entries, list):
        raise ManifestError("'entries' must be a list")
    root = Path(root)
    return Manifest(tuple(_parse_entry(raw, i, root, check_paths) for i, raw in enumerate(entries)))


def load_manifest(path, check_paths=True) -> Manifest:
    """Load a manifest; relative entry paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    return parse_manifest(doc, path.parent, check_paths)


def save_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    doc = {
        "version": manifest.version,
        "entries": [e.to_json(path.parent.resolve()) for e in manifest.entries],
    }
    path.write_text(json.dumps(doc, indent=1) + "\n")


def group_by_query(manifest: Manifest, window_months: int) -> dict[QueryKey, list[GroupMember]]:
    """Collect imagery and mask entries within ``window_months`` of every query.

    Every distinct (lat, lon, year, month) in the manifest is a query, label
    entries included, so a labelled month with no imagery of its own can still
    be filled from its neighbours. Members are ordered by offset, then source,
    view, kind and path, which makes the result independent of entry order.
    """
    if window_months < 0:
        raise ValueError("window_months must be >= 0")

    by_site = defaultdict(list)
    keys = set()
    for entry in manifest.entries:
        keys.add(entry.key)
        if entry.kind != "label":
            by_site[(entry.lat, entry.lon)].append(entry)

    groups = {}
    for key in sorted(keys, key=_key_order):
        members = []
        for entry in by_site.get((key.lat, key.lon), ()):
            offset = entry.key.month_index - key.month_index
            if abs(offset) <= window_months:
                members.append(GroupMember(entry, offset))
        members.sort(key=_member_order)
        groups[key] = members
    return groups


def _key_order(key: QueryKey):
    return (key.lat, key.lon, key.year, key.month)


def _member_order(m: GroupMember):
    e = m.entry
    return (m.offset, e.source.value, e.view, e.kind, str(e.path))
