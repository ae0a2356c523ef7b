"""Georeferenced grids on a flat lat/lon lattice and the IRG1/IRGS binary formats.

Layout of an IRG1 record (little-endian)::

    offset  size  field
    0       4     magic b"IRG1"
    4       1     band_kind (u8, see BandKind)
    5       3     reserved, zero
    8       8     origin_lon (f64, top-left corner)
    16      8     origin_lat (f64, top-left corner)
    24      8     pixel_size (f64, degrees)
    32      4     width (u32)
    36      4     height (u32)
    40      ...   width*height f32, row-major from the top-left pixel

An IRGS file is b"IRGS", a u8 month count (always 12), then 12 IRG1 records.
"""

from __future__ import annotations

import enum
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"IRG1"
STACK_MAGIC = b"IRGS"
HEADER = struct.Struct("<4sB3xdddII")
CATEGORICAL_NODATA = 255.0
CANONICAL_NAN_BITS = 0x7FC00000
MAX_PIXELS = 2**31 - 1
# (x - round(x)) below this counts as an exact multiple of the pixel size
_SNAP_EPS = 1e-9

MASK_CODES = frozenset({0.0, 1.0, 2.0, 3.0, 255.0})
LABEL_CODES = frozenset({0.0, 1.0, 2.0, 3.0, 255.0})


class BandKind(enum.IntEnum):
    NDVI = 0
    PRECIP_MM = 1
    TEMP_C = 2
    MASK = 3
    LABEL = 4

    @property
    def categorical(self) -> bool:
        return self in (BandKind.MASK, BandKind.LABEL)

    @property
    def nodata(self) -> float:
        return CATEGORICAL_NODATA if self.categorical else math.nan


class RasterFormatError(ValueError):
    """Malformed IRG1/IRGS data. ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class AlignmentError(ValueError):
    """Two grids that must share a GridMeta do not."""


@dataclass(frozen=True)
class GeoBox:
    lon_min: float
    lat_min: float
    lon_max: float
    lat_max: float

    def __post_init__(self):
        vals = (self.lon_min, self.lat_min, self.lon_max, self.lat_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite GeoBox corner: {vals}")
        if not (self.lon_min < self.lon_max and self.lat_min < self.lat_max):
            raise ValueError(f"degenerate or inverted GeoBox: {vals}")
        if max(abs(self.lon_min), abs(self.lon_max)) > 180:
            raise ValueError(f"longitude outside [-180, 180]: {vals}")
        if max(abs(self.lat_min), abs(self.lat_max)) > 90:
            raise ValueError(f"latitude outside [-90, 90]: {vals}")

    @property
    def width(self) -> float:
        return self.lon_max - self.lon_min

    @property
    def height(self) -> float:
        return self.lat_max - self.lat_min

    def translated(self, dlon: float, dlat: float) -> GeoBox:
        return GeoBox(self.lon_min + dlon, self.lat_min + dlat,
                      self.lon_max + dlon, self.lat_max + dlat)

    def contains(self, other: GeoBox, tol: float = 1e-9) -> bool:
        return (other.lon_min >= self.lon_min - tol and other.lon_max <= self.lon_max + tol
                and other.lat_min >= self.lat_min - tol and other.lat_max <= self.lat_max + tol)

    @classmethod
    def parse(cls, text: str) -> GeoBox:
        """Parse ``"lon0,lat0,lon1,lat1"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected lon0,lat0,lon1,lat1, got {text!r}")
        return cls(*(float(p) for p in parts))


def snapped_ceil(x: float) -> int:
    """ceil() that treats values within rounding noise of an integer as that integer."""
    r = round(x)
    if abs(x - r) < _SNAP_EPS * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


@dataclass(frozen=True)
class GridMeta:
    origin_lon: float
    origin_lat: float
    pixel_size: float
    width: int
    height: int

    def __post_init__(self):
        if not (math.isfinite(self.pixel_size) and self.pixel_size > 0):
            raise ValueError(f"pixel_size must be > 0, got {self.pixel_size}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def geobox(self) -> GeoBox:
        return GeoBox(self.origin_lon,
                      self.origin_lat - self.height * self.pixel_size,
                      self.origin_lon + self.width * self.pixel_size,
                      self.origin_lat)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Longitudes of column centers and latitudes of row centers."""
        lon = self.origin_lon + (np.arange(self.width) + 0.5) * self.pixel_size
        lat = self.origin_lat - (np.arange(self.height) + 0.5) * self.pixel_size
        return lon, lat

    def locate(self, lon, lat) -> tuple[np.ndarray, np.ndarray]:
        """Row and column of the pixel containing each coordinate (may fall outside)."""
        col = np.floor((np.asarray(lon, dtype=float) - self.origin_lon) / self.pixel_size)
        row = np.floor((self.origin_lat - np.asarray(lat, dtype=float)) / self.pixel_size)
        return row.astype(np.int64), col.astype(np.int64)

    def window(self, row0: int, col0: int, height: int, width: int) -> GridMeta:
        return GridMeta(self.origin_lon + col0 * self.pixel_size,
                        self.origin_lat - row0 * self.pixel_size,
                        self.pixel_size, width, height)

    def offset_of(self, other: GridMeta) -> tuple[int, int]:
        """(row, col) of ``other``'s top-left pixel within this grid's lattice.

        Raises AlignmentError when the two lattices do not coincide.
        """
        if other.pixel_size != self.pixel_size:
            raise AlignmentError(f"pixel sizes differ: {self} vs {other}")
        c = (other.origin_lon - self.origin_lon) / self.pixel_size
        r = (self.origin_lat - other.origin_lat) / self.pixel_size
        rc, rr = round(c), round(r)
        if abs(c - rc) > 1e-6 or abs(r - rr) > 1e-6:
            raise AlignmentError(f"grids are not on a common lattice: {self} vs {other}")
        return int(rr), int(rc)


def geobox_to_grid(box: GeoBox, pixel_size: float) -> GridMeta:
    if not pixel_size > 0:
        raise ValueError(f"pixel_size must be > 0, got {pixel_size}")
    width = snapped_ceil((box.lon_max - box.lon_min) / pixel_size)
    height = snapped_ceil((box.lat_max - box.lat_min) / pixel_size)
    return GridMeta(box.lon_min, box.lat_max, pixel_size, width, height)


def _canonical(values, kind: BandKind) -> np.ndarray:
    arr = np.array(values, dtype=np.float32, order="C", copy=True)
    if arr.ndim != 2:
        raise ValueError(f"raster values must be 2-D, got shape {arr.shape}")
    nan = np.isnan(arr)
    if nan.any():
        if kind.categorical:
            arr[nan] = CATEGORICAL_NODATA
        else:
            # one bit pattern for every NaN so files compare byte-for-byte
            arr[nan] = np.float32(np.nan)
    return arr


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """One band on a GridMeta. ``values`` is a read-only float32 (height, width) array."""

    meta: GridMeta
    band_kind: BandKind
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        kind = BandKind(self.band_kind)
        object.__setattr__(self, "band_kind", kind)
        arr = self.values
        if not (isinstance(arr, np.ndarray) and arr.dtype == np.float32
                and not arr.flags.writeable and arr.flags.c_contiguous
                and _is_canonical(arr, kind)):
            arr = _canonical(arr, kind)
        if arr.shape != self.meta.shape:
            raise ValueError(f"values shape {arr.shape} != grid shape {self.meta.shape}")
        _check_band(arr, kind)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def full(cls, meta: GridMeta, kind: BandKind, fill: float | None = None) -> RasterGrid:
        fill = BandKind(kind).nodata if fill is None else fill
        return cls(meta, kind, np.full(meta.shape, fill, dtype=np.float32))

    @property
    def nodata_mask(self) -> np.ndarray:
        if self.band_kind.categorical:
            return self.values == CATEGORICAL_NODATA
        return np.isnan(self.values)

    def identical(self, other: RasterGrid) -> bool:
        """Bit-exact equality of metadata, band kind and payload."""
        return (self.meta == other.meta and self.band_kind == other.band_kind
                and self.values.tobytes() == other.values.tobytes())

    def window(self, row0: int, col0: int, height: int, width: int) -> RasterGrid:
        return RasterGrid(self.meta.window(row0, col0, height, width), self.band_kind,
                          self.values[row0:row0 + height, col0:col0 + width])


def _is_canonical(arr: np.ndarray, kind: BandKind) -> bool:
    nan = np.isnan(arr)
    if not nan.any():
        return True
    if kind.categorical:
        return False
    return bool((arr.view(np.uint32)[nan] == CANONICAL_NAN_BITS).all())


def _check_band(arr: np.ndarray, kind: BandKind):
    if kind is BandKind.NDVI:
        finite = arr[~np.isnan(arr)]
        if finite.size and (finite.min() < -1 or finite.max() > 1):
            raise ValueError("NDVI values must lie in [-1, 1]")
    elif kind is BandKind.PRECIP_MM:
        finite = arr[~np.isnan(arr)]
        if finite.size and finite.min() < 0:
            raise ValueError("precipitation must be >= 0")
    elif kind.categorical:
        codes = MASK_CODES if kind is BandKind.MASK else LABEL_CODES
        bad = ~np.isin(arr, list(codes))
        if bad.any():
            raise ValueError(f"{kind.name} values outside {sorted(codes)}: "
                             f"{np.unique(arr[bad])[:5]}")


class MonthlyStack:
    """Twelve co-registered grids of one band, January..December.

    Backed by a single read-only (12, height, width) float32 array; ``months``
    are views into it.
    """

    def __init__(self, months: Sequence[RasterGrid]):
        months = list(months)
        if len(months) != 12:
            raise ValueError(f"a monthly stack needs exactly 12 grids, got {len(months)}")
        meta, kind = months[0].meta, months[0].band_kind
        for i, g in enumerate(months):
            if g.meta != meta:
                raise AlignmentError(f"month {i + 1} grid {g.meta} != month 1 grid {meta}")
            if g.band_kind != kind:
                raise ValueError(f"month {i + 1} band {g.band_kind.name} != {kind.name}")
        self._init(meta, kind, np.stack([g.values for g in months]))

    @classmethod
    def from_array(cls, meta: GridMeta, kind: BandKind, array) -> MonthlyStack:
        arr = np.asarray(array, dtype=np.float32)
        if arr.shape != (12, *meta.shape):
            raise ValueError(f"expected shape {(12, *meta.shape)}, got {arr.shape}")
        self = cls.__new__(cls)
        self._init(meta, BandKind(kind), np.stack([_canonical(a, BandKind(kind)) for a in arr]))
        for a in self.array:
            _check_band(a, self.band_kind)
        return self

    def _init(self, meta, kind, array):
        array = np.ascontiguousarray(array)
        array.flags.writeable = False
        self.meta = meta
        self.band_kind = kind
        self.array = array
        self.months = tuple(RasterGrid(meta, kind, a) for a in array)

    def __len__(self):
        return 12

    def __getitem__(self, i) -> RasterGrid:
        return self.months[i]

    def __repr__(self):
        return f"MonthlyStack({self.band_kind.name}, {self.meta})"

    def identical(self, other: MonthlyStack) -> bool:
        return (self.meta == other.meta and self.band_kind == other.band_kind
                and self.array.tobytes() == other.array.tobytes())

    def window(self, row0: int, col0: int, height: int, width: int) -> MonthlyStack:
        meta = self.meta.window(row0, col0, height, width)
        return MonthlyStack.from_array(
            meta, self.band_kind, self.array[:, row0:row0 + height, col0:col0 + width])


# --- resampling -------------------------------------------------------------

def _nearest_index(meta: GridMeta, dst: GridMeta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lon, lat = dst.pixel_centers()
    col = np.floor((lon - meta.origin_lon) / meta.pixel_size).astype(np.int64)
    row = np.floor((meta.origin_lat - lat) / meta.pixel_size).astype(np.int64)
    rr, cc = np.meshgrid(row, col, indexing="ij")
    inside = (rr >= 0) & (rr < meta.height) & (cc >= 0) & (cc < meta.width)
    return rr, cc, inside


def _check_overlap(src: GridMeta, dst: GridMeta):
    a, b = src.geobox, dst.geobox
    if (a.lon_max <= b.lon_min or b.lon_max <= a.lon_min
            or a.lat_max <= b.lat_min or b.lat_max <= a.lat_min):
        raise ValueError(f"source {a} and destination {b} do not overlap")


def resample_nearest(src: RasterGrid, dst_meta: GridMeta) -> RasterGrid:
    """Nearest-center resampling; destination pixels whose center falls outside src get nodata.

    On a square lattice the source pixel containing a destination center is the
    one whose center is nearest to it.
    """
    _check_overlap(src.meta, dst_meta)
    rr, cc, inside = _nearest_index(src.meta, dst_meta)
    out = np.full(dst_meta.shape, src.band_kind.nodata, dtype=np.float32)
    out[inside] = src.values[rr[inside], cc[inside]]
    return RasterGrid(dst_meta, src.band_kind, out)


def resample_stack(src: MonthlyStack, dst_meta: GridMeta) -> MonthlyStack:
    _check_overlap(src.meta, dst_meta)
    rr, cc, inside = _nearest_index(src.meta, dst_meta)
    out = np.full((12, *dst_meta.shape), src.band_kind.nodata, dtype=np.float32)
    out[:, inside] = src.array[:, rr[inside], cc[inside]]
    return MonthlyStack.from_array(dst_meta, src.band_kind, out)


def mosaic_stacks(sources: Iterable[MonthlyStack], dst_meta: GridMeta) -> MonthlyStack:
    """Resample several stacks onto ``dst_meta``; earlier sources win where they have data.

    Sources that do not overlap the destination are skipped.
    """
    out = None
    kind = None
    for src in sources:
        kind = kind or src.band_kind
        if src.band_kind != kind:
            raise ValueError("cannot mosaic stacks of different band kinds")
        try:
            part = resample_stack(src, dst_meta).array
        except ValueError:
            continue
        if out is None:
            out = part.copy()
        else:
            gap = np.isnan(out) if not kind.categorical else out == CATEGORICAL_NODATA
            out[gap] = part[gap]
    if out is None:
        raise ValueError(f"no source overlaps {dst_meta.geobox}")
    return MonthlyStack.from_array(dst_meta, kind, out)


# --- IRG1 / IRGS ------------------------------------------------------------

def encode_raster(grid: RasterGrid) -> bytes:
    m = grid.meta
    head = HEADER.pack(MAGIC, int(grid.band_kind), m.origin_lon, m.origin_lat,
                       m.pixel_size, m.width, m.height)
    return head + grid.values.astype("<f4", copy=False).tobytes()


def _decode_record(buf: bytes, start: int) -> tuple[RasterGrid, int]:
    """Parse one IRG1 record at ``start``; return it and the offset just past it."""
    if len(buf) - start < HEADER.size:
        if buf[start:start + 4] not in (MAGIC, MAGIC[:len(buf) - start]):
            raise RasterFormatError(f"bad magic {buf[start:start + 4]!r}", start)
        raise RasterFormatError(f"truncated header: {len(buf) - start} of {HEADER.size} bytes",
                                len(buf))
    magic, kind, lon, lat, size, width, height = HEADER.unpack_from(buf, start)
    if magic != MAGIC:
        raise RasterFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", start)
    try:
        kind = BandKind(kind)
    except ValueError:
        raise RasterFormatError(f"unknown band kind {kind}", start + 4) from None
    if not all(math.isfinite(v) for v in (lon, lat)):
        raise RasterFormatError("non-finite origin", start + 8)
    if not (math.isfinite(size) and size > 0):
        raise RasterFormatError(f"pixel size must be > 0, got {size}", start + 24)
    if width == 0 or height == 0:
        raise RasterFormatError(f"empty grid {width}x{height}", start + 32)
    if width * height > MAX_PIXELS:
        raise RasterFormatError(f"dimension overflow: {width}x{height} pixels", start + 32)
    payload = start + HEADER.size
    end = payload + 4 * width * height
    if len(buf) < end:
        raise RasterFormatError(
            f"truncated payload: need {end - payload} bytes, have {len(buf) - payload}",
            len(buf))
    values = np.frombuffer(buf, dtype="<f4", count=width * height, offset=payload)
    meta = GridMeta(lon, lat, size, width, height)
    try:
        grid = RasterGrid(meta, kind, values.reshape(height, width).astype(np.float32))
    except ValueError as exc:
        raise RasterFormatError(f"invalid payload: {exc}", payload) from None
    return grid, end


def decode_raster(buf: bytes) -> RasterGrid:
    grid, end = _decode_record(buf, 0)
    if end != len(buf):
        raise RasterFormatError(f"{len(buf) - end} trailing bytes", end)
    return grid


def encode_stack(stack: MonthlyStack) -> bytes:
    return STACK_MAGIC + bytes([12]) + b"".join(encode_raster(g) for g in stack.months)


def decode_stack(buf: bytes) -> MonthlyStack:
    if buf[:4] != STACK_MAGIC:
        raise RasterFormatError(f"bad magic {buf[:4]!r}, expected {STACK_MAGIC!r}", 0)
    if len(buf) < 5:
        raise RasterFormatError("truncated stack header", len(buf))
    if buf[4] != 12:
        raise RasterFormatError(f"month count must be 12, got {buf[4]}", 4)
    pos, months = 5, []
    for _ in range(12):
        grid, nxt = _decode_record(buf, pos)
        if months and (grid.meta != months[0].meta or grid.band_kind != months[0].band_kind):
            raise RasterFormatError("month record does not match month 1 grid/band", pos)
        months.append(grid)
        pos = nxt
    if pos != len(buf):
        raise RasterFormatError(f"{len(buf) - pos} trailing bytes", pos)
    return MonthlyStack(months)


def atomic_write(path, data: bytes | str):
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_raster(path) -> RasterGrid:
    return decode_raster(Path(path).read_bytes())


def write_raster(grid: RasterGrid, path):
    atomic_write(path, encode_raster(grid))


def read_stack(path) -> MonthlyStack:
    return decode_stack(Path(path).read_bytes())


def write_stack(stack: MonthlyStack, path):
    atomic_write(path, encode_stack(stack))


def read_header(path) -> dict:
    """Header fields of an IRG1 or IRGS file, without validating the payload."""
    buf = Path(path).read_bytes()

    def one(start):
        if len(buf) - start < HEADER.size:
            raise RasterFormatError("truncated header", len(buf))
        magic, kind, lon, lat, size, width, height = HEADER.unpack_from(buf, start)
        if magic != MAGIC:
            raise RasterFormatError(f"bad magic {magic!r}", start)
        try:
            kind_name = BandKind(kind).name
        except ValueError:
            kind_name = f"unknown({kind})"
        return {"band_kind": kind_name, "origin_lon": lon, "origin_lat": lat,
                "pixel_size": size, "width": width, "height": height}

    if buf[:4] == STACK_MAGIC:
        if len(buf) < 5:
            raise RasterFormatError("truncated stack header", len(buf))
        first = one(5)
        return {"format": "IRGS", "month_count": buf[4], **first, "bytes": len(buf)}
    return {"format": "IRG1", **one(0), "bytes": len(buf)}
