"""Occupancy-grid world: map file I/O, cell indexing, local sensing windows."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CellPos",
    "WorldMap",
    "LocalMap",
    "MapFormatError",
    "MapValueError",
    "load_map",
    "save_map",
    "local_window",
]


class MapFormatError(ValueError):
    """A map file could not be parsed."""


class MapValueError(ValueError):
    """An occupancy value falls outside [0, 1]."""


@dataclass(frozen=True, order=True)
class CellPos:
    """Grid cell coordinate, (row, col) with the origin at the top-left."""

    row: int
    col: int


@dataclass(frozen=True, eq=False)
class WorldMap:
    """Static ground-truth occupancy grid.

    Occupancy is stored row-major as a flat float vector of length
    width*height; 0 means free, 1 means untraversable.
    """

    width: int
    height: int
    occupancy: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad map dimensions {self.width}x{self.height}")
        occ = np.ascontiguousarray(self.occupancy, dtype=float)
        if occ.shape != (self.width * self.height,):
            raise ValueError(
                f"occupancy vector has {occ.size} entries, "
                f"expected {self.width * self.height}"
            )
        if occ.min() < 0.0 or occ.max() > 1.0:
            raise MapValueError("occupancy values must lie in [0, 1]")
        object.__setattr__(self, "occupancy", occ)

    @property
    def n(self) -> int:
        return self.width * self.height

    def index(self, pos: CellPos) -> int:
        return pos.row * self.width + pos.col

    def pos_of(self, index: int) -> CellPos:
        return CellPos(index // self.width, index % self.width)

    def in_bounds(self, pos: CellPos) -> bool:
        return 0 <= pos.row < self.height and 0 <= pos.col < self.width

    def value(self, pos: CellPos) -> float:
        return float(self.occupancy[self.index(pos)])

    def grid(self) -> np.ndarray:
        """Occupancy as a (height, width) view."""
        return self.occupancy.reshape(self.height, self.width)


@dataclass(frozen=True, eq=False)
class LocalMap:
    """In-bounds cells of a w x h sensing window, row-major.

    `origin` is the nominal top-left corner of the window and may lie
    outside the map when the window is clipped at a boundary;
    `map_width` ties the global indices back to the owning map.
    """

    cells: tuple[int, ...]
    values: np.ndarray
    origin: CellPos
    nominal_w: int
    nominal_h: int
    map_width: int

    @property
    def center(self) -> CellPos:
        return CellPos(
            self.origin.row + self.nominal_h // 2,
            self.origin.col + self.nominal_w // 2,
        )

    def __len__(self) -> int:
        return len(self.cells)


def _detect_format(path: str, fmt: str | None) -> str:
    if fmt is not None:
        return fmt.lower()
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv"
    if ext == ".pgm":
        return "pgm"
    raise MapFormatError(f"cannot infer map format from {path!r}; pass fmt=")


def _parse_csv(text: str) -> tuple[int, int, np.ndarray]:
    rows: list[list[float]] = []
    width = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise MapFormatError(
                f"line {line_no}: expected {width} fields, got {len(fields)}"
            )
        parsed = []
        for col, field in enumerate(fields, start=1):
            try:
                v = float(field)
            except ValueError:
                raise MapFormatError(
                    f"line {line_no}, field {col}: not a number: {field.strip()!r}"
                ) from None
            if not 0.0 <= v <= 1.0:
                raise MapValueError(
                    f"line {line_no}, field {col}: occupancy {v} outside [0, 1]"
                )
            parsed.append(v)
        rows.append(parsed)
    if not rows:
        raise MapFormatError("empty CSV map")
    return width, len(rows), np.asarray(rows, dtype=float).ravel()


def _pgm_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated tokens, honoring '#' comments.

    Returns the tokens and the offset just past the final token's
    trailing whitespace byte (the raster start for P5).
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise MapFormatError("truncated PGM header")
        tokens.append(data[start:i])
        if len(tokens) == count:
            if i >= n:
                raise MapFormatError("truncated PGM file")
            i += 1  # single whitespace byte after maxval precedes the raster
    return tokens, i


def _parse_pgm(data: bytes) -> tuple[int, int, np.ndarray]:
    if data[:2] not in (b"P2", b"P5"):
        raise MapFormatError(f"not a PGM file (magic {data[:2]!r})")
    magic = data[:2].decode()
    tokens, raster_off = _pgm_header_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MapFormatError(f"bad PGM header tokens {tokens!r}") from None
    if width <= 0 or height <= 0 or maxval <= 0:
        raise MapFormatError(f"bad PGM dimensions {width}x{height}, maxval {maxval}")
    n = width * height
    if magic == "P2":
        body = data[2:].split(b"\n")
        text = b"\n".join(t.split(b"#", 1)[0] for t in body)
        fields = text.split()[3:]  # skip width/height/maxval
        if len(fields) < n:
            raise MapFormatError(f"PGM raster has {len(fields)} values, expected {n}")
        try:
            pixels = np.array([int(f) for f in fields[:n]], dtype=np.int64)
        except ValueError:
            raise MapFormatError("non-integer value in P2 raster") from None
    else:
        raster = data[2 + raster_off :]
        if maxval < 256:
            if len(raster) < n:
                raise MapFormatError(f"P5 raster has {len(raster)} bytes, expected {n}")
            pixels = np.frombuffer(raster[:n], dtype=np.uint8).astype(np.int64)
        else:
            if len(raster) < 2 * n:
                raise MapFormatError(
                    f"P5 raster has {len(raster)} bytes, expected {2 * n}"
                )
            pixels = np.frombuffer(raster[: 2 * n], dtype=">u2").astype(np.int64)
    if pixels.max() > maxval:
        bad = int(np.argmax(pixels > maxval))
        raise MapFormatError(
            f"pixel {bad} (row {bad // width}, col {bad % width}) "
            f"exceeds maxval {maxval}"
        )
    # white (maxval) is free space, black is occupied
    occupancy = 1.0 - pixels.astype(float) / float(maxval)
    return width, height, occupancy


def load_map(path: str | os.PathLike, fmt: str | None = None) -> WorldMap:
    """Load a WorldMap from a CSV or PGM (P2/P5) file."""
    path = os.fspath(path)
    kind = _detect_format(path, fmt)
    if kind == "csv":
        with open(path, "r", encoding="ascii") as fh:
            width, height, occ = _parse_csv(fh.read())
    elif kind == "pgm":
        with open(path, "rb") as fh:
            width, height, occ = _parse_pgm(fh.read())
    else:
        raise MapFormatError(f"unsupported map format {kind!r}")
    return WorldMap(width=width, height=height, occupancy=occ)


def save_map(world: WorldMap, path: str | os.PathLike, fmt: str | None = None) -> None:
    """Write a WorldMap to CSV (lossless) or PGM P5 (rounded to 255 levels)."""
    path = os.fspath(path)
    kind = _detect_format(path, fmt)
    grid = world.grid()
    if kind == "csv":
        lines = [",".join(repr(float(v)) for v in row) for row in grid]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    elif kind == "pgm":
        pixels = np.rint((1.0 - grid) * 255.0).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{world.width} {world.height}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
    else:
        raise MapFormatError(f"unsupported map format {kind!r}")


def local_window(world: WorldMap, center: CellPos, w: int, h: int) -> LocalMap:
    """Cells of the w x h window centered at `center`, clipped to the map.

    The robot sits at the window center, so both dimensions must be odd.
    Surviving cells are listed row-major.
    """
    if w <= 0 or h <= 0 or w % 2 == 0 or h % 2 == 0:
        raise ValueError(f"window dimensions must be odd and positive, got {w}x{h}")
    if not world.in_bounds(center):
        raise ValueError(f"window center {center} outside {world.width}x{world.height} map")
    r0 = center.row - h // 2
    c0 = center.col - w // 2
    cells: list[int] = []
    for r in range(max(r0, 0), min(r0 + h, world.height)):
        base = r * world.width
        for c in range(max(c0, 0), min(c0 + w, world.width)):
            cells.append(base + c)
    idx = np.asarray(cells, dtype=int)
    return LocalMap(
        cells=tuple(cells),
        values=world.occupancy[idx],
        origin=CellPos(r0, c0),
        nominal_w=w,
        nominal_h=h,
        map_width=world.width,
    )
