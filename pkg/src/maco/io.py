"""Ingestion and serialization.

Covers the interval-observation text format, the dense-matrix text format,
PGM images (P2/P5, 8-bit), observation-mask sampling, and the builders
that turn ratings or images into constraint sets.

Observation file format: UTF-8 text, ``#`` or ``%`` comment lines, first
significant line ``m n count``, then exactly ``count`` records
``i j KIND value [value2]`` with KIND one of E/L/U/B (B takes ``lo hi``),
indices 1-based, fields separated by runs of spaces or tabs.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParseError, ValidationError
from .model import (ConstraintKind, Entry, ObservationSet, box, equality,
                    lower, upper, validate)

__all__ = [
    "GrayImage",
    "InpaintMode",
    "parse_observations",
    "serialize_observations",
    "build_interval_ratings",
    "sample_mask",
    "image_to_observations",
    "read_pgm",
    "write_pgm",
    "read_dense",
    "write_dense",
    "write_text_atomic",
    "write_bytes_atomic",
]


# ---------------------------------------------------------------------------
# gray-scale images

@dataclass(frozen=True)
class GrayImage:
    """8-bit gray-scale image; ``pixels`` has shape ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-d array, "
                             f"got shape {px.shape}")
        if not np.issubdtype(px.dtype, np.integer):
            raise ValueError("pixels must be integers; use "
                             "GrayImage.from_matrix for float data")
        if px.min() < 0 or px.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_matrix(self, unit_scale: bool = False) -> np.ndarray:
        """Pixels as float64, optionally rescaled to [0, 1]."""
        M = self.pixels.astype(np.float64)
        return M / 255.0 if unit_scale else M

    @classmethod
    def from_matrix(cls, M, unit_scale: bool = False) -> "GrayImage":
        """Round and clip a float matrix back to 8-bit pixels."""
        M = np.asarray(M, dtype=np.float64)
        if unit_scale:
            M = M * 255.0
        return cls(np.clip(np.rint(M), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# observation text format

def _significant_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("%"):
            continue
        yield lineno, line


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(lineno, f"bad {what} {tok!r}") from None


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(lineno, f"bad {what} {tok!r}") from None


_KIND_ARITY = {"E": 1, "L": 1, "U": 1, "B": 2}


def parse_observations(text: str) -> ObservationSet:
    """Parse and validate the interval-observation format.

    Raises :class:`maco.errors.ParseError` with the offending line number
    for malformed text and :class:`maco.errors.ValidationError` when the
    parsed set violates the model assumptions.
    """
    lines = _significant_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError(1, "empty file: expected header 'm n count'") from None
    fields = header.split()
    if len(fields) != 3:
        raise ParseError(lineno, f"header must be 'm n count', got {header!r}")
    m = _parse_int(fields[0], lineno, "row count")
    n = _parse_int(fields[1], lineno, "column count")
    count = _parse_int(fields[2], lineno, "record count")
    if m < 1 or n < 1:
        raise ParseError(lineno, f"matrix dimensions must be positive, "
                         f"got {m} x {n}")
    if count < 0:
        raise ParseError(lineno, f"record count must be non-negative, "
                         f"got {count}")

    entries: list[Entry] = []
    last_line = lineno
    for lineno, line in lines:
        last_line = lineno
        if len(entries) == count:
            raise ParseError(lineno, f"extra record beyond the declared "
                             f"count of {count}")
        fields = line.split()
        if len(fields) < 4:
            raise ParseError(lineno, f"record needs 'i j KIND value...', "
                             f"got {line!r}")
        kind_tok = fields[2]
        if kind_tok not in _KIND_ARITY:
            raise ParseError(lineno, f"unknown constraint kind {kind_tok!r}; "
                             f"expected one of E, L, U, B")
        arity = _KIND_ARITY[kind_tok]
        if len(fields) != 3 + arity:
            raise ParseError(lineno, f"kind {kind_tok} takes {arity} "
                             f"value(s), got {len(fields) - 3}")
        i = _parse_int(fields[0], lineno, "row index") - 1
        j = _parse_int(fields[1], lineno, "column index") - 1
        vals = [_parse_float(t, lineno, "value") for t in fields[3:]]
        if kind_tok == "E":
            entries.append(equality(i, j, vals[0]))
        elif kind_tok == "L":
            entries.append(lower(i, j, vals[0]))
        elif kind_tok == "U":
            entries.append(upper(i, j, vals[0]))
        else:
            entries.append(box(i, j, vals[0], vals[1]))
    if len(entries) != count:
        raise ParseError(last_line, f"file ends after {len(entries)} of "
                         f"{count} declared records")

    obs = ObservationSet(m, n, entries)
    report = validate(obs)
    if not report.ok:
        raise ValidationError(report)
    return obs


def serialize_observations(obs: ObservationSet) -> str:
    """Canonical text form; parses back to an equal observation set."""
    out = [f"{obs.m} {obs.n} {len(obs.entries)}"]
    for e in obs.entries:
        pos = f"{e.i + 1} {e.j + 1}"
        if e.kind is ConstraintKind.EQUALITY:
            out.append(f"{pos} E {e.lo:.17g}")
        elif e.kind is ConstraintKind.LOWER:
            out.append(f"{pos} L {e.lo:.17g}")
        elif e.kind is ConstraintKind.UPPER:
            out.append(f"{pos} U {e.hi:.17g}")
        else:
            out.append(f"{pos} B {e.lo:.17g} {e.hi:.17g}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# constraint builders

def build_interval_ratings(ratings, eps: float, scale_min: float,
                           scale_max: float, m: int | None = None,
                           n: int | None = None) -> ObservationSet:
    """Interval constraints from ratings known up to ``eps``.

    Each rating ``(i, j, x)`` (0-based indices) becomes the box
    ``[max(scale_min, x - eps), min(x + eps, scale_max)]``; ``eps = 0``
    degenerates to the exact interval ``[x, x]``.
    """
    if not (eps >= 0 and np.isfinite(eps)):
        raise ValueError(f"eps must be finite and >= 0, got {eps}")
    if not scale_min <= scale_max:
        raise ValueError(f"empty rating scale [{scale_min}, {scale_max}]")
    ratings = list(ratings)
    entries = []
    for i, j, x in ratings:
        if not scale_min <= x <= scale_max:
            raise ValueError(f"rating {x} at ({i},{j}) outside the scale "
                             f"[{scale_min}, {scale_max}]")
        entries.append(box(i, j, max(scale_min, x - eps),
                           min(x + eps, scale_max)))
    if m is None:
        m = 1 + max((e.i for e in entries), default=-1)
    if n is None:
        n = 1 + max((e.j for e in entries), default=-1)
    return ObservationSet(m, n, entries)


def sample_mask(m: int, n: int, fraction: float, seed: int) -> np.ndarray:
    """Uniform random subset of ``floor(fraction * m * n)`` flat indices.

    Returned sorted, in row-major (C-order) flat indexing; deterministic
    per seed.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = int(fraction * m * n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(m * n, size=k, replace=False)).astype(np.int64)


class InpaintMode(Enum):
    """How image observations are turned into constraints.

    ``EQUALITY_ONLY`` pins the kept pixels and leaves the rest free;
    ``EQUALITY_PLUS_RANGE`` adds a box over ``[range_lo, range_hi]`` on
    every missing pixel; ``BOX_RANGE_EVERYWHERE`` does the same with the
    full pixel range, i.e. every pixel of the reconstruction is constrained
    (kept ones exactly, missing ones to [0, 255] or [0, 1]).
    """

    EQUALITY_ONLY = "eq"
    EQUALITY_PLUS_RANGE = "eq+range"
    BOX_RANGE_EVERYWHERE = "box255"


def image_to_observations(img: GrayImage, mask, mode: InpaintMode,
                          unit_scale: bool = False,
                          range_lo: float | None = None,
                          range_hi: float | None = None) -> ObservationSet:
    """Constraint set for in-painting ``img`` from the pixels in ``mask``.

    ``mask`` holds flat row-major indices of the kept pixels.  The default
    box range is the full pixel range of the chosen scale;
    ``EQUALITY_PLUS_RANGE`` accepts explicit overrides.
    """
    mode = InpaintMode(mode)
    m, n = img.height, img.width
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size and (mask.min() < 0 or mask.max() >= m * n):
        raise ValueError(f"mask indices outside [0, {m * n})")
    if np.unique(mask).size != mask.size:
        raise ValueError("mask contains duplicate indices")
    full_hi = 1.0 if unit_scale else 255.0
    if mode is InpaintMode.BOX_RANGE_EVERYWHERE or range_lo is None:
        lo_val = 0.0
    else:
        lo_val = float(range_lo)
    if mode is InpaintMode.BOX_RANGE_EVERYWHERE or range_hi is None:
        hi_val = full_hi
    else:
        hi_val = float(range_hi)

    vals = img.to_matrix(unit_scale).ravel()
    entries = [equality(int(f // n), int(f % n), vals[f]) for f in mask]
    if mode is not InpaintMode.EQUALITY_ONLY:
        missing = np.setdiff1d(np.arange(m * n, dtype=np.int64), mask,
                               assume_unique=True)
        entries += [box(int(f // n), int(f % n), lo_val, hi_val)
                    for f in missing]
    return ObservationSet(m, n, entries)


# ---------------------------------------------------------------------------
# PGM images

class _PgmScanner:
    """Byte tokenizer for PGM headers; tracks line numbers and comments."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.lineno = 1

    def _advance(self, k: int):
        self.lineno += self.data.count(b"\n", self.pos, self.pos + k)
        self.pos += k

    def skip_space(self):
        while self.pos < len(self.data):
            c = self.data[self.pos:self.pos + 1]
            if c.isspace():
                self._advance(1)
            elif c == b"#":
                end = self.data.find(b"\n", self.pos)
                self._advance((end if end != -1 else len(self.data)) - self.pos)
            else:
                return

    def token(self, what: str) -> bytes:
        self.skip_space()
        start = self.pos
        while (self.pos < len(self.data)
               and not self.data[self.pos:self.pos + 1].isspace()
               and self.data[self.pos:self.pos + 1] != b"#"):
            self.pos += 1
        if self.pos == start:
            raise ParseError(self.lineno, f"unexpected end of file, "
                             f"expected {what}")
        return self.data[start:self.pos]

    def int_token(self, what: str) -> int:
        tok = self.token(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(self.lineno,
                             f"bad {what} {tok!r}") from None


def read_pgm(data: bytes) -> GrayImage:
    """Parse a P2 (ASCII) or P5 (binary) PGM with maxval at most 255."""
    sc = _PgmScanner(data)
    magic = sc.token("magic number")
    if magic not in (b"P2", b"P5"):
        raise ParseError(sc.lineno, f"unsupported magic {magic!r}; "
                         f"expected P2 or P5")
    width = sc.int_token("width")
    height = sc.int_token("height")
    maxval = sc.int_token("maxval")
    if width < 1 or height < 1:
        raise ParseError(sc.lineno, f"bad image size {width} x {height}")
    if not 1 <= maxval <= 255:
        raise ParseError(sc.lineno, f"unsupported maxval {maxval}; "
                         f"this reader handles 8-bit images (maxval <= 255)")
    npx = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates the maxval from the raster.
        if sc.pos >= len(data) or not data[sc.pos:sc.pos + 1].isspace():
            raise ParseError(sc.lineno, "missing raster separator after maxval")
        sc._advance(1)
        raster = data[sc.pos:sc.pos + npx]
        if len(raster) != npx:
            raise ParseError(sc.lineno, f"raster truncated: expected {npx} "
                             f"bytes, found {len(raster)}")
        px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    else:
        vals = np.empty(npx, dtype=np.int64)
        for k in range(npx):
            vals[k] = sc.int_token("pixel value")
        px = vals.reshape(height, width)
    if px.max(initial=0) > maxval:
        raise ParseError(sc.lineno, f"pixel value exceeds maxval {maxval}")
    return GrayImage(px.astype(np.uint8))


def write_pgm(img: GrayImage, binary: bool = True) -> bytes:
    """Serialize to P5 (default) or P2."""
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n"
    if binary:
        return header.encode("ascii") + img.pixels.tobytes()
    body = "\n".join(" ".join(str(v) for v in row) for row in img.pixels)
    return (header + body + "\n").encode("ascii")


# ---------------------------------------------------------------------------
# dense-matrix text format

def write_dense(X) -> str:
    """Header ``rows cols`` then row-major values, 17 significant digits."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={X.ndim}")
    lines = [f"{X.shape[0]} {X.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in X]
    return "\n".join(lines) + "\n"


def read_dense(text: str) -> np.ndarray:
    """Inverse of :func:`write_dense`; value-exact round trip."""
    lines = _significant_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError(1, "empty file: expected header 'rows cols'") from None
    fields = header.split()
    if len(fields) != 2:
        raise ParseError(lineno, f"header must be 'rows cols', got {header!r}")
    rows = _parse_int(fields[0], lineno, "row count")
    cols = _parse_int(fields[1], lineno, "column count")
    if rows < 0 or cols < 0:
        raise ParseError(lineno, f"dimensions must be non-negative, "
                         f"got {rows} x {cols}")
    need = rows * cols
    vals = np.empty(need, dtype=np.float64)
    have = 0
    last_line = lineno
    for lineno, line in lines:
        last_line = lineno
        for tok in line.split():
            if have == need:
                raise ParseError(lineno, f"extra value beyond the "
                                 f"{rows} x {cols} payload")
            vals[have] = _parse_float(tok, lineno, "value")
            have += 1
    if have != need:
        raise ParseError(last_line, f"payload has {have} values, "
                         f"expected {need}")
    return vals.reshape(rows, cols)


# ---------------------------------------------------------------------------
# atomic output

def write_text_atomic(path: str, text: str):
    """Write via a temp file and rename, so failures leave no partial file."""
    _write_atomic(path, text.encode("utf-8"))


def write_bytes_atomic(path: str, data: bytes):
    _write_atomic(path, data)


def _write_atomic(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-",
                               suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
