"""Reader/writer for key-value archive streams of float matrices and int32 vectors.

An archive is a concatenation of entries, each an utterance key followed by a
payload. Binary and text payloads may be mixed within one stream; an entry is
binary iff the two bytes after the key's trailing space are ``0x00 0x42``.

Binary matrix entry:
    ``<key> 0x20 0x00 0x42 'F' 'M' 0x20 0x04 <rows:i32le> 0x04 <cols:i32le>``
    followed by ``rows*cols`` float32 little-endian values, row-major.
Binary int-vector entry:
    ``<key> 0x20 0x00 0x42 0x04 0x04 <size:i32le>`` followed by ``size``
    int32 little-endian values.
Text matrix entry: ``<key>  [`` then one line per row, then ``]``.
Text int-vector entry: ``<key> v1 v2 ... vn`` on a single line.

Only float32 matrices ("FM") and int32 vectors are supported; double
precision ("DM") and compressed matrices are rejected.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import ArkError

log = logging.getLogger(__name__)

BINARY_MARKER = b"\x00B"
_MATRIX_TOKEN = b"FM "
_INT_SIZE_BYTE = b"\x04"
# Whitespace bytes that would break the text grammar if they appeared in a key.
_KEY_FORBIDDEN = frozenset(b"\x00 \t\n\r\x0b\x0c")


@dataclass
class FeatureMatrix:
    """One utterance's feature rows: (T, D) float32, keyed by utterance id."""

    key: str
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"feature matrix for {self.key!r} must be 2-D, got shape {self.data.shape}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass
class AlignmentVector:
    """Per-frame pdf indices for one utterance."""

    key: str
    pdf_ids: np.ndarray

    def __post_init__(self) -> None:
        self.pdf_ids = np.asarray(self.pdf_ids, dtype=np.int32).reshape(-1)

    def __len__(self) -> int:
        return int(self.pdf_ids.shape[0])


def validate_key(key: str) -> None:
    """Raise ArkError unless ``key`` is writable in both binary and text mode."""
    if not key:
        raise ArkError("utterance key must be non-empty")
    raw = key.encode("utf-8")
    for b in raw:
        if b in _KEY_FORBIDDEN:
            raise ArkError(f"utterance key {key!r} contains forbidden byte 0x{b:02x}")


class _StreamReader:
    """Buffered byte reader that tracks the absolute offset for diagnostics."""

    def __init__(self, raw: BinaryIO) -> None:
        self._raw = raw
        self._buf = b""
        self.offset = 0

    def peek(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._raw.read(n - len(self._buf))
            if not chunk:
                break
            self._buf += chunk
        return self._buf[:n]

    def read(self, n: int) -> bytes:
        out = self.peek(n)
        self._buf = self._buf[len(out):]
        self.offset += len(out)
        return out

    def read_exact(self, n: int, what: str, key: str) -> bytes:
        at = self.offset
        out = self.read(n)
        if len(out) != n:
            raise ArkError(
                f"truncated archive at byte {at} (key {key!r}): "
                f"expected {n} bytes of {what}, got {len(out)}"
            )
        return out

    def read_line(self, key: str) -> str:
        """Read up to and including the next newline; error on EOF mid-entry."""
        chunks = []
        while True:
            b = self.read(1)
            if not b:
                if not chunks:
                    raise ArkError(f"truncated archive at byte {self.offset} (key {key!r}): unexpected end of text entry")
                break
            if b == b"\n":
                break
            chunks.append(b)
        try:
            return b"".join(chunks).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ArkError(f"undecodable text at byte {self.offset} (key {key!r}): {e}") from None


def _open_read(source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    return source, False


def _open_write(dest) -> tuple[BinaryIO, bool]:
    if isinstance(dest, (str, Path)):
        return open(dest, "wb"), True
    return dest, False


def _read_key(r: _StreamReader) -> str | None:
    """Read the next utterance key, skipping inter-entry whitespace. None at EOF."""
    while True:
        b = r.peek(1)
        if not b:
            return None
        if b in (b" ", b"\t", b"\r", b"\n"):
            r.read(1)
            continue
        break
    start = r.offset
    raw = bytearray()
    while True:
        b = r.read(1)
        if not b:
            raise ArkError(f"truncated archive at byte {r.offset}: key {bytes(raw)!r} not followed by a value")
        if b == b" ":
            break
        if b in (b"\x00", b"\n"):
            raise ArkError(f"malformed key at byte {start}: contains byte 0x{b[0]:02x}")
        raw += b
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ArkError(f"undecodable key at byte {start}: {e}") from None


def _read_i32(r: _StreamReader, what: str, key: str) -> int:
    return struct.unpack("<i", r.read_exact(4, what, key))[0]


def _expect_size_byte(r: _StreamReader, key: str) -> None:
    at = r.offset
    b = r.read_exact(1, "size prefix", key)
    if b != _INT_SIZE_BYTE:
        raise ArkError(f"malformed header at byte {at} (key {key!r}): expected 0x04 size prefix, got 0x{b[0]:02x}")


def _read_binary_matrix(r: _StreamReader, key: str) -> FeatureMatrix:
    at = r.offset
    token = r.read_exact(3, "header token", key)
    if token != _MATRIX_TOKEN:
        if token == b"DM ":
            raise ArkError(f"unsupported object at byte {at} (key {key!r}): double-precision matrices are not supported")
        if token.startswith(b"CM"):
            raise ArkError(f"unsupported object at byte {at} (key {key!r}): compressed matrices are not supported")
        raise ArkError(f"malformed header token {token!r} at byte {at} (key {key!r})")
    _expect_size_byte(r, key)
    rows = _read_i32(r, "row count", key)
    _expect_size_byte(r, key)
    cols = _read_i32(r, "column count", key)
    if rows < 0 or cols < 0:
        raise ArkError(f"negative dimensions {rows}x{cols} at byte {at} (key {key!r})")
    if rows < 1 or cols < 1:
        raise ArkError(f"empty matrix {rows}x{cols} at byte {at} (key {key!r}): matrices must have at least one row and column")
    if rows > (2**31 - 1) // max(cols, 1):
        raise ArkError(f"overflowing dimensions {rows}x{cols} at byte {at} (key {key!r})")
    payload = r.read_exact(rows * cols * 4, "float32 matrix data", key)
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()
    return FeatureMatrix(key, data)


def _parse_float(tok: str, key: str, offset: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise ArkError(f"malformed float {tok!r} near byte {offset} (key {key!r})") from None
    if not math.isfinite(value):
        raise ArkError(f"non-finite value {tok!r} near byte {offset} (key {key!r})")
    return value


def _read_text_matrix(r: _StreamReader, key: str) -> FeatureMatrix:
    at = r.offset
    while r.peek(1) == b" ":
        r.read(1)
    opener = r.read_exact(1, "matrix opening bracket", key)
    if opener != b"[":
        raise ArkError(f"malformed text matrix at byte {at} (key {key!r}): expected '[', got {opener!r}")
    rest = r.read_line(key).strip()
    rows: list[list[float]] = []
    pending = rest
    closed = False
    while not closed:
        toks = pending.split()
        if toks and toks[-1] == "]":
            toks = toks[:-1]
            closed = True
        elif "]" in toks:
            raise ArkError(f"malformed text matrix near byte {r.offset} (key {key!r}): ']' inside a row")
        if toks:
            rows.append([_parse_float(t, key, r.offset) for t in toks])
        if not closed:
            pending = r.read_line(key)
    if not rows:
        raise ArkError(f"empty text matrix at byte {at} (key {key!r})")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ArkError(f"ragged text matrix at byte {r.offset} (key {key!r}): row {i} has {len(row)} values, expected {width}")
    return FeatureMatrix(key, np.array(rows, dtype=np.float32))


def read_matrix_ark(source) -> Iterator[FeatureMatrix]:
    """Yield FeatureMatrix entries from a path or binary stream, in file order.

    Binary/text is auto-detected per entry. Duplicate keys are tolerated and
    reported as a warning. Only one entry is resident at a time.
    """
    f, owned = _open_read(source)
    try:
        r = _StreamReader(f)
        seen: set[str] = set()
        while True:
            key = _read_key(r)
            if key is None:
                return
            if key in seen:
                log.warning("duplicate key %r in matrix archive", key)
            seen.add(key)
            if r.peek(2) == BINARY_MARKER:
                r.read(2)
                yield _read_binary_matrix(r, key)
            else:
                yield _read_text_matrix(r, key)
    finally:
        if owned:
            f.close()


def _read_binary_int_vector(r: _StreamReader, key: str) -> AlignmentVector:
    at = r.offset
    widths = r.read_exact(2, "int-vector header", key)
    if widths != b"\x04\x04":
        raise ArkError(f"malformed int-vector header {widths!r} at byte {at} (key {key!r})")
    size = _read_i32(r, "vector size", key)
    if size < 0:
        raise ArkError(f"negative vector size {size} at byte {at} (key {key!r})")
    payload = r.read_exact(size * 4, "int32 vector data", key)
    data = np.frombuffer(payload, dtype="<i4").copy()
    if size and data.min() < 0:
        raise ArkError(f"negative element in int vector at byte {at} (key {key!r})")
    return AlignmentVector(key, data)


def _read_text_int_vector(r: _StreamReader, key: str) -> AlignmentVector:
    line = r.read_line(key)
    values = []
    for tok in line.split():
        try:
            v = int(tok)
        except ValueError:
            raise ArkError(f"malformed integer {tok!r} near byte {r.offset} (key {key!r})") from None
        if v < 0:
            raise ArkError(f"negative element {v} near byte {r.offset} (key {key!r})")
        values.append(v)
    return AlignmentVector(key, np.array(values, dtype=np.int32))


def read_int_vector_ark(source) -> Iterator[AlignmentVector]:
    """Yield AlignmentVector entries from a path or binary stream, in file order."""
    f, owned = _open_read(source)
    try:
        r = _StreamReader(f)
        seen: set[str] = set()
        while True:
            key = _read_key(r)
            if key is None:
                return
            if key in seen:
                log.warning("duplicate key %r in int-vector archive", key)
            seen.add(key)
            if r.peek(2) == BINARY_MARKER:
                r.read(2)
                yield _read_binary_int_vector(r, key)
            else:
                yield _read_text_int_vector(r, key)
    finally:
        if owned:
            f.close()


def format_float(value: float) -> str:
    """Print a float with 9 significant digits (exact float32 roundtrip)."""
    s = "%.9g" % value
    if "." not in s and "e" not in s and "n" not in s and "i" not in s:
        s += ".0"
    return s


def _validate_matrix(m: FeatureMatrix) -> None:
    validate_key(m.key)
    if m.rows < 1 or m.cols < 1:
        raise ArkError(f"matrix for key {m.key!r} must be at least 1x1, got {m.rows}x{m.cols}")
    if not np.all(np.isfinite(m.data)):
        raise ArkError(f"matrix for key {m.key!r} contains non-finite values")


def encode_matrix_binary(m: FeatureMatrix) -> bytes:
    return b"".join([
        m.key.encode("utf-8"), b" ",
        BINARY_MARKER, _MATRIX_TOKEN,
        _INT_SIZE_BYTE, struct.pack("<i", m.rows),
        _INT_SIZE_BYTE, struct.pack("<i", m.cols),
        np.ascontiguousarray(m.data, dtype="<f4").tobytes(),
    ])


def encode_matrix_text(m: FeatureMatrix) -> bytes:
    lines = [f"{m.key}  ["]
    for row in m.data:
        lines.append("  " + " ".join(format_float(float(v)) for v in row))
    lines.append("]")
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_matrix_ark(entries: Iterable[FeatureMatrix], dest, mode: str = "binary") -> None:
    """Write matrices to a path or binary stream. Entries are validated first."""
    if mode not in ("binary", "text"):
        raise ValueError(f"mode must be 'binary' or 'text', got {mode!r}")
    entries = list(entries)
    for m in entries:
        _validate_matrix(m)
    encode = encode_matrix_binary if mode == "binary" else encode_matrix_text
    f, owned = _open_write(dest)
    try:
        for m in entries:
            f.write(encode(m))
    finally:
        if owned:
            f.close()


def _validate_int_vector(v: AlignmentVector) -> None:
    validate_key(v.key)
    if len(v) and int(v.pdf_ids.min()) < 0:
        raise ArkError(f"int vector for key {v.key!r} contains a negative element")


def encode_int_vector_binary(v: AlignmentVector) -> bytes:
    return b"".join([
        v.key.encode("utf-8"), b" ",
        BINARY_MARKER, _INT_SIZE_BYTE, _INT_SIZE_BYTE,
        struct.pack("<i", len(v)),
        np.ascontiguousarray(v.pdf_ids, dtype="<i4").tobytes(),
    ])


def encode_int_vector_text(v: AlignmentVector) -> bytes:
    body = " ".join(str(int(x)) for x in v.pdf_ids)
    return f"{v.key} {body}\n".encode("utf-8")


def write_int_vector_ark(entries: Iterable[AlignmentVector], dest, mode: str = "binary") -> None:
    """Write int vectors to a path or binary stream. Entries are validated first."""
    if mode not in ("binary", "text"):
        raise ValueError(f"mode must be 'binary' or 'text', got {mode!r}")
    entries = list(entries)
    for v in entries:
        _validate_int_vector(v)
    encode = encode_int_vector_binary if mode == "binary" else encode_int_vector_text
    f, owned = _open_write(dest)
    try:
        for v in entries:
            f.write(encode(v))
    finally:
        if owned:
            f.close()


def read_matrix_ark_dict(source) -> dict[str, FeatureMatrix]:
    """Materialize a matrix archive keyed by utterance id (last wins on duplicates)."""
    return {m.key: m for m in read_matrix_ark(source)}


def read_int_vector_ark_dict(source) -> dict[str, AlignmentVector]:
    """Materialize an int-vector archive keyed by utterance id."""
    return {v.key: v for v in read_int_vector_ark(source)}
