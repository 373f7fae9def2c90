"""On-disk formats: feature maps, masks, prototype sets, bank and track state.

Layouts (all integers little-endian):

`.fmap` feature map
    magic "PCAF" | u16 version=1 | u32 height | u32 width | u32 channels
    | height*width*channels float32, row-major (H, W, C)

`.pcap` prototype set
    magic "PCAP" | u16 version=1 | u32 n_protos | u32 key_dim | u32 value_dim
    | f64 sigma2 | key means float32 (N*D) | value prototypes float32 (N*C_v)

`.pcab` memory-bank snapshot
    magic "PCAB" | u16 version=1 | u32 capacity | u32 count
    | count * i64 frame indices | count prototype-set blocks (PCAP layout)

`.pcat` instance-track state
    magic "PCAT" | u16 version=1 | i64 track_id | f64 momentum | i64 last_seen
    | foreground prototype-set block | background prototype-set block

Masks are binary PGM (P5, maxval 255); values >= 128 are foreground.

Values are stored as float32, so maps whose entries carry more than
float32 precision are rounded on write; round-trips are bit-exact for
float32-representable data.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .core import FeatureMap

FMAP_MAGIC = b"PCAF"
PROTO_MAGIC = b"PCAP"
BANK_MAGIC = b"PCAB"
TRACK_MAGIC = b"PCAT"
VERSION = 1

# Caps the element count a header may declare; guards against corrupt
# headers allocating absurd buffers.
MAX_ELEMENTS = 2**31


class FileFormatError(Exception):
    """Base class for malformed on-disk data."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class TruncatedPayloadError(FileFormatError):
    """File ended before the payload promised by the header."""


class DimensionOverflowError(FileFormatError):
    """Header declares dimensions whose product exceeds the supported range."""


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedPayloadError(
            f"truncated {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def _check_magic(fh: BinaryIO, magic: bytes):
    got = fh.read(len(magic))
    if got != magic:
        raise BadMagicError(f"bad magic: expected {magic!r}, got {got!r}")


def _check_version(fh: BinaryIO):
    (ver,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
    if ver != VERSION:
        raise FileFormatError(f"unsupported format version {ver}")


def write_fmap(path, fmap: FeatureMap):
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<HIII", VERSION, fmap.height, fmap.width,
                             fmap.channels))
        fh.write(np.ascontiguousarray(
            fmap.data, dtype="<f4").tobytes())


def read_fmap(path) -> FeatureMap:
    with open(path, "rb") as fh:
        _check_magic(fh, FMAP_MAGIC)
        _check_version(fh)
        h, w, c = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if h == 0 or w == 0 or c == 0 or h * w * c > MAX_ELEMENTS:
            raise DimensionOverflowError(
                f"unsupported dimensions {h}x{w}x{c}")
        payload = _read_exact(fh, h * w * c * 4, "feature payload")
        trailing = fh.read(1)
        if trailing:
            raise FileFormatError("trailing bytes after feature payload")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return FeatureMap(h, w, c, data)


def write_pgm(path, values: np.ndarray):
    """Write a 2-D grid as binary PGM; boolean grids map to {0, 255}."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM payload must be 2-D")
    if arr.dtype == bool:
        arr = np.where(arr, 255, 0).astype(np.uint8)
    else:
        arr = arr.astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a uint8 (H, W) array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise BadMagicError("not a binary PGM (missing P5)")
    # header tokens: width, height, maxval; '#' comments allowed
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedPayloadError("PGM header ended early")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FileFormatError(f"unsupported PGM maxval {maxval}")
    if w <= 0 or h <= 0 or w * h > MAX_ELEMENTS:
        raise DimensionOverflowError(f"unsupported PGM dimensions {w}x{h}")
    payload = data[pos:pos + w * h]
    if len(payload) != w * h:
        raise TruncatedPayloadError(
            f"truncated PGM payload: wanted {w * h} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def _write_proto_block(fh: BinaryIO, protos):
    n, d = protos.key_means.shape
    c_v = protos.value_protos.shape[1]
    fh.write(PROTO_MAGIC)
    fh.write(struct.pack("<HIIId", VERSION, n, d, c_v, protos.sigma2))
    fh.write(np.ascontiguousarray(protos.key_means, dtype="<f4").tobytes())
    fh.write(np.ascontiguousarray(protos.value_protos, dtype="<f4").tobytes())


def _read_proto_block(fh: BinaryIO):
    from .gmm import PrototypeSet

    _check_magic(fh, PROTO_MAGIC)
    _check_version(fh)
    n, d, c_v = struct.unpack("<III", _read_exact(fh, 12, "prototype header"))
    (sigma2,) = struct.unpack("<d", _read_exact(fh, 8, "prototype header"))
    if n == 0 or d == 0 or c_v == 0 or n * max(d, c_v) > MAX_ELEMENTS:
        raise DimensionOverflowError(
            f"unsupported prototype dimensions N={n} D={d} C_v={c_v}")
    keys = np.frombuffer(
        _read_exact(fh, n * d * 4, "key means"), dtype="<f4")
    values = np.frombuffer(
        _read_exact(fh, n * c_v * 4, "value prototypes"), dtype="<f4")
    return PrototypeSet(keys.astype(np.float64).reshape(n, d),
                        values.astype(np.float64).reshape(n, c_v), sigma2)


def write_prototype_set(path, protos):
    with open(path, "wb") as fh:
        _write_proto_block(fh, protos)


def read_prototype_set(path):
    with open(path, "rb") as fh:
        ps = _read_proto_block(fh)
        if fh.read(1):
            raise FileFormatError("trailing bytes after prototype payload")
    return ps


def write_bank(path, bank):
    with open(path, "wb") as fh:
        fh.write(BANK_MAGIC)
        fh.write(struct.pack("<HII", VERSION, bank.capacity, len(bank)))
        for index, _ in bank.frames:
            fh.write(struct.pack("<q", index))
        for _, protos in bank.frames:
            _write_proto_block(fh, protos)


def read_bank(path):
    from .memory import MemoryBank

    with open(path, "rb") as fh:
        _check_magic(fh, BANK_MAGIC)
        _check_version(fh)
        capacity, count = struct.unpack("<II", _read_exact(fh, 8, "bank header"))
        if capacity == 0 or count > capacity:
            raise FileFormatError(
                f"inconsistent bank header: capacity={capacity} count={count}")
        indices = [struct.unpack("<q", _read_exact(fh, 8, "frame index"))[0]
                   for _ in range(count)]
        bank = MemoryBank(capacity)
        for index in indices:
            bank.push_frame(_read_proto_block(fh), index)
        if fh.read(1):
            raise FileFormatError("trailing bytes after bank payload")
    return bank


def write_track(path, track):
    with open(path, "wb") as fh:
        fh.write(TRACK_MAGIC)
        fh.write(struct.pack("<Hqdq", VERSION, track.track_id, track.momentum,
                             track.last_seen))
        _write_proto_block(fh, track.fg_protos)
        _write_proto_block(fh, track.bg_protos)


def read_track(path):
    from .instance import InstanceTrack

    with open(path, "rb") as fh:
        _check_magic(fh, TRACK_MAGIC)
        _check_version(fh)
        track_id, momentum, last_seen = struct.unpack(
            "<qdq", _read_exact(fh, 24, "track header"))
        fg = _read_proto_block(fh)
        bg = _read_proto_block(fh)
        if fh.read(1):
            raise FileFormatError("trailing bytes after track payload")
    return InstanceTrack(track_id, fg, bg, momentum, last_seen)
