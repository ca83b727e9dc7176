"""Bit-exact binary persistence for keys, encrypted databases, and tokens.

All three formats share the conventions: 4-byte ASCII magic, u16 version,
u32 template length n, then fixed-size little-endian payloads. Matrices are
(n+5)^2 IEEE-754 f64 values, row-major. Round-trips are lossless, so a file
written on one machine replays identically anywhere.

Database files carry a version-level test-mode marker (version 2 instead of
1): experiment databases whose raw evaluation values may be exposed are
tagged at creation, and debug tooling refuses to touch untagged files.
"""

from __future__ import annotations

import io
import os
import struct
from typing import Iterator

import numpy as np

from .matcore import Permutation
from .scheme import EncryptedTemplate, QueryToken, SecretKey

KEY_MAGIC = b"SBK1"
DB_MAGIC = b"SBD1"
TOKEN_MAGIC = b"SBT1"

VERSION = 1
DB_TEST_MODE_VERSION = 2

_KEY_HEADER = struct.Struct("<4sHI")
_DB_HEADER = struct.Struct("<4sHIQ")
_TOKEN_HEADER = struct.Struct("<4sHI")
_RECORD_ID = struct.Struct("<Q")


class StoreError(Exception):
    """Base class for file-format failures."""


class BadMagicError(StoreError):
    pass


class BadVersionError(StoreError):
    pass


class TruncatedFileError(StoreError):
    pass


class IntegrityError(StoreError):
    """Structurally valid framing holding inconsistent content."""


def _matrix_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _read_exact(f, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"{what}: wanted {size} bytes, got {len(data)}")
    return data


def _read_matrix(f, dim: int, what: str) -> np.ndarray:
    data = _read_exact(f, dim * dim * 8, what)
    return np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(dim, dim)


def _check_magic(got: bytes, want: bytes, path: str):
    if got != want:
        raise BadMagicError(f"{path}: magic {got!r}, expected {want!r}")


# -- key files ---------------------------------------------------------------

def write_key(path: str | os.PathLike, sk: SecretKey) -> None:
    dim = sk.ext_dim
    buf = io.BytesIO()
    buf.write(_KEY_HEADER.pack(KEY_MAGIC, VERSION, dim - 5))
    buf.write(sk.pi.mapping.astype("<u4").tobytes())
    for a in (sk.m1, sk.m1_inv, sk.m2, sk.m2_inv):
        buf.write(_matrix_bytes(a))
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def read_key(path: str | os.PathLike) -> SecretKey:
    with open(path, "rb") as f:
        magic, version, n = _KEY_HEADER.unpack(_read_exact(f, _KEY_HEADER.size, "key header"))
        _check_magic(magic, KEY_MAGIC, str(path))
        if version != VERSION:
            raise BadVersionError(f"{path}: key version {version}, expected {VERSION}")
        dim = n + 5
        pi_raw = np.frombuffer(_read_exact(f, dim * 4, "permutation"), dtype="<u4")
        try:
            pi = Permutation(pi_raw.astype(np.int64))
        except ValueError as e:
            raise IntegrityError(f"{path}: {e}") from e
        m1 = _read_matrix(f, dim, "M1")
        m1_inv = _read_matrix(f, dim, "M1inv")
        m2 = _read_matrix(f, dim, "M2")
        m2_inv = _read_matrix(f, dim, "M2inv")
        if f.read(1):
            raise IntegrityError(f"{path}: trailing bytes after key payload")
    return SecretKey(m1=m1, m2=m2, m1_inv=m1_inv, m2_inv=m2_inv, pi=pi)


# -- database files ----------------------------------------------------------

def record_size(n: int) -> int:
    """On-disk bytes per record: u64 id plus the two masked matrices."""
    return 8 + 2 * (n + 5) ** 2 * 8


def create_database(path: str | os.PathLike, n: int, test_mode: bool = False) -> None:
    if n < 1:
        raise ValueError("template dimension n must be >= 1")
    version = DB_TEST_MODE_VERSION if test_mode else VERSION
    with open(path, "wb") as f:
        f.write(_DB_HEADER.pack(DB_MAGIC, version, n, 0))


def _db_header(f, path: str) -> tuple[int, int, int]:
    magic, version, n, count = _DB_HEADER.unpack(_read_exact(f, _DB_HEADER.size, "db header"))
    _check_magic(magic, DB_MAGIC, path)
    if version not in (VERSION, DB_TEST_MODE_VERSION):
        raise BadVersionError(f"{path}: database version {version} not supported")
    return version, n, count


def database_info(path: str | os.PathLike) -> dict:
    with open(path, "rb") as f:
        version, n, count = _db_header(f, str(path))
    return {"n": n, "record_count": count, "test_mode": version == DB_TEST_MODE_VERSION}


def append_record(path: str | os.PathLike, ct: EncryptedTemplate) -> None:
    with open(path, "r+b") as f:
        version, n, count = _db_header(f, str(path))
        if ct.ext_dim != n + 5:
            raise ValueError(
                f"record {ct.id}: dimension {ct.ext_dim - 5} does not match database n={n}"
            )
        f.seek(0, os.SEEK_END)
        f.write(_RECORD_ID.pack(ct.id))
        f.write(_matrix_bytes(ct.c_p))
        f.write(_matrix_bytes(ct.c_q))
        f.seek(_DB_HEADER.size - 8)
        f.write(struct.pack("<Q", count + 1))


def scan(path: str | os.PathLike) -> Iterator[EncryptedTemplate]:
    """Stream records in append order; holds at most one record in memory.

    The record count is read once at open, so a scan concurrent with an
    append sees a consistent prefix of the database.
    """
    with open(path, "rb") as f:
        _, n, count = _db_header(f, str(path))
        dim = n + 5
        for _ in range(count):
            (rec_id,) = _RECORD_ID.unpack(_read_exact(f, 8, "record id"))
            c_p = _read_matrix(f, dim, f"record {rec_id} C_p")
            c_q = _read_matrix(f, dim, f"record {rec_id} C_q")
            yield EncryptedTemplate(id=rec_id, c_p=c_p, c_q=c_q)


# -- token files -------------------------------------------------------------

def write_token(path: str | os.PathLike, tok: QueryToken) -> None:
    with open(path, "wb") as f:
        f.write(_TOKEN_HEADER.pack(TOKEN_MAGIC, VERSION, tok.ext_dim - 5))
        f.write(_matrix_bytes(tok.c_y))


def read_token(path: str | os.PathLike, expect_n: int | None = None) -> QueryToken:
    with open(path, "rb") as f:
        magic, version, n = _TOKEN_HEADER.unpack(
            _read_exact(f, _TOKEN_HEADER.size, "token header")
        )
        _check_magic(magic, TOKEN_MAGIC, str(path))
        if version != VERSION:
            raise BadVersionError(f"{path}: token version {version}, expected {VERSION}")
        if expect_n is not None and n != expect_n:
            raise ValueError(f"token is for n={n}, database expects n={expect_n}")
        c_y = _read_matrix(f, n + 5, "C_y")
        if f.read(1):
            raise IntegrityError(f"{path}: trailing bytes after token payload")
    return QueryToken(c_y=c_y)
