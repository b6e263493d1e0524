"""Mediated blob delivery: read from the filesystem, emit explicit headers.

A protected document is never handed to a web server as a static file.
The application opens the blob itself, builds the response headers
(Content-Type, Content-Length, Accept-Ranges, Content-Disposition) and
streams the content in bounded-size chunks.  Single byte ranges are
honored so the advertised ``Accept-Ranges: bytes`` is truthful.
"""

from __future__ import annotations

import mimetypes
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .access import AccessProof
from .errors import BlobMissing, RangeNotSatisfiable
from .metadata import DocumentRecord

CHUNK_SIZE = 64 * 1024

_EXTENSION_TYPES = {
    ".pdf": "application/pdf",
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".gif": "image/gif",
    ".zip": "application/zip",
    ".txt": "text/plain",
    ".html": "text/html",
    ".htm": "text/html",
    ".json": "application/json",
    ".csv": "text/csv",
}

_MAGIC_TYPES = [
    (b"%PDF", "application/pdf"),
    (b"\x89PNG\r\n\x1a\n", "image/png"),
    (b"\xff\xd8\xff", "image/jpeg"),
    (b"PK\x03\x04", "application/zip"),
]

_DISPOSITION_FORBIDDEN = set('"\r\n/\\')


@dataclass(frozen=True)
class DeliveryHeaders:
    content_type: str
    content_length: int
    accept_ranges: str
    content_disposition: str

    def as_pairs(self) -> list[tuple[str, str]]:
        return [
            ("Content-Type", self.content_type),
            ("Content-Length", str(self.content_length)),
            ("Accept-Ranges", self.accept_ranges),
            ("Content-Disposition", self.content_disposition),
        ]


def sanitize_download_name(name: str) -> str:
    return "".join(c for c in name if c not in _DISPOSITION_FORBIDDEN)


def build_headers(record: DocumentRecord, download_name: str) -> DeliveryHeaders:
    """Headers for a whole-file download of this record."""
    return DeliveryHeaders(
        content_type=record.media_type,
        content_length=record.size_bytes,
        accept_ranges="bytes",
        content_disposition=f'attachment; filename="{sanitize_download_name(download_name)}"',
    )


def detect_media_type(original_filename: str, sniff: bytes = b"") -> str:
    """Extension lookup first, then magic-byte sniffing, then octet-stream."""
    ext = os.path.splitext(original_filename.lower())[1]
    if ext in _EXTENSION_TYPES:
        return _EXTENSION_TYPES[ext]
    guessed, _ = mimetypes.guess_type(original_filename)
    if guessed:
        return guessed
    head = sniff[:512]
    for magic, mtype in _MAGIC_TYPES:
        if head.startswith(magic):
            return mtype
    if head and b"\x00" not in head:
        try:
            head.decode("utf-8")
            return "text/plain"
        except UnicodeDecodeError:
            pass
    return "application/octet-stream"


@dataclass(frozen=True)
class StreamResult:
    """One prepared response: status, headers, and a chunk iterator."""

    status: int  # 200 whole file, 206 partial
    headers: DeliveryHeaders
    content_range: str | None
    offset: int
    length: int
    _path: Path
    chunk_size: int = CHUNK_SIZE

    def chunks(self) -> Iterator[bytes]:
        """Yield exactly `length` octets starting at `offset`.

        Reads in fixed-size chunks, so peak memory is independent of blob
        size.  The file is opened read-only and its length was stat'ed once
        up front; if it shrank in between, this raises rather than padding.
        """
        remaining = self.length
        with open(self._path, "rb") as fh:
            fh.seek(self.offset)
            while remaining > 0:
                chunk = fh.read(min(self.chunk_size, remaining))
                if not chunk:
                    raise BlobMissing(
                        f"blob truncated while streaming: {self._path.name}"
                    )
                remaining -= len(chunk)
                yield chunk


def parse_range_header(value: str | None, size: int) -> tuple[int, int] | None:
    """Parse a single bytes range into (start, end) inclusive.

    Returns None for absent, malformed, or multi-range headers (the caller
    then serves the full file).  Raises RangeNotSatisfiable when the range
    is well-formed but lies past the end of the blob.
    """
    if not value:
        return None
    unit, _, spec = value.partition("=")
    if unit.strip() != "bytes" or "," in spec:
        return None
    start_s, sep, end_s = spec.strip().partition("-")
    if not sep:
        return None
    try:
        if start_s == "":
            # suffix form: last N bytes
            n = int(end_s)
            if n <= 0 or size == 0:
                raise RangeNotSatisfiable(value)
            return max(0, size - n), size - 1
        start = int(start_s)
        end = int(end_s) if end_s else size - 1
    except ValueError:
        return None
    if start < 0 or (end_s and end < start):
        return None
    if start >= size:
        raise RangeNotSatisfiable(value)
    return start, min(end, size - 1)


def stream_document(
    record: DocumentRecord,
    vault_dir: str | Path,
    authz_proof: AccessProof,
    byte_range: tuple[int, int] | None = None,
    download_name: str | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> StreamResult:
    """Prepare the mediated response for one record.

    Requires an AccessProof for this document (only authorize() can issue
    one), confines the read to vault_dir, and never modifies the blob.
    """
    if not isinstance(authz_proof, AccessProof) or authz_proof.doc_id != record.doc_id:
        raise PermissionError("delivery requires an authorization proof for this document")

    vault = Path(vault_dir).resolve()
    path = (vault / record.opaque_name.render()).resolve()
    if path.parent != vault:
        raise BlobMissing(f"blob path escapes the vault: {record.opaque_name.render()}")

    try:
        size = path.stat().st_size
    except FileNotFoundError:
        raise BlobMissing(f"no blob for document {record.doc_id}")

    name = download_name if download_name is not None else record.original_filename
    if byte_range is None:
        headers = build_headers(record, name)
        return StreamResult(
            status=200, headers=headers, content_range=None,
            offset=0, length=size, _path=path, chunk_size=chunk_size,
        )

    start, end = byte_range
    if start >= size:
        raise RangeNotSatisfiable(f"range start {start} >= blob size {size}")
    end = min(end, size - 1)
    length = end - start + 1
    headers = DeliveryHeaders(
        content_type=record.media_type,
        content_length=length,
        accept_ranges="bytes",
        content_disposition=f'attachment; filename="{sanitize_download_name(name)}"',
    )
    return StreamResult(
        status=206, headers=headers, content_range=f"bytes {start}-{end}/{size}",
        offset=start, length=length, _path=path, chunk_size=chunk_size,
    )
