"""The HTTP face of the vault: upload, list, download, delete.

The routing table maps URLs onto store operations only; no route ever maps
a URL path onto vault_dir contents, so a blob is structurally unreachable
as a static file.  Requests with traversal segments are rejected before
anything touches the filesystem.  Downloads go through the mediated
delivery path and carry its exact header recipe; response bodies and
headers never contain an opaque storage name or a vault path.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import BinaryIO
from urllib.parse import parse_qs, unquote, urlsplit

from . import delivery
from .access import Action, Principal, Role, TokenStore, authorize, parse_bearer
from .config import ServiceConfig
from .errors import (
    BlobMissing,
    DuplicateOpaqueName,
    NotFound,
    RangeNotSatisfiable,
    TooLarge,
)
from .journal import JournalStore
from .metadata import DocumentRecord, MetadataStore, new_doc_id
from .naming import NameInputs, SecretKey, derive_opaque_name
from .placement import materialize_layout

MAX_NAME_RETRIES = 32
_FALLBACK_EXTENSION = "bin"


def extension_for(filename: str) -> str:
    """Lowercased extension of the upload, or a fixed fallback when absent."""
    ext = os.path.splitext(filename)[1].lstrip(".").lower()
    if ext and len(ext) <= 10 and ext.isalnum() and ext.isascii():
        return ext
    return _FALLBACK_EXTENSION


class VaultCore:
    """Store-level operations shared by the HTTP service and the local CLI."""

    def __init__(self, config: ServiceConfig, key: SecretKey, journal: JournalStore):
        self.config = config
        self.key = key
        self.journal = journal
        self.records = MetadataStore(journal)
        self.tokens = TokenStore(journal)
        self.vault_dir = Path(config.vault_dir)
        # last timestamp slot handed out per (username, extension); lets a
        # burst of same-second uploads claim ts, ts+1, ... without rescanning
        self._last_slot: dict[tuple[str, str], int] = {}

    def upload(
        self,
        principal: Principal,
        original_filename: str,
        content: BinaryIO,
        content_length: int,
        now: int | None = None,
    ) -> DocumentRecord:
        """Store one document: atomic blob write, then the metadata record.

        The blob lands under a temp name and is renamed into place only when
        fully written, so a failed upload leaves nothing addressable.  A
        same-user same-second name collision retries with the timestamp
        bumped by one.
        """
        if content_length > self.config.max_upload_bytes:
            raise TooLarge(
                f"{content_length} bytes exceeds limit {self.config.max_upload_bytes}"
            )
        if not original_filename:
            raise ValueError("original_filename must be non-empty")

        ext = extension_for(original_filename)
        base_ts = int(time.time()) if now is None else now

        sha = hashlib.sha256()
        head = b""
        fd, tmp_path = tempfile.mkstemp(prefix=".upload-", dir=self.vault_dir)
        try:
            with os.fdopen(fd, "wb") as tmp:
                remaining = content_length
                while remaining > 0:
                    chunk = content.read(min(delivery.CHUNK_SIZE, remaining))
                    if not chunk:
                        raise IOError("request body shorter than declared length")
                    if len(head) < 512:
                        head += chunk[: 512 - len(head)]
                    sha.update(chunk)
                    tmp.write(chunk)
                    remaining -= len(chunk)
                tmp.flush()
                os.fsync(tmp.fileno())
            os.chmod(tmp_path, 0o600)

            media_type = delivery.detect_media_type(original_filename, head)
            record = None
            with self.records.lock:
                slot_key = (principal.username, ext)
                start_ts = max(base_ts, self._last_slot.get(slot_key, -1) + 1)
                for attempt in range(MAX_NAME_RETRIES):
                    ts = start_ts + attempt
                    name = derive_opaque_name(
                        NameInputs(principal.username, ts, ext), self.key
                    )
                    blob_path = self.vault_dir / name.render()
                    if blob_path.exists() or self.records.get_by_opaque_name(name):
                        continue
                    record = DocumentRecord(
                        doc_id=new_doc_id(),
                        owner=principal.username,
                        original_filename=original_filename,
                        media_type=media_type,
                        size_bytes=content_length,
                        upload_timestamp=ts,
                        opaque_name=name,
                        checksum=sha.hexdigest(),
                        policy=self.config.policy,
                    )
                    os.replace(tmp_path, blob_path)
                    tmp_path = None
                    try:
                        self.records.put_record(record)
                    except Exception:
                        blob_path.unlink(missing_ok=True)
                        raise
                    self._last_slot[slot_key] = ts
                    break
                else:
                    raise DuplicateOpaqueName(
                        f"no free storage name for {principal.username!r} "
                        f"near t={base_ts}"
                    )
            return record
        finally:
            if tmp_path is not None:
                Path(tmp_path).unlink(missing_ok=True)

    def _authorized_record(
        self, principal: Principal, doc_id: str, action: Action
    ) -> tuple[DocumentRecord, object]:
        record = self.records.get_by_id(doc_id)
        if record is None:
            raise NotFound(doc_id)
        proof = authorize(principal, record, action)
        if proof is None:
            # Denied reads as NotFound so non-owners cannot confirm existence.
            raise NotFound(doc_id)
        return record, proof

    def download(
        self,
        principal: Principal,
        doc_id: str,
        byte_range: tuple[int, int] | None = None,
    ) -> delivery.StreamResult:
        record, proof = self._authorized_record(principal, doc_id, Action.READ)
        return delivery.stream_document(
            record, self.vault_dir, proof, byte_range=byte_range,
            download_name=record.original_filename,
        )

    def list_documents(self, principal: Principal, cursor: str | None = None):
        if principal.role is Role.ADMIN:
            return self.records.list_all(cursor=cursor)
        return self.records.list_by_owner(principal.username, cursor=cursor)

    def delete_document(self, principal: Principal, doc_id: str) -> None:
        record, _proof = self._authorized_record(principal, doc_id, Action.DELETE)
        # Record first, then blob: a crash in between leaves an orphan blob
        # (found by fsck), never a record pointing at nothing.
        if not self.records.delete_record(doc_id):
            raise NotFound(doc_id)
        (self.vault_dir / record.opaque_name.render()).unlink(missing_ok=True)


def _has_traversal(path: str) -> bool:
    decoded = unquote(path)
    return any(seg in ("..", ".") for seg in decoded.split("/") if seg != "")


class VaultRequestHandler(BaseHTTPRequestHandler):
    server_version = "DocVault"
    protocol_version = "HTTP/1.1"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _authenticate(self) -> Principal | None:
        token = parse_bearer(self.headers.get("Authorization"))
        if token is None:
            return None
        return self.server.core.tokens.authenticate(token)

    def _reject_bad_path(self) -> bool:
        if _has_traversal(self.path):
            self._send_json(400, {"error": "invalid path"})
            return True
        return False

    # -- verbs ------------------------------------------------------------

    def do_GET(self):
        if self._reject_bad_path():
            return
        url = urlsplit(self.path)
        if url.path == "/healthz":
            self._send_json(200, {"status": "ok"})
            return
        if url.path == "/documents":
            self._handle_list(url)
            return
        if url.path.startswith("/documents/"):
            self._handle_download(url)
            return
        self._send_json(404, {"error": "not found"})

    def do_POST(self):
        if self._reject_bad_path():
            return
        url = urlsplit(self.path)
        if url.path != "/documents":
            self._send_json(404, {"error": "not found"})
            return
        principal = self._authenticate()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        query = parse_qs(url.query)
        filename = (query.get("filename") or [""])[0] or self.headers.get("X-Filename", "")
        if not filename:
            self._send_json(400, {"error": "filename parameter required"})
            return
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            self._send_json(411, {"error": "length required"})
            return
        core: VaultCore = self.server.core
        try:
            record = core.upload(principal, filename, self.rfile, length)
        except TooLarge:
            self._send_json(413, {"error": "upload too large"})
            return
        except DuplicateOpaqueName:
            self._send_json(409, {"error": "could not allocate a storage name"})
            return
        except IOError:
            self._send_json(400, {"error": "truncated request body"})
            return
        self._send_json(201, record.public_dict())

    def do_DELETE(self):
        if self._reject_bad_path():
            return
        url = urlsplit(self.path)
        if not url.path.startswith("/documents/"):
            self._send_json(404, {"error": "not found"})
            return
        principal = self._authenticate()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        doc_id = url.path[len("/documents/"):]
        try:
            self.server.core.delete_document(principal, doc_id)
        except NotFound:
            self._send_json(404, {"error": "not found"})
            return
        self._send_json(200, {"deleted": doc_id})

    # -- route bodies ------------------------------------------------------

    def _handle_list(self, url):
        principal = self._authenticate()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        cursor = (parse_qs(url.query).get("cursor") or [None])[0]
        records, next_cursor = self.server.core.list_documents(principal, cursor)
        self._send_json(
            200,
            {
                "documents": [r.public_dict() for r in records],
                "next_cursor": next_cursor,
            },
        )

    def _handle_download(self, url):
        principal = self._authenticate()
        if principal is None:
            self._send_json(401, {"error": "authentication required"})
            return
        doc_id = url.path[len("/documents/"):]
        if "/" in doc_id:
            self._send_json(404, {"error": "not found"})
            return
        core: VaultCore = self.server.core
        try:
            record = core.records.get_by_id(doc_id)
            if record is None:
                raise NotFound(doc_id)
            byte_range = delivery.parse_range_header(
                self.headers.get("Range"), record.size_bytes
            )
            result = core.download(principal, doc_id, byte_range)
        except NotFound:
            self._send_json(404, {"error": "not found"})
            return
        except RangeNotSatisfiable:
            self._send_json(416, {"error": "range not satisfiable"})
            return
        except BlobMissing:
            self._send_json(500, {"error": "stored document unavailable"})
            return

        # Exactly the mediated-delivery header set, nothing else.
        self.send_response_only(result.status)
        for name, value in result.headers.as_pairs():
            self.send_header(name, value)
        if result.content_range:
            self.send_header("Content-Range", result.content_range)
        self.end_headers()
        try:
            for chunk in result.chunks():
                self.wfile.write(chunk)
        except BlobMissing:
            self.close_connection = True


class VaultHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, core: VaultCore):
        super().__init__(address, VaultRequestHandler)
        self.core = core


class VaultService:
    """Owns the server thread; used by `vault serve` and the test harness."""

    def __init__(self, config: ServiceConfig, key: SecretKey | None = None):
        self.config = config
        key = key if key is not None else config.load_key()
        materialize_layout(config.layout())
        self.journal = JournalStore(config.store_path)
        self.core = VaultCore(config, key, self.journal)
        self._server = VaultHTTPServer((config.bind_host, config.bind_port), self.core)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self):
        self._server.serve_forever()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)
        self.journal.close()
