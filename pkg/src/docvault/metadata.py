"""Document records: metadata in the store, blobs in the filesystem.

Records carry everything needed to search, authorize, and verify a stored
document without touching the blob.  The public identifier (doc_id) is
deliberately distinct from the on-disk opaque name so no API surface ever
has to reveal a storage path.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
from dataclasses import dataclass, asdict
from pathlib import Path

from .errors import DuplicateOpaqueName, StorageFailure
from .journal import JournalStore
from .naming import OpaqueName
from .placement import DENY_CONFIG_NAME, INDEX_PLACEHOLDER_NAME, PlacementPolicy

_DOC_PREFIX = "doc:"

DEFAULT_PAGE_SIZE = 100


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    owner: str
    original_filename: str
    media_type: str
    size_bytes: int
    upload_timestamp: int
    opaque_name: OpaqueName
    checksum: str  # lowercase hex sha256 of blob content
    policy: PlacementPolicy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["opaque_name"] = self.opaque_name.render()
        d["policy"] = self.policy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentRecord":
        return cls(
            doc_id=d["doc_id"],
            owner=d["owner"],
            original_filename=d["original_filename"],
            media_type=d["media_type"],
            size_bytes=d["size_bytes"],
            upload_timestamp=d["upload_timestamp"],
            opaque_name=OpaqueName.parse(d["opaque_name"]),
            checksum=d["checksum"],
            policy=PlacementPolicy(d["policy"]),
        )

    def public_dict(self) -> dict:
        """The fields safe to return to clients; no storage names, no paths."""
        return {
            "doc_id": self.doc_id,
            "owner": self.owner,
            "original_filename": self.original_filename,
            "media_type": self.media_type,
            "size_bytes": self.size_bytes,
            "upload_timestamp": self.upload_timestamp,
        }


def new_doc_id() -> str:
    return "d" + secrets.token_hex(12)


class MetadataStore:
    """Record store over the journal; one writer, many readers.

    Uniqueness of doc_id and opaque_name is enforced under the journal's
    lock, so concurrent puts cannot both claim the same name.
    """

    def __init__(self, journal: JournalStore):
        self._journal = journal
        self._by_name: dict[str, str] = {}  # rendered opaque name -> doc_id
        for key, value in journal.items(_DOC_PREFIX):
            self._by_name[value["opaque_name"]] = value["doc_id"]

    @property
    def lock(self) -> threading.RLock:
        return self._journal.lock

    def put_record(self, record: DocumentRecord) -> str:
        rendered = record.opaque_name.render()
        with self._journal.lock:
            if rendered in self._by_name:
                raise DuplicateOpaqueName(rendered)
            if self._journal.get(_DOC_PREFIX + record.doc_id) is not None:
                raise StorageFailure(f"doc_id collision: {record.doc_id}")
            self._journal.put(_DOC_PREFIX + record.doc_id, record.to_dict())
            self._by_name[rendered] = record.doc_id
        return record.doc_id

    def get_by_id(self, doc_id: str) -> DocumentRecord | None:
        value = self._journal.get(_DOC_PREFIX + doc_id)
        return DocumentRecord.from_dict(value) if value else None

    def get_by_opaque_name(self, name: OpaqueName) -> DocumentRecord | None:
        doc_id = self._by_name.get(name.render())
        return self.get_by_id(doc_id) if doc_id else None

    def list_by_owner(
        self, owner: str, cursor: str | None = None, page_size: int = DEFAULT_PAGE_SIZE
    ) -> tuple[list[DocumentRecord], str | None]:
        records = [
            DocumentRecord.from_dict(v)
            for _, v in self._journal.items(_DOC_PREFIX)
            if v["owner"] == owner
        ]
        return _paginate(records, cursor, page_size)

    def list_all(
        self, cursor: str | None = None, page_size: int = DEFAULT_PAGE_SIZE
    ) -> tuple[list[DocumentRecord], str | None]:
        records = [DocumentRecord.from_dict(v) for _, v in self._journal.items(_DOC_PREFIX)]
        return _paginate(records, cursor, page_size)

    def delete_record(self, doc_id: str) -> bool:
        with self._journal.lock:
            record = self.get_by_id(doc_id)
            if record is None:
                return False
            self._journal.delete(_DOC_PREFIX + doc_id)
            self._by_name.pop(record.opaque_name.render(), None)
            return True


def _paginate(
    records: list[DocumentRecord], cursor: str | None, page_size: int
) -> tuple[list[DocumentRecord], str | None]:
    records.sort(key=lambda r: (r.upload_timestamp, r.doc_id))
    start = 0
    if cursor:
        for i, r in enumerate(records):
            if r.doc_id == cursor:
                start = i + 1
                break
        else:
            return [], None
    page = records[start : start + page_size]
    next_cursor = page[-1].doc_id if len(page) == page_size and start + page_size < len(records) else None
    return page, next_cursor


@dataclass(frozen=True)
class ConsistencyIssue:
    kind: str  # "dangling-record", "orphan-blob", "size-mismatch", "checksum-mismatch"
    doc_id: str | None
    path: str
    detail: str


_PROTECTION_FILES = {DENY_CONFIG_NAME, INDEX_PLACEHOLDER_NAME}


def sha256_file(path: Path, chunk_size: int = 1 << 16) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while chunk := fh.read(chunk_size):
            h.update(chunk)
    return h.hexdigest()


def check_consistency(
    store: MetadataStore, vault_dir: str | Path, verify_checksums: bool = True
) -> list[ConsistencyIssue]:
    """Referential sweep between the record store and the blob directory.

    Every record must resolve to a blob of matching size (and checksum when
    requested); every non-artifact file in the vault must have exactly one
    record.
    """
    vault = Path(vault_dir)
    issues: list[ConsistencyIssue] = []
    recorded_names: set[str] = set()

    records, cursor = store.list_all(page_size=10_000)
    while True:
        for record in records:
            rendered = record.opaque_name.render()
            recorded_names.add(rendered)
            blob = vault / rendered
            if not blob.is_file():
                issues.append(
                    ConsistencyIssue("dangling-record", record.doc_id, str(blob), "blob missing")
                )
                continue
            actual_size = blob.stat().st_size
            if actual_size != record.size_bytes:
                issues.append(
                    ConsistencyIssue(
                        "size-mismatch",
                        record.doc_id,
                        str(blob),
                        f"record says {record.size_bytes} bytes, blob has {actual_size}",
                    )
                )
            elif verify_checksums and sha256_file(blob) != record.checksum:
                issues.append(
                    ConsistencyIssue(
                        "checksum-mismatch", record.doc_id, str(blob), "sha256 differs from record"
                    )
                )
        if not cursor:
            break
        records, cursor = store.list_all(cursor=cursor, page_size=10_000)

    if vault.is_dir():
        for entry in sorted(vault.iterdir()):
            if entry.name in _PROTECTION_FILES or not entry.is_file():
                continue
            if entry.name not in recorded_names:
                issues.append(
                    ConsistencyIssue("orphan-blob", None, str(entry), "no record for blob")
                )

    return issues
