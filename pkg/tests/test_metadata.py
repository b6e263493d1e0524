import hashlib
import random
import threading

import pytest

from docvault.errors import DuplicateOpaqueName
from docvault.journal import JournalStore
from docvault.metadata import (
    ConsistencyIssue,
    DocumentRecord,
    MetadataStore,
    check_consistency,
    new_doc_id,
)
from docvault.naming import OpaqueName
from docvault.placement import PlacementPolicy


def make_record(i: int = 0, owner: str = "alice", **kw) -> DocumentRecord:
    digest = hashlib.md5(f"{owner}-{i}".encode()).hexdigest()
    defaults = dict(
        doc_id=new_doc_id(),
        owner=owner,
        original_filename=f"file{i}.pdf",
        media_type="application/pdf",
        size_bytes=10,
        upload_timestamp=1_000_000 + i,
        opaque_name=OpaqueName(digest, "pdf"),
        checksum=hashlib.sha256(b"x" * 10).hexdigest(),
        policy=PlacementPolicy.DENIED_SUBDIR,
    )
    defaults.update(kw)
    return DocumentRecord(**defaults)


@pytest.fixture
def store(tmp_path):
    journal = JournalStore(tmp_path / "store.journal")
    yield MetadataStore(journal)
    journal.close()


class TestPutGet:
    def test_roundtrip(self, store):
        record = make_record()
        doc_id = store.put_record(record)
        assert store.get_by_id(doc_id) == record

    def test_duplicate_opaque_name(self, store):
        record = make_record()
        store.put_record(record)
        clone = make_record(doc_id=new_doc_id(), opaque_name=record.opaque_name)
        with pytest.raises(DuplicateOpaqueName):
            store.put_record(clone)

    def test_get_by_opaque_name(self, store):
        record = make_record()
        store.put_record(record)
        assert store.get_by_opaque_name(record.opaque_name) == record

    def test_absent_opaque_name(self, store):
        assert store.get_by_opaque_name(OpaqueName("0" * 32, "pdf")) is None

    def test_extension_is_part_of_the_name(self, store):
        record = make_record()
        store.put_record(record)
        other_ext = OpaqueName(record.opaque_name.digest_hex, "txt")
        assert store.get_by_opaque_name(other_ext) is None


class TestDurability:
    def test_survives_reopen(self, tmp_path):
        path = tmp_path / "store.journal"
        record = make_record()
        with JournalStore(path) as journal:
            MetadataStore(journal).put_record(record)
        # simulated restart: a fresh process would do exactly this
        with JournalStore(path) as journal:
            assert MetadataStore(journal).get_by_id(record.doc_id) == record

    def test_torn_tail_write_ignored(self, tmp_path):
        path = tmp_path / "store.journal"
        records = [make_record(i) for i in range(3)]
        with JournalStore(path) as journal:
            s = MetadataStore(journal)
            for r in records:
                s.put_record(r)
        # a crash mid-append leaves a partial last line
        with open(path, "ab") as fh:
            fh.write(b'deadbeef:{"op":"put","key":"doc:trunc')
        with JournalStore(path) as journal:
            s = MetadataStore(journal)
            for r in records:
                assert s.get_by_id(r.doc_id) == r

    def test_delete_survives_reopen(self, tmp_path):
        path = tmp_path / "store.journal"
        record = make_record()
        with JournalStore(path) as journal:
            s = MetadataStore(journal)
            s.put_record(record)
            assert s.delete_record(record.doc_id)
        with JournalStore(path) as journal:
            assert MetadataStore(journal).get_by_id(record.doc_id) is None


class TestListing:
    def test_owner_filter_and_order(self, store):
        mine = [make_record(i, owner="alice") for i in (3, 1, 2)]
        for r in mine:
            store.put_record(r)
        store.put_record(make_record(9, owner="bob"))
        records, cursor = store.list_by_owner("alice")
        assert cursor is None
        assert [r.upload_timestamp for r in records] == sorted(
            r.upload_timestamp for r in mine
        )

    def test_unknown_owner_empty(self, store):
        assert store.list_by_owner("nobody") == ([], None)

    def test_pagination_matches_sort_oracle(self, store):
        rng = random.Random(7)
        all_records = []
        for i in rng.sample(range(1000), 250):
            r = make_record(i, owner="carol")
            store.put_record(r)
            all_records.append(r)

        pages, cursor, n_pages = [], None, 0
        while True:
            page, cursor = store.list_by_owner("carol", cursor=cursor, page_size=100)
            pages.extend(page)
            n_pages += 1
            if cursor is None:
                break
        oracle = sorted(all_records, key=lambda r: (r.upload_timestamp, r.doc_id))
        assert n_pages == 3
        assert pages == oracle


class TestDelete:
    def test_delete_then_get(self, store):
        record = make_record()
        store.put_record(record)
        assert store.delete_record(record.doc_id)
        assert store.get_by_id(record.doc_id) is None
        assert store.get_by_opaque_name(record.opaque_name) is None

    def test_delete_absent(self, store):
        assert not store.delete_record("dmissing")

    def test_name_reusable_after_delete(self, store):
        record = make_record()
        store.put_record(record)
        store.delete_record(record.doc_id)
        store.put_record(make_record(doc_id=new_doc_id(), opaque_name=record.opaque_name))


class TestConcurrentPuts:
    def test_no_double_claim(self, store):
        name = OpaqueName("ab" * 16, "pdf")
        outcomes = []

        def worker():
            try:
                store.put_record(make_record(doc_id=new_doc_id(), opaque_name=name))
                outcomes.append("ok")
            except DuplicateOpaqueName:
                outcomes.append("dup")

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert outcomes.count("ok") == 1


class TestConsistencySweep:
    def _stored(self, store, vault, content: bytes, i: int = 0):
        record = make_record(
            i,
            size_bytes=len(content),
            checksum=hashlib.sha256(content).hexdigest(),
        )
        (vault / record.opaque_name.render()).write_bytes(content)
        store.put_record(record)
        return record

    def test_clean_vault(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        self._stored(store, vault, b"hello world")
        assert check_consistency(store, vault) == []

    def test_protection_artifacts_not_orphans(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        (vault / ".htaccess").write_bytes(b"Order Deny,Allow\nDeny from all\n")
        (vault / "index.html").write_bytes(b"<html></html>")
        assert check_consistency(store, vault) == []

    def test_dangling_record(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        record = self._stored(store, vault, b"data")
        (vault / record.opaque_name.render()).unlink()
        issues = check_consistency(store, vault)
        assert [i.kind for i in issues] == ["dangling-record"]
        assert issues[0].doc_id == record.doc_id

    def test_orphan_blob(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        (vault / ("c" * 32 + ".pdf")).write_bytes(b"stray")
        issues = check_consistency(store, vault)
        assert [i.kind for i in issues] == ["orphan-blob"]

    def test_checksum_mismatch_on_flipped_byte(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        record = self._stored(store, vault, b"important bytes")
        blob = vault / record.opaque_name.render()
        data = bytearray(blob.read_bytes())
        data[0] ^= 0xFF
        blob.write_bytes(bytes(data))
        issues = check_consistency(store, vault)
        assert [i.kind for i in issues] == ["checksum-mismatch"]

    def test_size_mismatch(self, store, tmp_path):
        vault = tmp_path / "vault"
        vault.mkdir()
        record = self._stored(store, vault, b"12345")
        (vault / record.opaque_name.render()).write_bytes(b"123")
        issues = check_consistency(store, vault)
        assert [i.kind for i in issues] == ["size-mismatch"]
