#!/usr/bin/env python3
"""End-to-end demo: init a vault, run the service, upload and fetch a file.

Everything happens under a temp directory; nothing is left behind.
"""

import sys
import tempfile
from pathlib import Path

import requests

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from docvault.access import Role
from docvault.config import ServiceConfig
from docvault.naming import SecretKey
from docvault.placement import PlacementPolicy
from docvault.service import VaultService


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        webroot = tmp / "webroot"
        webroot.mkdir()
        config = ServiceConfig(
            bind_host="127.0.0.1",
            bind_port=0,
            webroot=str(webroot),
            vault_dir=str(webroot / "docs"),
            policy=PlacementPolicy.DENIED_SUBDIR,
            key_file=None,
            key_env=None,
            store_path=str(tmp / "store.journal"),
            max_upload_bytes=10 * 1024 * 1024,
        )
        service = VaultService(config, key=SecretKey(b"demo-secret-key-0123456789"))
        service.start()
        print(f"service up at {service.base_url}")

        _, token = service.core.tokens.create_token("demo", Role.USER)
        headers = {"Authorization": f"Bearer {token}"}

        content = b"%PDF-1.4 demo document body"
        resp = requests.post(
            f"{service.base_url}/documents",
            params={"filename": "demo.pdf"},
            data=content,
            headers=headers,
        )
        doc = resp.json()
        print(f"uploaded: {doc}")

        blobs = [p.name for p in (webroot / "docs").iterdir()
                 if p.name not in (".htaccess", "index.html")]
        print(f"stored on disk as: {blobs[0]}")

        direct = requests.get(f"{service.base_url}/docs/{blobs[0]}", headers=headers)
        print(f"direct GET of the blob path -> {direct.status_code} (blocked)")

        got = requests.get(f"{service.base_url}/documents/{doc['doc_id']}", headers=headers)
        print(f"mediated download -> {got.status_code}, "
              f"{got.headers['Content-Disposition']}, {len(got.content)} bytes, "
              f"intact={got.content == content}")

        service.stop()


if __name__ == "__main__":
    main()
