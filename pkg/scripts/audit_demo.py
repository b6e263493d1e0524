#!/usr/bin/env python3
"""Audit demo: stand up a deliberately leaky static directory and audit it,
then fix it (deny config + placeholder + opaque names) and audit again.
"""

import sys
import tempfile
import threading
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from docvault.auditor import ProbeTarget, render_text_report, run_audit
from docvault.placement import emit_deny_config, emit_index_placeholder


class QuietHandler(SimpleHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass


def serve(root: Path) -> tuple[ThreadingHTTPServer, str]:
    server = ThreadingHTTPServer(
        ("127.0.0.1", 0), partial(QuietHandler, directory=str(root))
    )
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}/"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp) / "files"
        root.mkdir()
        for i in (1, 2, 3):
            (root / f"{i}.pdf").write_bytes(b"%PDF confidential submission")

        server, url = serve(root)
        print("=== before hardening (auto-index, sequential names) ===")
        print(render_text_report(run_audit(ProbeTarget(url, max_sequential=50))))
        server.shutdown()

        # harden: placeholder suppresses the listing, opaque names defeat guessing
        for i in (1, 2, 3):
            (root / f"{i}.pdf").rename(root / (f"{i:032x}"[-32:] + ".pdf"))
        (root / "index.html").write_bytes(emit_index_placeholder("forbidden"))
        (root / ".htaccess").write_bytes(emit_deny_config())

        server, url = serve(root)
        print()
        print("=== after hardening ===")
        print(render_text_report(run_audit(ProbeTarget(url, max_sequential=50))))
        server.shutdown()


if __name__ == "__main__":
    main()
