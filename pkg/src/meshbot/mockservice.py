"""A local stand-in for the text-to-3D service, for offline runs and tests.

    python -m meshbot.mockservice --mesh a.stl --mesh b.stl --api-key secret
"""
from __future__ import annotations

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


class MockMeshService:
    """Serves a fixed list of meshes as the candidates for any prompt.

    Every generate request is recorded in ``requests`` so tests can check
    what the client sent.
    """

    def __init__(self, meshes: dict, api_key: str = "test-key", host: str = "127.0.0.1", port: int = 0):
        self.meshes = dict(meshes)         # name -> (bytes, format)
        self.api_key = api_key
        self.requests: list = []
        self._server = ThreadingHTTPServer((host, port), self._handler())
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _handler(self):
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code, body: bytes, ctype="application/json"):
                self.send_response(code)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _authorized(self) -> bool:
                if self.headers.get("Authorization") == f"Bearer {service.api_key}":
                    return True
                self._send(401, b'{"error": "bad credential"}')
                return False

            def do_POST(self):
                if not self._authorized():
                    return
                if self.path != "/v1/generate":
                    self._send(404, b'{"error": "no such route"}')
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    req = json.loads(self.rfile.read(length))
                except ValueError:
                    self._send(400, b'{"error": "body is not JSON"}')
                    return
                service.requests.append(req)
                n = int(req.get("num_candidates", len(service.meshes)))
                names = list(service.meshes)[:n]
                cands = [{"id": name, "format": service.meshes[name][1], "url": f"/v1/assets/{name}"}
                         for name in names]
                self._send(200, json.dumps({"candidates": cands}).encode())

            def do_GET(self):
                if not self._authorized():
                    return
                name = self.path.rsplit("/", 1)[-1]
                if not self.path.startswith("/v1/assets/") or name not in service.meshes:
                    self._send(404, b'{"error": "no such asset"}')
                    return
                self._send(200, service.meshes[name][0], "application/octet-stream")

        return Handler

    def start(self) -> "MockMeshService":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="Serve meshes as text-to-3D candidates.")
    ap.add_argument("--mesh", action="append", required=True, help="mesh file to serve (repeatable)")
    ap.add_argument("--api-key", default="test-key")
    ap.add_argument("--port", type=int, default=8765)
    args = ap.parse_args(argv)
    meshes = {Path(p).name: (Path(p).read_bytes(), Path(p).suffix.lstrip(".").lower()) for p in args.mesh}
    svc = MockMeshService(meshes, args.api_key, port=args.port)
    print(f"serving {len(meshes)} meshes at {svc.url}", flush=True)
    try:
        svc._server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        svc._server.server_close()


if __name__ == "__main__":
    main()
