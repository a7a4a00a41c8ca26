"""HTTP control protocol (versioned under /v1) plus the coordinator thread.

JSON request/response bodies throughout; /v1/live is a Server-Sent Events
stream so any EventSource or chunked-fetch client can watch frames.  The
handler threads never touch agent state directly: they enqueue moderated
suggestions and read stats views, while one coordinator thread owns the
episode loop.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .runtime import Runtime, Suggestion, handle_command

_MAX_BODY = 1 << 20  # inbound bodies are human-sized; refuse anything bigger


class Coordinator:
    """Runs step_cycle in a loop on its own thread, honoring pause/stop."""

    def __init__(self, runtime: Runtime, max_episodes: int | None = None):
        self.runtime = runtime
        self.max_episodes = max_episodes
        self._pause = threading.Event()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="thyia-loop", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _loop(self) -> None:
        played = 0
        while not self._stop.is_set():
            if self._pause.is_set():
                time.sleep(0.05)
                continue
            self.runtime.step_cycle()
            played += 1
            if self.max_episodes is not None and played >= self.max_episodes:
                break

    def pause(self) -> None:
        self._pause.set()

    def resume(self) -> None:
        self._pause.clear()

    @property
    def paused(self) -> bool:
        return self._pause.is_set()

    def stop(self, timeout: float = 30.0) -> None:
        self._stop.set()
        self._pause.clear()
        if self._thread.is_alive():
            self._thread.join(timeout)


class ControlServer:
    def __init__(self, runtime: Runtime, host: str = "127.0.0.1", port: int = 0,
                 snapshot_dir: str | None = None, static_dir: str | None = None,
                 max_episodes: int | None = None):
        self.runtime = runtime
        self.snapshot_dir = snapshot_dir
        self.static_dir = static_dir
        self.coordinator = Coordinator(runtime, max_episodes=max_episodes)
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> None:
        self.coordinator.start()
        threading.Thread(target=self.httpd.serve_forever, name="thyia-http", daemon=True).start()

    def serve_forever(self) -> None:
        self.coordinator.start()
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.coordinator.stop()
        self.httpd.shutdown()
        self.httpd.server_close()


def _make_handler(server: ControlServer):
    runtime = server.runtime

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # stay quiet; events carry the story
            pass

        # -- plumbing ------------------------------------------------------

        def _send_json(self, payload, status: int = 200) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length > _MAX_BODY:
                raise ValueError("request body too large")
            if length == 0:
                return {}
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def do_OPTIONS(self):  # CORS preflight for the console
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        # -- GET -------------------------------------------------------------

        def do_GET(self):
            url = urlparse(self.path)
            route = url.path.rstrip("/") or "/"
            try:
                if route == "/v1/status":
                    status = runtime.status()
                    status["paused"] = server.coordinator.paused
                    self._send_json(status)
                elif route == "/v1/games":
                    self._send_json({"games": runtime.game_names()})
                elif route == "/v1/stats":
                    query = parse_qs(url.query)
                    game = query.get("game", [None])[0]
                    try:
                        self._send_json(runtime.stats(game).to_dict())
                    except KeyError:
                        self._send_json({"error": f"unknown game {game!r}"}, 404)
                elif route == "/v1/live":
                    self._stream_live()
                elif server.static_dir and route in ("/", "/index.html") or (
                        server.static_dir and route.startswith("/console")):
                    self._serve_static(route)
                else:
                    self._send_json({"error": "not found"}, 404)
            except (BrokenPipeError, ConnectionResetError):
                pass
            except Exception as exc:  # noqa: BLE001 - protocol surface stays up
                self._send_json({"error": repr(exc)}, 500)

        def _serve_static(self, route: str) -> None:
            import os

            rel = "index.html" if route in ("/", "/index.html", "/console") else \
                route[len("/console/"):]
            base = os.path.abspath(server.static_dir)
            full = os.path.abspath(os.path.join(base, rel))
            if not full.startswith(base + os.sep) and full != base:
                self._send_json({"error": "not found"}, 404)
                return
            if not os.path.isfile(full):
                self._send_json({"error": "not found"}, 404)
                return
            ctype = "text/html"
            if full.endswith(".js"):
                ctype = "text/javascript"
            elif full.endswith(".css"):
                ctype = "text/css"
            with open(full, "rb") as fh:
                body = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _stream_live(self) -> None:
            q = runtime.subscribe()
            try:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                while True:
                    try:
                        frame = q.get(timeout=15.0)
                    except queue.Empty:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    data = json.dumps(frame)
                    self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                runtime.unsubscribe(q)

        # -- POST --------------------------------------------------------------

        def do_POST(self):
            route = urlparse(self.path).path.rstrip("/")
            try:
                body = self._read_json()
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_json({"error": f"bad request body: {exc}"}, 400)
                return
            try:
                if route == "/v1/suggestions":
                    self._post_suggestion(body)
                elif route == "/v1/games":
                    name, reason = runtime.add_game(str(body.get("gdf", "")))
                    if name is None:
                        self._send_json({"accepted": False, "reason": reason}, 422)
                    else:
                        self._send_json({"accepted": True, "name": name})
                elif route == "/v1/command":
                    response = handle_command(runtime, str(body.get("text", "")))
                    self._send_json({"response": response})
                elif route == "/v1/admin/snapshot":
                    self._post_snapshot(body)
                elif route == "/v1/admin/pause":
                    server.coordinator.pause()
                    self._send_json({"state": "paused"})
                elif route == "/v1/admin/resume":
                    server.coordinator.resume()
                    self._send_json({"state": "running"})
                else:
                    self._send_json({"error": "not found"}, 404)
            except (BrokenPipeError, ConnectionResetError):
                pass
            except Exception as exc:  # noqa: BLE001
                self._send_json({"error": repr(exc)}, 500)

        def _post_suggestion(self, body: dict) -> None:
            suggestion = Suggestion(
                kind=str(body.get("kind", "")),
                game=body.get("game"),
                gdf=body.get("gdf"),
                bias=body.get("bias"),
                submitter=str(body.get("submitter", "")),
                timestamp=time.time(),
            )
            accepted, reason = runtime.enqueue_suggestion(suggestion)
            payload = {"accepted": accepted}
            if not accepted:
                payload["reason"] = reason
            if accepted and suggestion.kind == "query-stats":
                payload["stats"] = runtime.stats(suggestion.game).to_dict() \
                    if suggestion.game in runtime.slots else runtime.stats().to_dict()
            self._send_json(payload, 200 if accepted else 422)

        def _post_snapshot(self, body: dict) -> None:
            target = body.get("path") or server.snapshot_dir
            if not target:
                self._send_json({"error": "no snapshot directory configured"}, 400)
                return
            # grab the cycle lock so we snapshot at an episode boundary
            with runtime.cycle_lock:
                runtime.snapshot(target)
            self._send_json({"path": target})

    return Handler
