"""Stateless reward-serving endpoint.

POST /v1/reward accepts a JSON body with a ``problem`` payload (same fields as
the dataset schema), ``trace_text``, and optional ``config`` overrides, and
returns the reward breakdown plus latency and the backend mode used.  GET
/healthz reports readiness.  Requests are independent: the same inputs yield
the same breakdown regardless of order, and identical to offline verify_trace.
"""

from __future__ import annotations

import json
import time
from dataclasses import fields, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import judges as judges_mod
from .funnel import SchemaError, problem_from_json
from .reward import RewardConfig, verify_trace
from .traces import parse_trace

MAX_BODY_BYTES = 4 * 1024 * 1024

_CONFIG_FIELDS = {f.name for f in fields(RewardConfig)}


def apply_config_overrides(base: RewardConfig, overrides: dict) -> RewardConfig:
    unknown = set(overrides) - _CONFIG_FIELDS
    if unknown:
        raise SchemaError(0, f"unknown config fields: {sorted(unknown)}")
    return replace(base, **overrides)


def handle_reward_request(
    payload: dict,
    config: RewardConfig,
    backends: judges_mod.JudgeBackendConfig,
) -> dict:
    """Pure request handler shared by the HTTP server and tests."""
    if not isinstance(payload, dict):
        raise SchemaError(0, "body must be a JSON object")
    trace_text = payload.get("trace_text")
    if not trace_text or not isinstance(trace_text, str):
        raise SchemaError(0, "trace_text must be a nonempty string")
    if "problem" not in payload or not isinstance(payload["problem"], dict):
        raise SchemaError(0, "problem payload required")
    problem = problem_from_json(payload["problem"])
    cfg = apply_config_overrides(config, payload.get("config", {}))
    trace = parse_trace(trace_text)
    start = time.monotonic()
    breakdown = verify_trace(trace, problem, cfg, backends)
    latency_ms = (time.monotonic() - start) * 1000.0
    if backends.mode == "live":
        # a swallowed judge outage must not masquerade as a zero reward
        outage = [e for e in breakdown.errors if e.startswith("BackendTimeout")]
        if outage:
            raise judges_mod.BackendTimeout(outage[0])
    body = breakdown.to_dict()
    body["latency_ms"] = round(latency_ms, 3)
    body["backend_mode"] = backends.mode
    return body


class RewardHandler(BaseHTTPRequestHandler):
    server_version = "geoverify/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/healthz":
            self._send_json(200, {"status": "ok", "mode": self.server.backends.mode})
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/v1/reward":
            self._send_json(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        if length > MAX_BODY_BYTES:
            self._send_json(413, {"error": "request body too large"})
            return
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            self._send_json(400, {"error": f"bad JSON: {exc}"})
            return
        try:
            body = handle_reward_request(payload, self.server.reward_config,
                                         self.server.backends)
        except SchemaError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        except judges_mod.BackendTimeout as exc:
            self._send_json(503, {"error": f"judge backend unreachable: {exc}"})
            return
        except judges_mod.CacheMiss as exc:
            self._send_json(503, {"error": f"replay cache miss: {exc}"})
            return
        self._send_json(200, body)


class RewardServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], config: RewardConfig,
                 backends: judges_mod.JudgeBackendConfig, verbose: bool = False):
        super().__init__(address, RewardHandler)
        self.reward_config = config
        self.backends = backends
        self.verbose = verbose


def make_server(host: str = "127.0.0.1", port: int = 8787,
                config: RewardConfig | None = None,
                backends: judges_mod.JudgeBackendConfig | None = None,
                verbose: bool = False) -> RewardServer:
    return RewardServer((host, port), config or RewardConfig(),
                        backends or judges_mod.JudgeBackendConfig(mode="heuristic"),
                        verbose=verbose)


def serve_reward(bind: str = "127.0.0.1:8787",
                 config: RewardConfig | None = None,
                 backends: judges_mod.JudgeBackendConfig | None = None) -> None:
    """Blocking entry point for the CLI ``serve`` subcommand."""
    host, _, port = bind.partition(":")
    server = make_server(host or "127.0.0.1", int(port or 8787), config, backends,
                         verbose=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
