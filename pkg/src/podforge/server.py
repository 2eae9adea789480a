"""HTTP synthesis service.

POST /synthesize: {"text", "mode", "ref_text"?, "ref_audio_b64"?, "seed"?}
  -> 200 {"audio_b64", "t_inf", "t_syn", "r", "truncated"}
  -> 400 schema violation, 422 empty text, 503 backend unreachable.
GET /health: {"status", "model_loaded", "codec_loaded"}.

Model and codec are loaded once and shared read-only across request
threads; each request gets an isolated synthesis context.
"""

from __future__ import annotations

import base64
import json
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .audio import CANONICAL_RATE, load_wav, resample, wav_bytes
from .config import AppConfig
from .engine import MODE_SFT, MODE_ZERO_SHOT, SynthesisRequest, synthesize
from .errors import (BackendTimeout, BackendUnreachable, EmptyText,
                     PodforgeError)
from .lm import ExternalBackend
from .metrics import speed_ratio


class _SchemaViolation(Exception):
    pass


class SynthesisService:
    """Request validation and synthesis shared by all handler threads."""

    def __init__(self, model=None, vocab=None, codebook=None,
                 config: AppConfig | None = None, backend_endpoint: str = "",
                 max_concurrent: int = 8):
        self.config = config or AppConfig()
        self.vocab = vocab
        self.codebook = codebook
        self.backend_endpoint = backend_endpoint
        if backend_endpoint and vocab is not None:
            self.model = ExternalBackend(backend_endpoint, vocab_size=len(vocab))
        else:
            self.model = model
        self._slots = threading.Semaphore(max_concurrent)

    def health(self) -> dict:
        return {
            "status": "ok",
            "model_loaded": self.model is not None,
            "codec_loaded": self.codebook is not None,
        }

    def _parse(self, payload: dict) -> SynthesisRequest:
        if not isinstance(payload, dict):
            raise _SchemaViolation("body must be a JSON object")
        text = payload.get("text")
        if not isinstance(text, str):
            raise _SchemaViolation("'text' must be a string")
        mode = payload.get("mode", MODE_SFT)
        if mode not in (MODE_SFT, MODE_ZERO_SHOT):
            raise _SchemaViolation(f"unknown mode {mode!r}")
        seed = payload.get("seed", self.config.seed)
        if not isinstance(seed, int):
            raise _SchemaViolation("'seed' must be an integer")
        ref_audio = None
        ref_text = payload.get("ref_text", "")
        if mode == MODE_ZERO_SHOT:
            encoded = payload.get("ref_audio_b64")
            if not isinstance(encoded, str) or not isinstance(ref_text, str) or not ref_text:
                raise _SchemaViolation("zero_shot requires 'ref_text' and 'ref_audio_b64'")
            try:
                blob = base64.b64decode(encoded, validate=True)
                with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
                    tmp.write(blob)
                    tmp.flush()
                    ref_audio = load_wav(tmp.name)
            except (PodforgeError, ValueError, OSError) as exc:
                raise _SchemaViolation(f"undecodable ref_audio_b64: {exc}") from exc
            if ref_audio.sample_rate != CANONICAL_RATE:
                ref_audio = resample(ref_audio, CANONICAL_RATE)
        try:
            return SynthesisRequest(
                target_text=text, mode=mode, ref_text=ref_text, ref_audio=ref_audio,
                seed=seed, temperature=self.config.temperature,
                sft_template=self.config.sft_template,
            )
        except ValueError as exc:
            raise _SchemaViolation(str(exc)) from exc

    def synthesize_endpoint(self, payload) -> tuple[int, dict]:
        if self.model is None or self.vocab is None or self.codebook is None:
            return 503, {"error": "model or codec not loaded"}
        try:
            request = self._parse(payload)
        except _SchemaViolation as exc:
            return 400, {"error": str(exc)}
        try:
            with self._slots:
                result = synthesize(request, self.model, self.vocab, self.codebook,
                                    workers=self.config.workers,
                                    cap_tokens=self.config.generation_cap_tokens)
            ratio = speed_ratio(result.t_inf, result.t_syn).r
        except EmptyText as exc:
            return 422, {"error": str(exc)}
        except (BackendUnreachable, BackendTimeout) as exc:
            return 503, {"error": str(exc)}
        except PodforgeError as exc:
            return 500, {"error": str(exc)}
        return 200, {
            "audio_b64": base64.b64encode(wav_bytes(result.audio)).decode("ascii"),
            "t_inf": result.t_inf,
            "t_syn": result.t_syn,
            "r": ratio,
            "truncated": result.truncated,
        }


class _Handler(BaseHTTPRequestHandler):
    service: SynthesisService  # injected via make_server

    def _reply(self, status: int, body: dict) -> None:
        blob = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def do_GET(self):
        if self.path == "/health":
            self._reply(200, self.service.health())
        elif self.path == "/synthesize":
            self._reply(405, {"error": "use POST"})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        if self.path == "/health":
            self._reply(405, {"error": "use GET"})
            return
        if self.path != "/synthesize":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"null")
        except (ValueError, OSError):
            self._reply(400, {"error": "body must be valid JSON"})
            return
        status, body = self.service.synthesize_endpoint(payload)
        self._reply(status, body)

    def log_message(self, fmt, *args):  # keep request logs off stderr
        pass


def make_server(service: SynthesisService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: SynthesisService, bind: str) -> None:
    host, _, port = bind.partition(":")
    server = make_server(service, host or "127.0.0.1", int(port or 0))
    print(f"listening on {server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    finally:
        server.server_close()
