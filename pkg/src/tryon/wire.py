"""Stream protocol for talking to an out-of-process denoiser.

Framing, request first:

    [u32 LE: header length] [header JSON, UTF-8]
    [latent   f32 LE, H*W*C] [garment f32, H*W*C]
    [mask     f32 LE, H*W  ] [densepose f32, H*W*C]

      header = {"height": H, "width": W, "channels": C,
                "timestep": t, "schedule_id": "..."}

Response uses the same length-prefixed JSON header:

      {"status": "ok", "height": H, "width": W, "channels": C}
          followed by eps_cond then eps_uncond, each f32 LE H*W*C, or
      {"status": "error", "message": "..."} with no payload.

One in-flight request per connection; a connection may serve many requests
in sequence. All multi-byte integers are little-endian and all tensors are
row-major float32, so a sidecar around any real model is a page of code
(see WireServer below for a reference server).
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
from typing import Callable

import numpy as np

from .errors import ContractError, ProtocolError, RemoteError, TransportError
from .grid import ConditionSet, Grid2D, Mask
from .backend import DenoiserRequest, DenoiserResponse, ToyModelSpec, toy_denoise
from .schedule import NoiseSchedule

_LEN = struct.Struct("<I")
MAX_HEADER_BYTES = 1 << 20
MAX_PAYLOAD_FLOATS = 1 << 26  # 256 MiB of f32 per tensor; far above desk scale

_REQUEST_FIELDS = ("height", "width", "channels", "timestep", "schedule_id")

# handler(header, latent, garment, mask, densepose) -> (eps_cond, eps_uncond)
Handler = Callable[
    [dict, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    tuple[np.ndarray, np.ndarray],
]


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout as exc:
            raise TransportError("timed out mid-message") from exc
        except OSError as exc:
            raise TransportError(f"connection failed: {exc}") from exc
        if not chunk:
            raise TransportError(f"stream closed after {len(buf)} of {n} bytes")
        buf.extend(chunk)
    return bytes(buf)


def _recv_header(sock: socket.socket) -> dict:
    (length,) = _LEN.unpack(_recv_exact(sock, _LEN.size))
    if length == 0 or length > MAX_HEADER_BYTES:
        raise ProtocolError(f"malformed header length {length}")
    raw = _recv_exact(sock, length)
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise ProtocolError("header must be a JSON object")
    return header


def _recv_tensor(sock: socket.socket, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape))
    if count <= 0 or count > MAX_PAYLOAD_FLOATS:
        raise ProtocolError(f"implausible tensor shape {shape}")
    raw = _recv_exact(sock, count * 4)
    return np.frombuffer(raw, dtype="<f4").reshape(shape)


def _frame(header: dict, *tensors: np.ndarray) -> bytes:
    blob = json.dumps(header).encode("utf-8")
    parts = [_LEN.pack(len(blob)), blob]
    parts.extend(np.ascontiguousarray(t, dtype="<f4").tobytes() for t in tensors)
    return b"".join(parts)


def encode_request(req: DenoiserRequest) -> bytes:
    cond = req.condition
    if cond.garment.channels != req.latent.channels:
        raise ContractError(
            f"wire header carries one channel count; garment has "
            f"{cond.garment.channels} channels, latent {req.latent.channels}"
        )
    if cond.densepose.channels != req.latent.channels:
        raise ContractError(
            f"wire header carries one channel count; densepose has "
            f"{cond.densepose.channels} channels, latent {req.latent.channels}"
        )
    header = {
        "height": req.latent.height,
        "width": req.latent.width,
        "channels": req.latent.channels,
        "timestep": req.timestep,
        "schedule_id": req.schedule_id,
    }
    return _frame(
        header,
        req.latent.values,
        cond.garment.values,
        cond.mask.values.astype(np.float64),
        cond.densepose.values,
    )


def _require_dims(header: dict, fields: tuple[str, ...]) -> None:
    for field in fields:
        if field not in header:
            raise ProtocolError(f"header missing field {field!r}")
    for field in ("height", "width", "channels"):
        value = header.get(field)
        if not isinstance(value, int) or value < 1:
            raise ProtocolError(f"header field {field!r} must be a positive integer")


class RemoteBackend:
    """Client for the wire protocol; one connection, one request at a time.

    For concurrent jobs create one RemoteBackend per worker. No retries:
    any transport or protocol failure surfaces to the caller and the
    connection is dropped so the next call starts fresh.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0):
        host, sep, port = endpoint.rpartition(":")
        if not sep or not port.isdigit():
            raise ProtocolError(f"endpoint must be host:port, got {endpoint!r}")
        self._address = (host, int(port))
        self._timeout = timeout
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(self._address, timeout=self._timeout)
            except OSError as exc:
                raise TransportError(f"cannot connect to {self._address}: {exc}") from exc
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def denoise(self, req: DenoiserRequest) -> DenoiserResponse:
        payload = encode_request(req)
        sock = self._connect()
        try:
            try:
                sock.sendall(payload)
            except OSError as exc:
                raise TransportError(f"send failed: {exc}") from exc
            header = _recv_header(sock)
            status = header.get("status")
            if status == "error":
                raise RemoteError(str(header.get("message", "unspecified server failure")))
            if status != "ok":
                raise ProtocolError(f"unknown response status {status!r}")
            _require_dims(header, ("status", "height", "width", "channels"))
            shape = (header["height"], header["width"], header["channels"])
            eps_cond = _recv_tensor(sock, shape)
            eps_uncond = _recv_tensor(sock, shape)
        except Exception:
            # Connection state is undefined after any failure; start fresh.
            self.close()
            raise
        if shape != req.latent.shape:
            raise ContractError(f"server returned shape {shape}, request was {req.latent.shape}")
        if not (np.all(np.isfinite(eps_cond)) and np.all(np.isfinite(eps_uncond))):
            raise ContractError("server returned non-finite predictions")
        return DenoiserResponse(
            eps_cond=Grid2D(eps_cond.astype(np.float64)),
            eps_uncond=Grid2D(eps_uncond.astype(np.float64)),
        )


def remote_denoise(req: DenoiserRequest, endpoint: str) -> DenoiserResponse:
    """One-shot request over a fresh connection."""
    with RemoteBackend(endpoint) as backend:
        return backend.denoise(req)


class WireServer:
    """Minimal threaded protocol server, for tests and toy sidecars.

    The handler receives the decoded header and float32 tensors and returns
    (eps_cond, eps_uncond); any exception it raises is reported to the client
    as a status=error response.
    """

    def __init__(self, handler: Handler, host: str = "127.0.0.1", port: int = 0):
        outer = self

        class _Connection(socketserver.BaseRequestHandler):
            def handle(self) -> None:
                sock = self.request
                sock.settimeout(30.0)
                while True:
                    try:
                        header = _recv_header(sock)
                    except TransportError:
                        return  # client went away between requests
                    except ProtocolError:
                        return  # garbage framing; nothing sane to answer
                    try:
                        _require_dims(header, _REQUEST_FIELDS)
                        h, w, c = header["height"], header["width"], header["channels"]
                        latent = _recv_tensor(sock, (h, w, c))
                        garment = _recv_tensor(sock, (h, w, c))
                        mask = _recv_tensor(sock, (h, w))
                        densepose = _recv_tensor(sock, (h, w, c))
                    except (ProtocolError, TransportError):
                        return
                    try:
                        eps_cond, eps_uncond = outer._handler(
                            header, latent, garment, mask, densepose
                        )
                        reply = _frame(
                            {"status": "ok", "height": h, "width": w, "channels": c},
                            eps_cond,
                            eps_uncond,
                        )
                    except Exception as exc:  # handler failure -> remote error
                        reply = _frame({"status": "error", "message": str(exc)})
                    try:
                        sock.sendall(reply)
                    except OSError:
                        return

        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._handler = handler
        self._server = _Server((host, port), _Connection)
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "WireServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def __enter__(self) -> "WireServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def toy_wire_handler(spec: ToyModelSpec, sched: NoiseSchedule) -> Handler:
    """Serve the analytic toy backend over the wire protocol."""

    def handler(header, latent, garment, mask, densepose):
        req = DenoiserRequest(
            latent=Grid2D(latent.astype(np.float64)),
            condition=ConditionSet(
                garment=Grid2D(garment.astype(np.float64)),
                mask=Mask(mask),
                densepose=Grid2D(densepose.astype(np.float64)),
            ),
            timestep=int(header["timestep"]),
            schedule_id=str(header["schedule_id"]),
        )
        resp = toy_denoise(req, spec, sched)
        return resp.eps_cond.values, resp.eps_uncond.values

    return handler
