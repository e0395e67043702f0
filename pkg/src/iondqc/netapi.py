"""Out-of-process server over TCP.

Messages are one JSON document per line:

    {"type": "hello", "version": 1, "dim": 64}
    {"type": "apply", "interface": {"subsystem": "control", "levels": [0, 1]},
     "state": [[re, im], ...]}
    {"type": "state_reply", "state": [[re, im], ...]}
    {"type": "error", "code": "...", "message": "..."}

The wire carries the whole joint ion state even though the server may only
act on the control levels; that stands in for physically moving the ion's
internal qubit.  Floats are written with Python's shortest round-trip repr,
so serialization is exact.
"""
from __future__ import annotations

import json
import logging
import os
import socket
import socketserver
import threading
from typing import Optional

import numpy as np

from . import statevec as sv
from .errors import ContractViolation, ServerContractError, TransportError
from .protocol import CONTROL_INTERFACE, LocalServer, ServerHandle, UnitarySpec, load_unitary_spec

log = logging.getLogger(__name__)

VERSION = 1
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7341
ADDRESS_ENV = "IONDQC_SERVER"
PORT_ENV = "IONDQC_PORT"


def default_address() -> tuple[str, int]:
    if os.environ.get(ADDRESS_ENV):
        return parse_address(os.environ[ADDRESS_ENV])
    return DEFAULT_HOST, int(os.environ.get(PORT_ENV, DEFAULT_PORT))


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        return text, int(os.environ.get(PORT_ENV, DEFAULT_PORT))
    try:
        return host or DEFAULT_HOST, int(port)
    except ValueError:
        raise ContractViolation(f"bad address {text!r}") from None


def encode_state(amps: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in amps]


def decode_state(items) -> np.ndarray:
    try:
        return np.array([complex(float(re), float(im)) for re, im in items])
    except (TypeError, ValueError):
        raise ContractViolation("state must be a list of [re, im] pairs") from None


def dumps(msg: dict) -> bytes:
    return (json.dumps(msg, separators=(",", ":")) + "\n").encode()


def error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


# -- server ----------------------------------------------------------------------

class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        backend: LocalServer = self.server.backend
        dim = sv.dimension(self.server.n_x, self.server.n_y)
        for raw in self.rfile:
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("message is not an object")
            except ValueError as exc:
                self._send(error("malformed", str(exc)))
                continue
            kind = msg.get("type")
            if kind == "hello":
                if msg.get("version") != VERSION:
                    self._send(error("version", f"server speaks version {VERSION}"))
                    return
                self._send({"type": "hello", "version": VERSION, "dim": dim})
            elif kind == "apply":
                self._send(self._apply(backend, msg, dim))
            else:
                self._send(error("malformed", f"unknown message type {kind!r}"))

    def _apply(self, backend: LocalServer, msg: dict, dim: int) -> dict:
        if msg.get("interface") != CONTROL_INTERFACE.to_wire():
            return error("interface", "server acts only on control levels [0, 1]")
        try:
            amps = decode_state(msg.get("state", []))
        except ContractViolation as exc:
            return error("malformed", str(exc))
        if amps.shape != (dim,):
            return error("dim", f"expected {dim} amplitudes, got {amps.shape[0]}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1) > 1e-6:
            return error("norm", f"state norm {norm:.9f}")
        out = backend.apply(sv.IonState(amps, self.server.n_x, self.server.n_y))
        return {"type": "state_reply", "state": encode_state(out.amplitudes)}

    def _send(self, msg: dict) -> None:
        self.wfile.write(dumps(msg))
        self.wfile.flush()


class UnitaryServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, spec: UnitarySpec, realization: str = "matrix",
                 n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK):
        self.backend = LocalServer(spec, realization)
        self.n_x, self.n_y = n_x, n_y
        super().__init__(address, _Handler)

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port


def make_server(spec: UnitarySpec, address=None, realization: str = "matrix") -> UnitaryServer:
    return UnitaryServer(address or default_address(), spec, realization)


def start_in_thread(spec: UnitarySpec, host: str = DEFAULT_HOST, port: int = 0,
                    realization: str = "matrix") -> UnitaryServer:
    """Bind (port 0 picks a free port) and serve from a daemon thread."""
    srv = make_server(spec, (host, port), realization)
    threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()
    return srv


def serve(unitary_spec_file, bind_address=None) -> None:
    spec, realization = load_unitary_spec(unitary_spec_file)
    with make_server(spec, bind_address, realization) as srv:
        log.info("serving %s on %s:%d", spec.kind, *srv.address)
        srv.serve_forever()


# -- client handle -----------------------------------------------------------------

class RemoteServer(ServerHandle):
    """ServerHandle whose apply round-trips the state through a socket."""

    def __init__(self, address, timeout: float = 10.0):
        self.address = parse_address(address) if isinstance(address, str) else tuple(address)
        self.descriptor = f"remote {self.address[0]}:{self.address[1]}"
        try:
            self._sock = socket.create_connection(self.address, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach server at {self.address}: {exc}") from exc
        self._file = self._sock.makefile("rwb")
        reply = self._request({"type": "hello", "version": VERSION, "dim": sv.dimension()})
        if reply.get("type") != "hello":
            self.close()
            raise ServerContractError(f"handshake refused: {reply.get('message')}")
        self.dim = int(reply["dim"])

    def _request(self, msg: dict) -> dict:
        try:
            self._file.write(dumps(msg))
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise TransportError(f"connection to {self.address} failed: {exc}") from exc
        if not line:
            raise TransportError(f"server at {self.address} closed the connection")
        try:
            return json.loads(line)
        except ValueError as exc:
            raise ServerContractError(f"unreadable reply: {exc}") from exc

    def apply(self, state: sv.IonState) -> sv.IonState:
        reply = self._request({
            "type": "apply",
            "interface": self.interface.to_wire(),
            "state": encode_state(state.amplitudes),
        })
        if reply.get("type") != "state_reply":
            raise ServerContractError(f"server error {reply.get('code')}: {reply.get('message')}")
        amps = decode_state(reply["state"])
        if amps.shape != state.amplitudes.shape:
            raise ServerContractError("reply has the wrong dimension")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1) > 1e-6:
            raise ServerContractError(f"server returned a state with norm {norm:.9f}")
        return sv.IonState(amps / norm, state.n_x, state.n_y)

    def close(self) -> None:
        for closer in (getattr(self, "_file", None), getattr(self, "_sock", None)):
            if closer is not None:
                try:
                    closer.close()
                except OSError:
                    pass


def remote_server_handle(address=None, timeout: float = 10.0) -> RemoteServer:
    return RemoteServer(address or default_address(), timeout)
