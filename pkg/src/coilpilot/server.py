"""Single-client session server exposing the live simulation.

Wire protocol: newline-delimited JSON frames over a bidirectional
stream; a WebSocket upgrade (one JSON document per text frame) is
accepted for browser clients.  One simulation stepper thread owns all
mutable state; socket threads exchange immutable message strings with
it through queues.

Scripted sessions: commands may carry "at_step" (or "at_s") to pin the
simulation step at which they apply.  The stepper never runs past the
largest pinned step seen so far until the final "stop" command arrives,
which makes a replayed command log byte-identical to its headless run.
"""

from __future__ import annotations

import base64
import hashlib
import json
import queue
import socket
import struct
import threading
import time
from pathlib import Path

from .world import SimulationWorld

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class ClientGone(Exception):
    pass


class NdjsonTransport:
    """Raw newline-delimited JSON over a TCP socket."""

    def __init__(self, sock: socket.socket, initial: bytes = b""):
        self.sock = sock
        self._buf = bytearray(initial)

    def recv_message(self) -> str | None:
        while b"\n" not in self._buf:
            try:
                chunk = self.sock.recv(4096)
            except OSError:
                raise ClientGone from None
            if not chunk:
                raise ClientGone
            self._buf.extend(chunk)
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line.decode("utf-8").strip() or None

    def send(self, text: str) -> None:
        try:
            self.sock.sendall(text.encode("utf-8") + b"\n")
        except OSError:
            raise ClientGone from None

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class WebSocketTransport:
    """Minimal RFC6455 server endpoint carrying one JSON document per frame."""

    def __init__(self, sock: socket.socket, request: bytes):
        self.sock = sock
        self._buf = bytearray()
        self._handshake(request)

    def _handshake(self, request: bytes):
        while b"\r\n\r\n" not in request:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ClientGone
            request += chunk
        headers = {}
        for line in request.split(b"\r\n")[1:]:
            if b":" in line:
                k, v = line.split(b":", 1)
                headers[k.strip().lower()] = v.strip()
        key = headers.get(b"sec-websocket-key")
        if key is None:
            raise ClientGone("not a websocket upgrade")
        accept = base64.b64encode(hashlib.sha1(key + WS_GUID.encode()).digest()).decode()
        self.sock.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            try:
                chunk = self.sock.recv(4096)
            except OSError:
                raise ClientGone from None
            if not chunk:
                raise ClientGone
            self._buf.extend(chunk)
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def recv_message(self) -> str | None:
        while True:
            b0, b1 = self._read_exact(2)
            opcode = b0 & 0x0F
            masked = bool(b1 & 0x80)
            length = b1 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", self._read_exact(2))
            elif length == 127:
                (length,) = struct.unpack(">Q", self._read_exact(8))
            mask = self._read_exact(4) if masked else b""
            payload = self._read_exact(length)
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                self._send_frame(0x8, payload[:2])
                raise ClientGone
            if opcode == 0x9:  # ping
                self._send_frame(0xA, payload)
                continue
            if opcode in (0x1, 0x2):
                text = payload.decode("utf-8").strip()
                return text or None
            # 0xA pong / continuation of ignored types: skip
            continue

    def _send_frame(self, opcode: int, payload: bytes):
        header = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < 1 << 16:
            header.append(126)
            header += struct.pack(">H", n)
        else:
            header.append(127)
            header += struct.pack(">Q", n)
        try:
            self.sock.sendall(bytes(header) + payload)
        except OSError:
            raise ClientGone from None

    def send(self, text: str) -> None:
        self._send_frame(0x1, text.encode("utf-8"))

    def close(self):
        try:
            self._send_frame(0x8, b"")
        except ClientGone:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def open_transport(sock: socket.socket):
    """Sniff the first bytes: HTTP GET means a WebSocket upgrade.

    Listen-only NDJSON clients may send nothing at all, so the sniff
    times out quickly and falls back to the raw protocol.
    """
    sock.settimeout(0.5)
    try:
        first = sock.recv(4096)
        if not first:
            raise ClientGone
    except socket.timeout:
        first = b""
    finally:
        sock.settimeout(None)
    if first.startswith(b"GET "):
        return WebSocketTransport(sock, first)
    return NdjsonTransport(sock, initial=first)


class SessionServer:
    """Accepts one operator client and runs the simulation session.

    realtime_factor 1.0 paces the stepper at wall-clock speed; 0 runs as
    fast as the scripted horizon allows.
    """

    def __init__(
        self,
        cfg: dict,
        port: int = 0,
        host: str = "127.0.0.1",
        out_dir: str | Path | None = None,
        realtime_factor: float = 1.0,
        recorder_factory=None,
    ):
        self.cfg = cfg
        self.host = host
        self.port = port
        self.out_dir = Path(out_dir) if out_dir else None
        self.realtime = realtime_factor
        self.recorder_factory = recorder_factory
        self._listener: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop_accepting = threading.Event()
        self.session_done = threading.Event()
        self.summary: dict | None = None

    # ------------------------------------------------------------ lifecycle

    def start(self) -> int:
        self._listener = socket.create_server((self.host, self.port))
        self._listener.settimeout(0.2)
        self.port = self._listener.getsockname()[1]
        self._thread = threading.Thread(target=self._serve_forever, daemon=True)
        self._thread.start()
        return self.port

    def _serve_forever(self):
        try:
            client = self._accept_first()
            if client is None:
                return
            rejector = threading.Thread(target=self._reject_extras, daemon=True)
            rejector.start()
            try:
                transport = open_transport(client)
            except ClientGone:
                return
            self._run_session(transport)
        finally:
            self._stop_accepting.set()
            if self._listener:
                self._listener.close()
            self.session_done.set()

    def _accept_first(self):
        while not self._stop_accepting.is_set():
            try:
                sock, _ = self._listener.accept()
                return sock
            except socket.timeout:
                continue
            except OSError:
                return None
        return None

    def _reject_extras(self):
        while not self._stop_accepting.is_set():
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                transport = open_transport(sock)
                transport.send(json.dumps({"kind": "error", "payload": {"message": "session already has a client"}}))
                transport.close()
            except (ClientGone, OSError):
                pass

    def serve_blocking(self) -> None:
        self.start()
        self._thread.join()

    def stop(self):
        self._stop_accepting.set()
        self.session_done.wait(timeout=10)

    # -------------------------------------------------------------- session

    def _run_session(self, transport):
        world = SimulationWorld(self.cfg)
        recorder = self.recorder_factory(world) if self.recorder_factory else None
        inbound: queue.Queue = queue.Queue()
        outbound: queue.Queue = queue.Queue(maxsize=256)
        gone = threading.Event()

        def reader():
            while not gone.is_set():
                try:
                    msg = transport.recv_message()
                except ClientGone:
                    gone.set()
                    return
                if msg:
                    inbound.put(msg)

        def writer():
            while not gone.is_set():
                try:
                    text = outbound.get(timeout=0.2)
                except queue.Empty:
                    continue
                try:
                    transport.send(text)
                except ClientGone:
                    gone.set()
                    return

        threading.Thread(target=reader, daemon=True).start()
        threading.Thread(target=writer, daemon=True).start()

        seq = 0

        def emit(kind: str, payload: dict):
            nonlocal seq
            seq += 1
            frame = {"kind": kind, "sequence": seq, "sim_time": round(world.sim_time, 9), "payload": payload}
            try:
                outbound.put(frame_to_json(frame), timeout=1.0)
            except queue.Full:
                gone.set()

        broadcast_every = max(1, round(1.0 / (self.cfg["simulation"]["broadcast_hz"] * world.dt)))
        horizon: int | None = None
        stop_seen = False
        got_scripted = False
        next_wall = time.monotonic()

        emit("event", {"event": "session-started", "dt_s": world.dt})
        emit("state", world.snapshot())

        while not gone.is_set() and not world.stopped:
            # ingest any pending commands
            while True:
                try:
                    raw = inbound.get_nowait()
                except queue.Empty:
                    break
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    emit("error", {"message": "malformed JSON frame"})
                    continue
                if msg.get("kind") != "command":
                    emit("error", {"message": f"unsupported kind {msg.get('kind')!r}"})
                    continue
                at_step = msg.get("at_step")
                if at_step is None and "at_s" in msg:
                    at_step = round(float(msg["at_s"]) / world.dt)
                if at_step is not None:
                    got_scripted = True
                    horizon = max(horizon or 0, int(at_step))
                if msg.get("action") == "stop":
                    stop_seen = True
                world.queue_command(msg, int(at_step) if at_step is not None else None)

            # scripted streams: never step past the delivered command horizon
            may_step = True
            if got_scripted and not stop_seen:
                may_step = horizon is not None and world.step_index < horizon
            elif got_scripted and stop_seen:
                may_step = True
            elif self.realtime == 0 and not got_scripted:
                may_step = not inbound.empty() or world.step_index > 0

            if not may_step:
                time.sleep(0.001)
                continue

            if self.realtime > 0:
                next_wall += world.dt / self.realtime
                delay = next_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_wall = time.monotonic()

            world.step()
            if recorder is not None:
                recorder.after_step()
            for event in world.drain_events():
                kind = "error" if event.get("event") == "error" else "event"
                payload = dict(event)
                payload.pop("sim_time", None)
                emit(kind, payload if kind == "event" else {"message": payload.get("message", "")})
            if world.step_index % broadcast_every == 0:
                emit("state", world.snapshot())

        emit("event", {"event": "session-ended", "steps": world.step_index})
        if self.out_dir is not None and recorder is not None:
            self.summary = recorder.write(self.out_dir)
        # give the writer a moment to flush, then drop the link
        deadline = time.monotonic() + 2.0
        while not outbound.empty() and time.monotonic() < deadline and not gone.is_set():
            time.sleep(0.01)
        gone.set()
        transport.close()


def frame_to_json(frame: dict) -> str:
    return json.dumps(frame, sort_keys=True, separators=(",", ":"))


def serve_session(port: int, cfg: dict, out_dir=None, realtime_factor: float = 1.0) -> None:
    """Blocking convenience wrapper used by the CLI."""
    recorder_factory = None
    if out_dir is not None:
        from .scenarios import ImplantRecorder  # avoids a module cycle at import time

        recorder_factory = ImplantRecorder
    server = SessionServer(
        cfg, port=port, out_dir=out_dir, realtime_factor=realtime_factor, recorder_factory=recorder_factory
    )
    server.serve_blocking()
