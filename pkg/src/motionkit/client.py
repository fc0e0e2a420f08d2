"""Python steering client (tests, demos, and scripting)."""

from __future__ import annotations

import queue
import socket
import threading
import time

from .protocol import FrameDecoder, SteerCommand, encode_frame


class ClientError(RuntimeError):
    pass


class SteerClient:
    """Blocking TCP client over the length-prefixed JSON framing."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        self.sock.settimeout(0.25)
        self._seq = 0
        self._messages: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        decoder = FrameDecoder()
        while not self._stop.is_set():
            try:
                data = self.sock.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            for msg in decoder.feed(data):
                self._messages.put(msg)

    def steer(self, mode: str = "walk", velocity: float = 0.0, direction_deg: float = 0.0,
              style: str = "", height: float = 0.8) -> int:
        """Send one command; returns its sequence number."""
        self._seq += 1
        cmd = SteerCommand(seq=self._seq, mode=mode, velocity=velocity,
                           direction_deg=direction_deg, style=style, height=height,
                           client_ts=time.time())
        self.sock.sendall(encode_frame(cmd.to_dict()))
        return self._seq

    def send_raw(self, message: dict) -> None:
        self.sock.sendall(encode_frame(message))

    def next_message(self, timeout: float = 2.0) -> dict:
        try:
            return self._messages.get(timeout=timeout)
        except queue.Empty:
            raise ClientError("timed out waiting for a message") from None

    def wait_for(self, predicate, timeout: float = 5.0) -> dict:
        """First message satisfying the predicate, draining the queue."""
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ClientError("timed out waiting for a matching message")
            msg = self.next_message(timeout=remaining)
            if predicate(msg):
                return msg

    def close(self) -> None:
        self._stop.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        self._reader.join(timeout=1.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
