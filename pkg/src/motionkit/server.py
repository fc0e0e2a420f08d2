"""Live steering service: bridges human commands to the planner/runtime
and streams state back to clients.

The runtime (streamer/input/policy/planner/broadcast tasks) runs on the
virtual clock by default, optionally paced to real time, or on the
wall clock with per-task threads.  Clients connect over TCP
(length-prefixed JSON frames) or WebSocket (one JSON message per text
frame); a slow or stalled client only ever fills its own bounded queue,
it can never delay a runtime task.

Commands are clamped to the published envelopes server-side (the UI
also clamps) and acknowledged with the clamped field list.  Every plan
records the newest steer sequence it reflects plus the root state and
spring target it was built from, so clients can verify causality and
spring-model consistency end to end.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .codec import MotionCodec
from .config import Config
from .fsq import FsqSpec
from .library import ClipLibrary, ingest_dataset, synthetic_library
from .plant import Plant, RootRef
from .planner import (
    KEYFRAME_COUNT,
    LayerCommand,
    NavCommand,
    PlanRequest,
    RetrievalPredictor,
    SkillCommand,
    build_segment_library,
    plan as run_planner,
    root_state_of,
)
from .rotations import yaw_of_quat
from .protocol import (
    FrameDecoder,
    ProtocolError,
    SteerCommand,
    StateUpdate,
    ack_message,
    encode_frame,
    error_message,
    hello_message,
)
from .runtime import (
    PRIO_INPUT,
    PRIO_PLANNER,
    PRIO_POLICY,
    PRIO_STREAMER,
    INPUT_HZ,
    PLANNER_HZ,
    POLICY_HZ,
    STREAMER_HZ,
    ActionBundle,
    PlantSnapshot,
    snapshot_of,
)
from .scheduler import LiveLoop, SimLoop, TaskSpec, hz_to_period_ticks

log = logging.getLogger("motionkit.server")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


@dataclass
class _PlanBox:
    segment: object
    start_time: float
    cmd_seq: int
    spring_target: tuple | None
    root_state: tuple | None


class _Client:
    """One connection; owns its socket and a bounded outgoing queue."""

    _ids = 0

    def __init__(self, sock: socket.socket, transport: str, queue_size: int):
        _Client._ids += 1
        self.id = _Client._ids
        self.sock = sock
        self.transport = transport  # "tcp" | "ws"
        self.queue: deque = deque(maxlen=queue_size)
        self.queue_cv = threading.Condition()
        self.alive = True

    def enqueue(self, message: dict) -> None:
        with self.queue_cv:
            self.queue.append(message)  # deque(maxlen) drops the oldest
            self.queue_cv.notify()

    def send_bytes(self, message: dict) -> bytes:
        if self.transport == "tcp":
            return encode_frame(message)
        return _ws_text_frame(message)

    def close(self) -> None:
        self.alive = False
        with self.queue_cv:
            self.queue_cv.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def _ws_text_frame(message: dict) -> bytes:
    import json

    payload = json.dumps(message, separators=(",", ":"), sort_keys=True).encode("utf-8")
    head = bytearray([0x81])  # FIN + text
    n = len(payload)
    if n < 126:
        head.append(n)
    elif n < (1 << 16):
        head.append(126)
        head += struct.pack(">H", n)
    else:
        head.append(127)
        head += struct.pack(">Q", n)
    return bytes(head) + payload


class _WsReader:
    """Minimal RFC 6455 server-side reader: text, ping, close."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buf = bytearray()

    def _need(self, n: int) -> bool:
        while len(self.buf) < n:
            chunk = self.sock.recv(4096)
            if not chunk:
                return False
            self.buf.extend(chunk)
        return True

    def read_message(self):
        """One text payload, or None when the peer closes."""
        while True:
            if not self._need(2):
                return None
            b0, b1 = self.buf[0], self.buf[1]
            opcode = b0 & 0x0F
            masked = bool(b1 & 0x80)
            length = b1 & 0x7F
            offset = 2
            if length == 126:
                if not self._need(4):
                    return None
                length = struct.unpack(">H", self.buf[2:4])[0]
                offset = 4
            elif length == 127:
                if not self._need(10):
                    return None
                length = struct.unpack(">Q", self.buf[2:10])[0]
                offset = 10
            mask = b""
            if masked:
                if not self._need(offset + 4):
                    return None
                mask = bytes(self.buf[offset:offset + 4])
                offset += 4
            if not self._need(offset + length):
                return None
            payload = bytes(self.buf[offset:offset + length])
            del self.buf[:offset + length]
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                return None
            if opcode == 0x9:  # ping -> pong
                pong = bytes([0x8A, len(payload)]) + payload
                self.sock.sendall(pong)
                continue
            if opcode in (0x1, 0x2):
                return payload
            # ignore continuation/pong frames


def _ws_handshake(sock: socket.socket) -> bool:
    data = bytearray()
    sock.settimeout(5.0)
    try:
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(4096)
            if not chunk:
                return False
            data.extend(chunk)
            if len(data) > 65536:
                return False
    finally:
        sock.settimeout(None)
    headers = {}
    for line in bytes(data).decode("latin-1").split("\r\n")[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if not key:
        return False
    accept = base64.b64encode(hashlib.sha1((key + _WS_GUID).encode()).digest()).decode()
    sock.sendall(
        b"HTTP/1.1 101 Switching Protocols\r\n"
        b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
        b"Sec-WebSocket-Accept: " + accept.encode() + b"\r\n\r\n"
    )
    return True


class SteerServer:
    """Owns the runtime loop, the listeners, and the client set."""

    def __init__(self, config: Config, library: ClipLibrary | None = None):
        self.config = config
        self.skeleton = config.skeleton()
        rng = np.random.default_rng(config.seed)
        if library is not None:
            self.library = library
        elif config.planner.library_path:
            self.library, report = ingest_dataset(config.planner.library_path, self.skeleton)
            if report.rejected:
                log.warning("ingest rejected %d clips: %s", len(report.rejected), report.rejected)
        else:
            self.library = synthetic_library(self.skeleton, seed=config.seed)
        self.codec = MotionCodec(
            skeleton=self.skeleton,
            key_spec=FsqSpec(dims=config.planner.codec_key_dims, levels=config.planner.codec_key_levels),
        )
        self.segment_library = build_segment_library(
            self.library.all_clips(), self.codec,
            segments_per_clip=config.planner.segments_per_clip, rng=rng,
        )
        self.predictor = RetrievalPredictor(self.segment_library)
        self.plan_rng = np.random.default_rng(config.seed + 1)

        self._inject: deque = deque()
        self._inject_lock = threading.Lock()
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._listeners: list[socket.socket] = []
        self.loop = None
        self._history: deque = deque(maxlen=KEYFRAME_COUNT)
        self._prev_targets = None
        self.bound_port = None
        self.bound_ws_port = None

    # -- runtime task graph -------------------------------------------

    def _input_task(self, ctx):
        newest = None
        with self._inject_lock:
            while self._inject:
                newest = self._inject.popleft()  # keep only the last; latest wins
        if newest is None:
            return
        cmd, warnings = newest.clamped()
        ctx.publish("steer", {"cmd": cmd, "warnings": warnings, "consumed_at": ctx.time_s},
                    source_seq=cmd.seq)
        ctx.wake("planner")  # immediate replan on fresh commands

    def _policy_task(self, ctx):
        state, _ = ctx.read("plant_state")
        if state is None:
            return
        frame = state.pose_frame(self.skeleton)
        self._history.append(frame)
        while len(self._history) < KEYFRAME_COUNT:  # startup: held-still context
            self._history.append(frame)
        ctx.publish("history", tuple(self._history))
        box, _ = ctx.read("plan_box")
        if box is None:
            targets = state.q.copy()
            root_ref = None
            reflects = -1
        else:
            offset = ctx.time_s - box.start_time
            plan_frame = box.segment.frame_at(offset)
            targets = plan_frame.joint_pos.copy()
            root_ref = RootRef(
                pos=plan_frame.root_pos.copy(),
                yaw=float(yaw_of_quat(plan_frame.root_rot)),
                lin_vel=plan_frame.root_lin_vel.copy(),
                yaw_rate=float(plan_frame.root_ang_vel[2]),
            )
            reflects = box.cmd_seq
        ctx.publish("action", ActionBundle(targets=targets, root_ref=root_ref, reflects=reflects),
                    reflects=reflects)

    def _planner_task(self, ctx):
        steer, _ = ctx.read("steer")
        history, _ = ctx.read("history")
        if history is None or len(history) < KEYFRAME_COUNT:
            return
        if steer is None:
            command = NavCommand(speed=0.0, direction=0.0, style="idle")
            seq = -1
        else:
            command = self._map_command(steer["cmd"])
            seq = steer["cmd"].seq
        request = PlanRequest(context_keyframes=tuple(history), command=command)
        try:
            segment = run_planner(request, self.library, self.predictor, self.codec,
                                  self.plan_rng, self.config.planner.max_iterations, command_seq=seq)
        except Exception as e:  # noqa: BLE001 - a bad command must not kill the loop
            log.warning("planning failed: %r", e)
            return
        rs = root_state_of(history[-1])
        ctx.publish("plan_box", _PlanBox(
            segment=segment,
            start_time=ctx.time_s,
            cmd_seq=seq,
            spring_target=None if segment.spring_target is None else (
                segment.spring_target.x, segment.spring_target.y, segment.spring_target.heading,
            ),
            root_state=(rs.x, rs.y, rs.heading, rs.vx, rs.vy, rs.heading_rate),
        ), reflects=seq)

    def _map_command(self, cmd: SteerCommand):
        direction = float(np.deg2rad(cmd.direction_deg))
        style = cmd.style or cmd.mode
        if cmd.mode in ("walk", "run", "box"):
            return NavCommand(speed=cmd.velocity, direction=direction, style=style)
        if cmd.mode == "crawl":
            return SkillCommand(skill="crawl", speed=cmd.velocity, direction=direction)
        if cmd.mode in ("squat", "kneel"):
            return SkillCommand(skill=cmd.mode, height=cmd.height)
        if cmd.mode == "layer":
            upper = self.skeleton.joint_indices(self.skeleton.upper_joints)
            source = self.library.clips_of_style(style)[0] if style in self.library.styles() else None
            pose = source.frame(0).joint_pos[upper] if source is not None else np.zeros(len(upper))
            return LayerCommand(upper_joint_pos=pose)
        return NavCommand(speed=cmd.velocity, direction=direction, style="walk")

    def _broadcast_task(self, ctx):
        snap = snapshot_of(ctx, goal_mailbox="steer")
        state, steer, box = snap.plant, snap.goal, snap.plan
        if state is None:
            return
        cap = self.config.server.plan_preview_frames
        preview = ()
        if box is not None:
            frames = box.segment.frames
            stride = max(1, int(np.ceil(len(frames) / cap)))
            preview = tuple(
                (float(f.root_pos[0]), float(f.root_pos[1]), float(f.root_pos[2]), float(yaw_of_quat(f.root_rot)))
                for f in frames[::stride]
            )[:cap]
        misses = dict(self.loop.deadline_misses) if isinstance(self.loop, LiveLoop) else {}
        update = StateUpdate(
            time_s=ctx.time_s,
            wall_ts=time.time(),
            root_pos=tuple(float(v) for v in state.root_pos),
            root_yaw=float(state.root_yaw),
            joint_pos=tuple(float(v) for v in state.q),
            applied_seq=-1 if steer is None else steer["cmd"].seq,
            applied_at=0.0 if steer is None else steer["consumed_at"],
            applied_warnings=() if steer is None else tuple(steer["warnings"]),
            plan_cmd_seq=-1 if box is None else box.cmd_seq,
            plan_created_at=0.0 if box is None else box.start_time,
            plan_preview=preview,
            plan_spring_target=None if box is None else box.spring_target,
            plan_root_state=None if box is None else box.root_state,
            deadline_misses=misses,
        )
        self._fanout(update.to_dict())

    def _fanout(self, message: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.enqueue(message)

    # -- loop assembly ---------------------------------------------------

    def _build_tasks(self, loop) -> None:
        plant = Plant(self.skeleton, 1.0 / STREAMER_HZ)
        idle = self.library.entries["idle"].clip if "idle" in self.library.entries else None
        start = idle.frame(0) if idle is not None else self.library.all_clips()[0].frame(0)
        plant.reset_to_frame(start)

        def streamer_task(ctx):
            bundle, _ = ctx.read("action")
            if bundle is None:
                plant.step(None, None)
                reflects = -1
            else:
                plant.step(bundle.targets, bundle.root_ref)
                reflects = bundle.reflects
            ctx.publish("plant_state", PlantSnapshot(
                time=plant.time, q=plant.q.copy(), qd=plant.qd.copy(),
                root_pos=plant.root_pos.copy(), root_yaw=plant.root_yaw,
                root_vel=plant.root_vel.copy(), yaw_rate=plant.yaw_rate,
            ))
            ctx.publish("actuation", reflects, reflects=reflects)

        broadcast_period = hz_to_period_ticks(self.config.server.broadcast_hz)
        loop.add_task(TaskSpec("streamer", hz_to_period_ticks(STREAMER_HZ), PRIO_STREAMER), streamer_task)
        loop.add_task(TaskSpec("input", hz_to_period_ticks(INPUT_HZ), PRIO_INPUT), self._input_task)
        loop.add_task(TaskSpec("policy", hz_to_period_ticks(POLICY_HZ), PRIO_POLICY), self._policy_task)
        loop.add_task(TaskSpec("planner", hz_to_period_ticks(PLANNER_HZ), PRIO_PLANNER), self._planner_task)
        loop.add_task(TaskSpec("broadcast", broadcast_period, PRIO_PLANNER + 1), self._broadcast_task)

    # -- sockets ---------------------------------------------------------

    def _client_reader(self, client: _Client) -> None:
        try:
            if client.transport == "tcp":
                decoder = FrameDecoder()
                while client.alive and not self._stop.is_set():
                    data = client.sock.recv(4096)
                    if not data:
                        break
                    try:
                        messages = decoder.feed(data)
                    except ProtocolError as e:
                        client.enqueue(error_message("bad_frame", str(e)))
                        break  # framing is unrecoverable on a byte stream
                    for msg in messages:
                        self._handle_message(client, msg)
            else:
                reader = _WsReader(client.sock)
                import json

                while client.alive and not self._stop.is_set():
                    payload = reader.read_message()
                    if payload is None:
                        break
                    try:
                        msg = json.loads(payload.decode("utf-8"))
                        if not isinstance(msg, dict):
                            raise ProtocolError("payload is not an object")
                    except (ProtocolError, ValueError, UnicodeDecodeError) as e:
                        client.enqueue(error_message("bad_message", str(e)))
                        continue  # websocket framing survives bad payloads
                    self._handle_message(client, msg)
        except OSError:
            pass
        finally:
            self._drop_client(client)

    def _handle_message(self, client: _Client, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "steer":
            try:
                cmd = SteerCommand.from_dict(msg)
            except ProtocolError as e:
                client.enqueue(error_message("bad_steer", str(e)))
                return
            _, warnings = cmd.clamped()
            with self._inject_lock:
                self._inject.append(cmd)
            if isinstance(self.loop, LiveLoop):
                self.loop.wake("input")
            client.enqueue(ack_message(cmd.seq, warnings))
        elif kind == "ping":
            client.enqueue({"type": "pong", "echo": msg.get("echo")})
        else:
            client.enqueue(error_message("unknown_type", str(kind)))

    def _client_writer(self, client: _Client) -> None:
        try:
            while client.alive and not self._stop.is_set():
                with client.queue_cv:
                    while not client.queue and client.alive and not self._stop.is_set():
                        client.queue_cv.wait(timeout=0.25)
                    if not client.queue:
                        continue
                    msg = client.queue.popleft()
                client.sock.sendall(client.send_bytes(msg))
        except OSError:
            pass
        finally:
            self._drop_client(client)

    def _drop_client(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        client.close()

    def _accept_loop(self, listener: socket.socket, transport: str) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if transport == "ws" and not _ws_handshake(sock):
                sock.close()
                continue
            client = _Client(sock, transport, self.config.server.client_queue)
            client.enqueue(hello_message(self.skeleton.name, self.skeleton.joint_count,
                                         sorted(self.library.styles())))
            with self._clients_lock:
                self._clients.append(client)
            for fn in (self._client_reader, self._client_writer):
                t = threading.Thread(target=fn, args=(client,), daemon=True)
                t.start()
                self._threads.append(t)

    # -- lifecycle ---------------------------------------------------------

    def start(self, run_for_s: float = 3600.0) -> None:
        cfg = self.config.server
        listener = socket.create_server((cfg.host, cfg.port))
        self.bound_port = listener.getsockname()[1]
        self._listeners.append(listener)
        t = threading.Thread(target=self._accept_loop, args=(listener, "tcp"), daemon=True)
        t.start()
        self._threads.append(t)
        if cfg.ws_port is not None:
            ws_listener = socket.create_server((cfg.host, cfg.ws_port))
            self.bound_ws_port = ws_listener.getsockname()[1]
            self._listeners.append(ws_listener)
            t = threading.Thread(target=self._accept_loop, args=(ws_listener, "ws"), daemon=True)
            t.start()
            self._threads.append(t)

        if cfg.clock == "wall":
            self.loop = LiveLoop()
            self._build_tasks(self.loop)
            self.loop.start()
        else:
            self.loop = SimLoop(record_trace=False)
            self.loop.pace = cfg.pace
            self._build_tasks(self.loop)
            stop = _ServeStop(self._stop)
            self.loop.stop_flag = stop
            t = threading.Thread(target=self.loop.run, args=(run_for_s,), daemon=True)
            t.start()
            self._threads.append(t)
        log.info("steering server on %s:%s (clock=%s)", cfg.host, self.bound_port, cfg.clock)

    def stop(self) -> None:
        self._stop.set()
        if isinstance(self.loop, LiveLoop):
            self.loop.stop()
        for listener in self._listeners:
            try:
                listener.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()
        for t in self._threads:
            t.join(timeout=2.0)


class _ServeStop:
    def __init__(self, event: threading.Event):
        self._event = event

    @property
    def stop(self) -> bool:
        return self._event.is_set()


def serve(config: Config, run_for_s: float = 3600.0, block: bool = True) -> SteerServer:
    server = SteerServer(config)
    server.start(run_for_s)
    if block:
        try:
            while not server._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            server.stop()
    return server
