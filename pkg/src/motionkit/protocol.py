"""Wire protocol for the steering service.

Messages are UTF-8 JSON objects, one per frame.  Two framings carry
them (documented bit-exactly in docs/protocol.md):

* raw TCP: a 4-byte big-endian unsigned length prefix per message,
* WebSocket: one text frame per message (RFC 6455 provides framing).

Client to server: ``steer`` commands.  Server to client: ``hello``,
``state`` broadcasts, ``command_ack`` (with clamp warnings), and
``error`` replies that keep the connection alive.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

VELOCITY_RANGE = (0.0, 6.0)
CRAWL_VELOCITY_RANGE = (0.0, 0.5)
HEIGHT_RANGE = (0.3, 0.8)
DIRECTION_RANGE_DEG = (0.0, 360.0)

MODES = ("walk", "run", "crawl", "squat", "kneel", "box", "layer")

_LEN = struct.Struct(">I")
MAX_FRAME_BYTES = 1 << 22


class ProtocolError(ValueError):
    pass


def encode_frame(message: dict) -> bytes:
    payload = json.dumps(message, separators=(",", ":"), sort_keys=True).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame too large: {len(payload)} bytes")
    return _LEN.pack(len(payload)) + payload


class FrameDecoder:
    """Incremental length-prefixed frame parser."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = _LEN.unpack(self._buf[:4])
            if length > MAX_FRAME_BYTES:
                raise ProtocolError(f"frame length {length} exceeds limit")
            if len(self._buf) < 4 + length:
                return out
            payload = bytes(self._buf[4:4 + length])
            del self._buf[:4 + length]
            try:
                msg = json.loads(payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise ProtocolError(f"bad frame payload: {e}") from e
            if not isinstance(msg, dict):
                raise ProtocolError("frame payload is not an object")
            out.append(msg)


@dataclass(frozen=True)
class SteerCommand:
    """Human steering intent, already in wire units (degrees, meters)."""

    seq: int
    mode: str = "walk"
    velocity: float = 0.0  # m/s
    direction_deg: float = 0.0
    style: str = ""
    height: float = 0.8  # m, squat/kneel pelvis target
    client_ts: float = 0.0

    def to_dict(self) -> dict:
        return {
            "type": "steer", "seq": self.seq, "mode": self.mode,
            "velocity": self.velocity, "direction_deg": self.direction_deg,
            "style": self.style, "height": self.height, "client_ts": self.client_ts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SteerCommand":
        try:
            return cls(
                seq=int(d["seq"]),
                mode=str(d.get("mode", "walk")),
                velocity=float(d.get("velocity", 0.0)),
                direction_deg=float(d.get("direction_deg", 0.0)),
                style=str(d.get("style", "")),
                height=float(d.get("height", 0.8)),
                client_ts=float(d.get("client_ts", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"bad steer command: {e}") from e

    def clamped(self) -> tuple["SteerCommand", list[str]]:
        """Envelope clamping with a list of clamped field names."""
        warnings = []
        vel_range = CRAWL_VELOCITY_RANGE if self.mode == "crawl" else VELOCITY_RANGE
        velocity = min(max(self.velocity, vel_range[0]), vel_range[1])
        if velocity != self.velocity:
            warnings.append("velocity")
        direction = self.direction_deg % 360.0
        if direction != self.direction_deg:
            warnings.append("direction_deg")
        height = min(max(self.height, HEIGHT_RANGE[0]), HEIGHT_RANGE[1])
        if height != self.height:
            warnings.append("height")
        mode = self.mode
        if mode not in MODES:
            warnings.append("mode")
            mode = "walk"
        cmd = SteerCommand(seq=self.seq, mode=mode, velocity=velocity,
                           direction_deg=direction, style=self.style,
                           height=height, client_ts=self.client_ts)
        return cmd, warnings


@dataclass(frozen=True)
class StateUpdate:
    """Broadcast snapshot of the runtime, decimated for bandwidth."""

    time_s: float  # virtual (or monotonic) runtime clock
    wall_ts: float
    root_pos: tuple  # (x, y, z)
    root_yaw: float
    joint_pos: tuple
    applied_seq: int  # newest steer seq consumed by the input task
    applied_at: float  # runtime clock when it was consumed
    applied_warnings: tuple  # clamped field names of that command
    plan_cmd_seq: int  # steer seq the current plan reflects
    plan_created_at: float
    plan_preview: tuple  # ((x, y, z, heading), ...) <= preview cap
    plan_spring_target: tuple | None  # (x, y, heading)
    plan_root_state: tuple | None  # (x, y, heading, vx, vy, heading_rate) at planning time
    deadline_misses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": "state", "time_s": self.time_s, "wall_ts": self.wall_ts,
            "root_pos": list(self.root_pos), "root_yaw": self.root_yaw,
            "joint_pos": list(self.joint_pos),
            "applied_seq": self.applied_seq, "applied_at": self.applied_at,
            "applied_warnings": list(self.applied_warnings),
            "plan_cmd_seq": self.plan_cmd_seq, "plan_created_at": self.plan_created_at,
            "plan_preview": [list(p) for p in self.plan_preview],
            "plan_spring_target": None if self.plan_spring_target is None else list(self.plan_spring_target),
            "plan_root_state": None if self.plan_root_state is None else list(self.plan_root_state),
            "deadline_misses": dict(self.deadline_misses),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateUpdate":
        return cls(
            time_s=float(d["time_s"]), wall_ts=float(d["wall_ts"]),
            root_pos=tuple(d["root_pos"]), root_yaw=float(d["root_yaw"]),
            joint_pos=tuple(d["joint_pos"]),
            applied_seq=int(d["applied_seq"]), applied_at=float(d["applied_at"]),
            applied_warnings=tuple(d["applied_warnings"]),
            plan_cmd_seq=int(d["plan_cmd_seq"]), plan_created_at=float(d["plan_created_at"]),
            plan_preview=tuple(tuple(p) for p in d["plan_preview"]),
            plan_spring_target=None if d["plan_spring_target"] is None else tuple(d["plan_spring_target"]),
            plan_root_state=None if d["plan_root_state"] is None else tuple(d["plan_root_state"]),
            deadline_misses=dict(d.get("deadline_misses", {})),
        )


def error_message(reason: str, detail: str = "") -> dict:
    return {"type": "error", "reason": reason, "detail": detail}


def ack_message(seq: int, warnings: list[str]) -> dict:
    return {"type": "command_ack", "seq": seq, "clamped": bool(warnings), "clamped_fields": warnings}


def hello_message(skeleton: str, joint_count: int, styles: list[str]) -> dict:
    return {"type": "hello", "skeleton": skeleton, "joint_count": joint_count, "styles": styles, "version": 1}
