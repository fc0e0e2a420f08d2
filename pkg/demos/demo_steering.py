"""Interactive steering end to end: virtual-clock server plus a scripted
client driving velocity, squat, and crawl commands.

Run: python demos/demo_steering.py
"""

import time
from dataclasses import replace

from motionkit.client import SteerClient
from motionkit.config import build_config
from motionkit.server import SteerServer


def main():
    cfg = build_config("desk")
    cfg = replace(cfg, server=replace(cfg.server, port=0, pace=None, broadcast_hz=20))
    server = SteerServer(cfg)
    server.start(run_for_s=60.0)
    print(f"virtual-clock steering server on port {server.bound_port}")
    try:
        with SteerClient("127.0.0.1", server.bound_port) as client:
            hello = client.wait_for(lambda m: m.get("type") == "hello")
            print(f"hello: skeleton={hello['skeleton']} styles={hello['styles']}")

            for label, kwargs in [
                ("walk 1.5 m/s east", dict(mode="walk", velocity=1.5, direction_deg=0)),
                ("run 3.0 m/s north", dict(mode="run", velocity=3.0, direction_deg=90)),
                ("squat to 0.40 m", dict(mode="squat", height=0.40)),
                ("crawl 0.3 m/s", dict(mode="crawl", velocity=0.3)),
                ("overspeed 9.9 m/s (clamps)", dict(mode="walk", velocity=9.9)),
            ]:
                seq = client.steer(**kwargs)
                ack = client.wait_for(lambda m: m.get("type") == "command_ack" and m["seq"] == seq)
                state = client.wait_for(
                    lambda m: m.get("type") == "state" and m["plan_cmd_seq"] >= seq, timeout=15.0,
                )
                lag = state["plan_created_at"] - state["applied_at"]
                flags = f" clamped={ack['clamped_fields']}" if ack["clamped"] else ""
                target = state["plan_spring_target"]
                print(f"  {label:28s} replanned {lag * 1000:5.1f} ms after consumption,"
                      f" spring target ({target[0]:+.2f}, {target[1]:+.2f}){flags}")
                time.sleep(0.05)
    finally:
        server.stop()
    print("server stopped")


if __name__ == "__main__":
    main()
