"""The stage-server command line."""

import argparse
import logging
import sys

from . import kernels
from .bvh import parse_bvh
from .device import UdpMocapListener
from .eventbus import BusSession, Station, StationRole
from .scene import load_scene
from .script import load_script
from .server import SessionConfig, StageServer


def _addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {value!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stage-server",
        description="Real-time avatar stage server: ingest, retarget, blend, "
        "pathfind and coordinate operator stations.",
    )
    parser.add_argument("--scene", required=True, help="scene file (INI)")
    parser.add_argument("--tick-rate", type=int, default=60, help="ticks per second (10..240)")
    parser.add_argument("--replay", help="BVH clip registered as a replay input")
    parser.add_argument("--replay-as", default="replay1", help="input id for --replay")
    parser.add_argument("--listen-mocap", type=_addr, help="UDP host:port for device frames")
    parser.add_argument("--listen-bus", help="TCP host:port for the station event bus")
    parser.add_argument("--listen-console", type=_addr, help="WebSocket host:port for consoles")
    parser.add_argument("--script", help="tick-indexed command script")
    parser.add_argument("--record", help="write the frame-packet log here")
    parser.add_argument("--smooth-alpha", type=float, default=0.8,
                        help="capture smoothing fraction (1 = passthrough)")
    parser.add_argument("--max-ticks", type=int, help="stop after this many ticks")
    parser.add_argument("--fast", action="store_true",
                        help="run ticks back to back without pacing (replay/CI runs)")
    parser.add_argument("--stats", action="store_true", help="print tick timing at exit")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    log = logging.getLogger("stage-server")

    scene = load_scene(args.scene)
    config = SessionConfig(
        scene_path=args.scene,
        tick_rate=args.tick_rate,
        smooth_alpha=args.smooth_alpha,
        record_path=args.record,
    )

    bus = None
    if args.listen_bus:
        own = next(
            (s for _, s in scene.stations if s.role is StationRole.Server), None
        )
        station = Station(own.id if own else 999, StationRole.Server, args.listen_bus)
        bus = BusSession(station, listen=True)
        for _, peer in scene.stations:
            if peer.address and peer.address != args.listen_bus:
                bus.connect_peer(peer.address)
        if bus.unreachable:
            log.warning("unreachable bus peers: %s", ", ".join(bus.unreachable))

    server = StageServer(scene, config, bus)
    log.info("kernel backend: %s", kernels.backend_name())

    listener = None
    needs_udp = args.listen_mocap or any(i.kind == "mocap" for i in scene.inputs)
    if needs_udp:
        bind = args.listen_mocap or ("0.0.0.0", 7650)
        listener = UdpMocapListener(bind)
        listener.start()
        log.info("listening for device frames on udp://%s:%s", *listener.address)

    for spec in scene.inputs:
        if spec.kind == "replay":
            with open(spec.source, "r", encoding="utf-8") as fh:
                clip = parse_bvh(fh.read())
            server.add_replay_input(spec.id, clip, _regions(spec.regions))
        elif spec.kind == "mocap":
            server.add_mocap_input(
                spec.id, listener.mailbox(spec.source), spec.rig, _regions(spec.regions)
            )
        elif spec.kind == "gamepad":
            server.add_gamepad_input(spec.id)
    if args.replay:
        with open(args.replay, "r", encoding="utf-8") as fh:
            clip = parse_bvh(fh.read())
        server.add_replay_input(args.replay_as, clip)

    if scene.puppeteer_routes:
        server.set_routes(scene.puppeteer_routes)
    else:
        server.autowire_routes()

    if args.script:
        server.load_schedule(load_script(args.script))

    gateway = None
    if args.listen_console:
        from .gateway import ConsoleGateway

        gateway = ConsoleGateway(server, args.listen_console, config.console_decimation)
        gateway.start()
        log.info("console gateway on ws://%s:%s", *gateway.address)

    try:
        server.run(max_ticks=args.max_ticks, realtime=not args.fast)
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        server.close()
        if gateway is not None:
            gateway.stop()
        if listener is not None:
            listener.stop()
        if bus is not None:
            bus.close()

    if args.stats:
        stats = server.tick_stats()
        if stats["ticks"]:
            print(
                f"ticks: {stats['ticks']}  median: {stats['median_ms']:.3f} ms  "
                f"p99: {stats['p99_ms']:.3f} ms  max: {stats['max_ms']:.3f} ms"
            )
        else:
            print("no ticks ran")
    return 0


def _regions(names):
    if not names:
        return None
    from .puppeteer import BodyRegion

    return frozenset(BodyRegion(n) for n in names)


if __name__ == "__main__":
    sys.exit(main())
