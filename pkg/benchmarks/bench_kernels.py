#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Times the per-tick hot spots (batched quaternion products, batched slerp,
forward kinematics, grid A*) plus a whole server tick in both backends.

    python benchmarks/bench_kernels.py [--repeat 200]
"""

import argparse
import math
import time

import numpy as np

from stagelink import _kern_py

try:
    from stagelink import _kern_c
except ImportError:
    _kern_c = None


def timeit(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    quats_a = rng.normal(size=(40, 4))
    quats_a /= np.linalg.norm(quats_a, axis=1)[:, None]
    quats_b = rng.normal(size=(40, 4))
    quats_b /= np.linalg.norm(quats_b, axis=1)[:, None]
    parents = np.array([-1] + [int(rng.integers(0, j)) for j in range(1, 40)], dtype=np.int64)
    offsets = rng.normal(size=(40, 3))
    root = np.zeros(3)
    walk = (rng.random(100 * 100) > 0.15).astype(np.uint8)
    walk[0] = walk[-1] = 1

    cases = {
        "quat_mul_batch (40 joints)": lambda k: k.quat_mul_batch(quats_a, quats_b),
        "slerp_batch (40 joints)": lambda k: k.slerp_batch(quats_a, quats_b, 0.37),
        "fk (40 joints)": lambda k: k.fk(parents, offsets, quats_a, quats_b, root),
        "astar (100x100, corner to corner)": lambda k: k.astar_grid(
            walk, 100, 100, 0, 100 * 100 - 1
        ),
    }
    backends = [("pure", _kern_py)] + ([("native", _kern_c)] if _kern_c else [])
    print(f"{'kernel':38} " + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, call in cases.items():
        times = [timeit(lambda k=k: call(k), repeat) for _, k in backends]
        row = f"{label:38} " + "".join(f"{t * 1e6:>10.1f}us" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


def bench_tick(repeat):
    import os
    import tempfile

    from stagelink import fixtures
    from stagelink.bvh import parse_bvh
    from stagelink.scene import load_scene
    from stagelink.server import SessionConfig, StageServer

    with tempfile.TemporaryDirectory() as tmp:
        assets = fixtures.write_demo_assets(tmp, frames=240)
        scene = load_scene(assets["scene"])
        server = StageServer(scene, SessionConfig(tick_rate=60))
        with open(assets["bvh"]) as fh:
            server.add_replay_input("replayA", parse_bvh(fh.read()))
        server.set_routes(scene.puppeteer_routes)
        for _ in range(50):
            server.run_tick()  # warm up
        t = timeit(server.run_tick, repeat)
        from stagelink.kernels import backend_name

        print(f"\nfull server tick ({backend_name()} backend): {t * 1e3:.3f} ms best-of-{repeat}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    if _kern_c is None:
        print("note: compiled backend not built; timing the fallback only\n")
    bench_kernels(args.repeat)
    bench_tick(args.repeat)
