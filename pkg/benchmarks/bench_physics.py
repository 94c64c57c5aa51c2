"""Time the compiled physics kernel against the pure-Python fallback.

    python benchmarks/bench_physics.py [--steps 2000] [--repeat 5]

Each scenario is stepped from the same start state with both kernels; the
final positions are checked for bit-exact agreement before timings are shown.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from coordprior import env
from coordprior.env import make_spec
from coordprior.physics import compiled_physics_step, python_physics_step


def make_case(scenario: str, seed: int = 0):
    spec = make_spec(scenario)
    lay = env.layout(spec)
    state, _ = env.reset(spec, seed)
    rng = np.random.default_rng(seed)
    force = rng.uniform(-1, 1, state.pos.shape) * lay.movable[:, None]
    args = (lay.mass, lay.size, lay.movable, lay.pair_mask, lay.friction,
            spec.dt, spec.damping, spec.contact_force, spec.contact_margin)
    return state.pos.copy(), state.vel.copy(), np.ascontiguousarray(force), args


def run(kernel, case, steps: int):
    pos, vel, force, args = case
    pos, vel = pos.copy(), vel.copy()
    for _ in range(steps):
        kernel(pos, vel, force, *args)
    return pos, vel


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if compiled_physics_step is None:
        print("compiled kernel not built; only the python backend is available")
    print(f"{'scenario':<18} {'entities':>8} {'python us/step':>15} {'compiled us/step':>17} {'speedup':>8}")
    for scenario in env.SCENARIOS:
        case = make_case(scenario)
        py = min(timeit.repeat(lambda: run(python_physics_step, case, args.steps),
                               number=1, repeat=args.repeat)) / args.steps * 1e6
        if compiled_physics_step is None:
            print(f"{scenario:<18} {case[0].shape[0]:>8} {py:>15.2f} {'-':>17} {'-':>8}")
            continue
        a, b = run(python_physics_step, case, 200), run(compiled_physics_step, case, 200)
        if not (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])):
            raise SystemExit(f"{scenario}: backends disagree")
        cc = min(timeit.repeat(lambda: run(compiled_physics_step, case, args.steps),
                               number=1, repeat=args.repeat)) / args.steps * 1e6
        print(f"{scenario:<18} {case[0].shape[0]:>8} {py:>15.2f} {cc:>17.2f} {py / cc:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
