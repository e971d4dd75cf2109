"""Fewest touches an evicted page needs before Banshee re-admits it.

Two pages share a one-way set and alternate in random-length blocks, with the
sample gate in its deterministic stride mode. Prints the observed minimum
against 2 * threshold / rate for several counter widths.

    python scripts/reentry_probe.py [--rate 0.1] [--schedules 200]
"""

import argparse
import random

from banshee_sim import BansheeCache, BansheeParams, Geometry
from banshee_sim.base import simulate
from banshee_sim.trace import READ, MemEvent, Trace


def gaps(order, rate, bits):
    geo = Geometry(cache_capacity=4096, ways=1, num_mcs=1)
    d = BansheeCache(geo, BansheeParams(fixed_sample_rate=rate, deterministic_sampling=True, counter_bits=bits),
                     record_log=True)
    simulate(d, Trace.from_events([MemEvent(READ, p * geo.sets * 64, 1) for p in order]))
    by_event = {}
    for n, kind, key in d.log:
        by_event.setdefault(n, []).append((kind, key))
    since, out = {}, []
    for n, page in enumerate(order, 1):
        if page << 1 in since:
            since[page << 1] += 1
        for kind, key in by_event.get(n, ()):
            if kind == "evict":
                since[key] = 0
            elif key in since:
                out.append(since.pop(key))
    return d.threshold, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rate", type=float, default=0.1)
    ap.add_argument("--schedules", type=int, default=200)
    ap.add_argument("--events", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for bits in (5, 8, 12):
        rng = random.Random(args.seed)
        worst, n, thr = None, 0, 0
        for _ in range(args.schedules):
            order, who = [], 0
            while len(order) < args.events:
                order += [who] * rng.randrange(1, 200)
                who ^= 1
            thr, g = gaps(order, args.rate, bits)
            n += len(g)
            if g:
                worst = min(g) if worst is None else min(worst, min(g))
        print(f"{bits:>2}-bit counters: min {worst} touches over {n} re-admissions, bound {2 * thr / args.rate:g}")


if __name__ == "__main__":
    main()
