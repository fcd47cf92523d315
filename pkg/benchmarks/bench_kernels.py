"""Time the compiled and pure-Python kernels on the same scenarios.

    python benchmarks/bench_kernels.py [--slots N] [--repeat R]
"""
import argparse
import time

from hybridmac import engine
from hybridmac.baselines import saturated_aloha_scenario
from hybridmac.model import preset_scenario


def cases(slots):
    yield "hybrid group1 light", "hybrid", preset_scenario("group1", 23, 8, 1e-3, 0, sim_slots=slots)
    yield "hybrid group1 heavy", "hybrid", preset_scenario("group1", 23, 8, 0.5, 0, sim_slots=slots)
    yield "hybrid group3 heavy", "hybrid", preset_scenario("group3", 27, 8, 0.5, 0, sim_slots=slots)
    yield "aloha group3 heavy", "aloha", preset_scenario("group3", 27, 8, 0.5, 0, sim_slots=slots)
    yield "aloha saturated n=70", "aloha", saturated_aloha_scenario(70, 0.01, sim_slots=slots)
    yield "tdma group3 heavy", "tdma", preset_scenario("group3", 27, 8, 0.5, 0, sim_slots=slots)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--slots", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = engine.available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available")
    print(f"{'case':24s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup  identical")
    for name, scheme, sc in cases(args.slots):
        results = {b: best_of(lambda b=b: engine.simulate(sc, scheme, b), args.repeat) for b in backends}
        cols = " ".join(f"{results[b][0] * 1e3:8.1f}ms" for b in backends)
        if len(backends) == 2:
            speed = results["python"][0] / results["cython"][0]
            same = results["python"][1].equals(results["cython"][1])
            print(f"{name:24s} {cols}   {speed:6.1f}x  {same}")
        else:
            print(f"{name:24s} {cols}")


if __name__ == "__main__":
    main()
