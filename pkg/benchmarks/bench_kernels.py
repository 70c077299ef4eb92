"""Wall-time comparison of the compiled and pure-python round kernels.

Times the two hot loops (coordination rounds and quantized mixing
rounds) on a representative workload under each available backend, and
checks that the backends produce bit-identical states.

Run from the repository root::

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --agents 120 --dim 100
"""

import argparse
import time

import numpy as np

from qnopt import FtqcConfig, Quantizer, ftqc_run, generate_graph
from qnopt import kernels
from qnopt.network import metropolis_weights
from qnopt.quantize import per_agent_arrays


def _time_best(fn, repeats):
    """Best-of-``repeats`` wall time of ``fn()`` in seconds."""
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_coordination(graph, dim, repeats, seed):
    """Time full coordination runs; returns {backend: (seconds, rounds)}."""
    rng = np.random.default_rng(seed)
    y = 10.0 * rng.standard_normal((graph.num_agents, dim))
    quantizer = Quantizer("symmetric", delta=1e-3)
    config = FtqcConfig(rho=1.0, max_iters=10000)

    results, w_finals = {}, {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        res = ftqc_run(y, graph, quantizer, config)
        assert res.terminated_naturally
        secs = _time_best(lambda: ftqc_run(y, graph, quantizer, config),
                          repeats)
        results[name] = (secs, res.iterations_used)
        w_finals[name] = res.w_final
    _check_identical(w_finals, "coordination")
    return results


def bench_mixing(graph, dim, num_rounds, repeats, seed):
    """Time raw mixing-round kernels; returns {backend: (seconds, rounds)}."""
    rng = np.random.default_rng(seed)
    x0 = 10.0 * rng.standard_normal((graph.num_agents, dim))
    weights = metropolis_weights(graph)
    edge_dst, edge_ptr, _ = graph.directed_index()
    kinds, deltas, sp_thetas = per_agent_arrays(
        Quantizer("symmetric", delta=1e-3), graph.num_agents)

    results, x_finals = {}, {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        impl = kernels.impl()

        def run():
            x = x0.copy()
            impl.mixing_rounds(x, weights, edge_dst, edge_ptr, kinds,
                               deltas, sp_thetas, num_rounds)
            return x

        x_finals[name] = run()
        results[name] = (_time_best(run, repeats), num_rounds)
    _check_identical(x_finals, "mixing")
    return results


def _check_identical(finals, label):
    names = sorted(finals)
    for name in names[1:]:
        if not np.array_equal(finals[names[0]], finals[name]):
            raise AssertionError(
                f"{label}: backends {names[0]} and {name} disagree")


def _print_table(label, results):
    print(f"\n{label}")
    baseline = results.get("python", next(iter(results.values())))[0]
    for name in sorted(results):
        secs, rounds = results[name]
        print(f"  {name:<8} {secs * 1e3:9.2f} ms  ({rounds} rounds, "
              f"{baseline / secs:4.1f}x vs python)")


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="benchmark the round-kernel backends")
    parser.add_argument("--agents", type=int, default=60)
    parser.add_argument("--dim", type=int, default=50)
    parser.add_argument("--edge-prob", type=float, default=0.15)
    parser.add_argument("--mixing-rounds", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled backend not built; timing python only")
    graph = generate_graph("erdos_renyi", args.agents,
                           edge_prob=args.edge_prob, seed=args.seed)
    print(f"graph: {args.agents} agents, {graph.num_edges} edges, "
          f"dim {args.dim}")

    coord = bench_coordination(graph, args.dim, args.repeats, args.seed)
    _print_table("coordination rounds (ftqc_rounds)", coord)
    mix = bench_mixing(graph, args.dim, args.mixing_rounds, args.repeats,
                       args.seed)
    _print_table("mixing rounds (mixing_rounds)", mix)
    print("\nbackends agree bit-for-bit on both workloads")


if __name__ == "__main__":
    main()
