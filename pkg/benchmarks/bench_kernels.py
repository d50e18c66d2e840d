"""Compare the compiled and NumPy edge kernels.

Times each kernel on a random destination-grouped edge list, then one full
loss-and-gradient pass of the attention model with each backend swapped in.

    python benchmarks/bench_kernels.py [--nodes 5000] [--degree 8] [--width 32] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fedgraph import _kernels
from fedgraph.gnn import ModelSpec, build_view, init_params, loss_and_gradient


def edge_list(rng, n, degree):
    deg = rng.poisson(degree, n)
    indptr = np.concatenate([[0], np.cumsum(deg)]).astype(np.int64)
    src = rng.integers(0, n, indptr[-1]).astype(np.int64)
    return indptr, src


def best_of(fn, repeat):
    number = 3
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_kernels(args, backends):
    rng = np.random.default_rng(0)
    indptr, src = edge_list(rng, args.nodes, args.degree)
    m = indptr[-1]
    scores = rng.normal(size=m)
    proj = rng.normal(size=(args.nodes, args.width))
    dout = rng.normal(size=(args.nodes, args.width))
    alpha = _kernels.get_backend("python").edge_softmax(scores, indptr)
    dal = rng.normal(size=m)
    cases = {
        "edge_softmax": lambda b: b.edge_softmax(scores, indptr),
        "edge_softmax_backward": lambda b: b.edge_softmax_backward(alpha, dal, indptr),
        "aggregate": lambda b: b.aggregate(alpha, src, indptr, proj),
        "aggregate_backward": lambda b: b.aggregate_backward(alpha, src, indptr, proj, dout),
    }
    print(f"{args.nodes} nodes, {m} entries, width {args.width}")
    for name, fn in cases.items():
        times = {b: best_of(lambda: fn(_kernels.get_backend(b)), args.repeat) for b in backends}
        row = "  ".join(f"{b}={t * 1e3:8.3f} ms" for b, t in times.items())
        ratio = f"  speedup={times['python'] / times['cython']:.2f}x" if "cython" in times else ""
        print(f"  {name:<22} {row}{ratio}")


def bench_model(args, backends):
    rng = np.random.default_rng(1)
    n = args.nodes
    e = n * args.degree // 2
    x = rng.normal(size=(n, 15))
    view = build_view(x, rng.integers(0, n, e), rng.integers(0, n, e), rng.normal(size=(e, 8)))
    spec = ModelSpec(15, 8, hidden_dim=args.width, heads=2, n_layers=3)
    params = init_params(spec, rng)
    y = rng.integers(0, 2, n)
    saved = _kernels._backend
    times = {}
    try:
        for b in backends:
            _kernels._backend = _kernels.get_backend(b)
            times[b] = best_of(lambda: loss_and_gradient(params, params, view, y, 0.01), args.repeat)
    finally:
        _kernels._backend = saved
    row = "  ".join(f"{b}={t * 1e3:8.3f} ms" for b, t in times.items())
    ratio = f"  speedup={times['python'] / times['cython']:.2f}x" if "cython" in times else ""
    print(f"  {'loss_and_gradient':<22} {row}{ratio}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=5000)
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"active backend: {_kernels.BACKEND}; available: {', '.join(backends)}")
    bench_kernels(args, backends)
    bench_model(args, backends)


if __name__ == "__main__":
    main()
