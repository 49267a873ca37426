"""Compare the compiled and numpy conv + max-pool kernels.

    python benchmarks/bench_conv.py [--repeat 5] [--quick]

Times forward and backward over a few batch shapes typical of word- and
character-level channels, checks that both backends agree to rounding, and prints one
row per shape.
"""

import argparse
import sys
import timeit

import numpy as np

from dialogact.diffcore import kernels

SHAPES = [
    # (batch, width, dim, filters, window)
    (64, 20, 200, 100, 3),
    (64, 80, 70, 100, 7),
    (512, 12, 50, 100, 2),
    (16, 200, 32, 32, 5),
]


def make_inputs(batch, width, dim, filters, window, seed=0):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, width + 1, batch)
    x = rng.normal(size=(batch, width, dim))
    x[np.arange(width)[None, :] >= lengths[:, None]] = 0.0
    w = rng.normal(size=(filters, window, dim)) * 0.1
    b = np.zeros(filters)
    return x, lengths.astype(np.int64), w, b


def bench(backend, inputs, repeat):
    mod = kernels.get(backend)
    x, lengths, w, b = inputs
    out, argmax = mod.conv_maxpool_forward(x, lengths, w, b)
    grad = np.ones_like(out)
    fwd = min(timeit.repeat(lambda: mod.conv_maxpool_forward(x, lengths, w, b), number=1, repeat=repeat))
    bwd = min(timeit.repeat(lambda: mod.conv_maxpool_backward(grad, x, w, out, argmax),
                            number=1, repeat=repeat))
    return out, fwd, bwd


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--quick", action="store_true", help="first shape only")
    args = p.parse_args(argv)

    backends = sorted(kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled kernels not built; timing numpy only", file=sys.stderr)
    header = ["shape(N,L,d,F,w)"] + [f"{b} fwd ms\t{b} bwd ms" for b in backends]
    if len(backends) == 2:
        header.append("speedup fwd+bwd")
    header.append("max |diff|")
    print("\t".join(header))
    for shape in SHAPES[:1] if args.quick else SHAPES:
        inputs = make_inputs(*shape)
        results = {b: bench(b, inputs, args.repeat) for b in backends}
        outs = [r[0] for r in results.values()]
        # summation order differs between backends, so compare to rounding
        diff = max(float(np.abs(outs[0] - o).max()) for o in outs[1:]) if len(outs) > 1 else 0.0
        assert diff <= 1e-10, f"backends disagree by {diff:.3g}"
        row = ["x".join(map(str, shape))]
        for b in backends:
            row.append(f"{results[b][1] * 1e3:.2f}\t{results[b][2] * 1e3:.2f}")
        if len(backends) == 2:
            slow = sum(results["numpy"][1:])
            fast = sum(results["cython"][1:])
            row.append(f"{slow / fast:.1f}x")
        row.append(f"{diff:.1e}")
        print("\t".join(row))


if __name__ == "__main__":
    main()
