"""Compiled vs numpy kernel throughput.

    python benchmarks/bench_kernels.py [--seconds 0.5] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gpstwin import kernels
from gpstwin.codegen import ca_code

FS = 2.5e6


def _inputs(seconds):
    n = int(seconds * FS)
    n_seg = int(seconds * 100) + 2
    rng = np.random.default_rng(0)
    chip_c = np.zeros((n_seg, 4))
    chip_c[:, 0] = 100.0 + np.arange(n_seg) * 10230.0
    chip_c[:, 1] = 1.023e6
    phase_c = np.zeros((n_seg, 4))
    phase_c[:, 0] = np.arange(n_seg) * 15.0
    phase_c[:, 1] = 1500.0
    amp_c = np.column_stack([np.ones(n_seg), np.zeros(n_seg)])
    bits = rng.choice([-1, 1], int(seconds * 50) + 4).astype(np.int8)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return n, chip_c, phase_c, amp_c, bits, x


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=0.5, help="signal length per call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    n, chip_c, phase_c, amp_c, bits, x = _inputs(args.seconds)
    code = ca_code(1).chips
    n_corr = int(FS * 1e-3)
    per_ms = int(args.seconds * 1000)
    rows = []
    for name, mod in kernels.backends().items():
        out = np.zeros(n, np.complex128)

        def synth():
            mod.synth_accumulate(out, 0, FS, 0.01, 0, chip_c, phase_c, amp_c, code, bits, 20460)

        def corr():
            for m in range(per_ms):
                mod.correlate_epl(x, m * n_corr, n_corr, code, 0.0, 0.4092, 0.0, 6e-4, 0.5)

        ts = min(timeit.repeat(synth, number=1, repeat=args.repeat))
        tc = min(timeit.repeat(corr, number=1, repeat=args.repeat))
        rows.append((name, ts, tc))
    print(f"{args.seconds:g} s of samples at {FS / 1e6:g} Msps, best of {args.repeat}")
    print(f"{'backend':10s} {'synth (Msps)':>14s} {'correlate (Msps)':>18s}")
    for name, ts, tc in rows:
        print(f"{name:10s} {n / ts / 1e6:14.1f} {per_ms * n_corr / tc / 1e6:18.1f}")
    if len(rows) == 2:
        (_, ps, pc), (_, cs, cc) = rows
        print(f"speedup    {ps / cs:14.1f}x {pc / cc:17.1f}x")


if __name__ == "__main__":
    main()
