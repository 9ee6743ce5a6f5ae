"""Benchmark the compiled digest kernel against the pure-Python fallback.

Usage: python benchmarks/bench_keccak.py [--sizes 32,136,1024,65536] [--seconds 0.5]

The workload mirrors real usage: state roots and block hashes are mostly
small inputs (tens to hundreds of bytes), chain files hash larger blobs.
"""

import argparse
import time

from aidchain import _keccak_py

try:
    from aidchain import _keccak_c
except ImportError:
    _keccak_c = None


def throughput(fn, payload: bytes, seconds: float) -> tuple:
    # warm up and measure
    fn(payload)
    count = 0
    started = time.perf_counter()
    while time.perf_counter() - started < seconds:
        fn(payload)
        count += 1
    elapsed = time.perf_counter() - started
    return count / elapsed, count * len(payload) / elapsed / 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="32,136,1024,65536",
                        help="comma-separated payload sizes in bytes")
    parser.add_argument("--seconds", type=float, default=0.5,
                        help="measurement window per cell")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = [("pure-python", _keccak_py.keccak256)]
    if _keccak_c is not None:
        backends.append(("compiled", _keccak_c.keccak256))
    else:
        print("compiled kernel not built (pip install -e . builds it)\n")

    print(f"{'size':>8}  " + "".join(f"{name:>24}" for name, _ in backends)
          + ("  speedup" if len(backends) == 2 else ""))
    for size in sizes:
        payload = bytes(i & 0xFF for i in range(size))
        row = [f"{size:>8}"]
        rates = []
        for _, fn in backends:
            per_second, mb_per_second = throughput(fn, payload, args.seconds)
            rates.append(per_second)
            row.append(f"{per_second:>12.0f}/s {mb_per_second:>7.1f}MB/s")
        if len(rates) == 2:
            row.append(f"  {rates[1] / rates[0]:>6.1f}x")
        print("  ".join(row))


if __name__ == "__main__":
    main()
