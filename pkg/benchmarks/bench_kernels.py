"""Compare the compiled and pure-Python kernel backends.

Run from the repository root: ``python3 benchmarks/bench_kernels.py``.
"""

import argparse
import os
import timeit

from xtstrojan import kernels
from xtstrojan.aes import canonical_sbox, expand_key, identity_sbox

SECTOR = 512


def cases(impl, sectors):
    key = expand_key(os.urandom(32)).packed
    trojan_key = expand_key(os.urandom(32), identity_sbox()).packed
    box, ident = canonical_sbox(), identity_sbox()
    data = os.urandom(SECTOR)
    mask = os.urandom(16)
    ck = os.urandom(SECTOR)
    block = data[:16]
    return {
        "encrypt_block x1000": (lambda: [impl.encrypt_block(block, key, box.forward) for _ in range(1000)], 1000 * 16),
        "ms_forward x1000": (lambda: [impl.ms_forward(block) for _ in range(1000)], 1000 * 16),
        f"xts encrypt {sectors} sectors": (
            lambda: [impl.xts_sector(data, mask, key, box.forward, False) for _ in range(sectors)], sectors * SECTOR),
        f"xts decrypt {sectors} sectors": (
            lambda: [impl.xts_sector(data, mask, key, box.inverse, True) for _ in range(sectors)], sectors * SECTOR),
        f"trojan xts {sectors} sectors": (
            lambda: [impl.xts_sector(data, mask, trojan_key, ident.forward, False) for _ in range(sectors)],
            sectors * SECTOR),
        f"recover {sectors} sectors": (lambda: [impl.recover_units(data, mask, ck) for _ in range(sectors)],
                                       sectors * SECTOR),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sectors", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    results = {}
    for name, impl in sorted(backends.items()):
        for label, (fn, nbytes) in cases(impl, args.sectors).items():
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results.setdefault(label, {})[name] = (best, nbytes)

    names = sorted(backends)
    print(f"{'case':<28}" + "".join(f"{n:>16}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, row in results.items():
        cells = "".join(f"{row[n][0] * 1e3:>11.1f} ms  " for n in names)
        line = f"{label:<28}{cells}"
        if "cython" in row and "python" in row:
            line += f"{row['python'][0] / row['cython'][0]:>9.1f}x"
        print(line)
    if "cython" not in backends:
        print("compiled backend not built; only the pure-Python kernels were measured")


if __name__ == "__main__":
    main()
