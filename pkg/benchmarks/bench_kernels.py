"""Time the compiled byte kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --size 65536 --repeat 5
"""

import argparse
import random
import timeit

from iirsim.codecs import _pykernels

try:
    from iirsim.codecs import _ckernels
except ImportError:
    _ckernels = None


def bench(mod, key, data, repeat):
    cases = {
        "rc4_crypt": lambda: mod.rc4_crypt(key, data),
        "visual_encode": lambda: mod.visual_encode(data),
        "visual_decode": lambda: mod.visual_decode(data),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1 << 16, help="payload bytes")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = random.Random(0)
    key, data = rng.randbytes(16), rng.randbytes(args.size)
    py = bench(_pykernels, key, data, args.repeat)
    c = bench(_ckernels, key, data, args.repeat) if _ckernels else None
    print(f"payload {args.size} bytes, best of {args.repeat}")
    print(f"{'kernel':<15}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, t in py.items():
        if c:
            print(f"{name:<15}{t * 1e3:>12.3f}{c[name] * 1e3:>12.3f}{t / c[name]:>9.1f}x")
        else:
            print(f"{name:<15}{t * 1e3:>12.3f}{'n/a':>12}{'':>10}")
    if c is None:
        print("compiled kernels not built; reinstall with Cython available")


if __name__ == "__main__":
    main()
