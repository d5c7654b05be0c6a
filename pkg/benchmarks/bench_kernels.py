"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Each case runs both backends on identical packed input, checks that they
agree, and prints the best-of-N wall time and the speedup.
"""

import argparse
import timeit

from qsheaf import _kernels, fixtures
from qsheaf._kernels import _pykernels as py
from qsheaf.presheaves import _pack_sections, build_omega
from qsheaf.spectral import build_outer, build_sigma


def section_cases():
    for name in ("cabello18", "peres33"):
        q = build_sigma(getattr(fixtures, name)())
        yield f"sections sigma {name}", q
    q = build_outer(fixtures.random_fixture(5))
    yield "sections outer seed5", q
    q = build_omega(fixtures.random_fixture(7))
    yield "sections omega seed7", q


def downset_cases():
    # the compiled kernel packs down-sets into 64-bit words, so peres33 (74 contexts) is out
    p = fixtures.cabello18()
    down = [p.down_mask(v) for v in p.ids]
    yield "downsets cabello18", down, None
    yield "downsets cabello18 j-closed", down, list(p.flat_map)


def bench(label, run_py, run_c, repeat):
    a, b = run_py(), run_c()
    same = a == b
    tp = min(timeit.repeat(run_py, number=1, repeat=repeat))
    tc = min(timeit.repeat(run_c, number=1, repeat=repeat))
    print(f"{label:<28} python {tp * 1e3:9.2f} ms   cython {tc * 1e3:9.2f} ms   "
          f"x{tp / tc:7.1f}   {'agree' if same else 'MISMATCH'}")
    return same


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--limit", type=int, default=200_000,
                        help="stop enumerations after this many results")
    args = parser.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled extension not built; nothing to compare")
        return 1
    c = _kernels.compiled
    ok = True
    for label, q in section_cases():
        sizes = [q.size(v) for v in q.poset.ids]
        packed = _pack_sections(q)
        ok &= bench(label,
                    lambda: py.sections(sizes, *packed, args.limit, False)[0],
                    lambda: c.sections(sizes, *packed, args.limit, False)[0], args.repeat)
    for label, down, flat in downset_cases():
        ok &= bench(label,
                    lambda: len(py.downsets(down, flat, args.limit)),
                    lambda: len(c.downsets(down, flat, args.limit)), args.repeat)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
