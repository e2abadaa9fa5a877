"""Compare the compiled and pure-Python matching / SCC kernels.

    python3 benchmarks/bench_structure.py [--sizes 1000 3000 10000] [--repeat 3]

Random structurally nonsingular systems (a permuted diagonal plus a few
extra entries per row) and the demo plant's initialization incidence.
"""

import argparse
import sys
import timeit

import numpy as np

from ssinit import kernels
from ssinit.eqsys import FULL, SIMPLIFIED, assemble_initialization_problem
from ssinit.plant import build_demo_plant, flatten


def random_system(n, extra=3, seed=0):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    rows = []
    for r in range(n):
        cols = {int(perm[r])} | {int(c) for c in rng.integers(0, n, extra)}
        rows.append(sorted(cols))
    return to_csr(rows), n


def to_csr(rows):
    indptr = np.zeros(len(rows) + 1, dtype=np.intp)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.fromiter((c for r in rows for c in r), dtype=np.intp, count=int(indptr[-1]))
    return indptr, indices


def equation_graph(indptr, indices, col_match, n):
    rows = []
    for r in range(n):
        rows.append(sorted({int(col_match[c]) for c in indices[indptr[r]:indptr[r + 1]]
                            if col_match[c] >= 0 and col_match[c] != r}))
    return to_csr(rows)


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(label, indptr, indices, n, backends, repeat):
    results = {}
    for name, mod in backends.items():
        row, col = mod.max_matching(indptr, indices, n, n)
        gp, gi = equation_graph(indptr, indices, col, n)
        labels, count = mod.strongly_connected(gp, gi, n)
        t_match = best_time(lambda: mod.max_matching(indptr, indices, n, n), repeat)
        t_scc = best_time(lambda: mod.strongly_connected(gp, gi, n), repeat)
        results[name] = (row, labels, count, t_match, t_scc)
    ref = results["python"]
    for name, (row, labels, count, t_match, t_scc) in results.items():
        agree = np.array_equal(row, ref[0]) and np.array_equal(labels, ref[1])
        speed = ""
        if name != "python":
            speed = f"  speed-up match x{ref[3] / t_match:6.1f}  scc x{ref[4] / t_scc:6.1f}"
        print(f"{label:>18s} {name:>7s}  match {t_match * 1e3:9.3f} ms  scc {t_scc * 1e3:9.3f} ms  "
              f"blocks {count:6d}  agree={agree}{speed}")
        if not agree:
            sys.exit(f"backends disagree on {label}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 3000, 10000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the pure-Python kernels only")
    print(f"default backend: {kernels.BACKEND}")
    p = assemble_initialization_problem(flatten(build_demo_plant()))
    for regime in (SIMPLIFIED, FULL):
        indptr, indices = to_csr([sorted(r) for r in p.incidence(regime)])
        bench(f"demo {regime}", indptr, indices, p.n, backends, args.repeat)
    for n in args.sizes:
        (indptr, indices), n = random_system(n)
        bench(f"random n={n}", indptr, indices, n, backends, args.repeat)


if __name__ == "__main__":
    main()
