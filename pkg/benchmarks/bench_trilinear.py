"""Timing comparison of the Fourier and direct trilinear evaluators.

Run: python3 benchmarks/bench_trilinear.py
"""

import time

import numpy as np

from rieszvox import SetTriple, generate, trilinear_corner_counts


def bench(dim, spacing, radius, repeats=3):
    t = SetTriple(
        [
            generate(
                "blob",
                {"dim": dim, "spacing": spacing, "radius": radius, "steps": 5},
                seed=s,
            )
            for s in (1, 2, 3)
        ]
    )
    cells = [e.count for e in t]
    out = {}
    for method in ("fft", "direct"):
        best = np.inf
        counts = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            try:
                counts = trilinear_corner_counts(t, method=method)
            except ValueError:
                best = None  # pair-count guard refused the direct path
                break
            best = min(best, time.perf_counter() - t0)
        out[method] = (best, counts)
    if out["direct"][0] is not None:
        assert out["fft"][1] == out["direct"][1], "paths disagree"
    return cells, out


def main():
    print(f"{'dim':>3} {'h':>8} {'cells':>22} {'fft ms':>9} {'direct ms':>10} {'speedup':>8}")
    cases = [
        (1, 1.0 / 256, 0.9),
        (1, 1.0 / 1024, 0.9),
        (2, 1.0 / 32, 0.5),
        (2, 1.0 / 64, 0.5),
        (2, 1.0 / 128, 0.5),
        (3, 1.0 / 16, 0.5),
        (3, 1.0 / 32, 0.5),
    ]
    for dim, h, r in cases:
        cells, out = bench(dim, h, r)
        tf = out["fft"][0] * 1e3
        if out["direct"][0] is None:
            print(f"{dim:>3} {h:>8.5f} {str(cells):>22} {tf:>9.2f} {'guarded':>10}")
            continue
        td = out["direct"][0] * 1e3
        print(
            f"{dim:>3} {h:>8.5f} {str(cells):>22} {tf:>9.2f} {td:>10.2f} "
            f"{td / tf:>7.1f}x"
        )


if __name__ == "__main__":
    main()
