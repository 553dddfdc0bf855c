#!/usr/bin/env python3
"""Smoke test for the edgeweyl_py extension module.

Build the module first:

    cargo build --release -p edgeweyl-py --features extension-module

then run:

    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / "release" / "libedgeweyl_py.so",
        REPO / "target" / "debug" / "libedgeweyl_py.so",
        REPO / "target" / "release" / "libedgeweyl_py.dylib",
        REPO / "target" / "debug" / "libedgeweyl_py.dylib",
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        "libedgeweyl_py not found; build it with\n"
        "  cargo build --release -p edgeweyl-py --features extension-module"
    )


def main() -> int:
    lib = locate_cdylib()
    staging = Path(tempfile.mkdtemp(prefix="edgeweyl_py_"))
    shutil.copy(lib, staging / "edgeweyl_py.so")
    sys.path.insert(0, str(staging))
    import edgeweyl_py as ew

    failures = []

    def check(name, ok, detail=""):
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}")
        if not ok:
            failures.append(name)

    # spectrum generation and exact bulk count
    s3 = ew.SpectralMeasure.sphere(3, 1e4)
    check("sphere atoms", len(s3) == 100 and s3.total_weight() == 338350.0,
          f"atoms={len(s3)} weight={s3.total_weight()}")
    check("sphere gamma", abs(s3.gamma_expected - 1.0 / 3.0) < 1e-14)

    rule = ew.EncodingRule.affine(1.0)
    em = ew.encode(s3, rule)
    n = em.count_edge(math.pi - 1e4)
    check("edge count", n == 338350.0, f"N={n}")

    # exact composition identity on a spread of probes
    probes = [math.pi - 0.5 - 123.456 * i for i in range(200)]
    disc = ew.composition_max_discrepancy(s3, em, probes)
    check("composition identity", disc == 0.0, f"max discrepancy={disc}")

    # dimension recovery
    est = ew.estimate_weyl(em, 1e3, 1e4)
    check("dimension recovery", 2.98 <= est["d_hat"] <= 3.02, f"d_hat={est['d_hat']:.4f}")
    check("weyl constant", 0.32 <= est["gamma_hat"] <= 0.35, f"gamma={est['gamma_hat']:.4f}")

    # heat / zeta transfer identities at eps = 2
    em2 = ew.encode(s3, ew.EncodingRule.affine(2.0))
    h_edge = ew.edge_heat(em2, 0.005)["theta"]
    h_base = ew.heat_trace(s3, 0.01)["theta"]
    check("heat transfer", abs(h_edge - h_base) <= 1e-12 * h_base,
          f"rel={(h_edge - h_base) / h_base:.2e}")
    z_edge = ew.edge_zeta(em2, 2.5)
    z_base = 2.0 ** -2.5 * ew.zeta(s3, 2.5)["value"]
    check("zeta transfer", abs(z_edge - z_base) <= 1e-12 * abs(z_base))

    # window statistics near the edge
    w = ew.window_stats(em, math.pi - 8.0, 0.8)
    check("window stats", w["cluster_count"] == 1 and w["jump_total"] == 9.0,
          f"jump={w['jump_total']}")

    # string realization of the low modes
    real = ew.realize_encoded(em, 6)
    check("krein realization", real["match_residual"] <= 1e-8
          and real["roundtrip_residual"] <= 1e-9,
          f"match={real['match_residual']:.2e}")
    quad = ew.realize_measure([0.1 * (n + 1) ** 2 for n in range(10)], [1.0] * 10)
    check("quadratic encoder string", quad["match_residual"] <= 1e-8
          and all(c > 0 for c in quad["coefficients"]))

    # perturbed encoding keeps the exponent
    pert = ew.EncodingRule.perturbed(1.0, "boundedoffset", c=2.0)
    em_p = ew.encode(ew.SpectralMeasure.sphere(3, 2e5), pert)
    est_p = ew.estimate_weyl(em_p, 1e4, 1e5, points=120)
    check("perturbed stability", 2.95 <= est_p["d_hat"] <= 3.05,
          f"d_hat={est_p['d_hat']:.4f}")

    print()
    if failures:
        print(f"{len(failures)} smoke checks failed: {', '.join(failures)}")
        return 1
    print("all smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
