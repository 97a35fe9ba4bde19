"""Surfaces of constant curvature as a bundle of Lie algebras over the curvature line.

Certifies the algebroid, classifies the fiber at a few curvature values,
checks the frame-bundle candidates and builds local group coframes.
Run with ``python demos/constant_curvature.py``.
"""

import numpy as np

from cartan.algebroid import certify, fiber_algebra, isotropy_at
from cartan.catalog import (GEOMETRY_NAMES, constant_curvature_algebroid, constant_curvature_candidate,
                            constant_curvature_data)
from cartan.gstruct import verify_g_realization
from cartan.liealg import classify_3d
from cartan.realize import realize_bundle_fiber, verify_realization_numeric


def main():
    A = constant_curvature_algebroid()
    cert = certify(A)
    print(f"jacobi: {cert.jacobi.verdict}, anchor: {cert.anchor.verdict}")

    print("\n  k   fiber  geometry")
    for k in (-2.0, -1.0, 0.0, 0.5, 1.0):
        name = classify_3d(isotropy_at(A, [k]).structure_constants)
        print(f"{k:4g}   {name:5s}  {GEOMETRY_NAMES.get(name, '-')}")

    D = constant_curvature_data()
    print("\northonormal frame candidates:")
    for k in (-1, 0, 1):
        rep = verify_g_realization(constant_curvature_candidate(k), D)
        print(f"  k={k:+d}: {rep.status}")

    print("\nlocal group coframes on a 5^3 grid:")
    for k in (-1.0, 1.0):
        cand = realize_bundle_fiber(fiber_algebra(A, [k]), box=0.5, x0=[k])
        axes = [np.linspace(lo + 1e-3, hi - 1e-3, 5) for lo, hi in cand.chart.box]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
        rep = verify_realization_numeric(cand, A, samples=grid)
        print(f"  k={k:+g}: max residual {rep.max_residual:.2e}")


if __name__ == "__main__":
    main()
