"""Verify the discretization order with manufactured solutions.

Pick a smooth analytic state v*(t, xi, eta) that honors the wall and
outflow boundary conditions, feed the solver the source it leaves behind,
and measure how fast the numerical trajectory approaches v* as the grid
refines.  Two refinement modes separate the two error families:

  * spatial: dt shrinks with deta^2, so the centered second-order stencils
    dominate and the error should fall with slope 2;
  * temporal: dt shrinks with deta, so the backward-Euler step dominates
    and the slope should be 1.

The case library covers a pure advection tilt, a sheared velocity layer
and a diffusion-dominated pulse; the constant case (exact at rounding) is
skipped here.
"""

import os
import time

import numpy as np

from mhbl import case_library, convergence_study

RESOLUTIONS = [(8, 16), (16, 32), (32, 64)]


def show(result):
    comp = ("u1", "theta", "q")
    print(f"case {result.case!r}, {result.mode} refinement")
    head = f"  {'grid':>10s} {'dt':>10s}" + "".join(f"{c:>12s}" for c in comp)
    print(head)
    for row in result.rows:
        cells = "".join(f"{e:>12.3e}" for e in row.errors)
        print(f"  {f'{row.nx}x{row.neta}':>10s} {row.dt:>10.2e}" + cells)
    orders = ", ".join(f"{c} {o:.2f}" for c, o in zip(comp, result.orders))
    print(f"  fitted orders: {orders}  (monotone={result.monotone})\n")
    return result


def main():
    lib = case_library()
    t0 = time.perf_counter()
    results = []

    for name in ("advection", "shear", "diffusion"):
        results.append(show(convergence_study(lib[name], RESOLUTIONS,
                                              mode="spatial")))
    results.append(show(convergence_study(lib["diffusion"], RESOLUTIONS,
                                          mode="temporal")))
    print(f"total {time.perf_counter() - t0:.1f} s")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for res in results:
        detas = [r.neta for r in res.rows]
        errs = [max(r.errors) for r in res.rows]
        ax.loglog(detas, errs, "o-", label=f"{res.case} ({res.mode})")
    ax.set_xlabel("neta")
    ax.set_ylabel("worst component error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "manufactured_convergence.png")
    fig.savefig(path, dpi=120)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
