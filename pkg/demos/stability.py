"""Largest stable step per scheme on a kappa = 100 quadratic.

For every rule the per-eigenmode one-step matrices give the exact spectral
radius; a short run at each grid step confirms it.
"""
import numpy as np

from accel_ode import SchemeSpec, analysis, make_problem, make_quadratic, run

OBJ = make_quadratic(10, 0.01, 1.0, seed=0)
GRID = 4 / 9 * 2.0 ** np.arange(-8, 5)


def main():
    pb = make_problem(OBJ)
    for family in ("SC_HR", "HB_HR", "LOW_SC"):
        for rule in ("SYMPLECTIC", "EXPLICIT", "IMPLICIT"):
            cells = []
            for s in GRID:
                spec = SchemeSpec(family, rule, float(s))
                radius, _ = analysis.max_spectral_radius(spec, OBJ)
                status = run(spec, pb, 2000).termination
                cells.append("." if status == "completed" else "x")
                if radius >= 1 and status == "completed":
                    cells[-1] += "?"
                elif radius < 1 and status != "completed":
                    cells[-1] += "!"
            print(f"{family + '/' + rule:<18} " + " ".join(f"{c:<2}" for c in cells))
    print("steps: " + " ".join(f"{s:.3g}" for s in GRID))
    print(". run completed, x diverged, ? oracle radius above 1 but growth too slow to diverge in 2000 steps,"
          " ! diverged although the radius is below 1")


if __name__ == "__main__":
    main()
