"""Distance between symplectic NAG-SC ODE iterates and the continuous
trajectory at matching times t = k sqrt(s), for shrinking s."""
import numpy as np

from accel_ode import OdeFamily, SchemeSpec, integrate, make_problem, make_quadratic, run
from accel_ode.reference_flow import discretization_gap

WINDOW = 5.0


def main():
    obj = make_quadratic(10, 0.01, 1.0, seed=0)
    pb = make_problem(obj)
    for s in (0.16, 0.04, 0.01, 0.0025):
        n = int(round(WINDOW / np.sqrt(s)))
        trace = run(SchemeSpec("SC_HR", "SYMPLECTIC", s), pb, n)
        flow = integrate(OdeFamily.SC_HR, pb, s, WINDOW + 1.0, np.sqrt(s) / 10)
        worst = max(g for _, g in discretization_gap(flow, trace))
        print(f"s={s:<8g} iterations={n:<5} max ||x_k - X(t_k)|| = {worst:.3e}")


if __name__ == "__main__":
    main()
