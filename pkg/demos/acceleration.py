"""Iterations to reach f_gap <= 1e-6 as the condition number grows.

The symplectic NAG-SC ODE scheme needs about sqrt(kappa) times more work per
100x in kappa; the heavy-ball ODE scheme and the explicit NAG-SC ODE scheme
(both at their guaranteed steps) need about kappa times more.
"""
from accel_ode import analysis
from accel_ode.integrators import SchemeSpec, iterations_to_reach
from accel_ode.objectives import balanced_start, make_problem, make_quadratic

TARGET = 1e-6
SCHEMES = [("SC_HR", "SYMPLECTIC"), ("HB_HR", "SYMPLECTIC"), ("SC_HR", "EXPLICIT"), ("LOW_SC", "SYMPLECTIC")]


def count(family, rule, kappa):
    obj = make_quadratic(10, 1.0 / kappa, 1.0, seed=0)
    pb = make_problem(obj, balanced_start(obj))
    s = analysis.theorem_step_size(family, rule, obj.mu, obj.lipschitz)
    return s, iterations_to_reach(SchemeSpec(family, rule, s), pb, TARGET, max_iterations=5_000_000)


def main():
    print(f"{'scheme':<20}{'s (kappa=1e4)':>16}{'k @ 1e2':>10}{'k @ 1e4':>10}{'ratio':>8}")
    for family, rule in SCHEMES:
        _, small = count(family, rule, 1e2)
        s, large = count(family, rule, 1e4)
        print(f"{family + '/' + rule:<20}{s:>16.3g}{small:>10}{large:>10}{large / small:>8.1f}")


if __name__ == "__main__":
    main()
