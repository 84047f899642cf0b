"""Print the numeric tables: Viterbo ratios for the l1/l_inf bodies, the
dimension inequality at a few n, and the orbit actions they rest on."""

import argparse
import math

from viterbo import pl_flow
from viterbo.bodies import L2SumSpec, NormDescriptor, l2_sum_hamiltonian, l2_sum_volume, monte_carlo_volume
from viterbo.verify import check_ineq, viterbo_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=lambda s: int(float(s)), default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-max", type=int, default=8)
    args = ap.parse_args()

    one = pl_flow.one_cycle_minimal().action
    print("# orbit actions on H = 1")
    print("n\tevents\taction\tformula")
    for n in range(2, args.n_max + 1):
        traj = pl_flow.simulate(pl_flow.explicit_nd_start(n))
        print(f"{n}\t{len(traj.events)}\t{traj.action:.12f}\t{pl_flow.nd_period_formula(n):.12f}")

    print("\n# volumes and ratios of {||p||_1^2 + ||q||_inf^2 <= 1}")
    print("n\tvolume\tmc\tmc_err\tcapacity_used\tratio")
    for n in (2, 3):
        spec = L2SumSpec.from_norm(NormDescriptor("linf", n))
        vol = l2_sum_volume(spec).value
        mc = monte_carlo_volume(l2_sum_hamiltonian(spec), 1.0, args.samples, args.seed)
        print(f"{n}\t{vol:.12g}\t{mc.value:.6f}\t{mc.std_error:.6f}\t{one:.12f}\t{viterbo_ratio(vol, one, n):.6f}")

    print("\n# dimension inequality: bound vs explicit orbit action")
    print("n\tbound\taction\tholds\tequality")
    for n in (1, 2, 3, 4, 5, 10, 100, 1000):
        c = check_ineq(n)
        print(f"{n}\t{c.lhs:.6f}\t{c.rhs:.6f}\t{c.holds}\t{c.equality}")
    print(f"\nall n in 1..1000 hold: {all(check_ineq(n).holds for n in range(1, 1001))}")
    print(f"one-cycle action {one:.12f} < pi: {one < math.pi}, < 2 sqrt 2: {one < 2 * math.sqrt(2)}")


if __name__ == "__main__":
    main()
