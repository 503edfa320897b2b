"""Variance of the generalized two-mode quadrature over the measurement angles."""

import numpy as np

from _common import parser, write
from cvwitness.homodyne import scan_surface
from cvwitness.states import squeezed_vacuum


def main():
    p = parser(__doc__)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--theta", type=float, default=0.0)
    args = p.parse_args()
    for r in (0.2, 1.0):
        surface = scan_surface(squeezed_vacuum(r), args.theta, args.grid)
        write(args.out_dir, f"fig2_surface_r{r:g}.csv", surface.to_csv())
        print(f"r = {r}: minimum variance {surface.values.min():.4f} "
              f"(e^-2r = {np.exp(-2 * r):.4f}), below-vacuum area "
              f"{surface.below_one_fraction():.3f}")


if __name__ == "__main__":
    main()
