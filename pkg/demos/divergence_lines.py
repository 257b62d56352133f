#!/usr/bin/env python3
"""Divergence lines on the flat cylinder.

The band between two horizontal circles with +inf on top and -inf at the
bottom fails the solvability test: each horizontal circle is a closed
mu-geodesic, and truncations u_n = n*y tilt forever instead of settling.
The angle function nu = mu/W drops toward 0 uniformly, and the detector
reports the whole interior as one closed divergence line, matching the
picture of the renormalized graphs converging to a vertical cylinder.

A solvable domain run through the same detector stays clean.
"""

import numpy as np

from jsgraph import (builtin_scene, detect_divergence_lines,
                     solve_truncated_sequence)


def main():
    _, dom = builtin_scene("flat-cylinder")
    r = solve_truncated_sequence(dom, h=0.1, schedule=(4, 8, 16), tol=1e-11)
    rep = detect_divergence_lines(r)

    print("level   min nu     (exact 1/sqrt(1+n^2))")
    for n, nu in zip(r.schedule, rep.per_level_min_nu):
        print(f"{n:5g}  {nu:.6f}   {1/np.sqrt(1+n*n):.6f}")

    print(f"\nflagged {rep.flagged_area:.3f} of {rep.interior_area:.3f} "
          f"interior area ({rep.flagged_area/rep.interior_area:.0%})")
    for line in rep.lines:
        print(f"divergence line through ({line.point[0]:.3f}, "
              f"{line.point[1]:.3f}): closed={line.closed}, "
              f"max |ktilde| = {line.max_kappa:.1e}, "
              f"{len(line.geodesic)} samples")

    _, scherk = builtin_scene("flat-scherk")
    rs = solve_truncated_sequence(scherk, h=np.pi / 48, schedule=(1, 2, 4, 8))
    print(f"\nscherk square (solvable): "
          f"{len(detect_divergence_lines(rs).lines)} divergence lines")


if __name__ == "__main__":
    main()
