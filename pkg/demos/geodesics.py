#!/usr/bin/env python3
"""mu-geodesics in three charts.

The mu-metric mu^2 ds_M^2 = (lam*mu)^2 (dx^2 + dy^2) turns questions about
minimal vertical cylinders into plane conformal geometry: a cylinder over a
curve is minimal iff the curve is a mu-geodesic. Three classics:

  * rotational R^3 coordinates (mu = x): geodesics are catenaries
    x = c*cosh((y - y0)/c) plus the horizontal rulings y = const,
  * H^2 x R on the Poincare disk: diameters through 0 are geodesics,
  * the flat cylinder: every horizontal circle closes up.
"""

import numpy as np

from jsgraph import (builtin_scene, mu_geodesic_connect, mu_geodesic_shoot,
                     mu_length)
from jsgraph.mugeo import closed_geodesics


def main():
    c, _ = builtin_scene("rotational-r3")

    # vertical launch from (1, 0): the catenary x = cosh(y)
    arc = mu_geodesic_shoot(c, (1.0, 0.0), np.pi / 2, 2.0, h=1 / 128)
    dev = np.max(np.abs(arc.points[:, 0] - np.cosh(arc.points[:, 1])))
    print(f"catenary shoot: {len(arc.points)} samples, "
          f"endpoint ({arc.points[-1, 0]:.4f}, {arc.points[-1, 1]:.4f}), "
          f"max |x - cosh(y)| = {dev:.2e}")

    # two-point problem between mirror points
    conn = mu_geodesic_connect(c, (1.0, -0.3), (1.0, 0.3))
    print(f"connect (1,-0.3)->(1,0.3): mu-length {conn.s[-1]:.6f}, "
          f"waist x = {np.min(conn.points[:, 0]):.6f}")

    # hyperbolic radius: the segment 0 -> (r, 0) has mu-length
    # 2*atanh(r) = log((1+r)/(1-r))
    h2, _ = builtin_scene("h2xr")
    t = np.linspace(0.0, 0.5, 2049)[:, None]
    from jsgraph import CurveSample
    seg = CurveSample(np.column_stack([t[:, 0], np.zeros(len(t))]))
    L = mu_length(h2, seg)
    print(f"hyperbolic radius to r=0.5: {L:.8f} vs log(3) = {np.log(3):.8f}")

    # closed geodesics on the flat cylinder
    cyl, _ = builtin_scene("flat-cylinder")
    for loop in closed_geodesics(cyl, [0.0, 0.4]):
        print(f"closed geodesic through y={loop.points[0, 1]:+.1f}: "
              f"length {loop.closed_len:.6f} (period 2*pi = {2*np.pi:.6f})")


if __name__ == "__main__":
    main()
