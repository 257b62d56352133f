#!/usr/bin/env python3
"""The solvability decision on a family of rectangles.

A rectangle with +inf data on the two horizontal sides (length a) and 0 on
the vertical sides (length b) admits a minimal graph exactly when a < b: the
boundary polygon carries alpha = 2a of +inf length against total gamma =
2(a+b), and the strict inequality 2*alpha < gamma degenerates at a = b.
The sweep below watches the margin cross zero.
"""

import numpy as np

from jsgraph import (FINITE, PLUS_INF, builtin_scene, check_js_conditions,
                     rectangle_domain)


def main():
    c, _ = builtin_scene("flat-scherk")
    labels = (PLUS_INF, FINITE, PLUS_INF, FINITE)
    values = (None, "0", None, "0")

    print(f"{'a':>5} {'b':>5} {'margin':>9}  decision")
    for a in np.linspace(0.6, 1.4, 9):
        d = rectangle_domain(c, a / 2, 0.5, labels=labels, values=values)
        js = check_js_conditions(d)
        worst = min(p.margin for p in js.polygons)
        print(f"{a:5.2f} {1.0:5.2f} {worst:+9.4f}  {js.decision}")

    # the alternating-sign square is solvable at every size: the boundary
    # equality alpha = beta replaces the strict test when no finite arcs
    # remain, and the four corner triangles all pass
    _, d = builtin_scene("flat-scherk")
    js = check_js_conditions(d)
    print(f"\nscherk square: {js.decision}, "
          f"{len(js.polygons)} polygons, equality gap "
          f"{js.boundary_equality_gap:.1e}")


if __name__ == "__main__":
    main()
