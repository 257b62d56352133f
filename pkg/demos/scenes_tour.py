#!/usr/bin/env python3
"""Walk through the builtin scenes: fields, compatibility, canonical domains.

Each scene is a local model ds^2 = lam^2(dx^2+dy^2) + mu^2(dt - lam(a dx + b dy))^2
over a planar region. The compatibility defect measures how far the stored
bundle curvature tau is from the one induced by the connection (a, b); it
should vanish to rounding for every scene.
"""

import numpy as np

from jsgraph import (builtin_scene, check_admissibility, check_js_conditions,
                     scene_info, scene_names, validate_chart)


def main():
    for name in scene_names():
        c, d = builtin_scene(name)
        rep = validate_chart(c)
        print(f"\n== {name}")
        print(f"   {scene_info(name)}")
        print(f"   compatibility defect {rep.max_defect:.2e}, "
              f"min lambda {rep.min_lam:.3g}, min mu {rep.min_mu:.3g}, "
              f"periodic={c.periodic}")
        if d is None:
            print("   (no canonical domain)")
            continue
        adm = check_admissibility(d)
        js = check_js_conditions(d)
        print(f"   domain: {d.kind}, {len(d.arcs())} arcs, "
              f"diameter {d.diameter:.3g}")
        print(f"   admissible={adm.admissible}  decision={js.decision} "
              f"({len(js.polygons)} inscribed polygons, "
              f"{len(js.violations)} violations)")

        # the worst polygon margin tells how close the decision was
        margins = [p.margin for p in js.polygons]
        if margins:
            print(f"   tightest polygon margin {min(margins):+.4f}")


if __name__ == "__main__":
    main()
