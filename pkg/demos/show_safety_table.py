"""Draw the adaptive safety-region table for the default footprint.

Left panel: every selected beam as a spoke from the lidar origin, cut at its
stored safe range. The spoke tips trace the inflated body rectangle exactly;
that is the whole point of the representation. The eight direction beams
(four body axes, four corner diagonals) are highlighted, the rest come from
walking the rectangle perimeter at the sampling resolution.

Right panel: the same construction at a resolution too coarse to add
perimeter samples. Only the eight direction beams survive, which is the
degenerate minimum the builder guarantees.

Writes safety_table.png next to this script.

    python demos/show_safety_table.py
"""

import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from narrowsim import Footprint, build_table

OUT = Path(__file__).resolve().parent / "safety_table.png"


def draw(ax, table, footprint, title):
    half_l = footprint.length / 2 + footprint.safety_margin
    half_w = footprint.width / 2 + footprint.safety_margin
    cx = -footprint.lidar_offset
    xs = [cx - half_l, cx + half_l, cx + half_l, cx - half_l, cx - half_l]
    ys = [-half_w, -half_w, half_w, half_w, -half_w]
    ax.plot(xs, ys, color="black", lw=1.5, label="inflated body")

    # direction beams sit exactly on the phase boundaries
    directions = set()
    for phase in table.phase_boundaries:
        best = min(range(len(table)), key=lambda i: abs(table.angles[i] - phase))
        directions.add(best)

    for i, (angle, rng) in enumerate(zip(table.angles, table.ranges)):
        x, y = rng * math.cos(angle), rng * math.sin(angle)
        main = i in directions
        ax.plot([0, x], [0, y], color="tab:red" if main else "tab:blue",
                lw=1.4 if main else 0.6, alpha=1.0 if main else 0.6)
        ax.plot([x], [y], marker="o", ms=3 if main else 2,
                color="tab:red" if main else "tab:blue")
    ax.plot([0], [0], marker="*", ms=12, color="black", label="lidar origin")
    ax.set_title(f"{title}\n{len(table)} beams at resolution {table.resolution}")
    ax.set_aspect("equal")
    ax.legend(loc="lower right", fontsize=8)


def main():
    fp = Footprint()
    fine = build_table(fp, 720, 0.095)
    coarse = build_table(fp, 720, 100.0)
    print(fine.dump())

    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    draw(axes[0], fine, fp, "perimeter-sampled table")
    draw(axes[1], coarse, fp, "direction beams only")
    fig.tight_layout()
    fig.savefig(OUT, dpi=130)
    print(f"{len(fine)} fine beams, {len(coarse)} coarse beams -> {OUT.name}")


if __name__ == "__main__":
    main()
