"""Top-down layout plot of a scene."""

from pathlib import Path
from typing import Optional, Tuple, Union
import warnings

import matplotlib.pyplot as plt
from matplotlib.lines import Line2D
from matplotlib.patches import Rectangle

from scenex.core.render import footprint_of
from scenex.core.scene import ObjectCategory, SceneState, front_vector
from scenex.layout.assets import name_color

# try to import adjustText for label positioning
try:
    from adjustText import adjust_text

    ADJUSTTEXT_AVAILABLE = True
except ImportError:
    ADJUSTTEXT_AVAILABLE = False
    print("Warning: adjustText not available. Labels may overlap.")

# suppress noisy FancyArrowPatch fallback warnings from adjustText/annotate
warnings.filterwarnings(
    "ignore",
    message=".*FancyArrowPatch.*",
    category=UserWarning,
)

CATEGORY_STYLE = {
    ObjectCategory.FLOOR: {"alpha": 0.55, "linestyle": "-", "linewidth": 1.2},
    ObjectCategory.WALL: {"alpha": 0.85, "linestyle": "-", "linewidth": 2.0},
    ObjectCategory.SMALL: {"alpha": 0.9, "linestyle": ":", "linewidth": 0.8},
}


def plot_scene_layout(
    scene: SceneState,
    title: Optional[str] = None,
    figsize: Tuple[int, int] = (10, 10),
    show_labels: bool = True,
    show_small: bool = True,
    show_facing: bool = True,
    plot_path: Union[str, Path, None] = None,
    close_fig: bool = False,
) -> plt.Figure:
    """
    Draw the room outline and every instance footprint seen from above.

    Footprints are filled with the stable color of the object name; an arrow
    marks each object's front. Doors and windows are drawn on the walls.

    Args:
        scene: Scene to draw
        title: Optional custom title
        figsize: Figure size (width, height)
        show_labels: Label footprints with instance ids
        show_small: Include small objects
        show_facing: Draw front arrows
        plot_path: Save the figure as PNG here
        close_fig: Close the figure after saving

    Returns:
        matplotlib Figure

    Examples:
        >>> fig = plot_scene_layout(load_scene("results/layout.scene.json"))
    """
    room = scene.room
    x0, y0, x1, y1 = room.bounds

    fig, ax = plt.subplots(figsize=figsize)
    ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, color="black", linewidth=2.5))

    for opening in room.openings:
        (sx, sy), (ex, ey) = room.wall_segment(opening.wall)
        length = room.wall_length(opening.wall)
        a, b = opening.offset / length, (opening.offset + opening.width) / length
        color = "tab:brown" if opening.kind == "door" else "tab:cyan"
        ax.plot(
            [sx + a * (ex - sx), sx + b * (ex - sx)],
            [sy + a * (ey - sy), sy + b * (ey - sy)],
            color=color,
            linewidth=6,
            solid_capstyle="butt",
        )

    texts = []
    for inst in scene.instances:
        if inst.category == ObjectCategory.SMALL and not show_small:
            continue
        fp = footprint_of(inst)
        style = CATEGORY_STYLE[inst.category]
        color = name_color(inst.name) / 255.0
        ax.add_patch(
            Rectangle(
                (fp.xmin, fp.ymin),
                fp.xmax - fp.xmin,
                fp.ymax - fp.ymin,
                facecolor=color,
                edgecolor="black",
                alpha=style["alpha"],
                linestyle=style["linestyle"],
                linewidth=style["linewidth"],
            )
        )
        cx, cy = fp.center
        if show_facing and inst.category != ObjectCategory.SMALL:
            fx, fy = front_vector(inst.yaw)[:2]
            reach = 0.35 * min(fp.xmax - fp.xmin, fp.ymax - fp.ymin) + 0.1
            ax.annotate(
                "",
                xy=(cx + fx * reach, cy + fy * reach),
                xytext=(cx, cy),
                arrowprops=dict(arrowstyle="->", color="black", lw=1.2),
            )
        if show_labels:
            texts.append(ax.text(cx, cy, inst.id, fontsize=9, ha="center", va="center"))

    # use adjustText to prevent overlaps if available
    if ADJUSTTEXT_AVAILABLE and texts:
        adjust_text(
            texts,
            ax=ax,
            arrowprops=dict(arrowstyle="-", color="gray", lw=0.8, alpha=0.7),
            expand_text=(1.1, 1.1),
        )

    margin = 0.3
    ax.set_xlim(x0 - margin, x1 + margin)
    ax.set_ylim(y0 - margin, y1 + margin)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)", fontsize=12)
    ax.set_ylabel("y (m)", fontsize=12)

    legend_elements = [
        Line2D([0], [0], color="black", linestyle=style["linestyle"], label=category.value)
        for category, style in CATEGORY_STYLE.items()
    ]
    ax.legend(handles=legend_elements, loc="upper right", frameon=False, fontsize=10)

    if title is None:
        title = f"Layout ({len(scene.instances)} objects)"
    ax.set_title(title, fontsize=15, fontweight="bold", pad=15)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    fig.tight_layout()

    if plot_path is not None:
        plot_path = Path(plot_path)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(plot_path, dpi=150, bbox_inches="tight", format="png")
        print(f"Plot saved: {plot_path}")

    if close_fig:
        plt.close(fig)
    return fig
