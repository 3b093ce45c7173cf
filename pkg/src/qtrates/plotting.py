"""Optional figures: one PNG per CSV table, written next to it.

Only used by ``qtrates run --plot``; nothing else depends on rendering.
"""

import os


def plot_tables(written):
    """Plot every table against its first column.

    Args:
        written: ``[(csv_path, columns)]`` as produced by the runner.

    Returns:
        list of PNG file names.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = []
    for path, columns in written:
        keys = list(columns)
        x_name, ys = keys[0], keys[1:]
        if not ys:
            continue
        fig, axes = plt.subplots(len(ys), 1, figsize=(6, 1.8 * len(ys) + 0.6), sharex=True,
                                 squeeze=False)
        for ax, y in zip(axes[:, 0], ys):
            ax.plot(columns[x_name], columns[y], lw=1.2)
            ax.set_ylabel(y, fontsize=8)
            ax.tick_params(labelsize=7)
        axes[-1, 0].set_xlabel(x_name)
        fig.suptitle(os.path.basename(path), fontsize=9)
        fig.tight_layout()
        png = os.path.splitext(path)[0] + ".png"
        fig.savefig(png, dpi=90)
        plt.close(fig)
        names.append(os.path.basename(png))
    return names
