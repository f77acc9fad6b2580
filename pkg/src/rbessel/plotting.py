"""Static figures for CLI runs (Agg backend, no pyplot state)."""

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}
FIGSIZE = (4.8, 3.2)


def _new():
    fig = Figure(figsize=FIGSIZE, dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    ax.grid(True, alpha=0.3, lw=0.5)
    return fig, ax


def _finish(fig, ax, path, xlabel, ylabel, title=None, legend=True):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    if legend and ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    fig.tight_layout()
    # Fixed metadata keeps the files byte-stable across runs.
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)


def series(path, x, ys, xlabel, ylabel, title=None, marker="o", logx=False, logy=False):
    """One line per entry of ``ys`` (label -> values)."""
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        for label, y in ys.items():
            ax.plot(x, y, marker=marker, ms=3, lw=1, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        _finish(fig, ax, path, xlabel, ylabel, title)


def bars(path, x, observed, expected, xlabel, ylabel, title=None):
    """Observed frequencies as bars with the exact law overlaid."""
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        ax.bar(x, observed, width=0.8, alpha=0.6, label="simulated")
        ax.plot(x, expected, "k.", ms=6, label="exact")
        _finish(fig, ax, path, xlabel, ylabel, title)


def estimates(path, r, density, stderr, targets=None, xlabel="r", ylabel="density", title=None):
    """Point estimates with 3-sigma bars, optionally against reference values."""
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        ax.errorbar(r, density, yerr=[3 * s for s in stderr], fmt="o", ms=3, capsize=2,
                    label="estimate (3 se)")
        if targets is not None:
            ax.plot(r, targets, "x", color="k", label="reference")
        _finish(fig, ax, path, xlabel, ylabel, title)
