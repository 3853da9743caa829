"""Render the two figure kinds from parsed CSV data.

Rendering is a pure function of (CSV contents, PlotSpec): no clocks, no
randomness, fixed layout, so regenerating a figure from the same inputs
produces an identical file.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from . import load_linmap, load_timeseries

# draw order: baseline first so the headline filter lands on top
DRAW_ORDER = ("ekf", "eqf", "eqfstar")
LINMAP_PANELS = ("ekf", "eqf", "eqfstar")


def color_scale(errors):
    """Shared (vmin, vmax) so identical values map to identical colors
    across all panels."""
    vmax = max(float(g.max()) for g in errors.values())
    return 0.0, vmax if vmax > 0.0 else 1.0


def plot_timeseries(csv_path, spec):
    """Angle error and Lyapunov value, stacked; percentile bands when the
    input is an aggregate file."""
    ts = load_timeseries(csv_path)
    fig, (ax_a, ax_l) = plt.subplots(
        2, 1, figsize=(7.0, 6.0), sharex=True, constrained_layout=True)

    for name in DRAW_ORDER:
        st = spec.styles[name]
        for ax, table in ((ax_a, ts.angle), (ax_l, ts.lyapunov)):
            series = table[name]
            if ts.kind == "aggregate":
                if spec.bands:
                    ax.fill_between(ts.t, series[0], series[2],
                                    color=st.color, alpha=0.18, linewidth=0)
                ax.plot(ts.t, series[1], color=st.color,
                        linestyle=st.linestyle, label=st.label)
            else:
                ax.plot(ts.t, series, color=st.color,
                        linestyle=st.linestyle, label=st.label)

    if spec.log_angle:
        ax_a.set_yscale("log")
    if spec.log_lyapunov:
        ax_l.set_yscale("log")
    ax_a.set_ylabel("angle error [rad]")
    ax_l.set_ylabel("Lyapunov value")
    ax_l.set_xlabel("time [s]")
    ax_a.legend(loc="upper right")
    for ax in (ax_a, ax_l):
        ax.grid(True, which="both", alpha=0.3)

    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return spec.out_path


def plot_linmap(csv_path, spec):
    """Three heatmaps of output-linearization residual on one color scale."""
    lm = load_linmap(csv_path)
    vmin, vmax = color_scale(lm.errors)
    fig, axes = plt.subplots(
        1, 3, figsize=(12.0, 3.8), sharey=True, constrained_layout=True)

    mesh = None
    for ax, name in zip(axes, LINMAP_PANELS):
        mesh = ax.pcolormesh(lm.phi, lm.theta, lm.errors[name],
                             vmin=vmin, vmax=vmax, shading="nearest")
        ax.set_title(spec.styles[name].label)
        ax.set_xlabel("azimuth [rad]")
    axes[0].set_ylabel("polar angle [rad]")
    fig.colorbar(mesh, ax=axes, label="linearization residual", shrink=0.9)

    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return spec.out_path
