"""Plot builders over the solver's documented CSV schemas.

Input is only ever a CSV path; nothing here imports the solver. Output PNGs
carry no timestamps or environment-dependent metadata, so regenerating a
figure from the same CSV yields identical bytes.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# strip the one metadata key matplotlib would otherwise embed in the PNG
_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def _read_columns(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = {}
    for col in reader.fieldnames:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except (TypeError, ValueError):
            out[col] = np.array([r[col] for r in rows])
    return out


def _band(ax, x, mean, std, color, label):
    ax.plot(x, mean, color=color, label=label)
    ax.fill_between(x, mean - 2.0 * std, mean + 2.0 * std, color=color,
                    alpha=0.25, linewidth=0)


def plot_training(summary_csv, out_png) -> str:
    """Loss and relative L2 error curves with mean line and +-2 sigma band."""
    cols = _read_columns(summary_csv, ("step", "mean_loss", "std_loss",
                                       "mean_l2_rel_error", "std_l2_rel_error"))
    fig, (ax_loss, ax_err) = plt.subplots(1, 2, figsize=(10, 4))
    _band(ax_loss, cols["step"], cols["mean_loss"], cols["std_loss"],
          "tab:blue", "loss")
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("energy estimate")
    ax_loss.legend()
    _band(ax_err, cols["step"], cols["mean_l2_rel_error"],
          cols["std_l2_rel_error"], "tab:red", "rel. L2 error")
    ax_err.set_xlabel("step")
    ax_err.set_ylabel("relative L2 error")
    ax_err.set_yscale("log")
    ax_err.legend()
    fig.tight_layout()
    fig.savefig(out_png, **_SAVE_KW)
    plt.close(fig)
    return str(out_png)


def plot_solution(dump_csv, out_png) -> str:
    """1D overlay (u against the exact solution) or 2D slice contour."""
    with open(dump_csv) as fh:
        header = fh.readline().strip().split(",")
    if header[:2] == ["x", "u"]:
        cols = _read_columns(dump_csv, ("x", "u"))
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(cols["x"], cols["u"], label="network", color="tab:blue")
        if "u_star" in cols:
            ax.plot(cols["x"], cols["u_star"], "--", label="exact",
                    color="tab:orange")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.legend()
    elif header[:3] == ["x1", "x2", "u"]:
        cols = _read_columns(dump_csv, ("x1", "x2", "u"))
        r = int(round(np.sqrt(cols["u"].size)))
        if r * r != cols["u"].size:
            raise ValueError(f"{dump_csv}: slice grid is not square")
        x1 = cols["x1"].reshape(r, r)
        x2 = cols["x2"].reshape(r, r)
        u = cols["u"].reshape(r, r)
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        # a constant field still renders as a single-color sheet
        if np.ptp(u) == 0.0:
            mappable = ax.pcolormesh(x1, x2, u)
        else:
            mappable = ax.contourf(x1, x2, u, levels=30)
        fig.colorbar(mappable, ax=ax)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        raise ValueError(f"{dump_csv}: not a line or slice dump")
    fig.tight_layout()
    fig.savefig(out_png, **_SAVE_KW)
    plt.close(fig)
    return str(out_png)


def plot_dim_sweep(sweep_csv, out_png) -> str:
    """Error against dimension, one curve per frequency, +-2 sigma bands."""
    cols = _read_columns(sweep_csv, ("dim", "kbar", "mean_final_error",
                                     "std_final_error"))
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, kbar in enumerate(np.unique(cols["kbar"])):
        sel = cols["kbar"] == kbar
        order = np.argsort(cols["dim"][sel])
        dims = cols["dim"][sel][order]
        mean = cols["mean_final_error"][sel][order]
        std = cols["std_final_error"][sel][order]
        color = f"C{i}"
        if dims.size == 1:
            ax.errorbar(dims, mean, yerr=2.0 * std, fmt="o", color=color,
                        label=f"kbar={int(kbar)}")
        else:
            _band(ax, dims, mean, std, color, f"kbar={int(kbar)}")
    ax.set_xlabel("dimension")
    ax.set_ylabel("final relative L2 error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, **_SAVE_KW)
    plt.close(fig)
    return str(out_png)
