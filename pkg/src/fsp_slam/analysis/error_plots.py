from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from fsp_slam.analysis.plotutils import Plot
from fsp_slam.pipeline.report import read_csv
from fsp_slam.utils.nomenclature import variable_manager as vm

MODE_COLORS = {"fsp": "C0", "fhp": "C1"}
MODE_LABELS = {"fsp": "FSP", "fhp": "FHP"}


class RelPoseErrorPlot(Plot):
    FILENAME = "relpose"

    def __init__(self, var: str = "trans_err_m", **kwargs):
        """Relative pose error over time, one line per landmark mode

        .. code-block:: python

            p = RelPoseErrorPlot("rot_err_rad")
            p.plot_mode("fsp", pd.read_csv("relpose_fsp.csv"))
            p.plot_mode("fhp", pd.read_csv("relpose_fhp.csv"))
            p.add_legend()
        """
        super().__init__(**kwargs)
        self.var = var
        self.ax.set_xlabel("Time [s]")
        self.ax.set_ylabel(vm[var].label)

    def plot_mode(self, mode: str, df: pd.DataFrame, **kwargs) -> None:
        self.ax.plot(
            "t",
            self.var,
            data=df,
            color=MODE_COLORS.get(mode),
            label=MODE_LABELS.get(mode, mode),
            lw=1,
            **kwargs,
        )


class CornerErrorPlot(Plot):
    FILENAME = "corners"

    def __init__(self, **kwargs):
        """Error of every corner, grouped by object"""
        super().__init__(**kwargs)
        self.ax.set_xlabel("Object")
        self.ax.set_ylabel(vm["err_m"].label)
        self._n_modes = 0

    def plot_mode(self, mode: str, df: pd.DataFrame) -> None:
        # offset the modes horizontally within the object column
        offset = 0.15 * (self._n_modes - 0.5)
        self._n_modes += 1
        x = df["object_id"].to_numpy() + offset + 0.05 * (df["corner_j"].to_numpy() - 2.5)
        self.ax.scatter(
            x,
            df["err_m"],
            color=MODE_COLORS.get(mode),
            label=MODE_LABELS.get(mode, mode),
            s=12,
        )
        self.ax.set_xticks(np.unique(df["object_id"]))


class DimErrorPlot(Plot):
    FILENAME = "dims"

    def __init__(self, df: pd.DataFrame, **kwargs):
        """Width and height errors of every rectangle"""
        super().__init__(**kwargs)
        self.df = df
        self.ax.set_xlabel("Object")
        self.ax.set_ylabel("Error [m]")

    def plot(self) -> None:
        x = np.arange(len(self.df))
        width = 0.4
        self.ax.bar(x - width / 2, self.df["w_err_m"], width, label=vm["w_err_m"].label)
        self.ax.bar(x + width / 2, self.df["h_err_m"], width, label=vm["h_err_m"].label)
        self.ax.set_xticks(x, self.df["object_id"].astype(str))


def plot_run(run_dir: str | Path) -> list[Path]:
    """Write the error figures of a run next to its outputs.

    Returns:
        Paths of the figures
    """
    run_dir = Path(run_dir)
    modes = [m for m in ("fsp", "fhp") if (run_dir / f"relpose_{m}.csv").exists()]
    written = []
    for var in ("trans_err_m", "rot_err_rad"):
        p = RelPoseErrorPlot(var)
        for mode in modes:
            p.plot_mode(mode, read_csv(run_dir / f"relpose_{mode}.csv"))
        p.add_legend()
        path = run_dir / f"relpose_{var}.pdf"
        p.save(path)
        p.close()
        written.append(path)
    p = CornerErrorPlot()
    for mode in modes:
        p.plot_mode(mode, read_csv(run_dir / f"corners_{mode}.csv"))
    p.add_legend()
    path = run_dir / "corners.pdf"
    p.save(path)
    p.close()
    written.append(path)
    if (run_dir / "dims_fsp.csv").exists():
        p = DimErrorPlot(read_csv(run_dir / "dims_fsp.csv"))
        p.plot()
        p.add_legend()
        path = run_dir / "dims.pdf"
        p.save(path)
        p.close()
        written.append(path)
    return written
