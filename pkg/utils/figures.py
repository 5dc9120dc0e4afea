"""
Figure Panels
Builds the alpha / L / phi time-series tables used by the dashboard and reports
"""

from typing import Dict, Optional

import pandas as pd


def panel_frames(
    frame: pd.DataFrame,
    psi_max: float,
    D_min: Optional[float] = None,
    D_max: Optional[float] = None
) -> Dict[str, pd.DataFrame]:
    """
    Split one pair log into three plot-ready tables indexed by time.

    Args:
        frame: Pair log (columns as written by export_csv)
        psi_max: Half field of view, drawn as +/- limit lines on the phi panel
        D_min: Optional lower depth limit drawn on the L panel
        D_max: Optional upper depth limit drawn on the L panel

    Returns:
        {"alpha": ..., "L": ..., "phi": ...}
    """
    t = frame["t"]

    alpha = pd.DataFrame({
        "alpha": frame["alpha_true"].values,
        "alpha_d": frame["alpha_d"].values,
    }, index=t)

    L = pd.DataFrame({
        "L": frame["L_true"].values,
        "L_filtered": frame["L_filt"].values,
        "L_d": frame["L_d"].values,
    }, index=t)
    if D_min is not None:
        L["D_min"] = D_min
    if D_max is not None:
        L["D_max"] = D_max

    phi = pd.DataFrame({
        "phi": frame["phi_true"].values,
        "phi_filtered": frame["phi_filt"].values,
        "fov_upper": psi_max,
        "fov_lower": -psi_max,
    }, index=t)

    return {"alpha": alpha, "L": L, "phi": phi}


def status_counts(frame: pd.DataFrame) -> pd.Series:
    """Number of steps per filter status"""
    return frame["status"].value_counts().sort_index()
