"""Calcaneus radiograph toolkit: landmark detection, angles, ROI normalisation, metrics."""

from ._calscan import (
    ArgumentError,
    DataError,
    DegenerateGeometryError,
    FormatError,
    InputError,
    IoError,
    Model,
    angle_report,
    bohler_angle,
    gissane_angle,
    iou,
    load_png,
    mre_sd,
    normalize_roi,
    prf1,
    radial_errors_mm,
    save_png,
    sdr,
    synth_case,
    template_landmarks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
