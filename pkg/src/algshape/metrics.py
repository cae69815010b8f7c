"""Evaluation metrics: binary-raster PSNR, sample consistency and boundary
distance, plus a one-call evaluation report."""

from __future__ import annotations

import math

import numpy as np

from .poly2d import (
    BivariatePolynomial,
    ImagePlane,
    render_shape,
    zero_set_distance,
)

DEFAULT_RESOLUTION = 256


def psnr_binary(reference: np.ndarray, test: np.ndarray) -> float:
    """PSNR between two binary rasters with peak value 1.

    With binary images the MSE is the differing-pixel fraction, so the PSNR
    reduces to 10 log10(N_total / N_diff); identical rasters give +inf.
    """
    ref = np.asarray(reference)
    tst = np.asarray(test)
    if ref.shape != tst.shape:
        raise ValueError("rasters must have the same shape")
    n_diff = int(np.count_nonzero(ref != tst))
    if n_diff == 0:
        return float("inf")
    return 10 * math.log10(ref.size / n_diff)


def _as_raster(shape, plane: ImagePlane, resolution: int) -> np.ndarray:
    if isinstance(shape, BivariatePolynomial):
        return render_shape(shape, plane, resolution)
    raster = np.asarray(shape)
    expected = int(round(2 * plane.half_width * resolution))
    if raster.shape != (expected, expected):
        raise ValueError(
            f"raster shape {raster.shape} does not match plane at {resolution} px/unit"
        )
    return raster


def evaluate_reconstruction(
    truth,
    recon: BivariatePolynomial,
    plane: ImagePlane,
    resolution: int = DEFAULT_RESOLUTION,
) -> dict:
    """PSNR and boundary-distance report of a reconstruction against truth.

    ``truth`` is a polynomial or a binary raster at the given resolution.
    Boundary distance is reported only for polynomial truth.
    """
    truth_raster = _as_raster(truth, plane, resolution)
    recon_raster = render_shape(recon, plane, resolution)
    report = {
        "psnr_db": psnr_binary(truth_raster, recon_raster),
        "resolution": resolution,
        "n_diff": int(np.count_nonzero(truth_raster != recon_raster)),
    }
    if isinstance(truth, BivariatePolynomial):
        report["zero_set_distance"] = zero_set_distance(truth, recon, plane)
        report["zero_set_distance_reverse"] = zero_set_distance(recon, truth, plane)
    return report
