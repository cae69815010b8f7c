"""Scikit-learn style estimator facade over the reconstruction pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .annihilate import POLICY_BALANCED
from .gmfit import GMCoefficients
from .poly2d import ImagePlane, evaluate as poly_eval
from .recover import PipelineOptions, run_pipeline
from .sampler import SampleGrid


class ShapeReconstructor(BaseEstimator):
    """Estimator recovering an algebraic shape from kernel samples.

    ``fit`` takes a SampleGrid (or a square sample matrix plus metadata) and
    stores the recovered polynomial; ``predict`` labels points as inside (1)
    or outside (0); ``transform`` returns the signed polynomial values.

    Parameters
    ----------
    degree : int
        Degree of the recovered polynomial.
    mode : str
        "conventional" or "generalized" moment path.
    gm_coefficients : GMCoefficients, optional
        Fitted coefficient set; required for generalized mode.
    rs_policy, epsilon, margin, sign_qp, consistency, max_iter, fd_step :
        Passed through to the pipeline options.
    """

    def __init__(
        self,
        degree: int = 4,
        mode: str = "conventional",
        gm_coefficients: GMCoefficients | None = None,
        rs_policy: str = POLICY_BALANCED,
        epsilon: float = 0.2,
        margin: float = 1e-3,
        sign_qp: str = "auto",
        consistency: str = "auto",
        max_iter: int = 10,
        fd_step: float = 1e-2,
    ):
        self.degree = degree
        self.mode = mode
        self.gm_coefficients = gm_coefficients
        self.rs_policy = rs_policy
        self.epsilon = epsilon
        self.margin = margin
        self.sign_qp = sign_qp
        self.consistency = consistency
        self.max_iter = max_iter
        self.fd_step = fd_step

    def fit(self, X, y=None, *, kernel_order: int | None = None, plane: ImagePlane | None = None):
        """Recover the shape polynomial from samples.

        ``X`` is a SampleGrid, or a square sample matrix together with
        ``kernel_order`` (and optionally ``plane``; by default the plane half
        width is inferred from the grid size and kernel support).
        """
        if isinstance(X, SampleGrid):
            grid = X
        else:
            values = np.asarray(X, dtype=float)
            if values.ndim != 2 or values.shape[0] != values.shape[1]:
                raise ValueError("expected a square sample matrix")
            if kernel_order is None:
                raise ValueError("kernel_order is required with a raw sample matrix")
            size = values.shape[0]
            # size = 2 L + m + 1 for unit period and even kernel order
            half_width = (size - kernel_order - 1) / 2
            if half_width <= 0:
                raise ValueError("sample matrix too small for this kernel order")
            plane = plane or ImagePlane(half_width, 1.0)
            k_max = (size - 1) // 2
            grid = SampleGrid(values, (-k_max, k_max), (-k_max, k_max), kernel_order, plane)
        options = PipelineOptions(
            rs_policy=self.rs_policy,
            epsilon=self.epsilon,
            margin=self.margin,
            sign_qp=self.sign_qp,
            consistency=self.consistency,
            max_iter=self.max_iter,
            fd_step=self.fd_step,
        )
        self.result_ = run_pipeline(grid, self.degree, self.mode, self.gm_coefficients, options)
        self.polynomial_ = self.result_.polynomial("final")
        self.n_features_in_ = 2
        return self

    def transform(self, X) -> np.ndarray:
        """Signed polynomial values at the given (x, y) points."""
        self._check_fitted()
        pts = np.asarray(X, dtype=float)
        return poly_eval(self.polynomial_, pts[:, 0], pts[:, 1])

    def predict(self, X) -> np.ndarray:
        """Binary inside/outside labels at the given (x, y) points."""
        return (self.transform(X) <= 0).astype(int)

    def _check_fitted(self):
        if not hasattr(self, "polynomial_"):
            raise RuntimeError("estimator is not fitted")
