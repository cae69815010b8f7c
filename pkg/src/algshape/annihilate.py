"""Assembly of linear annihilation systems from moment tables.

The coefficients of the shape polynomial satisfy M a = 0 where each row of M
is built from moments of the image: conventional rows weight a_{i,j} by
(i+r) M_{i+r-1, j+s} (and the j/s counterpart), generalized rows add the
derivative-weight moment term.  Multi-window systems compensate each window's
coordinate shift before stacking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .moments import KIND_CONVENTIONAL, KIND_GG, KIND_GPG, KIND_GGP, MomentTable
from .poly2d import monomial_exponents, num_coefficients, shift_matrix

POLICY_BALANCED = "balanced"
POLICY_FULL = "full"


@dataclass(frozen=True)
class AnnihilationSystem:
    """Stacked annihilation rows over the canonical coefficient columns.

    ``sigma`` records the coordinate normalization: solutions of the stored
    matrix are coefficients of p(x / sigma, y / sigma) and must be mapped
    back through :func:`unscale_solution` before use in global coordinates.
    """

    matrix: np.ndarray
    degree: int
    mode: str
    rs_policy: str
    window_centers: tuple[tuple[float, float], ...]
    sigma: float = 1.0

    def __post_init__(self):
        if self.matrix.shape[1] != num_coefficients(self.degree):
            raise ValueError("column count does not match the degree")

    def column_scales(self) -> np.ndarray:
        return np.array([self.sigma ** (i + j) for i, j in monomial_exponents(self.degree)])

    def unscale_solution(self, a: np.ndarray) -> np.ndarray:
        """Map a solution of the stored matrix to global-coordinate coefficients."""
        return a * self.column_scales()

    def scale_point(self, x: float, y: float) -> tuple[float, float]:
        """Map a global point into the normalized coordinates of the system."""
        return (x * self.sigma, y * self.sigma)

    def save(self, csv_path, meta_path) -> None:
        np.savetxt(csv_path, self.matrix, delimiter=",")
        meta = {
            "degree": self.degree,
            "mode": self.mode,
            "rs_policy": self.rs_policy,
            "windows": [list(w) for w in self.window_centers],
            "sigma": self.sigma,
        }
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2)


def rs_pairs(n: int, policy: str) -> list[tuple[int, int]]:
    if policy == POLICY_BALANCED:
        half = n // 2
        return [(r, s) for r in range(half + 1) for s in range(half + 1)]
    if policy == POLICY_FULL:
        top = 2 * n - 1
        return [(r, s) for r in range(top + 1) for s in range(top + 1 - r)]
    raise ValueError(f"unknown rs policy {policy!r}")


def _check_orders(table: MomentTable, need: int) -> None:
    if table.max_i < need or table.max_j < need:
        raise ValueError(
            f"moment table holds orders up to ({table.max_i}, {table.max_j}); "
            f"rows require orders up to {need}"
        )


def _pair_rows(
    n: int,
    r: int,
    s: int,
    gg: MomentTable,
    gpg: MomentTable | None,
    ggp: MomentTable | None,
) -> np.ndarray:
    exps = monomial_exponents(n)
    rows = np.zeros((2, len(exps)))
    for col, (i, j) in enumerate(exps):
        if i + r >= 1:
            rows[0, col] = (i + r) * gg[i + r - 1, j + s]
        if gpg is not None:
            rows[0, col] += gpg[i + r, j + s]
        if j + s >= 1:
            rows[1, col] = (j + s) * gg[i + r, j + s - 1]
        if ggp is not None:
            rows[1, col] += ggp[i + r, j + s]
    return rows


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.where(norms == 0, 1.0, norms)


def build_conventional(
    momtab: MomentTable, n: int, rs_policy: str = POLICY_BALANCED
) -> AnnihilationSystem:
    """Annihilation rows from conventional moments of a closed shape."""
    pairs = rs_pairs(n, rs_policy)
    max_rs = max(max(r, s) for r, s in pairs)
    _check_orders(momtab, n + max_rs)
    rows = np.concatenate([_pair_rows(n, r, s, momtab, None, None) for r, s in pairs])
    return AnnihilationSystem(
        _normalize_rows(rows), n, KIND_CONVENTIONAL, rs_policy, ((0.0, 0.0),)
    )


def build_generalized(
    tables: list[tuple[MomentTable, MomentTable, MomentTable]],
    n: int,
    rs_policy: str = POLICY_BALANCED,
    windows: list[tuple[float, float]] | None = None,
) -> AnnihilationSystem:
    """Stack shift-compensated generalized-moment rows over windows.

    ``tables`` holds per-window (g.g, g'.g, g.g') tables in window-local
    coordinates; ``windows`` gives each window center in global coordinates
    (defaults to the table centers).
    """
    if windows is None:
        windows = [gg.center for gg, _, _ in tables]
    if len(windows) != len(tables):
        raise ValueError("window list does not match the table list")
    pairs = rs_pairs(n, rs_policy)
    max_rs = max(max(r, s) for r, s in pairs)
    blocks = []
    for (gg, gpg, ggp), (x0, y0) in zip(tables, windows):
        for t, kind in ((gg, KIND_GG), (gpg, KIND_GPG), (ggp, KIND_GGP)):
            if t.kind != kind:
                raise ValueError(f"expected a {kind} table, got {t.kind}")
            _check_orders(t, n + max_rs)
        block = np.concatenate([_pair_rows(n, r, s, gg, gpg, ggp) for r, s in pairs])
        B = shift_matrix(n, x0, y0)
        blocks.append(_normalize_rows(block @ B.entries))
    return AnnihilationSystem(
        np.concatenate(blocks), n, "generalized", rs_policy, tuple(windows)
    )


def normalize_coordinates(system: AnnihilationSystem, sigma: float) -> AnnihilationSystem:
    """Rescale column (i, j) by sigma^(i+j).

    Solutions of the rescaled system are coefficients under the substitution
    (x, y) -> (x / sigma, y / sigma); ``unscale_solution`` undoes the map.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scales = np.array(
        [sigma ** (i + j) for i, j in monomial_exponents(system.degree)]
    )
    return replace(
        system,
        matrix=system.matrix * scales[np.newaxis, :],
        sigma=system.sigma * sigma,
    )
