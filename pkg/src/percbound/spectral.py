"""Numeric evaluation of the mean matrix and the subcriticality test.

The branching process dies out almost surely exactly when the spectral
radius of its mean matrix is at most one, so the certificate of a lower
bound is "radius strictly below 1 at this parameter value".  Matrices
reach 10^4..10^5 rows and only the Perron root is needed, so the radius
is computed by power iteration on M + sigma*I: the small diagonal shift
defeats periodic communication structure, and for nonnegative M the
shifted radius is exactly radius(M) + sigma.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NonConvergenceError
from .transition import MeanMatrix

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200_000
DEFAULT_MARGIN = 1e-6
_SHIFT = 1e-3
_STREAK = 5  # consecutive stationary ratios required for convergence


@dataclass
class SpectralReport:
    """Outcome of a spectral-radius estimation."""

    radius_estimate: float
    iterations: int
    converged: bool
    residual: float

    def to_json(self) -> dict:
        return asdict(self)


def evaluate(matrix: MeanMatrix, params) -> sp.csr_matrix:
    """Entrywise evaluation of the symbolic matrix at parameter values."""
    if isinstance(params, (int, float)):
        params = (params,)
    if len(params) != matrix.model.arity:
        raise ValueError(
            f"model {matrix.model.ident} takes {matrix.model.arity} parameters"
        )
    values = np.array([poly.eval(params) for poly in matrix.pool], dtype=np.float64)
    data = values[matrix.pids]
    n = matrix.dimension
    return sp.csr_matrix((data, matrix.cols, matrix.indptr), shape=(n, n), copy=False)


def spectral_radius(
    matrix: sp.spmatrix | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    shift: float = _SHIFT,
) -> SpectralReport:
    """Perron root of a nonnegative square matrix by shifted power iteration.

    Starts from the all-ones vector (strictly positive, so the iteration
    converges to the Perron root of the shifted matrix) and declares
    convergence when the growth ratio's relative change stays at or
    below ``tol`` for five consecutive iterations.  A non-converged
    report must be treated as indeterminate, never as subcritical.
    """
    n = matrix.shape[0]
    if matrix.shape[1] != n:
        raise ValueError("matrix must be square")
    if n == 0:
        return SpectralReport(0.0, 0, True, 0.0)
    x = np.full(n, 1.0 / np.sqrt(n))
    ratio = 0.0
    streak = 0
    rel = float("inf")
    for it in range(1, max_iter + 1):
        y = matrix @ x
        if shift:
            y = y + shift * x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            # Only possible with shift=0 and x in the kernel.
            return SpectralReport(0.0, it, True, 0.0)
        rel = abs(norm - ratio) / norm
        ratio = norm
        x = y / norm
        streak = streak + 1 if rel <= tol else 0
        if streak >= _STREAK:
            return SpectralReport(max(ratio - shift, 0.0), it, True, rel)
    return SpectralReport(max(ratio - shift, 0.0), max_iter, False, rel)


def is_subcritical(
    matrix: sp.spmatrix | np.ndarray,
    margin: float = DEFAULT_MARGIN,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Certified subcriticality check: converged and radius < 1 - margin.

    Returns ``(verdict, report)``; a non-converged estimate yields a
    False verdict with the report flagging the failure.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    report = spectral_radius(matrix, tol=tol, max_iter=max_iter)
    verdict = report.converged and report.radius_estimate < 1.0 - margin
    return verdict, report


def require_converged(report: SpectralReport, context: str = "") -> SpectralReport:
    if not report.converged:
        raise NonConvergenceError(
            f"power iteration did not converge{(' ' + context) if context else ''}: "
            f"radius~{report.radius_estimate:.6g} after {report.iterations} iterations "
            f"(residual {report.residual:.3g})"
        )
    return report
