"""Linear stability of a constant-drive operating point.

State ordering is (Q, P, Re a1, Im a1, Re a2, Im a2). The Routh-Hurwitz test works
on the characteristic polynomial; the eigenvalue test is kept as an independent
cross-check.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from errors import EigenSolverError

ZERO_TOLERANCE = 1e-9
EPSILON = 1e-9
EIGEN_MARGIN = 1e-9


@dataclass(frozen=True)
class LinearizedSystem:
    matrix: np.ndarray
    operating_point: object
    omega_m: float


@dataclass(frozen=True)
class StabilityReport:
    verdict: str
    margin: float
    first_column: Tuple[float, ...]
    coefficients: Tuple[float, ...]

    @property
    def stable(self):
        return self.verdict == "stable"


def linearize(params, op):
    """Jacobian of the mirror-coupled equations at ``op``, probe terms excluded."""
    g1, g2 = params.g1, params.g2
    x1, y1 = op.a10.real, op.a10.imag
    x2, y2 = op.a20.real, op.a20.imag
    k1, k2 = params.kappa1, params.kappa2
    d1, d2 = op.Delta1, op.Delta2
    wm, gm = params.omega_m, params.gamma_m

    matrix = np.array(
        [
            [0.0, wm, 0.0, 0.0, 0.0, 0.0],
            [-wm, -gm, 2 * g1 * x1, 2 * g1 * y1, -2 * g2 * x2, -2 * g2 * y2],
            [-g1 * y1, 0.0, -k1, d1, 0.0, 0.0],
            [g1 * x1, 0.0, -d1, -k1, 0.0, 0.0],
            [g2 * y2, 0.0, 0.0, 0.0, -k2, d2],
            [-g2 * x2, 0.0, 0.0, 0.0, -d2, -k2],
        ]
    )
    return LinearizedSystem(matrix=matrix, operating_point=op, omega_m=wm)


def characteristic_polynomial(matrix):
    """Coefficients of det(lambda I - A), highest power first, by Faddeev-LeVerrier.

    The recursion runs on A/s with s the infinity norm and is rescaled afterwards,
    which keeps the intermediate powers of A in range.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    scale = float(np.linalg.norm(matrix, ord=np.inf))
    if scale == 0.0:
        return np.concatenate(([1.0], np.zeros(n)))
    scaled = matrix / scale
    identity = np.eye(n)
    coefficients = [1.0]
    m = np.zeros((n, n))
    c = 1.0
    for k in range(1, n + 1):
        m = scaled @ m + c * identity
        c = -np.trace(scaled @ m) / k
        coefficients.append(c)
    return np.array([coef * scale**power for power, coef in enumerate(coefficients)])


def routh_array(coefficients):
    """Routh table rows and a flag set when a whole row vanished."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients[0] < 0:
        coefficients = -coefficients
    n_rows = len(coefficients)
    width = (n_rows + 1) // 2
    table = np.zeros((n_rows, width))
    table[0, : len(coefficients[0::2])] = coefficients[0::2]
    table[1, : len(coefficients[1::2])] = coefficients[1::2]
    degenerate = n_rows > 1 and not np.any(table[1])
    if degenerate:
        return table, degenerate
    if n_rows > 1 and table[1, 0] == 0.0:
        table[1, 0] = EPSILON * float(np.max(np.abs(table[1])))

    for i in range(2, n_rows):
        above, pivot_row = table[i - 2], table[i - 1]
        pivot = pivot_row[0]
        for j in range(width - 1):
            left = pivot * above[j + 1]
            right = above[0] * pivot_row[j + 1]
            value = (left - right) / pivot
            # cancellation down to roundoff counts as an exact zero
            if abs(left - right) <= ZERO_TOLERANCE * (abs(left) + abs(right)):
                value = 0.0
            table[i, j] = value
        if not np.any(table[i]):
            degenerate = True
            break
        if table[i, 0] == 0.0:
            table[i, 0] = EPSILON * float(np.max(np.abs(table[i])))
    return table, degenerate


def is_stable_routh_hurwitz(system):
    """Routh-Hurwitz verdict ("stable", "unstable" or "marginal") with the first-column margin."""
    coefficients = characteristic_polynomial(system.matrix)
    table, degenerate = routh_array(coefficients)
    first_column = tuple(float(value) for value in table[:, 0])
    if degenerate:
        verdict = "marginal"
    elif all(value > 0 for value in first_column):
        verdict = "stable"
    else:
        verdict = "unstable"
    report = StabilityReport(
        verdict=verdict,
        margin=min(first_column),
        first_column=first_column,
        coefficients=tuple(float(value) for value in coefficients),
    )
    logging.info(f"Routh-Hurwitz verdict: {verdict} (margin {report.margin:.4e})")
    return report


def eigenvalues(system):
    if not np.all(np.isfinite(system.matrix)):
        raise EigenSolverError("linearized matrix has non-finite entries")
    try:
        return scipy.linalg.eigvals(system.matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        logging.error(f"Eigenvalue solve failed: {e}")
        raise EigenSolverError(f"eigenvalue solver did not converge: {e}") from e


def max_growth_rate(system):
    return float(np.max(eigenvalues(system).real))


def is_stable_eigen(system):
    return max_growth_rate(system) < -EIGEN_MARGIN * system.omega_m
