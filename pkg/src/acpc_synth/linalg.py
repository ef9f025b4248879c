"""Dense linear solves with explicit singularity reporting."""

import warnings

import numpy as np
import scipy.linalg


class SingularSystemError(ArithmeticError):
    pass


def solve(a, b, rcond: float = 1e-13):
    """Solve ``a x = b`` by partial-pivot LU.

    Raises SingularSystemError when a pivot is (numerically) zero instead
    of returning a regularized answer.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] == 0:
        return np.zeros_like(b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    scale = max(1.0, float(np.abs(a).max()))
    if diag.min() <= rcond * scale:
        raise SingularSystemError(f"singular system (smallest pivot {diag.min():.3g})")
    return scipy.linalg.lu_solve((lu, piv), b)
