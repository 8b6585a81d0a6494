"""State estimation support: Lyapunov solvers and a discontinuous observer.

The Lyapunov solvers use dense Kronecker vectorization.  That is deliberate:
the loops this package handles are small (a handful of states), so the n^2 by
n^2 linear solve is cheap, trivially auditable, and has no library dependency.
Both solvers verify their own residual before returning.

The discontinuous observer is a sliding-mode estimator for plants in the
second-order canonical form

    x1' = x2
    x2' = -a*x1 - b*x2 + u,      measured output x1.

Its switching injection, once low-pass filtered, reconstructs the signal the
sensor lies about; see detection.predict_yf for the companion prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPositiveStep,
    NotHurwitz,
    NotSchur,
    NumericallySingular,
    WrongPlantClass,
)

__all__ = [
    "solve_lyapunov_continuous",
    "solve_lyapunov_discrete",
    "sign",
    "DiscObserverGains",
    "DiscObserverState",
    "disc_observer_step",
]

#: residual acceptance factor for both solvers, relative to max(1, ||Q||_F)
_RESIDUAL_TOL = 1e-10


def _as_square(mat, name):
    arr = np.atleast_2d(np.asarray(mat, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def _check_symmetric(q, name):
    scale = np.linalg.norm(q, "fro")
    if np.linalg.norm(q - q.T, "fro") > 1e-12 * max(1.0, scale):
        raise DimensionMismatch(f"{name} must be symmetric")


def solve_lyapunov_continuous(a_cl, q):
    """Solve A*P + P*A' + Q = 0 for symmetric P.

    Parameters
    ----------
    a_cl : (n, n) array_like
        Hurwitz matrix (every eigenvalue has strictly negative real part).
    q : (n, n) array_like
        Symmetric forcing term, PSD in the covariance use cases.

    Returns
    -------
    (n, n) ndarray
        Symmetric solution.  When Q is PSD the solution is PSD as well.

    Raises
    ------
    NotHurwitz
        If a_cl has an eigenvalue with nonnegative real part.
    NumericallySingular
        If the vectorized solve fails or the back-substituted residual
        exceeds 1e-10 * max(1, ||Q||_F).
    """
    a = _as_square(a_cl, "a_cl")
    qm = _as_square(q, "q")
    if a.shape != qm.shape:
        raise DimensionMismatch(
            f"a_cl {a.shape} and q {qm.shape} must have matching shape"
        )
    _check_symmetric(qm, "q")

    re_max = float(np.max(np.linalg.eigvals(a).real))
    if re_max >= 0.0:
        raise NotHurwitz(f"max eigenvalue real part {re_max:.6g} >= 0")

    n = a.shape[0]
    eye = np.eye(n)
    coeff = np.kron(eye, a) + np.kron(a, eye)
    try:
        vec_p = np.linalg.solve(coeff, -qm.reshape(n * n, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericallySingular(f"Lyapunov solve failed: {exc}") from exc
    p = vec_p.reshape((n, n), order="F")
    p = 0.5 * (p + p.T)

    residual = np.linalg.norm(a @ p + p @ a.T + qm, "fro")
    bound = _RESIDUAL_TOL * max(1.0, float(np.linalg.norm(qm, "fro")))
    if not residual <= bound:
        raise NumericallySingular(
            f"Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )
    return p


def solve_lyapunov_discrete(phi, q):
    """Solve Phi*P*Phi' - P + Q = 0 for symmetric P.

    phi must be Schur (spectral radius strictly below 1); q must be symmetric.
    Same residual guarantee as the continuous solver.
    """
    f = _as_square(phi, "phi")
    qm = _as_square(q, "q")
    if f.shape != qm.shape:
        raise DimensionMismatch(
            f"phi {f.shape} and q {qm.shape} must have matching shape"
        )
    _check_symmetric(qm, "q")

    rho = float(np.max(np.abs(np.linalg.eigvals(f))))
    if rho >= 1.0:
        raise NotSchur(f"spectral radius {rho:.6g} >= 1")

    n = f.shape[0]
    coeff = np.eye(n * n) - np.kron(f, f)
    try:
        vec_p = np.linalg.solve(coeff, qm.reshape(n * n, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericallySingular(f"Lyapunov solve failed: {exc}") from exc
    p = vec_p.reshape((n, n), order="F")
    p = 0.5 * (p + p.T)

    residual = np.linalg.norm(f @ p @ f.T - p + qm, "fro")
    bound = _RESIDUAL_TOL * max(1.0, float(np.linalg.norm(qm, "fro")))
    if not residual <= bound:
        raise NumericallySingular(
            f"Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )
    return p


def sign(v):
    """Sign with sign(0) = 0, the convention the switching term relies on."""
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class DiscObserverGains:
    """Gains and plant coefficients for the discontinuous observer.

    c1, c2 are the linear output-injection gains, c3 the switching amplitude.
    a, b are the plant coefficients from x2' = -a*x1 - b*x2 + u.
    """

    c1: float
    c2: float
    c3: float
    a: float
    b: float

    @classmethod
    def from_model(cls, model, c1, c2, c3=12.0):
        """Extract (a, b) from a canonical second-order plant.

        The plant must have state dimension 2, one input, one sensor, with
        A = [[0, 1], [-a, -b]], B = [[0], [1]], C = [[1, 0]].  Anything else
        raises WrongPlantClass.
        """
        a_mat = np.asarray(model.a, dtype=float)
        b_mat = np.asarray(model.b, dtype=float)
        c_mat = np.asarray(model.c, dtype=float)
        ok = (
            a_mat.shape == (2, 2)
            and b_mat.shape == (2, 1)
            and c_mat.shape == (1, 2)
            and abs(a_mat[0, 0]) <= 1e-12
            and abs(a_mat[0, 1] - 1.0) <= 1e-12
            and abs(b_mat[0, 0]) <= 1e-12
            and abs(b_mat[1, 0] - 1.0) <= 1e-12
            and abs(c_mat[0, 0] - 1.0) <= 1e-12
            and abs(c_mat[0, 1]) <= 1e-12
        )
        if not ok:
            raise WrongPlantClass(
                "plant must be second-order canonical: A=[[0,1],[-a,-b]], "
                "B=[[0],[1]], C=[[1,0]]"
            )
        return cls(
            c1=float(c1), c2=float(c2), c3=float(c3),
            a=float(-a_mat[1, 0]), b=float(-a_mat[1, 1]),
        )


@dataclass(frozen=True)
class DiscObserverState:
    """Observer state after a step.

    e1 and s are the output error and switching term at the *start* of the
    step that produced this state; they are what downstream filtering
    consumes for that step.
    """

    xhat1: float
    xhat2: float
    e1: float
    s: float

    @classmethod
    def initial(cls, xhat1=0.0, xhat2=0.0):
        return cls(float(xhat1), float(xhat2), 0.0, 0.0)


def disc_observer_step(state, ybar, u, gains, tau):
    """Advance the discontinuous observer one fixed RK4 step.

    The measured output ybar, the input u, and the switching term are all
    held constant over the step (zero-order hold): sign(e1) is sampled
    once at the step start and injected as a constant.  Holding the
    discontinuity fixed keeps the recorded switching sample identical to
    what the integrator actually applied, so its running average is the
    equivalent control; re-evaluating the sign inside the stages would
    hide part of that average where the filter cannot see it.  The linear
    corrections do re-evaluate e1 = ybar - xhat1 at every stage.  sign(0)
    is 0, which makes exact tracking a true fixed point.

    Returns a new DiscObserverState whose e1/s fields are the values at the
    step's start, for downstream filtering.
    """
    if not tau > 0.0:
        raise NonPositiveStep(f"tau must be > 0, got {tau}")
    c1, c2, c3 = gains.c1, gains.c2, gains.c3
    a, b = gains.a, gains.b
    yb = float(ybar)
    uu = float(u)

    x1 = state.xhat1
    x2 = state.xhat2
    e1_start = yb - x1
    s_start = c3 * sign(e1_start)

    def deriv(x1, x2):
        e1 = yb - x1
        d1 = x2 + c1 * e1
        d2 = -a * x1 - b * x2 + uu + c2 * e1 + s_start
        return d1, d2

    h = float(tau)
    k1a, k1b = deriv(x1, x2)
    k2a, k2b = deriv(x1 + 0.5 * h * k1a, x2 + 0.5 * h * k1b)
    k3a, k3b = deriv(x1 + 0.5 * h * k2a, x2 + 0.5 * h * k2b)
    k4a, k4b = deriv(x1 + h * k3a, x2 + h * k3b)
    x1_next = x1 + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    x2_next = x2 + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)

    if not (math.isfinite(x1_next) and math.isfinite(x2_next)):
        raise NumericallySingular("observer state diverged (non-finite)")
    return DiscObserverState(x1_next, x2_next, e1_start, s_start)
