"""Residual-based detectors and their tuning math.

Three detectors live here:

* ChiSquaredDetector: quadratic form of the raw residual against a strict
  threshold.
* FilteredChiSquaredDetector: same test applied to a low-pass filtered
  residual, with the quadratic form rescaled so the nominal false-alarm
  tuning carries over.
* YfDetector: magnitude test on the low-pass filtered switching term of the
  discontinuous observer (the "yf" trace channel).

The incomplete-gamma pair at the top is what threshold tuning rests on; it is
implemented locally so the tuning path has no dependency beyond the stdlib.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NonPositiveStep,
    SingularResidualCovariance,
    TraceTooShort,
    ZeroPlantParameter,
)

__all__ = [
    "reg_lower_gamma",
    "inv_reg_lower_gamma",
    "tune_threshold",
    "chi2_distance",
    "threshold_test",
    "butterworth_matrices",
    "ButterworthBank",
    "filter_step",
    "filtered_covariance_closed_form",
    "filtered_covariance_exact",
    "filtered_distance",
    "invert_residual_covariance",
    "ChiSquaredDetector",
    "FilteredChiSquaredDetector",
    "YfDetector",
    "calibrate_af",
    "yf_detect",
    "predict_yf",
    "reconstruct_attack",
]

_SQRT2 = math.sqrt(2.0)

# iteration controls for the incomplete-gamma evaluations
_GAMMA_EPS = 1.0e-16
_GAMMA_ITMAX = 500
_FPMIN = 1.0e-300


def reg_lower_gamma(s, x):
    """Regularized lower incomplete gamma P(s, x).

    Series representation for x < s + 1, continued fraction otherwise; both
    scaled by exp(-x + s*ln(x) - lgamma(s)).  Absolute error is well below
    1e-12 over the (s, x) range the detectors use.
    """
    s = float(s)
    x = float(x)
    if s <= 0.0:
        raise DomainError(f"s must be > 0, got {s}")
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x}")
    if x == 0.0:
        return 0.0

    if x < s + 1.0:
        # series: P = x^s e^-x / Gamma(s) * sum_n x^n / (s (s+1) ... (s+n))
        ap = s
        term = 1.0 / s
        total = term
        for _ in range(_GAMMA_ITMAX):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _GAMMA_EPS:
                break
        return total * math.exp(-x + s * math.log(x) - math.lgamma(s))

    # modified Lentz continued fraction for Q(s, x), then P = 1 - Q
    b = x + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_ITMAX + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    q = math.exp(-x + s * math.log(x) - math.lgamma(s)) * h
    return 1.0 - q


def inv_reg_lower_gamma(y, s):
    """Inverse of reg_lower_gamma in x: find x with P(s, x) = y.

    Bracketing bisection to localize the root, then Newton with the bracket
    as a safeguard.  The returned x satisfies |P(s, x) - y| <= 1e-10.
    """
    y = float(y)
    s = float(s)
    if s <= 0.0:
        raise DomainError(f"s must be > 0, got {s}")
    if y < 0.0 or y >= 1.0:
        raise DomainError(f"y must lie in [0, 1), got {y}")
    if y == 0.0:
        return 0.0

    lo = 0.0
    hi = max(s + 1.0, 1.0)
    while reg_lower_gamma(s, hi) < y:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError(f"failed to bracket inverse for y={y}, s={s}")

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if reg_lower_gamma(s, mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break

    lgam = math.lgamma(s)
    x = 0.5 * (lo + hi)
    for _ in range(40):
        f = reg_lower_gamma(s, x) - y
        if abs(f) <= 1e-12:
            break
        # dP/dx = x^(s-1) e^-x / Gamma(s)
        dpdx = math.exp((s - 1.0) * math.log(x) - x - lgam)
        if dpdx <= 0.0:
            break
        step = f / dpdx
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if f > 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        x = x_new

    if abs(reg_lower_gamma(s, x) - y) > 1e-10:
        raise DomainError(
            f"inverse iteration did not converge for y={y}, s={s}"
        )
    return x


def tune_threshold(false_alarm_rate, p):
    """Threshold alpha such that P(z > alpha) = false_alarm_rate for
    z ~ chi-squared with p degrees of freedom.

    false_alarm_rate must lie in (0, 1]; a rate of 1 gives alpha = 0
    (alarm on any positive distance).  p is the number of sensors.
    """
    rate = float(false_alarm_rate)
    if not 0.0 < rate <= 1.0:
        raise DomainError(f"false_alarm_rate must be in (0, 1], got {rate}")
    if int(p) != p or p < 1:
        raise DomainError(f"p must be a positive integer, got {p}")
    return 2.0 * inv_reg_lower_gamma(1.0 - rate, 0.5 * int(p))


def chi2_distance(r, sigma_r_inv):
    """Quadratic distance r' Sigma_r^-1 r of a residual sample.

    sigma_r_inv may be None when the residual covariance is singular (the
    noise-free case); normalization is then skipped and the plain squared
    norm r'r is returned, which is 0 exactly when the residual is 0.
    """
    rv = np.asarray(r, dtype=float).reshape(-1)
    if sigma_r_inv is None:
        return float(rv @ rv)
    si = np.asarray(sigma_r_inv, dtype=float)
    if si.shape != (rv.size, rv.size):
        raise DimensionMismatch(
            f"sigma_r_inv shape {si.shape} does not match residual size {rv.size}"
        )
    return float(rv @ si @ rv)


def threshold_test(z, alpha):
    """Alarm decision: strictly greater than the threshold."""
    return bool(z > alpha)


def butterworth_matrices(omega_c):
    """Continuous-time second-order low-pass Butterworth in state space.

    Returns (Phi, Psi) with Phi = [[0, 1], [-w^2, -sqrt(2) w]] and
    Psi = [[0], [w^2]]; the filter output is the first state, giving unit DC
    gain and the -3 dB point at omega_c.
    """
    w = float(omega_c)
    if w <= 0.0:
        raise DomainError(f"omega_c must be > 0, got {omega_c}")
    phi = np.array([[0.0, 1.0], [-w * w, -_SQRT2 * w]])
    psi = np.array([[0.0], [w * w]])
    return phi, psi


def _check_filter_grid(tau, omega_c):
    if not float(tau) > 0.0:
        raise NonPositiveStep(f"tau must be > 0, got {tau}")
    w = float(omega_c)
    if w <= 0.0:
        raise DomainError(f"omega_c must be > 0, got {omega_c}")
    if float(tau) * w >= 0.5:
        raise DomainError(
            f"tau*omega_c = {float(tau) * w:.4g} must be < 0.5 for the "
            "forward-Euler filter to be trustworthy"
        )


class ButterworthBank:
    """Bank of p identical discrete second-order Butterworth filters.

    Discretized forward-Euler: Phi_d = I + Phi*tau, Psi_d = Psi*tau.  Each
    sensor channel gets its own 2-state filter; step() advances all of them
    and returns the vector of first states.
    """

    def __init__(self, omega_c, tau, p):
        _check_filter_grid(tau, omega_c)
        if int(p) != p or p < 1:
            raise DomainError(f"p must be a positive integer, got {p}")
        self.omega_c = float(omega_c)
        self.tau = float(tau)
        self.p = int(p)
        phi, psi = butterworth_matrices(omega_c)
        self.phi_d = np.eye(2) + phi * self.tau
        self.psi_d = (psi * self.tau).reshape(2)
        self.state = np.zeros((self.p, 2))

    def reset(self):
        self.state[:] = 0.0

    def step(self, r):
        """Advance one sample; returns the filtered vector (first states)."""
        rv = np.asarray(r, dtype=float).reshape(-1)
        if rv.size != self.p:
            raise DimensionMismatch(
                f"input size {rv.size} does not match bank width {self.p}"
            )
        self.state = self.state @ self.phi_d.T + rv[:, None] * self.psi_d
        return self.state[:, 0].copy()


def filter_step(bank, r):
    """Functional form of ButterworthBank.step."""
    return bank.step(r)


def _epsilon_closed_form(theta):
    return theta / (2.0 * _SQRT2)


def _epsilon_exact(theta):
    num = -theta * (theta * theta - _SQRT2 * theta + 2.0)
    den = theta ** 3 - 3.0 * _SQRT2 * theta * theta + 8.0 * theta - 4.0 * _SQRT2
    return num / den


def filtered_covariance_closed_form(sigma_r, tau, omega_c):
    """Small-step covariance of the filtered residual:
    Sigma_rho = (tau*omega_c / (2 sqrt 2)) * Sigma_r."""
    _check_filter_grid(tau, omega_c)
    s = np.atleast_2d(np.asarray(sigma_r, dtype=float))
    return _epsilon_closed_form(float(tau) * float(omega_c)) * s


def filtered_covariance_exact(sigma_r, tau, omega_c):
    """Exact stationary covariance of the forward-Euler filtered residual.

    The per-channel discrete Lyapunov fixed point has a closed rational
    solution in theta = tau*omega_c; its (1,1) entry scales Sigma_r by

        eps(theta) = -theta (theta^2 - sqrt2 theta + 2)
                     / (theta^3 - 3 sqrt2 theta^2 + 8 theta - 4 sqrt2)

    which tends to theta / (2 sqrt 2) as theta -> 0.
    """
    _check_filter_grid(tau, omega_c)
    s = np.atleast_2d(np.asarray(sigma_r, dtype=float))
    return _epsilon_exact(float(tau) * float(omega_c)) * s


def filtered_distance(rho, sigma_r_inv, tau, omega_c):
    """Distance measure of the filtered residual, rescaled so nominal
    statistics match the unfiltered chi-squared tuning:
    z = (2 sqrt 2 / (tau*omega_c)) * rho' Sigma_r^-1 rho."""
    _check_filter_grid(tau, omega_c)
    scale = 2.0 * _SQRT2 / (float(tau) * float(omega_c))
    return scale * chi2_distance(rho, sigma_r_inv)


def invert_residual_covariance(sigma_r):
    """Invert a residual covariance, or raise SingularResidualCovariance.

    Symmetric eigenvalue test first: the smallest eigenvalue must exceed
    1e-10 times the largest (condition-scaled tolerance).
    """
    s = np.atleast_2d(np.asarray(sigma_r, dtype=float))
    if s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"sigma_r must be square, got {s.shape}")
    sym = 0.5 * (s + s.T)
    w = np.linalg.eigvalsh(sym)
    if w[-1] <= 0.0 or w[0] <= 1e-10 * w[-1]:
        raise SingularResidualCovariance(
            f"residual covariance not invertible: eigenvalues in "
            f"[{w[0]:.3e}, {w[-1]:.3e}]"
        )
    return np.linalg.inv(sym)


@dataclass
class ChiSquaredDetector:
    """Stateless residual detector: z = r' Sigma_r^-1 r, alarm iff z > alpha.

    sigma_r_inv None means the singular-covariance guard is active and the
    unnormalized squared norm is used instead.
    """

    alpha: float
    sigma_r_inv: np.ndarray | None

    kind = "chi_squared"

    @classmethod
    def from_covariance(cls, sigma_r, alpha):
        return cls(alpha=float(alpha), sigma_r_inv=invert_residual_covariance(sigma_r))

    def step(self, r):
        z = chi2_distance(r, self.sigma_r_inv)
        return z, threshold_test(z, self.alpha)


class FilteredChiSquaredDetector:
    """Chi-squared test on the low-pass filtered residual.

    mode selects the covariance provenance for the rescaling:
    "closed_form" uses the small-step factor tau*omega_c/(2 sqrt 2) (the
    headline formula), "exact_rational" the exact stationary factor.  Both
    are exposed because the difference (about 0.9% at tau*omega_c = 0.012)
    is itself a quantity of interest.
    """

    kind = "filtered_chi_squared"

    def __init__(self, sigma_r, alpha, omega_c, tau, p, mode="closed_form"):
        if mode not in ("closed_form", "exact_rational"):
            raise DomainError(f"unknown covariance mode {mode!r}")
        self.alpha = float(alpha)
        self.omega_c = float(omega_c)
        self.tau = float(tau)
        self.mode = mode
        self.bank = ButterworthBank(omega_c, tau, p)
        if sigma_r is None:
            self.sigma_r_inv = None
        else:
            self.sigma_r_inv = invert_residual_covariance(sigma_r)
        theta = self.tau * self.omega_c
        if mode == "closed_form":
            self._coeff = 1.0 / _epsilon_closed_form(theta)
        else:
            self._coeff = 1.0 / _epsilon_exact(theta)

    def reset(self):
        self.bank.reset()

    def step(self, r):
        rho = self.bank.step(r)
        if self.sigma_r_inv is None:
            z = chi2_distance(rho, None)
        else:
            z = self._coeff * chi2_distance(rho, self.sigma_r_inv)
        return rho, z, threshold_test(z, self.alpha)


class YfDetector:
    """Threshold detector on the filtered switching term of the
    discontinuous observer.

    Feed it the raw switching samples; it low-pass filters them (one
    Butterworth channel) and alarms when the magnitude of the filtered
    signal exceeds alpha_f.  alpha_f = inf turns the detector into a pure
    recorder, which is what threshold calibration uses.
    """

    kind = "yf_threshold"

    def __init__(self, alpha_f, omega_c, tau):
        self.alpha_f = float(alpha_f)
        self.omega_c = float(omega_c)
        self.tau = float(tau)
        self.bank = ButterworthBank(omega_c, tau, 1)

    def reset(self):
        self.bank.reset()

    def step(self, s):
        yf = float(self.bank.step([float(s)])[0])
        return yf, yf_detect(yf, self.alpha_f)


def yf_detect(yf, alpha_f):
    """Alarm decision on the filtered switching signal: |yf| > alpha_f."""
    return bool(abs(yf) > alpha_f)


@dataclass(frozen=True)
class ChiSquaredConfig:
    """Request for a conventional chi-squared detector.

    Give either the design false-alarm rate (threshold is tuned from the
    sensor count at run time) or an explicit alpha, not both.
    """

    false_alarm_rate: float | None = None
    alpha: float | None = None

    label = "chi_squared"

    def __post_init__(self):
        if (self.false_alarm_rate is None) == (self.alpha is None):
            raise DomainError(
                "give exactly one of false_alarm_rate or alpha"
            )

    def resolve_alpha(self, p):
        if self.alpha is not None:
            return float(self.alpha)
        return tune_threshold(self.false_alarm_rate, p)


@dataclass(frozen=True)
class FilteredChiSquaredConfig:
    """Request for the filtered chi-squared detector."""

    omega_c: float = 12.0
    false_alarm_rate: float | None = None
    alpha: float | None = None
    mode: str = "closed_form"

    label = "filtered_chi_squared"

    def __post_init__(self):
        if (self.false_alarm_rate is None) == (self.alpha is None):
            raise DomainError(
                "give exactly one of false_alarm_rate or alpha"
            )
        if self.mode not in ("closed_form", "exact_rational"):
            raise DomainError(f"unknown covariance mode {self.mode!r}")

    def resolve_alpha(self, p):
        if self.alpha is not None:
            return float(self.alpha)
        return tune_threshold(self.false_alarm_rate, p)


@dataclass(frozen=True)
class YfThresholdConfig:
    """Request for the switching-signal detector.

    alpha_f None means "record only" (used while calibrating the threshold).
    c1, c2, c3 parameterize the discontinuous observer driving the filter.
    """

    alpha_f: float | None = None
    omega_c: float = 12.0
    c1: float = 5.0
    c2: float = 5.0
    c3: float = 12.0

    label = "yf_threshold"


def build_detector(config, sigma_r, tau, p):
    """Instantiate the runtime detector for a config.

    sigma_r may be None (singular-covariance guard) for the chi-squared
    family; the yf detector never uses it.
    """
    if isinstance(config, ChiSquaredConfig):
        alpha = config.resolve_alpha(p)
        if sigma_r is None:
            return ChiSquaredDetector(alpha=alpha, sigma_r_inv=None)
        return ChiSquaredDetector.from_covariance(sigma_r, alpha)
    if isinstance(config, FilteredChiSquaredConfig):
        alpha = config.resolve_alpha(p)
        return FilteredChiSquaredDetector(
            sigma_r, alpha, config.omega_c, tau, p, mode=config.mode
        )
    if isinstance(config, YfThresholdConfig):
        af = math.inf if config.alpha_f is None else config.alpha_f
        return YfDetector(af, config.omega_c, tau)
    raise DomainError(f"unknown detector config {type(config).__name__}")


def calibrate_af(trace, settle_time=5.0, *, tau=None):
    """Calibrate alpha_f as the largest |yf| after the settle window.

    Accepts a simulation trace carrying a yf channel and its tau, or a bare
    sequence of yf samples together with tau=.  Raises TraceTooShort when
    nothing remains after the settle window.
    """
    if tau is None:
        values = np.asarray(trace.yf, dtype=float)
        tau = float(trace.tau)
    else:
        values = np.asarray(trace, dtype=float)
        tau = float(tau)
    if not tau > 0.0:
        raise NonPositiveStep(f"tau must be > 0, got {tau}")
    settle = float(settle_time)
    if settle < 0.0:
        raise DomainError(f"settle_time must be >= 0, got {settle}")
    start = int(math.floor(settle / tau)) + 1
    if start >= values.size:
        raise TraceTooShort(
            f"trace covers {values.size * tau:.6g} s, need more than the "
            f"{settle:.6g} s settle window"
        )
    return float(np.max(np.abs(values[start:])))


def predict_yf(delta, delta_dot, delta_ddot, a, b):
    """Predicted filtered switching signal while the observer slides:
    second derivative of the attack plus a*attack plus b*attack-rate."""
    return delta_ddot + a * delta + b * delta_dot


def reconstruct_attack(yf_steady, a):
    """Recover a constant sensor offset from the steady filtered switching
    signal: delta0 = yf_steady / a.  Requires a nonzero position coefficient."""
    if a == 0.0:
        raise ZeroPlantParameter("plant coefficient a must be nonzero")
    return float(yf_steady) / float(a)
