"""Sensor-attack generators.

Two families:

* time-indexed signals (none / constant / sinusoid) that simply add to the
  measurement, and
* stealthy constructions that cancel the true measurement and replace the
  residual with a sequence of the attacker's choosing, shaped by a square
  root of the residual covariance.

Every generator supports two equivalent evaluation routes: a per-step call
``delta(ctx)`` against an AttackContext, and a vectorized ``plan(...)`` used
by the fast simulation engine.  Both draw from the same dedicated attack
random stream, so they produce identical sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import _check_filter_grid
from .errors import (
    DimensionMismatch,
    DomainError,
    MissingAttackerKnowledge,
    NonPSD,
)

__all__ = [
    "sqrt_psd",
    "AttackContext",
    "AttackPlan",
    "stealthy_base",
    "NoAttack",
    "ConstantAttack",
    "SinusoidAttack",
    "ZeroAlarmAttack",
    "HiddenAttack",
    "FilteredZeroAlarmAttack",
    "FilteredHiddenAttack",
    "attack_from_config",
]

_SQRT2 = math.sqrt(2.0)

# strict-threshold safety margin: boundary-magnitude attacks are shaved by
# this relative amount so z stays below alpha under floating-point rounding
_BOUNDARY_SHAVE = 1.0 - 1e-9


def sqrt_psd(sigma):
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues within -1e-12 * scale of zero are clamped to zero; anything
    more negative raises NonPSD.
    """
    s = np.atleast_2d(np.asarray(sigma, dtype=float))
    if s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {s.shape}")
    scale = np.linalg.norm(s, "fro")
    if np.linalg.norm(s - s.T, "fro") > 1e-12 * max(1.0, scale):
        raise NonPSD("matrix is not symmetric")
    sym = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(sym)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    if np.any(w < -tol):
        raise NonPSD(f"matrix has negative eigenvalue {float(np.min(w)):.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


@dataclass(frozen=True)
class AttackContext:
    """Everything a generator may legitimately see at one step.

    y is the pre-attack measurement, y_hat the estimator's predicted output.
    sigma_r_sqrt / alpha are None when the running detector does not supply
    them; stealthy generators raise MissingAttackerKnowledge in that case.
    rng is the dedicated attack stream.
    """

    k: int
    t: float
    y: np.ndarray
    xhat: np.ndarray
    y_hat: np.ndarray
    tau: float
    sigma_r_sqrt: np.ndarray | None
    alpha: float | None
    rng: np.random.Generator

    @property
    def y_pre(self):
        return self.y


@dataclass(frozen=True)
class AttackPlan:
    """Vectorized form of an attack over a fixed horizon.

    mode "none": no attack, values is empty.
    mode "open_loop": values[k] is delta_k directly.
    mode "residual_shaping": values[k] is w_k and the injected attack is
    delta_k = -y_k + y_hat_k + w_k, which forces r_k = w_k.
    """

    mode: str
    values: np.ndarray


def stealthy_base(ctx, sqrt_matrix, delta_bar):
    """Residual-shaping attack: cancel the measurement, inject a chosen
    residual.  Returns delta = -y + y_hat + sqrt_matrix @ delta_bar."""
    w = np.asarray(sqrt_matrix, dtype=float) @ np.asarray(delta_bar, dtype=float)
    return -ctx.y + ctx.y_hat + w


def _unit_direction(direction, p):
    if direction is None:
        return np.ones(p) / math.sqrt(p)
    d = np.asarray(direction, dtype=float).reshape(-1)
    if d.size != p:
        raise DimensionMismatch(
            f"direction has {d.size} entries, expected {p}"
        )
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise DomainError("direction must be nonzero")
    return d / norm


def _broadcast_level(level, p):
    arr = np.asarray(level, dtype=float).reshape(-1)
    if arr.size == 1:
        return np.full(p, arr[0])
    if arr.size != p:
        raise DimensionMismatch(f"level has {arr.size} entries, expected {p}")
    return arr


class NoAttack:
    """delta = 0; the nominal run."""

    label = "none"

    def delta(self, ctx):
        return np.zeros(ctx.y.size)

    def plan(self, steps, p, tau, sigma_r_sqrt, alpha, rng):
        return AttackPlan("none", np.zeros((0, p)))

    def describe(self):
        return "none"


@dataclass(frozen=True)
class ConstantAttack:
    """Constant additive offset from start_time onward."""

    level: float = 1.0
    start_time: float = 0.0

    label = "constant"

    def delta(self, ctx):
        p = ctx.y.size
        if ctx.t >= self.start_time:
            return _broadcast_level(self.level, p).copy()
        return np.zeros(p)

    def plan(self, steps, p, tau, sigma_r_sqrt, alpha, rng):
        t = np.arange(steps) * tau
        lv = _broadcast_level(self.level, p)
        values = np.where((t >= self.start_time)[:, None], lv[None, :], 0.0)
        return AttackPlan("open_loop", values)

    def describe(self):
        return f"constant(level={self.level}, start_time={self.start_time})"


@dataclass(frozen=True)
class SinusoidAttack:
    """amplitude * sin(frequency * t) from start_time onward (absolute
    time inside the sine, so onset generally jumps)."""

    amplitude: float = 1.0
    frequency: float = 1.0
    start_time: float = 0.0

    label = "sinusoid"

    def delta(self, ctx):
        p = ctx.y.size
        if ctx.t >= self.start_time:
            amp = _broadcast_level(self.amplitude, p)
            return amp * float(np.sin(self.frequency * ctx.t))
        return np.zeros(p)

    def plan(self, steps, p, tau, sigma_r_sqrt, alpha, rng):
        t = np.arange(steps) * tau
        amp = _broadcast_level(self.amplitude, p)
        wave = np.sin(self.frequency * t)
        values = np.where(
            (t >= self.start_time)[:, None], amp[None, :] * wave[:, None], 0.0
        )
        return AttackPlan("open_loop", values)

    def describe(self):
        return (
            f"sinusoid(amplitude={self.amplitude}, frequency={self.frequency}, "
            f"start_time={self.start_time})"
        )


class _StealthyAttack:
    """Shared plumbing for residual-shaping generators."""

    #: when not None, residuals are shaped against the filtered covariance
    omega_c = None

    def _require_knowledge(self, sigma_r_sqrt, need_alpha, alpha):
        if sigma_r_sqrt is None:
            raise MissingAttackerKnowledge(
                f"{self.label} attack needs the residual covariance square root"
            )
        if need_alpha and alpha is None:
            raise MissingAttackerKnowledge(
                f"{self.label} attack needs the detector threshold"
            )

    def _target_sqrt(self, sigma_r_sqrt, tau):
        """Square root the shaped residual is scaled by."""
        if self.omega_c is None:
            return sigma_r_sqrt
        _check_filter_grid(tau, self.omega_c)
        return math.sqrt(tau * self.omega_c / (2.0 * _SQRT2)) * sigma_r_sqrt

    def delta(self, ctx):
        self._require_knowledge(ctx.sigma_r_sqrt, self.needs_alpha, ctx.alpha)
        s = self._target_sqrt(ctx.sigma_r_sqrt, ctx.tau)
        db = self._delta_bar_step(ctx.y.size, ctx.k, ctx.alpha, ctx.rng)
        return stealthy_base(ctx, s, db)

    def plan(self, steps, p, tau, sigma_r_sqrt, alpha, rng):
        self._require_knowledge(sigma_r_sqrt, self.needs_alpha, alpha)
        s = self._target_sqrt(sigma_r_sqrt, tau)
        db = self._delta_bar_plan(steps, p, alpha, rng)
        return AttackPlan("residual_shaping", db @ s.T)


@dataclass(frozen=True)
class ZeroAlarmAttack(_StealthyAttack):
    """Constant shaped residual of magnitude fraction * sqrt(alpha).

    fraction = 1 rides the alarm boundary (shaved by a relative 1e-9 so the
    strict threshold never trips on rounding); fraction = 0 cancels the
    residual entirely.
    """

    fraction: float = 1.0
    direction: tuple | None = None

    label = "zero_alarm"
    needs_alpha = True

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise DomainError(
                f"fraction must lie in [0, 1], got {self.fraction}"
            )

    def _magnitude(self, alpha):
        return self.fraction * math.sqrt(alpha) * _BOUNDARY_SHAVE

    def _delta_bar_step(self, p, k, alpha, rng):
        return self._magnitude(alpha) * _unit_direction(self.direction, p)

    def _delta_bar_plan(self, steps, p, alpha, rng):
        row = self._magnitude(alpha) * _unit_direction(self.direction, p)
        return np.broadcast_to(row, (steps, p)).copy()

    def describe(self):
        return f"zero_alarm(fraction={self.fraction})"


@dataclass(frozen=True)
class HiddenAttack(_StealthyAttack):
    """Shaped residual whose distance statistic reproduces the nominal law.

    magnitude_law "chi_squared" (default) draws the squared magnitude from a
    chi-squared with p degrees of freedom, making the measured distance match
    the nominal distribution exactly, so the alarm rate equals the detector's
    design rate.  magnitude_law "two_point" instead stays at zero and jumps
    to jump_scale * sqrt(alpha) with probability `rate`, hitting the design
    alarm rate with arbitrarily large excursions.
    """

    rate: float = 0.05
    direction: tuple | None = None
    magnitude_law: str = "chi_squared"
    jump_scale: float = 2.0

    label = "hidden"

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise DomainError(f"rate must lie in (0, 1], got {self.rate}")
        if self.magnitude_law not in ("chi_squared", "two_point"):
            raise DomainError(f"unknown magnitude_law {self.magnitude_law!r}")
        if self.jump_scale <= 1.0:
            raise DomainError(
                f"jump_scale must exceed 1 to cross the threshold, got "
                f"{self.jump_scale}"
            )

    @property
    def needs_alpha(self):
        return self.magnitude_law == "two_point"

    def _delta_bar_step(self, p, k, alpha, rng):
        d = _unit_direction(self.direction, p)
        if self.magnitude_law == "chi_squared":
            g = rng.standard_normal(p)
            return math.sqrt(float(g @ g)) * d
        if rng.random() < self.rate:
            return self.jump_scale * math.sqrt(alpha) * d
        return np.zeros(p)

    def _delta_bar_plan(self, steps, p, alpha, rng):
        d = _unit_direction(self.direction, p)
        if self.magnitude_law == "chi_squared":
            g = rng.standard_normal((steps, p))
            mags = np.sqrt(np.sum(g * g, axis=1))
        else:
            jumps = rng.random(steps) < self.rate
            mags = np.where(jumps, self.jump_scale * math.sqrt(alpha), 0.0)
        return mags[:, None] * d[None, :]

    def describe(self):
        return f"hidden(rate={self.rate}, magnitude_law={self.magnitude_law})"


@dataclass(frozen=True)
class FilteredZeroAlarmAttack(_StealthyAttack):
    """Zero-alarm construction against the filtered detector.

    The shaped residual is scaled by the square root of the filtered
    covariance, so the steady filtered distance sits at (fraction^2) * alpha.
    The default fraction 0.9 leaves room for the 4.3% step-response
    overshoot of the second-order filter; fraction close to 1 would cross
    the threshold during the transient.

    high_frequency=True switches to the stop-band demonstration: the shaped
    residual alternates sign every sample at amplitude hf_scale*sqrt(alpha)
    against the *unfiltered* covariance root.  That sequence lights up the
    conventional detector on every step while the filtered detector barely
    moves.
    """

    omega_c: float = 12.0
    fraction: float = 0.9
    direction: tuple | None = None
    high_frequency: bool = False
    hf_scale: float = 10.0

    label = "filtered_zero_alarm"
    needs_alpha = True

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise DomainError(
                f"fraction must lie in [0, 1], got {self.fraction}"
            )
        if self.hf_scale <= 0.0:
            raise DomainError(f"hf_scale must be > 0, got {self.hf_scale}")

    def _target_sqrt(self, sigma_r_sqrt, tau):
        if self.high_frequency:
            # deliberately unfiltered: the point is the contrast between the
            # two detectors on the same injected sequence
            return sigma_r_sqrt
        return _StealthyAttack._target_sqrt(self, sigma_r_sqrt, tau)

    def _delta_bar_step(self, p, k, alpha, rng):
        d = _unit_direction(self.direction, p)
        if self.high_frequency:
            flip = 1.0 if k % 2 == 0 else -1.0
            return self.hf_scale * math.sqrt(alpha) * flip * d
        return self.fraction * math.sqrt(alpha) * _BOUNDARY_SHAVE * d

    def _delta_bar_plan(self, steps, p, alpha, rng):
        d = _unit_direction(self.direction, p)
        if self.high_frequency:
            flips = np.where(np.arange(steps) % 2 == 0, 1.0, -1.0)
            return (self.hf_scale * math.sqrt(alpha)) * flips[:, None] * d[None, :]
        row = self.fraction * math.sqrt(alpha) * _BOUNDARY_SHAVE * d
        return np.broadcast_to(row, (steps, p)).copy()

    def describe(self):
        mode = "high_frequency" if self.high_frequency else "constant"
        return (
            f"filtered_zero_alarm(omega_c={self.omega_c}, "
            f"fraction={self.fraction}, mode={mode})"
        )


@dataclass(frozen=True)
class FilteredHiddenAttack(HiddenAttack):
    """Hidden construction scaled by the filtered covariance root."""

    omega_c: float = 12.0

    label = "filtered_hidden"

    def describe(self):
        return (
            f"filtered_hidden(rate={self.rate}, omega_c={self.omega_c}, "
            f"magnitude_law={self.magnitude_law})"
        )


_ATTACK_LABELS = {
    "none": NoAttack,
    "constant": ConstantAttack,
    "sinusoid": SinusoidAttack,
    "zero_alarm": ZeroAlarmAttack,
    "hidden": HiddenAttack,
    "filtered_zero_alarm": FilteredZeroAlarmAttack,
    "filtered_hidden": FilteredHiddenAttack,
}


def attack_from_config(label, params):
    """Build a generator from a label and keyword parameters (scenario use)."""
    if label not in _ATTACK_LABELS:
        raise DomainError(f"unknown attack type {label!r}")
    cls = _ATTACK_LABELS[label]
    if label == "none":
        if params:
            raise DomainError("attack 'none' takes no parameters")
        return cls()
    if "direction" in params and params["direction"] is not None:
        params = dict(params)
        params["direction"] = tuple(params["direction"])
    return cls(**params)
