"""Closed-loop model, discretization, and the simulation engine.

The loop under study is a linear plant with observer-based state feedback:

    x' = A x + B u,    y = C x + noise,    u = K xhat,

with a Luenberger observer xhat' = A xhat + B u + L (ybar - C xhat) driven by
the possibly attacked measurement ybar = y + delta.  Everything is advanced
with the forward-Euler map at step tau, which is also where the discrete
covariance conventions below come from.

run_simulation has two engines that implement the same recursion: a plain
Python reference (readable, per-step attack/detector calls) and a numba
kernel used for long horizons.  They draw from the same random streams and
agree to rounding; tests pin that down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import detection
from .attacks import AttackContext, sqrt_psd
from .detection import (
    ChiSquaredConfig,
    FilteredChiSquaredConfig,
    YfThresholdConfig,
    build_detector,
)
from .errors import (
    DimensionMismatch,
    HorizonZero,
    NonPositiveStep,
    NonPSD,
    NonPSDNoise,
    SingularResidualCovariance,
    UnstableClosedLoop,
)
from .estimation import (
    DiscObserverGains,
    DiscObserverState,
    disc_observer_step,
    solve_lyapunov_continuous,
)

__all__ = [
    "PlantModel",
    "validate_model",
    "DiscreteClosedLoop",
    "discretize",
    "sample_noise",
    "SimulationTrace",
    "RunStats",
    "run_simulation",
]


def _coerce_matrix(value, shape, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if arr.size == shape[0] * shape[1]:
            arr = arr.reshape(shape)
        else:
            raise DimensionMismatch(
                f"{name} has {arr.size} entries, expected shape {shape}"
            )
    if arr.shape != shape:
        raise DimensionMismatch(
            f"{name} has shape {arr.shape}, expected {shape}"
        )
    out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PlantModel:
    """Plant, controller, observer, and measurement-noise covariance.

    Shapes: A (n,n), B (n,m), C (p,n), K (m,n), L (n,p), noise (p,p).
    1-D inputs are reshaped when unambiguous; the noise covariance also
    accepts a scalar (p = 1) or a length-p vector (diagonal).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    k: np.ndarray
    l: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        a = _coerce_matrix(a, (n, n), "A")

        b_raw = np.asarray(self.b, dtype=float)
        if b_raw.ndim <= 1:
            if b_raw.size % n != 0 or b_raw.size == 0:
                raise DimensionMismatch(
                    f"B has {b_raw.size} entries, not a multiple of n={n}"
                )
            m = b_raw.size // n
            b = _coerce_matrix(b_raw, (n, m), "B")
        else:
            if b_raw.shape[0] != n:
                raise DimensionMismatch(
                    f"B has {b_raw.shape[0]} rows, expected n={n}"
                )
            m = b_raw.shape[1]
            b = _coerce_matrix(b_raw, (n, m), "B")

        c_raw = np.asarray(self.c, dtype=float)
        if c_raw.ndim <= 1:
            if c_raw.size % n != 0 or c_raw.size == 0:
                raise DimensionMismatch(
                    f"C has {c_raw.size} entries, not a multiple of n={n}"
                )
            p = c_raw.size // n
            c = _coerce_matrix(c_raw, (p, n), "C")
        else:
            if c_raw.shape[1] != n:
                raise DimensionMismatch(
                    f"C has {c_raw.shape[1]} columns, expected n={n}"
                )
            p = c_raw.shape[0]
            c = _coerce_matrix(c_raw, (p, n), "C")

        k = _coerce_matrix(self.k, (m, n), "K")
        l = _coerce_matrix(self.l, (n, p), "L")

        noise_raw = np.asarray(self.noise, dtype=float)
        if noise_raw.ndim == 1 and noise_raw.size == p and p > 1:
            noise = _coerce_matrix(np.diag(noise_raw), (p, p), "noise")
        else:
            noise = _coerce_matrix(noise_raw, (p, p), "noise")

        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "noise", noise)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]


def _check_noise_cov(noise):
    scale = np.linalg.norm(noise, "fro")
    if np.linalg.norm(noise - noise.T, "fro") > 1e-12 * max(1.0, scale):
        raise NonPSDNoise("noise covariance is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (noise + noise.T))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    if np.any(w < -tol):
        raise NonPSDNoise(
            f"noise covariance has negative eigenvalue {float(np.min(w)):.3e}"
        )


def validate_model(model):
    """Full model validation; returns the model on success.

    Checks: dimensional consistency (already enforced on construction),
    noise covariance symmetric PSD, and both closed-loop matrices stable:
    every eigenvalue of A+BK and A-LC must have strictly negative real part.
    """
    _check_noise_cov(model.noise)
    ctrl = model.a + model.b @ model.k
    re_ctrl = float(np.max(np.linalg.eigvals(ctrl).real))
    if re_ctrl >= 0.0:
        raise UnstableClosedLoop(
            f"A+BK has eigenvalue real part {re_ctrl:.6g} >= 0"
        )
    obs = model.a - model.l @ model.c
    re_obs = float(np.max(np.linalg.eigvals(obs).real))
    if re_obs >= 0.0:
        raise UnstableClosedLoop(
            f"A-LC has eigenvalue real part {re_obs:.6g} >= 0"
        )
    return model


@dataclass(frozen=True)
class DiscreteClosedLoop:
    """Forward-Euler discretization plus the covariance conventions.

    f = I + (A+BK) tau        state map under estimated-state feedback
    g = -BK tau               coupling from estimation error to state
    h = I + (A-LC) tau        estimation-error map
    l_d = L tau               discrete injection gain
    sigma_e = tau * P where P solves the continuous Lyapunov equation
    (A-LC) P + P (A-LC)' + L R L' = 0 with R = noise / tau.
    sigma_r = C sigma_e C' + noise.
    sigma_r_inv is None when sigma_r is singular to tolerance.
    """

    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    l_d: np.ndarray
    tau: float
    sigma_eta: np.ndarray
    sigma_e: np.ndarray
    sigma_r: np.ndarray
    sigma_r_inv: np.ndarray | None


def discretize(model, tau, check_invertible=True):
    """Discretize the validated closed loop at step tau.

    With check_invertible (the default) a singular residual covariance
    raises SingularResidualCovariance; pass False to get the loop anyway
    with sigma_r_inv = None, which downstream detectors treat as "skip
    normalization" (the noise-free oracle runs rely on this).
    """
    if not float(tau) > 0.0:
        raise NonPositiveStep(f"tau must be > 0, got {tau}")
    tau = float(tau)
    n = model.n
    a, b, c, k, l = model.a, model.b, model.c, model.k, model.l
    bk = b @ k
    eye = np.eye(n)

    f = eye + (a + bk) * tau
    g = -bk * tau
    h = eye + (a - l @ c) * tau
    l_d = l * tau

    r_cont = model.noise / tau
    p_err = solve_lyapunov_continuous(a - l @ c, l @ r_cont @ l.T)
    sigma_e = tau * p_err
    sigma_r = c @ sigma_e @ c.T + model.noise
    sigma_r = 0.5 * (sigma_r + sigma_r.T)

    try:
        sigma_r_inv = detection.invert_residual_covariance(sigma_r)
    except SingularResidualCovariance:
        if check_invertible:
            raise
        sigma_r_inv = None

    return DiscreteClosedLoop(
        f=f, g=g, h=h, l_d=l_d, tau=tau,
        sigma_eta=model.noise.copy(), sigma_e=sigma_e, sigma_r=sigma_r,
        sigma_r_inv=sigma_r_inv,
    )


def _noise_sqrt(sigma):
    try:
        return sqrt_psd(sigma)
    except NonPSD as exc:
        raise NonPSDNoise(str(exc)) from exc


def sample_noise(sigma, rng):
    """One noise draw: symmetric PSD square root times standard normals."""
    s = _noise_sqrt(sigma)
    return s @ rng.standard_normal(s.shape[0])


@dataclass
class SimulationTrace:
    """Complete per-step record of one run.

    rho is None unless the filtered detector ran; yf is None unless the
    switching-signal detector ran.  For switching-signal runs z holds |yf|
    so alarm == threshold_test(z, alpha_f) uniformly across detectors.
    """

    tau: float
    seed: int | None
    detector: str
    attack: str
    k: np.ndarray
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    ybar: np.ndarray
    r: np.ndarray
    rho: np.ndarray | None
    yf: np.ndarray | None
    z: np.ndarray
    alarm: np.ndarray

    @property
    def steps(self):
        return self.z.size

    @property
    def duration(self):
        return self.steps * self.tau

    def alarm_rate(self, discard=0):
        if discard >= self.steps:
            raise HorizonZero(
                f"transient discard {discard} leaves no steps out of {self.steps}"
            )
        return float(np.mean(self.alarm[discard:]))


@dataclass(frozen=True)
class RunStats:
    """Streaming summary of one run (no per-step storage).

    r_cov is the post-discard residual covariance (mean removed); rho_cov
    is the raw second moment of the filtered residual, None for the plain
    detector.
    """

    steps: int
    discard: int
    counted: int
    alarms: int
    z_mean: float
    z_var: float
    z_max: float
    r_mean: np.ndarray
    r_cov: np.ndarray
    rho_cov: np.ndarray | None

    @property
    def alarm_rate(self):
        return self.alarms / self.counted


def _derive_streams(rng):
    """Split one seed-like input into independent noise/attack streams."""
    if isinstance(rng, np.random.Generator):
        noise_rng, attack_rng = rng.spawn(2)
        return noise_rng, attack_rng, None
    if isinstance(rng, np.random.SeedSequence):
        children = rng.spawn(2)
        return (
            np.random.default_rng(children[0]),
            np.random.default_rng(children[1]),
            None,
        )
    seed = int(rng)
    children = np.random.SeedSequence(seed).spawn(2)
    return (
        np.random.default_rng(children[0]),
        np.random.default_rng(children[1]),
        seed,
    )


def _numba_available():
    try:
        from . import _kernels  # noqa: F401
    except Exception:
        return False
    return True


def run_simulation(
    model,
    tau,
    horizon,
    attack,
    detector,
    rng,
    *,
    x0=None,
    xhat0=None,
    engine="auto",
    record=True,
    transient_discard=0,
):
    """Simulate the attacked closed loop for `horizon` steps.

    Parameters
    ----------
    model : PlantModel
        Validated on entry.
    tau : float
        Step size, > 0.
    horizon : int
        Number of steps, >= 1.
    attack : attack generator
        Any object from the attacks module.
    detector : detector config
        ChiSquaredConfig, FilteredChiSquaredConfig, or YfThresholdConfig.
        The switching-signal config routes to the discontinuous-observer
        path (RK4 plant/observer integration, Python engine only).
    rng : int | numpy Generator | SeedSequence
        Master randomness; noise and attack draws come from two independent
        child streams, so replay is exact for either engine.
    x0, xhat0 : optional initial states (default zero).
    engine : "auto" | "python" | "numba"
        Engines implement the identical recursion; "auto" prefers numba.
    record : bool
        True returns a SimulationTrace; False streams and returns RunStats
        (use this for very long horizons).
    transient_discard : int
        Steps excluded from RunStats accumulators (record=True keeps
        everything; slice the trace instead).
    """
    validate_model(model)
    horizon = int(horizon)
    if horizon < 1:
        raise HorizonZero(f"horizon must be >= 1, got {horizon}")
    transient_discard = int(transient_discard)
    if transient_discard < 0 or transient_discard >= horizon:
        raise HorizonZero(
            f"transient discard {transient_discard} leaves no steps "
            f"out of {horizon}"
        )
    n, p = model.n, model.p

    x_init = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    xh_init = np.zeros(n) if xhat0 is None else np.asarray(xhat0, dtype=float).reshape(-1)
    if x_init.size != n or xh_init.size != n:
        raise DimensionMismatch(
            f"initial states must have {n} entries, got {x_init.size} and "
            f"{xh_init.size}"
        )

    noise_rng, attack_rng, seed = _derive_streams(rng)

    if isinstance(detector, YfThresholdConfig):
        return _run_switching_path(
            model, tau, horizon, attack, detector, noise_rng, attack_rng,
            seed, x_init, xh_init, record, transient_discard,
        )
    if not isinstance(detector, (ChiSquaredConfig, FilteredChiSquaredConfig)):
        raise DimensionMismatch(
            f"unknown detector config {type(detector).__name__}"
        )

    dcl = discretize(model, tau, check_invertible=False)
    sigma_r = dcl.sigma_r if dcl.sigma_r_inv is not None else None
    det = build_detector(detector, sigma_r, dcl.tau, p)
    alpha = det.alpha
    s_eta = _noise_sqrt(model.noise)
    s_r = sqrt_psd(dcl.sigma_r)

    eta = noise_rng.standard_normal((horizon, p)) @ s_eta.T

    if engine == "auto":
        engine = "numba" if _numba_available() else "python"
    if engine not in ("python", "numba"):
        raise DimensionMismatch(f"unknown engine {engine!r}")

    if engine == "numba":
        plan = attack.plan(horizon, p, dcl.tau, s_r, alpha, attack_rng)
        out = _run_kernel(
            model, dcl, det, detector, plan, eta, x_init, xh_init,
            record, transient_discard,
        )
    else:
        out = _run_python(
            model, dcl, det, detector, attack, eta, attack_rng, s_r,
            x_init, xh_init, record, transient_discard,
        )

    if record:
        x_arr, xh_arr, y_arr, d_arr, yb_arr, r_arr, rho_arr, z_arr, al_arr = out
        return SimulationTrace(
            tau=dcl.tau,
            seed=seed,
            detector=det.kind,
            attack=attack.describe(),
            k=np.arange(horizon, dtype=np.int64),
            t=np.arange(horizon) * dcl.tau,
            x=x_arr, xhat=xh_arr, y=y_arr, delta=d_arr, ybar=yb_arr,
            r=r_arr, rho=rho_arr, yf=None, z=z_arr,
            alarm=al_arr.astype(bool),
        )
    return out


def _detector_params(det, detector_cfg, p):
    """Flatten the runtime detector into kernel-friendly scalars/arrays."""
    if isinstance(detector_cfg, ChiSquaredConfig):
        kind = 0
        coeff = 1.0
        sigma_inv = det.sigma_r_inv
        phi_d = np.zeros((2, 2))
        psi_d = np.zeros(2)
    else:
        kind = 1
        coeff = det._coeff
        sigma_inv = det.sigma_r_inv
        phi_d = det.bank.phi_d
        psi_d = det.bank.psi_d
    use_inv = 0 if sigma_inv is None else 1
    if sigma_inv is None:
        sigma_inv = np.zeros((p, p))
    return kind, coeff, np.ascontiguousarray(sigma_inv), use_inv, phi_d, psi_d


_PLAN_MODES = {"none": 0, "open_loop": 1, "residual_shaping": 2}


def _run_kernel(model, dcl, det, detector_cfg, plan, eta, x0, xhat0,
                record, discard):
    from . import _kernels

    n, p = model.n, model.p
    horizon = eta.shape[0]
    a = np.ascontiguousarray(model.a)
    bk = np.ascontiguousarray(model.b @ model.k)
    l = np.ascontiguousarray(model.l)
    c = np.ascontiguousarray(model.c)
    kind, coeff, sigma_inv, use_inv, phi_d, psi_d = _detector_params(
        det, detector_cfg, p
    )
    mode = _PLAN_MODES[plan.mode]
    vals = np.ascontiguousarray(plan.values)
    if vals.shape[0] == 0:
        vals = np.zeros((1, p))
    eta = np.ascontiguousarray(eta)
    alpha = det.alpha

    if record:
        x_arr = np.empty((horizon, n))
        xh_arr = np.empty((horizon, n))
        y_arr = np.empty((horizon, p))
        d_arr = np.empty((horizon, p))
        yb_arr = np.empty((horizon, p))
        r_arr = np.empty((horizon, p))
        rho_arr = np.empty((horizon, p)) if kind == 1 else np.empty((0, p))
        z_arr = np.empty(horizon)
        al_arr = np.zeros(horizon, dtype=np.uint8)
        _kernels.loop_record(
            a, bk, l, c, float(dcl.tau), eta, mode, vals,
            kind, sigma_inv, use_inv, coeff, float(alpha),
            np.ascontiguousarray(phi_d), np.ascontiguousarray(psi_d),
            x0.copy(), xhat0.copy(),
            x_arr, xh_arr, y_arr, d_arr, yb_arr, r_arr, rho_arr,
            z_arr, al_arr,
        )
        rho_out = rho_arr if kind == 1 else None
        return (x_arr, xh_arr, y_arr, d_arr, yb_arr, r_arr, rho_out,
                z_arr, al_arr)

    res = _kernels.loop_stats(
        a, bk, l, c, float(dcl.tau), eta, mode, vals,
        kind, sigma_inv, use_inv, coeff, float(alpha),
        np.ascontiguousarray(phi_d), np.ascontiguousarray(psi_d),
        x0.copy(), xhat0.copy(), int(discard),
    )
    (alarms, z_sum, z_sumsq, z_max, r_sum, r_outer, rho_outer) = res
    counted = horizon - discard
    z_mean = z_sum / counted
    z_var = max(z_sumsq / counted - z_mean * z_mean, 0.0)
    r_mean = r_sum / counted
    r_cov = r_outer / counted - np.outer(r_mean, r_mean)
    rho_cov = rho_outer / counted if kind == 1 else None
    return RunStats(
        steps=horizon, discard=discard, counted=counted, alarms=int(alarms),
        z_mean=float(z_mean), z_var=float(z_var), z_max=float(z_max),
        r_mean=r_mean, r_cov=r_cov, rho_cov=rho_cov,
    )


def _run_python(model, dcl, det, detector_cfg, attack, eta, attack_rng,
                s_r, x0, xhat0, record, discard):
    """Reference engine: per-step attack and detector calls."""
    n, p = model.n, model.p
    horizon = eta.shape[0]
    a, c = model.a, model.c
    bk = model.b @ model.k
    l = model.l
    tau = dcl.tau
    filtered = isinstance(detector_cfg, FilteredChiSquaredConfig)
    alpha = det.alpha

    if record:
        x_arr = np.empty((horizon, n))
        xh_arr = np.empty((horizon, n))
        y_arr = np.empty((horizon, p))
        d_arr = np.empty((horizon, p))
        yb_arr = np.empty((horizon, p))
        r_arr = np.empty((horizon, p))
        rho_arr = np.empty((horizon, p)) if filtered else None
        z_arr = np.empty(horizon)
        al_arr = np.zeros(horizon, dtype=np.uint8)
    else:
        alarms = 0
        z_sum = z_sumsq = 0.0
        z_max = -math.inf
        r_sum = np.zeros(p)
        r_outer = np.zeros((p, p))
        rho_outer = np.zeros((p, p))

    x = x0.copy()
    xhat = xhat0.copy()
    for k in range(horizon):
        t = k * tau
        y = c @ x + eta[k]
        y_hat = c @ xhat
        ctx = AttackContext(
            k=k, t=t, y=y, xhat=xhat, y_hat=y_hat, tau=tau,
            sigma_r_sqrt=s_r, alpha=alpha, rng=attack_rng,
        )
        delta = attack.delta(ctx)
        ybar = y + delta
        r = ybar - y_hat
        if filtered:
            rho, z, alarm = det.step(r)
        else:
            z, alarm = det.step(r)
            rho = None
        if record:
            x_arr[k] = x
            xh_arr[k] = xhat
            y_arr[k] = y
            d_arr[k] = delta
            yb_arr[k] = ybar
            r_arr[k] = r
            if filtered:
                rho_arr[k] = rho
            z_arr[k] = z
            al_arr[k] = 1 if alarm else 0
        elif k >= discard:
            if alarm:
                alarms += 1
            z_sum += z
            z_sumsq += z * z
            if z > z_max:
                z_max = z
            r_sum += r
            r_outer += np.outer(r, r)
            if filtered:
                rho_outer += np.outer(rho, rho)
        x_next = x + tau * (a @ x + bk @ xhat)
        xhat_next = xhat + tau * (a @ xhat + bk @ xhat + l @ r)
        x = x_next
        xhat = xhat_next

    if record:
        return (x_arr, xh_arr, y_arr, d_arr, yb_arr, r_arr, rho_arr,
                z_arr, al_arr)
    counted = horizon - discard
    z_mean = z_sum / counted
    z_var = max(z_sumsq / counted - z_mean * z_mean, 0.0)
    r_mean = r_sum / counted
    r_cov = r_outer / counted - np.outer(r_mean, r_mean)
    rho_cov = rho_outer / counted if filtered else None
    return RunStats(
        steps=horizon, discard=discard, counted=counted, alarms=alarms,
        z_mean=float(z_mean), z_var=float(z_var), z_max=float(z_max),
        r_mean=r_mean, r_cov=r_cov, rho_cov=rho_cov,
    )


def _rk4_linear_step(a, x, h):
    """One RK4 step of x' = A x (any constant input already folded in)."""
    k1 = a @ x
    k2 = a @ (x + 0.5 * h * k1)
    k3 = a @ (x + 0.5 * h * k2)
    k4 = a @ (x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run_switching_path(model, tau, horizon, attack, cfg, noise_rng,
                        attack_rng, seed, x0, xhat0, record, discard):
    """Discontinuous-observer run: RK4 plant and observer, filtered
    switching term, magnitude threshold.

    The plant runs open loop (u = 0); the observer is given the same u.
    The measurement is held over each step, so the attack and noise are
    sampled once per step.
    """
    if not float(tau) > 0.0:
        raise NonPositiveStep(f"tau must be > 0, got {tau}")
    tau = float(tau)
    gains = DiscObserverGains.from_model(model, cfg.c1, cfg.c2, cfg.c3)
    alpha_f = math.inf if cfg.alpha_f is None else float(cfg.alpha_f)
    det = detection.YfDetector(alpha_f, cfg.omega_c, tau)
    s_eta = _noise_sqrt(model.noise)

    eta = (noise_rng.standard_normal((horizon, 1)) * s_eta[0, 0]).reshape(-1)
    obs = DiscObserverState.initial(xhat0[0], xhat0[1])
    x = x0.copy()
    a = model.a

    x_arr = np.empty((horizon, 2))
    xh_arr = np.empty((horizon, 2))
    y_arr = np.empty((horizon, 1))
    d_arr = np.empty((horizon, 1))
    yb_arr = np.empty((horizon, 1))
    r_arr = np.empty((horizon, 1))
    yf_arr = np.empty(horizon)
    z_arr = np.empty(horizon)
    al_arr = np.zeros(horizon, dtype=np.uint8)

    for k in range(horizon):
        t = k * tau
        y = x[0] + eta[k]
        ctx = AttackContext(
            k=k, t=t, y=np.array([y]), xhat=np.array([obs.xhat1, obs.xhat2]),
            y_hat=np.array([obs.xhat1]), tau=tau,
            sigma_r_sqrt=None, alpha=None, rng=attack_rng,
        )
        delta = float(attack.delta(ctx)[0])
        ybar = y + delta
        obs_next = disc_observer_step(obs, ybar, 0.0, gains, tau)
        yf, alarm = det.step(obs_next.s)

        x_arr[k, 0] = x[0]
        x_arr[k, 1] = x[1]
        xh_arr[k, 0] = obs.xhat1
        xh_arr[k, 1] = obs.xhat2
        y_arr[k, 0] = y
        d_arr[k, 0] = delta
        yb_arr[k, 0] = ybar
        r_arr[k, 0] = obs_next.e1
        yf_arr[k] = yf
        z_arr[k] = abs(yf)
        al_arr[k] = 1 if alarm else 0

        x = _rk4_linear_step(a, x, tau)
        obs = obs_next

    trace = SimulationTrace(
        tau=tau,
        seed=seed,
        detector=det.kind,
        attack=attack.describe(),
        k=np.arange(horizon, dtype=np.int64),
        t=np.arange(horizon) * tau,
        x=x_arr, xhat=xh_arr, y=y_arr, delta=d_arr, ybar=yb_arr,
        r=r_arr, rho=None, yf=yf_arr, z=z_arr, alarm=al_arr.astype(bool),
    )
    if record:
        return trace
    counted = horizon - discard
    zs = z_arr[discard:]
    rs = r_arr[discard:]
    return RunStats(
        steps=horizon, discard=discard, counted=counted,
        alarms=int(al_arr[discard:].sum()),
        z_mean=float(zs.mean()), z_var=float(zs.var()),
        z_max=float(zs.max()),
        r_mean=rs.mean(axis=0).copy(),
        r_cov=np.atleast_2d(np.cov(rs.T, bias=True)),
        rho_cov=None,
    )
