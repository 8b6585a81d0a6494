"""Scenario files, experiment orchestration, and canned reproduction cases.

A scenario is a strict JSON document: every key is checked against the
documented schema and anything unrecognized is rejected with the path to
the offending key, so a typo in a detector parameter cannot silently run
with defaults.  Structural problems raise SchemaError, malformed JSON
raises ParseError with line and column, and content that fails component
validation (an unstable loop, a negative step) raises ValidationError.

Schema (all numbers plain JSON numbers, matrices as nested lists):

    model:             A, B, C, K, L, noise_covariance (scalar, vector
                       diagonal, or full matrix)
    tau:               integration step in seconds, > 0
    horizon:           exactly one of {"steps": int} or {"seconds": s}
    attack:            {"type": <label>, ...parameters}
    detector:          {"type": <label>, ...parameters}
    seed:              optional unsigned 64-bit master seed
    transient_discard: optional step count excluded from metrics
    x0, xhat0:         optional initial states
    outputs:           optional {trace, histogram, raw, summary} booleans

Attack labels and parameters mirror the attacks module; detector labels
are chi_squared, filtered_chi_squared, and yf_threshold with the fields
of the matching config dataclass.  When transient_discard is omitted the
filtered detector discards its warm-up (ten filter time constants) and
the others discard nothing.

Replay contract: the same scenario file, seed, and engine produce byte
identical summary, trace, and histogram outputs.  Nothing derived from
wall clock or absolute paths is ever written.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import attacks as _attacks
from .attacks import ConstantAttack, SinusoidAttack, attack_from_config
from .detection import (
    ChiSquaredConfig,
    FilteredChiSquaredConfig,
    YfThresholdConfig,
    calibrate_af,
    predict_yf,
    tune_threshold,
)
from .errors import (
    HorizonZero,
    NumericError,
    ParseError,
    SchemaError,
    UnknownCase,
    ValidationError,
)
from .statespace import PlantModel, run_simulation, validate_model

__all__ = [
    "OutputRequest",
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "RunReport",
    "run_experiment",
    "run_calibration",
    "write_trace_csv",
    "reproduce",
    "benchmark_loop",
    "REPRODUCE_CASES",
]

# Above this horizon (and with no file outputs requested) runs stream
# summary statistics instead of recording every step.
_STATS_CUTOFF = 2_000_000

_MAX_SEED = 2**64 - 1


# ---------------------------------------------------------------- schema

def _join(path, key):
    return key if not path else f"{path}.{key}"


def _expect_object(value, path):
    if not isinstance(value, dict):
        raise SchemaError(f"{path or '<root>'}: expected an object")
    return value


def _check_keys(obj, path, required, optional=()):
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{_join(path, key)}: unknown key")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{_join(path, key)}: missing required key")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}: expected an integer")
    return int(value)


def _boolean(value, path):
    if not isinstance(value, bool):
        raise SchemaError(f"{path}: expected true or false")
    return value


def _array(value, path):
    if isinstance(value, bool) or isinstance(value, (str, dict)):
        raise SchemaError(f"{path}: expected a number or (nested) number list")
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: expected a number or (nested) number list") from exc
    return arr


def _param_value(value, path):
    """Attack/detector parameter: number, bool, string, null, number list."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, list):
        return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    raise SchemaError(f"{path}: unsupported parameter value")


@dataclass(frozen=True)
class OutputRequest:
    """Which files run_experiment writes when given a destination."""

    trace: bool = False
    histogram: bool = False
    raw: bool = False
    summary: bool = True


@dataclass(frozen=True)
class Scenario:
    """Fully validated experiment description.

    steps and transient_discard are resolved counts; raw keeps the parsed
    document for the machine-readable sidecar.
    """

    name: str
    sha256: str | None
    model: PlantModel
    tau: float
    steps: int
    attack: object
    detector: object
    seed: int | None
    transient_discard: int
    x0: np.ndarray | None
    xhat0: np.ndarray | None
    outputs: OutputRequest
    raw: dict


_DETECTOR_TYPES = {
    "chi_squared": ChiSquaredConfig,
    "filtered_chi_squared": FilteredChiSquaredConfig,
    "yf_threshold": YfThresholdConfig,
}


def _parse_model(data):
    block = _expect_object(data, "model")
    _check_keys(block, "model", ("A", "B", "C", "K", "L", "noise_covariance"))
    mats = {key: _array(block[key], f"model.{key}")
            for key in ("A", "B", "C", "K", "L", "noise_covariance")}
    try:
        model = PlantModel(
            a=mats["A"], b=mats["B"], c=mats["C"], k=mats["K"], l=mats["L"],
            noise=mats["noise_covariance"],
        )
        validate_model(model)
    except NumericError as exc:
        raise ValidationError(f"model: {exc}") from exc
    return model


def _parse_horizon(data, tau):
    block = _expect_object(data, "horizon")
    _check_keys(block, "horizon", (), ("steps", "seconds"))
    if ("steps" in block) == ("seconds" in block):
        raise SchemaError("horizon: give exactly one of steps or seconds")
    if "steps" in block:
        steps = _integer(block["steps"], "horizon.steps")
    else:
        seconds = _number(block["seconds"], "horizon.seconds")
        if not seconds > 0.0:
            raise ValidationError(
                f"horizon.seconds: must be > 0, got {seconds}"
            )
        steps = int(round(seconds / tau))
    if steps < 1:
        raise ValidationError(f"horizon: resolves to {steps} steps, need >= 1")
    return steps


def _parse_attack(data):
    block = _expect_object(data, "attack")
    if "type" not in block:
        raise SchemaError("attack.type: missing required key")
    label = block["type"]
    if not isinstance(label, str) or label not in _attacks._ATTACK_LABELS:
        raise SchemaError(f"attack.type: unknown attack type {label!r}")
    cls = _attacks._ATTACK_LABELS[label]
    if label == "none":
        allowed = set()
    else:
        allowed = {f.name for f in dataclasses.fields(cls)}
    params = {}
    for key, value in block.items():
        if key == "type":
            continue
        if key not in allowed:
            raise SchemaError(f"attack.{key}: unknown key")
        params[key] = _param_value(value, f"attack.{key}")
    try:
        return attack_from_config(label, params)
    except NumericError as exc:
        raise ValidationError(f"attack: {exc}") from exc


def _parse_detector(data):
    block = _expect_object(data, "detector")
    if "type" not in block:
        raise SchemaError("detector.type: missing required key")
    label = block["type"]
    if not isinstance(label, str) or label not in _DETECTOR_TYPES:
        raise SchemaError(f"detector.type: unknown detector type {label!r}")
    cls = _DETECTOR_TYPES[label]
    allowed = {f.name for f in dataclasses.fields(cls)}
    params = {}
    for key, value in block.items():
        if key == "type":
            continue
        if key not in allowed:
            raise SchemaError(f"detector.{key}: unknown key")
        params[key] = _param_value(value, f"detector.{key}")
    try:
        return cls(**params)
    except NumericError as exc:
        raise ValidationError(f"detector: {exc}") from exc


def _parse_outputs(data):
    block = _expect_object(data, "outputs")
    _check_keys(block, "outputs", (), ("trace", "histogram", "raw", "summary"))
    return OutputRequest(
        trace=_boolean(block["trace"], "outputs.trace") if "trace" in block else False,
        histogram=_boolean(block["histogram"], "outputs.histogram") if "histogram" in block else False,
        raw=_boolean(block["raw"], "outputs.raw") if "raw" in block else False,
        summary=_boolean(block["summary"], "outputs.summary") if "summary" in block else True,
    )


def _parse_state(value, path, n):
    arr = _array(value, path)
    if arr.ndim != 1 or arr.size != n:
        raise ValidationError(
            f"{path}: expected {n} entries, got shape {arr.shape}"
        )
    return arr


def _default_discard(detector, tau, steps):
    """Filtered runs drop the filter warm-up by default, everything else 0."""
    if isinstance(detector, FilteredChiSquaredConfig):
        d = int(math.ceil(10.0 / (detector.omega_c * tau)))
        if d < steps:
            return d
    return 0


def scenario_from_dict(data, *, name="<dict>", sha256=None):
    """Validate a parsed scenario document (the strict-schema core)."""
    _expect_object(data, "")
    _check_keys(
        data, "",
        ("model", "tau", "horizon", "attack", "detector"),
        ("seed", "transient_discard", "x0", "xhat0", "outputs"),
    )
    tau = _number(data["tau"], "tau")
    if not tau > 0.0:
        raise ValidationError(f"tau: must be > 0, got {tau}")
    model = _parse_model(data["model"])
    steps = _parse_horizon(data["horizon"], tau)
    attack = _parse_attack(data["attack"])
    detector = _parse_detector(data["detector"])

    seed = None
    if "seed" in data:
        seed = _integer(data["seed"], "seed")
        if seed < 0 or seed > _MAX_SEED:
            raise SchemaError("seed: must fit an unsigned 64-bit integer")

    if "transient_discard" in data:
        discard = _integer(data["transient_discard"], "transient_discard")
        if discard < 0:
            raise ValidationError("transient_discard: must be >= 0")
        if discard > steps:
            raise ValidationError(
                f"transient_discard: {discard} exceeds horizon of {steps} steps"
            )
    else:
        discard = _default_discard(detector, tau, steps)

    x0 = _parse_state(data["x0"], "x0", model.n) if "x0" in data else None
    xhat0 = _parse_state(data["xhat0"], "xhat0", model.n) if "xhat0" in data else None
    outputs = _parse_outputs(data["outputs"]) if "outputs" in data else OutputRequest()

    return Scenario(
        name=name, sha256=sha256, model=model, tau=tau, steps=steps,
        attack=attack, detector=detector, seed=seed,
        transient_discard=discard, x0=x0, xhat0=xhat0, outputs=outputs,
        raw=data,
    )


def load_scenario(path):
    """Read, parse, and validate a scenario file."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    digest = hashlib.sha256(blob).hexdigest()
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(
        data, name=os.path.basename(path), sha256=digest
    )


# ---------------------------------------------------------------- reports

def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


_QUANTILE_KEYS = ("p50", "p90", "p95", "p99")
_QUANTILE_LEVELS = (0.50, 0.90, 0.95, 0.99)


@dataclass(frozen=True)
class RunReport:
    """Summary of one experiment, printable as key=value lines.

    Quantiles are None when the run streamed statistics instead of
    recording samples.
    """

    scenario: str
    sha256: str | None
    seed: int
    engine: str
    detector: str
    attack: str
    steps: int
    tau: float
    transient_discard: int
    counted: int
    threshold: float
    alarm_rate: float
    z_mean: float
    z_var: float
    z_max: float
    z_quantiles: dict | None

    def to_dict(self):
        out = {
            "scenario": self.scenario,
            "sha256": self.sha256,
            "seed": int(self.seed),
            "engine": self.engine,
            "detector": self.detector,
            "attack": self.attack,
            "steps": int(self.steps),
            "tau": float(self.tau),
            "transient_discard": int(self.transient_discard),
            "counted": int(self.counted),
            "threshold": float(self.threshold),
            "alarm_rate": float(self.alarm_rate),
            "z_mean": float(self.z_mean),
            "z_var": float(self.z_var),
            "z_max": float(self.z_max),
        }
        if self.z_quantiles is not None:
            out["z_quantiles"] = {
                key: float(self.z_quantiles[key]) for key in _QUANTILE_KEYS
            }
        return out

    def to_lines(self):
        lines = [
            f"scenario={self.scenario}",
            f"sha256={self.sha256 if self.sha256 else ''}",
            f"seed={self.seed}",
            f"engine={self.engine}",
            f"detector={self.detector}",
            f"attack={self.attack}",
            f"steps={self.steps}",
            f"tau={_fmt(float(self.tau))}",
            f"transient_discard={self.transient_discard}",
            f"counted={self.counted}",
            f"threshold={_fmt(float(self.threshold))}",
            f"alarm_rate={_fmt(float(self.alarm_rate))}",
            f"z_mean={_fmt(float(self.z_mean))}",
            f"z_var={_fmt(float(self.z_var))}",
            f"z_max={_fmt(float(self.z_max))}",
        ]
        if self.z_quantiles is not None:
            for key in _QUANTILE_KEYS:
                lines.append(f"z_{key}={_fmt(float(self.z_quantiles[key]))}")
        return lines


def _resolve_threshold(detector, p):
    if isinstance(detector, YfThresholdConfig):
        return math.inf if detector.alpha_f is None else float(detector.alpha_f)
    return detector.resolve_alpha(p)


def _resolve_engine(engine):
    if engine != "auto":
        return engine
    try:
        from . import _kernels  # noqa: F401
    except Exception:
        return "python"
    return "numba"


def write_trace_csv(trace, path):
    """Write one run in the documented CSV layout.

    Header: k,t,x...,xhat...,y...,delta...,ybar...,r...,rho...,yf,z,alarm
    with vector channels expanded by index; channels the detector did not
    produce are left empty.
    """
    n = trace.x.shape[1]
    p = trace.y.shape[1]
    cols = ["k", "t"]
    cols += [f"x{i}" for i in range(n)]
    cols += [f"xhat{i}" for i in range(n)]
    cols += [f"y{i}" for i in range(p)]
    cols += [f"delta{i}" for i in range(p)]
    cols += [f"ybar{i}" for i in range(p)]
    cols += [f"r{i}" for i in range(p)]
    cols += [f"rho{i}" for i in range(p)]
    cols += ["yf", "z", "alarm"]

    has_rho = trace.rho is not None
    has_yf = trace.yf is not None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(trace.steps):
            row = [str(int(trace.k[k])), repr(float(trace.t[k]))]
            row += [repr(float(v)) for v in trace.x[k]]
            row += [repr(float(v)) for v in trace.xhat[k]]
            row += [repr(float(v)) for v in trace.y[k]]
            row += [repr(float(v)) for v in trace.delta[k]]
            row += [repr(float(v)) for v in trace.ybar[k]]
            row += [repr(float(v)) for v in trace.r[k]]
            if has_rho:
                row += [repr(float(v)) for v in trace.rho[k]]
            else:
                row += [""] * p
            row.append(repr(float(trace.yf[k])) if has_yf else "")
            row.append(repr(float(trace.z[k])))
            row.append("1" if trace.alarm[k] else "0")
            fh.write(",".join(row) + "\n")


def _write_histogram_csv(samples, path, bins=200):
    counts, edges = np.histogram(samples, bins=bins)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_left,bin_right,count\n")
        for i in range(counts.size):
            fh.write(
                f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},"
                f"{int(counts[i])}\n"
            )


def _write_samples_csv(samples, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("z\n")
        for v in samples:
            fh.write(repr(float(v)) + "\n")


def run_experiment(scenario, *, seed=None, out_dir=None, engine="auto"):
    """Execute a scenario and return its RunReport.

    seed overrides the scenario's own; one of the two must be present.
    File outputs requested by the scenario are written into out_dir when
    given (trace.csv, histogram.csv, z_samples.csv, summary.json) and
    skipped otherwise.  Long runs with no file outputs stream statistics
    rather than recording every step.
    """
    eff_seed = seed if seed is not None else scenario.seed
    if eff_seed is None:
        raise SchemaError(
            "no seed: the scenario has no seed field and none was passed"
        )
    discard = scenario.transient_discard
    counted = scenario.steps - discard
    if counted <= 0:
        raise HorizonZero(
            f"transient discard {discard} leaves no steps out of "
            f"{scenario.steps}"
        )
    outputs = scenario.outputs
    wants_files = out_dir is not None and (
        outputs.trace or outputs.histogram or outputs.raw
    )
    record = (
        wants_files
        or isinstance(scenario.detector, YfThresholdConfig)
        or scenario.steps <= _STATS_CUTOFF
    )
    engine = _resolve_engine(engine)

    result = run_simulation(
        scenario.model, scenario.tau, scenario.steps, scenario.attack,
        scenario.detector, eff_seed,
        x0=scenario.x0, xhat0=scenario.xhat0, engine=engine,
        record=record, transient_discard=0 if record else discard,
    )

    threshold = _resolve_threshold(scenario.detector, scenario.model.p)
    if record:
        z_post = result.z[discard:]
        alarm_post = result.alarm[discard:]
        quantiles = {
            key: float(np.quantile(z_post, q))
            for key, q in zip(_QUANTILE_KEYS, _QUANTILE_LEVELS)
        }
        report = RunReport(
            scenario=scenario.name, sha256=scenario.sha256, seed=int(eff_seed),
            engine=engine, detector=result.detector, attack=result.attack,
            steps=scenario.steps, tau=scenario.tau,
            transient_discard=discard, counted=counted, threshold=threshold,
            alarm_rate=float(np.mean(alarm_post)),
            z_mean=float(np.mean(z_post)), z_var=float(np.var(z_post)),
            z_max=float(np.max(z_post)), z_quantiles=quantiles,
        )
    else:
        det_kind = scenario.detector.label
        report = RunReport(
            scenario=scenario.name, sha256=scenario.sha256, seed=int(eff_seed),
            engine=engine, detector=det_kind,
            attack=scenario.attack.describe(),
            steps=scenario.steps, tau=scenario.tau,
            transient_discard=discard, counted=counted, threshold=threshold,
            alarm_rate=float(result.alarm_rate),
            z_mean=float(result.z_mean), z_var=float(result.z_var),
            z_max=float(result.z_max), z_quantiles=None,
        )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if outputs.trace and record:
            write_trace_csv(result, os.path.join(out_dir, "trace.csv"))
        if outputs.histogram and record:
            _write_histogram_csv(
                result.z[discard:], os.path.join(out_dir, "histogram.csv")
            )
        if outputs.raw and record:
            _write_samples_csv(
                result.z[discard:], os.path.join(out_dir, "z_samples.csv")
            )
        if outputs.summary:
            sidecar = {"report": report.to_dict(), "scenario": scenario.raw}
            with open(
                os.path.join(out_dir, "summary.json"), "w",
                encoding="utf-8", newline="\n",
            ) as fh:
                json.dump(sidecar, fh, indent=2, sort_keys=True)
                fh.write("\n")
    return report


def run_calibration(scenario, settle, *, seed=None, engine="auto"):
    """Run a switching-observer scenario and read off the threshold.

    Returns (alpha_f, lines): the L-infinity norm of the filtered
    switching signal after the settle window, and the printable report.
    """
    if not isinstance(scenario.detector, YfThresholdConfig):
        raise ValidationError(
            "calibrate-af needs a yf_threshold detector, scenario has "
            f"{scenario.detector.label!r}"
        )
    eff_seed = seed if seed is not None else scenario.seed
    if eff_seed is None:
        raise SchemaError(
            "no seed: the scenario has no seed field and none was passed"
        )
    trace = run_simulation(
        scenario.model, scenario.tau, scenario.steps, scenario.attack,
        scenario.detector, eff_seed,
        x0=scenario.x0, xhat0=scenario.xhat0, engine=engine, record=True,
    )
    alpha_f = calibrate_af(trace, settle)
    start = int(math.floor(float(settle) / trace.tau)) + 1
    lines = [
        f"scenario={scenario.name}",
        f"sha256={scenario.sha256 if scenario.sha256 else ''}",
        f"seed={int(eff_seed)}",
        f"settle_seconds={_fmt(float(settle))}",
        f"duration_seconds={_fmt(trace.duration)}",
        f"samples_used={trace.steps - start}",
        f"alpha_f={_fmt(alpha_f)}",
    ]
    return alpha_f, lines


# ------------------------------------------------------------- reproduce

REPRODUCE_CASES = ("fig1_cdf", "fig2_pdf", "fig3_residuals", "tuning_table")

_REPRO_SEED = 987654321
_FIG_TAU = 0.001
_FIG_STEPS = 200_000
_FIG_DISCARD = 2_000
_FIG_OMEGA = 12.0
_FIG3_SECONDS = 30.0


def benchmark_loop(noise=2.0):
    """The bundled second-order benchmark loop used by the canned cases."""
    return PlantModel(
        a=[[0.0, 1.0], [-4.0, -20.0]],
        b=[[0.0], [1.0]],
        c=[[1.0, 0.0]],
        k=[[1.0, 1.0]],
        l=[[0.0], [2.0]],
        noise=noise,
    )


def _fig_samples(engine):
    """Post-discard z samples for the four distribution runs."""
    model = benchmark_loop()
    runs = {
        "unfiltered_nominal": (ChiSquaredConfig(false_alarm_rate=0.05),
                               _attacks.NoAttack()),
        "unfiltered_attack": (ChiSquaredConfig(false_alarm_rate=0.05),
                              ConstantAttack(level=1.0)),
        "filtered_nominal": (FilteredChiSquaredConfig(
            omega_c=_FIG_OMEGA, false_alarm_rate=0.05), _attacks.NoAttack()),
        "filtered_attack": (FilteredChiSquaredConfig(
            omega_c=_FIG_OMEGA, false_alarm_rate=0.05),
            ConstantAttack(level=1.0)),
    }
    samples = {}
    for key, (det, attack) in runs.items():
        trace = run_simulation(
            model, _FIG_TAU, _FIG_STEPS, attack, det, _REPRO_SEED,
            engine=engine, record=True,
        )
        samples[key] = trace.z[_FIG_DISCARD:]
    return samples


_FIG_KEYS = ("unfiltered_nominal", "unfiltered_attack",
             "filtered_nominal", "filtered_attack")


def _case_header(case, extra):
    lines = [
        f"case={case}",
        f"seed={_REPRO_SEED}",
        f"tau={_fmt(_FIG_TAU)}",
    ]
    lines += extra
    return lines


def _reproduce_fig1(out_dir, engine):
    samples = _fig_samples(engine)
    alpha = tune_threshold(0.05, 1)
    sorted_s = {key: np.sort(samples[key]) for key in _FIG_KEYS}
    hi = max(float(np.quantile(s, 0.999)) for s in sorted_s.values())
    grid = np.linspace(0.0, hi, 400)
    n_samp = {key: s.size for key, s in sorted_s.items()}
    path = os.path.join(out_dir, "fig1_cdf.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("z," + ",".join(_FIG_KEYS) + "\n")
        for g in grid:
            row = [repr(float(g))]
            for key in _FIG_KEYS:
                cdf = np.searchsorted(sorted_s[key], g, side="right") / n_samp[key]
                row.append(repr(float(cdf)))
            fh.write(",".join(row) + "\n")

    def _cdf_at(key, value):
        return float(
            np.searchsorted(sorted_s[key], value, side="right") / n_samp[key]
        )

    gap_unf = abs(_cdf_at("unfiltered_nominal", alpha)
                  - _cdf_at("unfiltered_attack", alpha))
    gap_fil = abs(_cdf_at("filtered_nominal", alpha)
                  - _cdf_at("filtered_attack", alpha))
    lines = _case_header("fig1_cdf", [
        f"steps={_FIG_STEPS}",
        f"transient_discard={_FIG_DISCARD}",
        f"omega_c={_fmt(_FIG_OMEGA)}",
        f"threshold={_fmt(alpha)}",
        f"cdf_gap_at_threshold_unfiltered={_fmt(gap_unf)}",
        f"cdf_gap_at_threshold_filtered={_fmt(gap_fil)}",
        f"target=filtered gap exceeds unfiltered gap "
        f"ok={_fmt(gap_fil > gap_unf)}",
    ])
    return lines, [path]


def _reproduce_fig2(out_dir, engine):
    samples = _fig_samples(engine)
    path = os.path.join(out_dir, "fig2_pdf.csv")
    centers = {}
    density = {}
    for key in _FIG_KEYS:
        s = samples[key]
        hi = float(np.quantile(s, 0.995))
        lo = float(np.min(s))
        counts, edges = np.histogram(s, bins=200, range=(lo, hi), density=True)
        centers[key] = 0.5 * (edges[:-1] + edges[1:])
        density[key] = counts
    header = []
    for key in _FIG_KEYS:
        header += [f"z_{key}", f"pdf_{key}"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(200):
            row = []
            for key in _FIG_KEYS:
                row.append(repr(float(centers[key][i])))
                row.append(repr(float(density[key][i])))
            fh.write(",".join(row) + "\n")
    means = {key: float(np.mean(samples[key])) for key in _FIG_KEYS}
    lines = _case_header("fig2_pdf", [
        f"steps={_FIG_STEPS}",
        f"transient_discard={_FIG_DISCARD}",
        f"omega_c={_fmt(_FIG_OMEGA)}",
        "bins=200",
        f"z_mean_unfiltered_nominal={_fmt(means['unfiltered_nominal'])}",
        f"z_mean_unfiltered_attack={_fmt(means['unfiltered_attack'])}",
        f"z_mean_filtered_nominal={_fmt(means['filtered_nominal'])}",
        f"z_mean_filtered_attack={_fmt(means['filtered_attack'])}",
        f"target=nominal z mean near sensor count 1 "
        f"ok={_fmt(abs(means['unfiltered_nominal'] - 1.0) < 0.1)}",
    ])
    return lines, [path]


def _reproduce_fig3(out_dir, engine):
    model = benchmark_loop(noise=0.0)
    steps = int(round(_FIG3_SECONDS / _FIG_TAU))
    det = YfThresholdConfig(alpha_f=None, omega_c=_FIG_OMEGA)
    a_coef = 4.0
    files = []

    trace_c = run_simulation(
        model, _FIG_TAU, steps, ConstantAttack(level=0.1), det, _REPRO_SEED,
        engine=engine, record=True,
    )
    pred_c = np.full(steps, predict_yf(0.1, 0.0, 0.0, a_coef, 20.0))
    path_c = os.path.join(out_dir, "fig3_constant.csv")
    _write_fig3_csv(path_c, trace_c.t, trace_c.yf, pred_c)
    files.append(path_c)
    late = trace_c.t >= (_FIG3_SECONDS - 5.0)
    steady = float(np.mean(trace_c.yf[late]))
    rel_err_c = abs(steady - 0.4) / 0.4

    trace_s = run_simulation(
        model, _FIG_TAU, steps, SinusoidAttack(amplitude=0.1, frequency=1.0),
        det, _REPRO_SEED, engine=engine, record=True,
    )
    t = trace_s.t
    pred_s = 0.3 * np.sin(t) + 2.0 * np.cos(t)
    path_s = os.path.join(out_dir, "fig3_sinusoid.csv")
    _write_fig3_csv(path_s, t, trace_s.yf, pred_s)
    files.append(path_s)
    post = t >= 5.0
    rms = float(np.sqrt(np.mean((trace_s.yf[post] - pred_s[post]) ** 2)))
    amplitude = math.sqrt(0.3**2 + 2.0**2)

    lines = _case_header("fig3_residuals", [
        f"seconds={_fmt(_FIG3_SECONDS)}",
        f"omega_c={_fmt(_FIG_OMEGA)}",
        f"observer_gains=5,5,12",
        f"noise_covariance=0.0",
        f"steady_yf_constant={_fmt(steady)}",
        f"target_steady=0.4 rel_err={_fmt(rel_err_c)} "
        f"ok={_fmt(rel_err_c <= 0.02)}",
        f"sinusoid_rms_err={_fmt(rms)}",
        f"sinusoid_amplitude={_fmt(amplitude)}",
        f"target_rms_frac=0.1 frac={_fmt(rms / amplitude)} "
        f"ok={_fmt(rms / amplitude <= 0.1)}",
    ])
    return lines, files


def _write_fig3_csv(path, t, yf, pred):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,yf,yf_predicted\n")
        for i in range(t.size):
            fh.write(
                f"{repr(float(t[i]))},{repr(float(yf[i]))},"
                f"{repr(float(pred[i]))}\n"
            )


def _reproduce_tuning_table(out_dir, engine):
    rates = (0.01, 0.05, 0.1, 0.2)
    sensors = (1, 2, 3)
    path = os.path.join(out_dir, "tuning_table.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("false_alarm_rate,sensors,threshold\n")
        for rate in rates:
            for p in sensors:
                fh.write(
                    f"{repr(float(rate))},{p},"
                    f"{repr(tune_threshold(rate, p))}\n"
                )
    got1 = tune_threshold(0.05, 1)
    got2 = tune_threshold(0.05, 2)
    ref2 = -2.0 * math.log(0.05)
    lines = [
        "case=tuning_table",
        f"target threshold(0.05,1)=3.8415 got={_fmt(got1)} "
        f"ok={_fmt(abs(got1 - 3.8415) <= 0.001)}",
        f"target threshold(0.05,2)={_fmt(ref2)} got={_fmt(got2)} "
        f"ok={_fmt(abs(got2 - ref2) <= 0.001)}",
    ]
    return lines, [path]


_CASE_RUNNERS = {
    "fig1_cdf": _reproduce_fig1,
    "fig2_pdf": _reproduce_fig2,
    "fig3_residuals": _reproduce_fig3,
    "tuning_table": _reproduce_tuning_table,
}


def reproduce(case_id, out_dir, *, engine="auto"):
    """Run one canned reproduction case; returns the report lines.

    Data files and report.txt land in out_dir.  Horizons and filter
    cutoffs that the published description leaves open are fixed here and
    echoed in the report header.
    """
    if case_id not in _CASE_RUNNERS:
        raise UnknownCase(
            f"unknown case {case_id!r}, choose from {', '.join(REPRODUCE_CASES)}"
        )
    os.makedirs(out_dir, exist_ok=True)
    engine = _resolve_engine(engine)
    lines, files = _CASE_RUNNERS[case_id](out_dir, engine)
    lines = list(lines)
    lines.append(f"engine={engine}")
    for f in files:
        lines.append(f"file={os.path.basename(f)}")
    with open(
        os.path.join(out_dir, "report.txt"), "w",
        encoding="utf-8", newline="\n",
    ) as fh:
        fh.write("\n".join(lines) + "\n")
    return lines
