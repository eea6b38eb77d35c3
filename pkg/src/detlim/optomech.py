"""Linearized state-space models of optomechanical detectors.

Two concrete detectors are built here: a detuned Fabry-Perot cavity read out
in an adjustable quadrature, and a resonant cavity augmented with a second
control cavity whose monitored output is fed back onto the mirror (quantum
locking). Both reduce to first-order Langevin dynamics xdot = A x + w driven
by white quadrature noise, solved per frequency through the resolvent
(-i*w*I - A)^-1 under the Fourier convention O(w) = int O(t) exp(i*w*t) dt.

Sensitivities are operational: the readout noise spectrum referred to the
force input, and to displacement through the closed-loop force-to-position
transfer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import (
    DetectorModelError,
    PoleError,
    mech_susceptibility,
    sql_displacement,
    sql_force,
    uql_displacement,
    uql_force,
)


class ZeroSignalError(DetectorModelError):
    """The signal does not reach the readout; sensitivity is undefined."""


class TimeVariantModelError(DetectorModelError):
    """Not a time-invariant real system; stability analysis does not apply."""


OPTICAL_VACUUM_PSD = 0.5

DETUNED_STATES = ("q", "p", "b1", "b2")
DETUNED_CHANNELS = ("q_in", "p_in", "b1_in", "b2_in")
LOCKING_STATES = ("q", "p", "b1", "b2", "c1", "c2")
LOCKING_CHANNELS = ("q_in", "p_in", "b1_in", "b2_in", "c1_in", "c2_in")


@dataclass(frozen=True)
class OptomechParams:
    """Physical parameters shared by the detuned and locking detectors.

    omega_m, gamma_m: mechanical frequency and damping; gamma_c: cavity decay
    (both cavities in the locking scheme); detuning applies to the detuned
    model only; g and g_ctrl are the effective optomechanical couplings of
    the main and control cavities; phi is the readout quadrature angle and
    theta the feedback monitor angle. Mechanical thermal noise (occupancy
    n_th) enters only when include_mech_noise is set.
    """

    omega_m: float = 0.1
    gamma_m: float = 0.1
    gamma_c: float = 2.0
    detuning: float = 0.0
    g: float = 1.0
    g_ctrl: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    n_th: float = 0.0
    include_mech_noise: bool = False

    def __post_init__(self):
        if self.omega_m <= 0:
            raise ValueError(f"omega_m must be positive, got {self.omega_m}")
        if self.gamma_c <= 0:
            raise ValueError(f"gamma_c must be positive, got {self.gamma_c}")
        if self.gamma_m < 0:
            raise ValueError(f"gamma_m must be nonnegative, got {self.gamma_m}")
        if self.n_th < 0:
            raise ValueError(f"n_th must be nonnegative, got {self.n_th}")
        for name in ("detuning", "g", "g_ctrl", "phi", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def mech_psd(self) -> float:
        return self.n_th + 0.5 if self.include_mech_noise else 0.0


@dataclass(frozen=True)
class StateSpaceModel:
    """First-order Langevin model with a scalar readout.

    a: drift matrix; noise_input maps unit-PSD-normalized channel amplitudes
    into state rows (correlated entries of one physical channel share a
    column); noise_psd holds each channel's symmetrized spectrum;
    signal_input is the force column; output_row and feedthrough assemble the
    detected quadrature from states and input channels. The locking model
    also exposes the feedback monitor port read-only via monitor_row and
    monitor_feedthrough.
    """

    a: np.ndarray
    noise_input: np.ndarray
    noise_psd: np.ndarray
    signal_input: np.ndarray
    output_row: np.ndarray
    feedthrough: np.ndarray
    states: tuple[str, ...]
    channels: tuple[str, ...]
    monitor_row: np.ndarray | None = None
    monitor_feedthrough: np.ndarray | None = None

    def __post_init__(self):
        n = self.a.shape[0]
        if self.a.shape != (n, n) or n not in (4, 6):
            raise ValueError(f"drift matrix must be 4x4 or 6x6, got {self.a.shape}")
        for arr in (
            self.a,
            self.noise_input,
            self.noise_psd,
            self.signal_input,
            self.output_row,
            self.feedthrough,
            self.monitor_row,
            self.monitor_feedthrough,
        ):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.a.shape[0]


def build_detuned_model(params: OptomechParams) -> StateSpaceModel:
    """Detuned-cavity detector, states (q, p, b1, b2).

    The force enters the momentum row; cavity quadratures couple to the
    mirror with strength g and rotate into each other at the detuning. The
    readout is b1out*sin(phi) + b2out*cos(phi) with bout = sqrt(gamma_c)*b -
    bin.
    """
    w, gm, gc, d, g = params.omega_m, params.gamma_m, params.gamma_c, params.detuning, params.g
    a = np.array(
        [
            [-gm / 2, w, 0.0, 0.0],
            [-w, -gm / 2, g, 0.0],
            [0.0, 0.0, -gc / 2, d],
            [g, 0.0, -d, -gc / 2],
        ]
    )
    noise_input = np.diag([math.sqrt(gm), math.sqrt(gm), math.sqrt(gc), math.sqrt(gc)])
    mech = params.mech_psd()
    noise_psd = np.array([mech, mech, OPTICAL_VACUUM_PSD, OPTICAL_VACUUM_PSD])
    signal_input = np.array([0.0, 1.0, 0.0, 0.0])
    sin_phi, cos_phi = math.sin(params.phi), math.cos(params.phi)
    output_row = np.array([0.0, 0.0, math.sqrt(gc) * sin_phi, math.sqrt(gc) * cos_phi])
    feedthrough = np.array([0.0, 0.0, -sin_phi, -cos_phi])
    return StateSpaceModel(
        a, noise_input, noise_psd, signal_input, output_row, feedthrough,
        DETUNED_STATES, DETUNED_CHANNELS,
    )


def build_locking_model(params: OptomechParams, lam: complex = 0j) -> StateSpaceModel:
    """Resonant cavity plus control cavity with feedback transfer value lam.

    Both cavities share the decay rate gamma_c and sit on resonance. The
    monitored control quadrature c1out*sin(theta) + c2out*cos(theta) acts
    back on the momentum through lam; its intracavity part shifts the
    couplings and its input part rides along the force channel. For complex
    lam the drift matrix is complex and only valid frequency-locally.
    """
    lam = complex(lam)
    if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
        raise ValueError(f"lam must be finite, got {lam}")
    w, gm, gc, g, gt = params.omega_m, params.gamma_m, params.gamma_c, params.g, params.g_ctrl
    sin_th, cos_th = math.sin(params.theta), math.cos(params.theta)
    sqrt_gc = math.sqrt(gc)
    if lam.imag == 0:
        lam_entry = lam.real
        dtype = float
    else:
        lam_entry = lam
        dtype = complex
    gt1 = gt - lam_entry * sqrt_gc * sin_th
    gt2 = lam_entry * sqrt_gc * cos_th
    a = np.array(
        [
            [-gm / 2, w, 0.0, 0.0, 0.0, 0.0],
            [-w, -gm / 2, g, 0.0, -gt1, gt2],
            [0.0, 0.0, -gc / 2, 0.0, 0.0, 0.0],
            [g, 0.0, 0.0, -gc / 2, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, -gc / 2, 0.0],
            [-gt, 0.0, 0.0, 0.0, 0.0, -gc / 2],
        ],
        dtype=dtype,
    )
    noise_input = np.zeros((6, 6), dtype=dtype)
    noise_input[0, 0] = math.sqrt(gm)
    noise_input[1, 1] = math.sqrt(gm)
    noise_input[2, 2] = sqrt_gc
    noise_input[3, 3] = sqrt_gc
    noise_input[4, 4] = sqrt_gc
    noise_input[5, 5] = sqrt_gc
    # feedback noise re-injected onto the momentum row
    noise_input[1, 4] = -lam_entry * sin_th
    noise_input[1, 5] = -lam_entry * cos_th
    mech = params.mech_psd()
    noise_psd = np.array([mech, mech] + [OPTICAL_VACUUM_PSD] * 4)
    signal_input = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    sin_phi, cos_phi = math.sin(params.phi), math.cos(params.phi)
    output_row = np.array([0.0, 0.0, sqrt_gc * sin_phi, sqrt_gc * cos_phi, 0.0, 0.0])
    feedthrough = np.array([0.0, 0.0, -sin_phi, -cos_phi, 0.0, 0.0])
    monitor_row = np.array([0.0, 0.0, 0.0, 0.0, sqrt_gc * sin_th, sqrt_gc * cos_th])
    monitor_feedthrough = np.array([0.0, 0.0, 0.0, 0.0, -sin_th, -cos_th])
    return StateSpaceModel(
        a, noise_input, noise_psd, signal_input, output_row, feedthrough,
        LOCKING_STATES, LOCKING_CHANNELS,
        monitor_row=monitor_row, monitor_feedthrough=monitor_feedthrough,
    )


def stability(a: np.ndarray) -> bool:
    """True iff every eigenvalue of the real drift matrix has Re <= 0.

    A tolerance of 1e-12 times the matrix norm absorbs rounding on marginal
    eigenvalues. Complex input (frequency-dependent feedback) is rejected.
    """
    arr = np.asarray(a)
    if np.iscomplexobj(arr):
        if np.any(arr.imag != 0):
            raise TimeVariantModelError(
                "not a time-invariant real system: drift matrix has complex entries"
            )
        arr = arr.real
    eigs = np.linalg.eigvals(arr)
    return bool(eigs.real.max() <= 1e-12 * np.linalg.norm(arr))


def resolvent(a: np.ndarray, omega: float) -> np.ndarray:
    """Resolvent (-i*omega*I - A)^-1 of a drift matrix."""
    a = np.asarray(a)
    m = -1j * omega * np.eye(a.shape[0]) - a
    try:
        return np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise PoleError(f"singular resolvent at omega={omega}") from None


def transfer_at(model: StateSpaceModel, omega: float) -> np.ndarray:
    """Resolvent of the model's drift matrix."""
    return resolvent(model.a, omega)


def output_transfers(model: StateSpaceModel, omega: float) -> tuple[complex, np.ndarray]:
    """Transfer of the force and of each noise channel into the readout.

    Returns (t_f, t_channels); each channel coefficient sums its
    through-cavity path and its direct feedthrough, so every physical noise
    source appears exactly once.
    """
    resolvent = transfer_at(model, omega)
    row = model.output_row @ resolvent
    t_f = complex(row @ model.signal_input)
    t_channels = row @ model.noise_input + model.feedthrough
    return t_f, t_channels


def monitor_transfers(model: StateSpaceModel, omega: float) -> tuple[complex, np.ndarray]:
    """Same as output_transfers but for the feedback monitor port."""
    if model.monitor_row is None:
        raise ValueError("model has no monitor port")
    resolvent = transfer_at(model, omega)
    row = model.monitor_row @ resolvent
    t_f = complex(row @ model.signal_input)
    t_channels = row @ model.noise_input + model.monitor_feedthrough
    return t_f, t_channels


def force_to_displacement(model: StateSpaceModel, omega: float) -> complex:
    """Closed-loop transfer from the applied force to the mirror position."""
    resolvent = transfer_at(model, omega)
    return complex((resolvent @ model.signal_input)[0])


def sensitivity_at(model: StateSpaceModel, omega: float) -> tuple[float, float]:
    """Force and displacement sensitivity of the readout at one frequency.

    The output noise spectrum is referred to the force input for s_f and
    through the closed-loop force-to-position transfer for s_q.
    """
    resolvent = transfer_at(model, omega)
    row = model.output_row @ resolvent
    t_f = complex(row @ model.signal_input)
    if t_f == 0:
        raise ZeroSignalError(f"no signal transfer to the readout at omega={omega}")
    t_channels = row @ model.noise_input + model.feedthrough
    s_z = float(np.sum(np.abs(t_channels) ** 2 * model.noise_psd))
    s_f = s_z / abs(t_f) ** 2
    t_fq = complex((resolvent @ model.signal_input)[0])
    s_q = s_f * abs(t_fq) ** 2
    return s_f, s_q


# ---------------------------------------------------------------------------
# Per-frequency feedback optimization and sweeps
# ---------------------------------------------------------------------------

OBJECTIVES = ("force", "displacement")


@dataclass(frozen=True)
class LambdaOptConfig:
    """Deterministic polar-grid plus simplex search over the feedback value."""

    radius_min: float = 0.02
    radius_max: float = 50.0
    radii: int = 10
    phases: int = 12
    refine_starts: int = 3
    maxiter: int = 300
    xatol: float = 1e-10
    fatol: float = 1e-13


def optimize_lambda(
    params: OptomechParams,
    omega: float,
    objective: str = "force",
    config: LambdaOptConfig | None = None,
) -> tuple[complex, float]:
    """Best feedback transfer value for the locking detector at one frequency.

    Minimizes the chosen sensitivity over complex lam (two real parameters)
    with a coarse polar grid followed by simplex refinement; deterministic
    for a fixed config. Returns (lam, achieved sensitivity).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    cfg = config or LambdaOptConfig()
    pick = 0 if objective == "force" else 1

    def evaluate(lam: complex) -> float:
        try:
            return sensitivity_at(build_locking_model(params, lam), omega)[pick]
        except DetectorModelError:
            return math.inf

    candidates = [0j]
    for r in np.geomspace(cfg.radius_min, cfg.radius_max, cfg.radii):
        for k in range(cfg.phases):
            candidates.append(r * np.exp(2j * np.pi * k / cfg.phases))
    scored = sorted(((evaluate(lam), i, lam) for i, lam in enumerate(candidates)))

    best_value, _, best_lam = scored[0]
    for value, _, lam in scored[: cfg.refine_starts]:
        res = minimize(
            lambda x: evaluate(complex(x[0], x[1])),
            [lam.real, lam.imag],
            method="Nelder-Mead",
            options={"maxiter": cfg.maxiter, "xatol": cfg.xatol, "fatol": cfg.fatol},
        )
        if res.fun < best_value:
            best_value = float(res.fun)
            best_lam = complex(res.x[0], res.x[1])
    if not math.isfinite(best_value):
        raise ZeroSignalError(f"no finite sensitivity found at omega={omega}")
    return best_lam, best_value


@dataclass(frozen=True)
class SensitivityCurve:
    """Sensitivity spectra over a strictly increasing frequency grid.

    Carries both sensitivities, the reference floors, and (when feedback was
    applied) the per-point transfer values.
    """

    omega: np.ndarray
    s_f: np.ndarray
    s_q: np.ndarray
    sql_f: np.ndarray
    uql_f: np.ndarray
    sql_q: np.ndarray
    uql_q: np.ndarray
    lam: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        for name in ("s_f", "s_q", "sql_f", "uql_f", "sql_q", "uql_q"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        for arr in (self.omega, self.s_f, self.s_q, self.sql_f, self.uql_f,
                    self.sql_q, self.uql_q, self.lam):
            if arr is not None:
                arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.omega)


def frequency_grid(lo: float, hi: float, count: int, spacing: str = "log") -> np.ndarray:
    """Strictly increasing frequency grid, logarithmic by default."""
    if not (lo < hi):
        raise ValueError(f"grid needs lo < hi, got [{lo}, {hi}]")
    if count < 2:
        raise ValueError(f"grid needs at least 2 points, got {count}")
    if spacing == "log":
        if lo <= 0:
            raise ValueError("log grid needs a positive lower edge")
        return np.geomspace(lo, hi, count)
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    raise ValueError(f"spacing must be 'log' or 'linear', got {spacing!r}")


LAMBDA_POLICIES = ("off", "fixed", "optimize-force", "optimize-displacement")


def sensitivity_point(
    params: OptomechParams,
    omega: float,
    kind: str = "detuned",
    lambda_policy: str = "off",
    lam: complex = 0j,
    opt_config: LambdaOptConfig | None = None,
) -> tuple[float, float, complex]:
    """One grid point of a sweep: (s_f, s_q, lam actually applied)."""
    if kind == "detuned":
        if lambda_policy != "off":
            raise ValueError("the detuned model has no feedback loop; use policy 'off'")
        model = build_detuned_model(params)
        lam_used = 0j
    elif kind == "locking":
        if lambda_policy == "off":
            lam_used = 0j
        elif lambda_policy == "fixed":
            lam_used = complex(lam)
        elif lambda_policy in ("optimize-force", "optimize-displacement"):
            objective = "force" if lambda_policy == "optimize-force" else "displacement"
            lam_used, _ = optimize_lambda(params, omega, objective, opt_config)
        else:
            raise ValueError(f"unknown lambda policy {lambda_policy!r}")
        model = build_locking_model(params, lam_used)
    else:
        raise ValueError(f"model kind must be 'detuned' or 'locking', got {kind!r}")
    s_f, s_q = sensitivity_at(model, omega)
    return s_f, s_q, lam_used


def sweep_curve(
    params: OptomechParams,
    omegas: np.ndarray,
    kind: str = "detuned",
    lambda_policy: str = "off",
    lam: complex = 0j,
    opt_config: LambdaOptConfig | None = None,
) -> SensitivityCurve:
    """Evaluate sensitivities and reference floors over a frequency grid."""
    omegas = np.asarray(omegas, dtype=float)
    n = len(omegas)
    s_f = np.empty(n)
    s_q = np.empty(n)
    lams = np.empty(n, dtype=complex)
    for i, w in enumerate(omegas):
        s_f[i], s_q[i], lams[i] = sensitivity_point(
            params, w, kind, lambda_policy, lam, opt_config
        )
    wm, gm = params.omega_m, params.gamma_m
    curve = SensitivityCurve(
        omega=omegas.copy(),
        s_f=s_f,
        s_q=s_q,
        sql_f=np.array([sql_force(wm, gm, w) for w in omegas]),
        uql_f=np.array([uql_force(wm, gm, w) for w in omegas]),
        sql_q=np.array([sql_displacement(wm, gm, w) for w in omegas]),
        uql_q=np.array([uql_displacement(wm, gm, w) for w in omegas]),
        lam=None if lambda_policy == "off" else lams,
    )
    return curve


def loop_factor_at(params: OptomechParams, model: StateSpaceModel, omega: float) -> complex:
    """Closed-loop denominator from the state-space identification.

    The bare mechanical response divided by the model's force-to-position
    transfer; equals one whenever the loop is open.
    """
    chi = mech_susceptibility(params.omega_m, params.gamma_m, omega)
    return chi / force_to_displacement(model, omega)
