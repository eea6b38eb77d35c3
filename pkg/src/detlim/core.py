"""Noise algebra for linear quantum detectors with feedback.

Everything here works at a single frequency on scalar spectra: the added
displacement noise of a feedback-assisted linear measurement, its conversion
to force and displacement sensitivity, the dissipation-tied quantum-limit
reference curves, positivity certification of detector noise models, a
sampler of certified-physical models, and a brute-force optimizer over the
loop parameters used as an oracle for the analytic optimum.

Conventions: hbar = 1 and one common arbitrary rate unit throughout; spectra
are symmetrized (half anticommutator) and dimensionless. Cross-spectra are
stored for one ordering only; the reversed ordering is the complex conjugate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


class DetectorModelError(ValueError):
    """Domain error raised by detector-model operations."""


class PoleError(DetectorModelError):
    """Response function evaluated exactly at an undamped pole."""


class LoopSingularityError(DetectorModelError):
    """Closed-loop denominator is exactly zero (infinite loop gain)."""


class UnphysicalModelError(DetectorModelError):
    """Noise model or susceptibility violates a physicality precondition."""


class SamplerExhaustedError(RuntimeError):
    """Rejection sampler ran out of retries; indicates a bug, not physics."""


# ---------------------------------------------------------------------------
# Susceptibilities and quantum-limit reference curves
# ---------------------------------------------------------------------------

def mech_susceptibility(omega_m: float, gamma_m: float, omega: float) -> complex:
    """Damped-oscillator displacement response to force.

    chi(w) = omega_m / ((gamma_m/2 - i*w)**2 + omega_m**2)

    Raises PoleError when gamma_m == 0 and |w| == omega_m (undamped
    resonance, denominator exactly zero).
    """
    if omega_m <= 0:
        raise ValueError(f"omega_m must be positive, got {omega_m}")
    if gamma_m < 0:
        raise ValueError(f"gamma_m must be nonnegative, got {gamma_m}")
    den = (gamma_m / 2.0 - 1j * omega) ** 2 + omega_m ** 2
    if den == 0:
        raise PoleError(
            f"undamped resonance at omega={omega}: response diverges, use gamma_m > 0"
        )
    return omega_m / den


def uql_force(omega_m: float, gamma_m: float, omega: float) -> float:
    """Fundamental force-sensitivity floor |Im(1/chi)| = |w|*gamma_m/omega_m."""
    if omega_m <= 0:
        raise ValueError(f"omega_m must be positive, got {omega_m}")
    if gamma_m < 0:
        raise ValueError(f"gamma_m must be nonnegative, got {gamma_m}")
    return abs(omega) * gamma_m / omega_m


def uql_displacement(omega_m: float, gamma_m: float, omega: float) -> float:
    """Fundamental displacement-sensitivity floor |Im chi(w)|."""
    return abs(mech_susceptibility(omega_m, gamma_m, omega).imag)


def sql_force(omega_m: float, gamma_m: float, omega: float) -> float:
    """Shot/backaction balance floor for force, 1/|chi(w)|."""
    return 1.0 / abs(mech_susceptibility(omega_m, gamma_m, omega))


def sql_displacement(omega_m: float, gamma_m: float, omega: float) -> float:
    """Shot/backaction balance floor for displacement, |chi(w)|."""
    return abs(mech_susceptibility(omega_m, gamma_m, omega))


OSCILLATOR = "closed-form-oscillator"
TABULATED = "tabulated"


@dataclass(frozen=True)
class Susceptibility:
    """Complex frequency response chi(omega), callable at any frequency.

    Either the closed-form damped oscillator (carrying omega_m, gamma_m) or a
    table of (omega, value) samples. Tabulated input must respect the reality
    symmetry chi(-w) = conj(chi(w)) wherever both frequencies are present;
    evaluation interpolates linearly and refuses to extrapolate.
    """

    kind: str
    omega_m: float = 0.0
    gamma_m: float = 0.0
    points: tuple[tuple[float, complex], ...] = ()

    @classmethod
    def oscillator(cls, omega_m: float, gamma_m: float) -> "Susceptibility":
        if omega_m <= 0:
            raise ValueError(f"omega_m must be positive, got {omega_m}")
        if gamma_m < 0:
            raise ValueError(f"gamma_m must be nonnegative, got {gamma_m}")
        return cls(kind=OSCILLATOR, omega_m=float(omega_m), gamma_m=float(gamma_m))

    @classmethod
    def tabulated(cls, points, rtol: float = 1e-9) -> "Susceptibility":
        pts = sorted(((float(w), complex(v)) for w, v in points), key=lambda t: t[0])
        if len(pts) < 2:
            raise ValueError("tabulated susceptibility needs at least two points")
        by_omega = dict(pts)
        if len(by_omega) != len(pts):
            raise ValueError("tabulated susceptibility has duplicate frequencies")
        for w, v in pts:
            mirror = by_omega.get(-w)
            if mirror is not None and abs(v - mirror.conjugate()) > rtol * max(1.0, abs(v)):
                raise ValueError(
                    f"tabulated response breaks chi(-w) == conj(chi(w)) at omega={w}"
                )
        return cls(kind=TABULATED, points=tuple(pts))

    def __call__(self, omega: float) -> complex:
        if self.kind == OSCILLATOR:
            return mech_susceptibility(self.omega_m, self.gamma_m, omega)
        ws = np.array([w for w, _ in self.points])
        vs = np.array([v for _, v in self.points])
        if omega < ws[0] or omega > ws[-1]:
            raise ValueError(f"omega={omega} outside tabulated range [{ws[0]}, {ws[-1]}]")
        return complex(np.interp(omega, ws, vs.real) + 1j * np.interp(omega, ws, vs.imag))


# ---------------------------------------------------------------------------
# Detector noise models and the added-noise spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorNoiseModel:
    """Symmetrized detector noise at a single frequency.

    s_yy: feedback-monitor port spectrum, s_zz: readout (shot) spectrum,
    s_ff: backaction force spectrum; s_yf, s_zf, s_yz: cross-spectra;
    chi_ff: backaction response of the detector force to displacement.
    """

    s_yy: float
    s_zz: float
    s_ff: float
    s_yf: complex = 0j
    s_zf: complex = 0j
    s_yz: complex = 0j
    chi_ff: complex = 0j

    def __post_init__(self):
        for name in ("s_yy", "s_zz", "s_ff"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
            object.__setattr__(self, name, value)
        for name in ("s_yf", "s_zf", "s_yz", "chi_ff"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class LoopGains:
    """Detector-oscillator coupling g > 0 and feedback transfer value lam."""

    g: float
    lam: complex = 0j

    def __post_init__(self):
        g = float(self.g)
        if not math.isfinite(g) or g <= 0:
            raise ValueError(f"coupling g must be positive and finite, got {g}")
        lam = complex(self.lam)
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
            raise ValueError(f"lam must be finite, got {lam}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lam", lam)


def loop_factor(gains: LoopGains, chi_qq: complex, chi_ff: complex) -> complex:
    """Closed-loop denominator 1 - g*lam - g**2 * chi_qq * chi_ff."""
    g = gains.g
    return 1.0 - g * gains.lam - g * g * chi_qq * chi_ff


def added_noise_spectrum(
    gains: LoopGains,
    noise: DetectorNoiseModel,
    chi_qq: complex,
    include_yz: bool = False,
) -> float:
    """Added displacement noise of the feedback loop, referred to the signal.

    The estimator noise is g*chi_qq*F + lam*Y + (kappa/g)*Z over the detector
    ports, with kappa the closed-loop denominator; this returns its
    symmetrized power spectrum. Intrinsic mechanical noise is excluded. The
    monitor-readout cross term (s_yz) is only applied when include_yz is set;
    the default matches the uncorrelated-port positivity constraint.
    """
    back = gains.g * chi_qq
    shot = loop_factor(gains, chi_qq, noise.chi_ff) / gains.g
    lam = gains.lam
    s = (
        abs(back) ** 2 * noise.s_ff
        + abs(lam) ** 2 * noise.s_yy
        + abs(shot) ** 2 * noise.s_zz
        + 2.0 * (back * lam.conjugate() * noise.s_yf.conjugate()).real
        + 2.0 * (back * shot.conjugate() * noise.s_zf.conjugate()).real
    )
    if include_yz:
        s += 2.0 * (lam * shot.conjugate() * noise.s_yz).real
    return float(s)


def force_sensitivity(added: float, chi_qq: complex) -> float:
    """Refer an added displacement-noise spectrum to the force input."""
    if chi_qq == 0:
        raise UnphysicalModelError("chi_qq = 0: force sensitivity undefined")
    return added / abs(chi_qq) ** 2


def displacement_sensitivity(
    added: float, gains: LoopGains, chi_qq: complex, chi_ff: complex
) -> float:
    """Refer an added noise spectrum to displacement through the closed loop."""
    kappa = loop_factor(gains, chi_qq, chi_ff)
    if kappa == 0:
        raise LoopSingularityError(
            f"closed-loop singularity: 1 - g*lam - g^2*chi_qq*chi_ff = 0 at g={gains.g}"
        )
    return added / abs(kappa) ** 2


# ---------------------------------------------------------------------------
# Analytic optimum over the loop parameters
# ---------------------------------------------------------------------------

def bound_coefficients(noise: DetectorNoiseModel) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the loop-optimized added-noise floor."""
    syy, szz, sff = noise.s_yy, noise.s_zz, noise.s_ff
    syf, szf, xff = noise.s_yf, noise.s_zf, noise.chi_ff
    a = szf.real * syy + syf.real * szz - xff.real * syy * szz
    b = szf.imag * syy + syf.imag * szz + xff.imag * syy * szz
    c = (
        sff * (syy + szz)
        + abs(xff) ** 2 * syy * szz
        - (syf.imag - szf.imag) ** 2
        - (syf.real - szf.real) ** 2
        + 2.0 * syy * (xff.imag * szf.imag - xff.real * szf.real)
        + 2.0 * szz * (xff.imag * syf.imag - xff.real * syf.real)
    ) * syy * szz
    return a, b, c


def analytic_optimum_bound(noise: DetectorNoiseModel, chi_qq: complex) -> float:
    """Added-noise floor after optimizing over coupling and feedback transfer.

    For any physical model this is >= |Im chi_qq|, saturating on boundary
    models; a negative discriminant signals an unphysical input.
    """
    s = noise.s_yy + noise.s_zz
    if s <= 0:
        raise UnphysicalModelError("s_yy + s_zz must be positive")
    a, b, c = bound_coefficients(noise)
    if c < 0:
        raise UnphysicalModelError(f"negative discriminant c={c}: model violates positivity")
    return 2.0 * (a * chi_qq.real + b * chi_qq.imag + abs(chi_qq) * math.sqrt(c)) / s


# ---------------------------------------------------------------------------
# Positivity certification and sampling of physical noise models
# ---------------------------------------------------------------------------

def uncertainty_matrix(noise: DetectorNoiseModel, sign: int = 1) -> np.ndarray:
    """3x3 Hermitian uncertainty matrix over the (Y, Z, F) ports.

    The monitor-readout off-diagonal is fixed at zero; sign selects one of
    the two commutator orientations (both must be positive semidefinite for
    a physical model).
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    h = 0.5j * sign
    return np.array(
        [
            [noise.s_yy, 0.0, noise.s_yf + h],
            [0.0, noise.s_zz, noise.s_zf + h],
            [
                noise.s_yf.conjugate() - h,
                noise.s_zf.conjugate() - h,
                noise.s_ff - sign * noise.chi_ff.imag,
            ],
        ],
        dtype=complex,
    )


def is_physical(noise: DetectorNoiseModel) -> bool:
    """True iff the uncertainty matrix is PSD for both sign choices.

    Eigenvalues down to -1e-12 times the trace scale are accepted so that
    boundary models (zero determinant) pass.
    """
    for sign in (1, -1):
        m = uncertainty_matrix(noise, sign)
        eps = 1e-12 * max(1.0, float(np.trace(m).real))
        if float(np.linalg.eigvalsh(m).min()) < -eps:
            return False
    return True


def _min_backaction_spectrum(noise_sans_ff: DetectorNoiseModel) -> float:
    """Smallest s_ff making the positivity constraint hold for both signs."""
    syy, szz = noise_sans_ff.s_yy, noise_sans_ff.s_zz
    syf, szf, xff = noise_sans_ff.s_yf, noise_sans_ff.s_zf, noise_sans_ff.chi_ff
    best = 0.0
    for sign in (1.0, -1.0):
        rhs = (
            (syy + szz) / 4.0
            + sign * (szf.imag * syy + syf.imag * szz)
            + abs(szf) ** 2 * syy
            + abs(syf) ** 2 * szz
            + sign * xff.imag * syy * szz
        )
        best = max(best, rhs / (syy * szz))
    return best


def sample_physical_noise(
    seed, scale: float = 1.0, max_tries: int = 100
) -> DetectorNoiseModel:
    """Draw a random detector noise model certified physical.

    Port spectra are uniform on (0, scale], cross-spectra and the backaction
    response are centered complex Gaussians, and the backaction spectrum is
    set to its positivity minimum plus a uniform nonnegative slack. Accepts
    an integer seed or a numpy Generator; fixed seeds reproduce exactly.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(max_tries):
        syy = scale * (1.0 - rng.uniform())
        szz = scale * (1.0 - rng.uniform())
        syf = complex(rng.normal(0.0, scale / 2), rng.normal(0.0, scale / 2))
        szf = complex(rng.normal(0.0, scale / 2), rng.normal(0.0, scale / 2))
        xff = complex(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0))
        partial = DetectorNoiseModel(syy, szz, 0.0, syf, szf, 0j, xff)
        sff = _min_backaction_spectrum(partial) + rng.uniform(0.0, scale)
        model = DetectorNoiseModel(syy, szz, sff, syf, szf, 0j, xff)
        if is_physical(model):
            return model
    raise SamplerExhaustedError(
        f"no physical model found in {max_tries} tries (scale={scale})"
    )


# ---------------------------------------------------------------------------
# Brute-force optimum (oracle for the analytic bound)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    """Deterministic multi-start search over coupling and feedback transfer."""

    g_min: float = 1e-3
    g_max: float = 1e3
    g_points: int = 25
    lam_radius: float = 8.0
    lam_radii: int = 6
    lam_phases: int = 8
    refine_starts: int = 5
    maxiter: int = 600
    xatol: float = 1e-10
    fatol: float = 1e-13


@dataclass(frozen=True)
class OptimumResult:
    value: float
    g: float
    lam: complex
    converged: bool


def numeric_optimum(
    noise: DetectorNoiseModel,
    chi_qq: complex,
    config: OptimizerConfig | None = None,
    fix_lambda: complex | None = None,
) -> OptimumResult:
    """Minimize the added noise over g > 0 and complex lam by direct search.

    Coarse log-grid over g crossed with a polar grid of lam values, followed
    by simplex refinement from the best starts. With fix_lambda the search
    runs over g alone. Non-convergence is reported through the result flag
    and a warning, never silently.
    """
    if not is_physical(noise):
        raise UnphysicalModelError("numeric_optimum requires a physical noise model")
    cfg = config or OptimizerConfig()

    if fix_lambda is None:
        lam_values = [0j]
        for r in np.geomspace(0.05, cfg.lam_radius, cfg.lam_radii):
            for k in range(cfg.lam_phases):
                lam_values.append(r * np.exp(2j * np.pi * k / cfg.lam_phases))

        def objective(x):
            gains = LoopGains(10.0 ** x[0], complex(x[1], x[2]))
            return added_noise_spectrum(gains, noise, chi_qq)

        def pack(g, lam):
            return [math.log10(g), lam.real, lam.imag]

    else:
        lam_fixed = complex(fix_lambda)
        lam_values = [lam_fixed]

        def objective(x):
            return added_noise_spectrum(LoopGains(10.0 ** x[0], lam_fixed), noise, chi_qq)

        def pack(g, lam):
            return [math.log10(g)]

    starts = []
    for g in np.geomspace(cfg.g_min, cfg.g_max, cfg.g_points):
        for lam in lam_values:
            gains = LoopGains(g, lam)
            starts.append((added_noise_spectrum(gains, noise, chi_qq), g, lam))
    starts.sort(key=lambda t: t[0])

    best_value, best_g, best_lam = starts[0]
    converged = False
    for value, g, lam in starts[: cfg.refine_starts]:
        res = minimize(
            objective,
            pack(g, lam),
            method="Nelder-Mead",
            options={"maxiter": cfg.maxiter, "xatol": cfg.xatol, "fatol": cfg.fatol},
        )
        if res.fun < best_value:
            best_value = float(res.fun)
            best_g = 10.0 ** res.x[0]
            best_lam = complex(res.x[1], res.x[2]) if fix_lambda is None else lam_fixed
        converged = converged or bool(res.success)
    if not converged:
        warnings.warn(
            f"numeric_optimum did not converge; best-so-far value {best_value}",
            RuntimeWarning,
            stacklevel=2,
        )
    return OptimumResult(best_value, float(best_g), best_lam, converged)
