"""Physical configuration in dimensionless form.

Units: c = 1 and L = 1, so every rate is measured in c/L and every
velocity in units of c.  The Stokes Rabi frequency is stored in units of
g*sqrt(n*|v0|/c), which makes the mixing angle a function of the scaled
profile alone: tan(theta) = 1/omega.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import InvariantError, NonPositiveVelocity, NonTransportingChannel

DISPERSION_FACTORS = (0.5, 1.0)


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless system parameters.

    Parameters
    ----------
    alpha:
        Opacity g^2 n L / (gamma c) of the beam without EIT.
    r:
        Signed velocity ratio v0/c.
    gamma_tilde:
        Excited-state loss rate gamma L / c.
    x:
        Scaled two-photon detuning delta*gamma / (g^2 n v0/c).
    big_delta:
        Single-photon detuning in units of gamma.
    length_L:
        Interaction length; fixed to 1.
    """

    alpha: float
    r: float
    gamma_tilde: float
    x: float = 0.0
    big_delta: float = 0.0
    length_L: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvariantError(f"alpha must be > 0, got {self.alpha}")
        if not self.gamma_tilde > 0:
            raise InvariantError(f"gamma_tilde must be > 0, got {self.gamma_tilde}")
        if self.length_L != 1.0:
            raise InvariantError("length_L is the normalization unit and must be 1")
        for name in ("alpha", "r", "gamma_tilde", "x", "big_delta"):
            if not math.isfinite(getattr(self, name)):
                raise InvariantError(f"{name} must be finite")

    @property
    def coupling_G(self) -> float:
        """g^2 n in units of c/L."""
        return self.alpha * self.gamma_tilde

    @property
    def gamma(self) -> float:
        return self.gamma_tilde

    @property
    def delta(self) -> float:
        """Two-photon detuning delta in units of c/L, recovered from ``x``."""
        return self.x * self.coupling_G * self.r / self.gamma_tilde

    @property
    def Delta(self) -> float:
        """Single-photon detuning in units of c/L."""
        return self.big_delta * self.gamma_tilde

    @property
    def omega_unit(self) -> float:
        """Absolute Rabi frequency corresponding to one scaled unit."""
        return math.sqrt(self.coupling_G * abs(self.r))

    def require_transport(self) -> None:
        if self.r == 0:
            raise NonPositiveVelocity("transfer requires a moving beam (r != 0)")

    def to_dict(self) -> dict:
        return asdict(self)


class ProfileKind(str, Enum):
    TANH_RAMP_DOWN = "TanhRampDown"
    COS_SQUARED_RAMP = "CosSquaredRamp"
    CONSTANT = "Constant"
    TABULATED = "Tabulated"


@dataclass(frozen=True)
class StokesProfile:
    """Spatial Stokes Rabi frequency Omega0(z) in scaled units.

    ``TanhRampDown`` falls from ``omega_max`` to ``omega_min`` around
    ``center`` over a length ``width``.  ``CosSquaredRamp`` does the same
    with a cos^2 shoulder of total length ``width`` that is exactly flat
    outside the ramp.  ``Tabulated`` interpolates ``samples`` with a
    shape-preserving cubic.  All kinds are clamped from below at
    ``omega_min``.
    """

    kind: ProfileKind = ProfileKind.TANH_RAMP_DOWN
    omega_max: float = 100.0
    omega_min: float = 1e-3
    center: float = 0.5
    width: float = 0.1
    samples: tuple[tuple[float, float], ...] | None = None
    phase_velocity: float | None = None  # c' metadata, not used dynamically

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if not self.omega_min > 0:
            raise InvariantError("omega_min must be strictly positive")
        if self.omega_max < self.omega_min:
            raise InvariantError("omega_max must be >= omega_min")
        if not self.width > 0:
            raise InvariantError("width must be > 0")
        if self.kind is ProfileKind.TABULATED:
            if not self.samples or len(self.samples) < 2:
                raise InvariantError("Tabulated profile needs at least two samples")
            zs = np.array([s[0] for s in self.samples], dtype=float)
            ws = np.array([s[1] for s in self.samples], dtype=float)
            if np.any(np.diff(zs) <= 0):
                raise InvariantError("Tabulated z samples must be strictly increasing")
            if zs[0] > 0 or zs[-1] < 1:
                raise InvariantError("Tabulated samples must cover [0, L]")
            if np.any(ws <= 0):
                raise InvariantError("Tabulated Omega0 samples must be positive")
            object.__setattr__(
                self, "samples", tuple((float(a), float(b)) for a, b in self.samples)
            )
            object.__setattr__(self, "_interp", PchipInterpolator(zs, ws))

    @classmethod
    def tabulate(cls, z: Sequence[float], omega: Sequence[float], **kw) -> "StokesProfile":
        return cls(kind=ProfileKind.TABULATED, samples=tuple(zip(z, omega)), **kw)

    @property
    def is_ramp(self) -> bool:
        return self.kind is not ProfileKind.CONSTANT

    def _raw(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        span = self.omega_max - self.omega_min
        if self.kind is ProfileKind.TANH_RAMP_DOWN:
            u = (z - self.center) / self.width
            th = np.tanh(u)
            return (
                self.omega_min + 0.5 * span * (1.0 - th),
                -0.5 * span * (1.0 - th**2) / self.width,
            )
        if self.kind is ProfileKind.COS_SQUARED_RAMP:
            s = np.clip((z - self.center) / self.width + 0.5, 0.0, 1.0)
            inside = (s > 0) & (s < 1)
            arg = 0.5 * np.pi * s
            val = self.omega_min + span * np.cos(arg) ** 2
            der = np.where(inside, -span * np.pi * np.sin(2 * arg) / (2 * self.width), 0.0)
            return val, der
        if self.kind is ProfileKind.CONSTANT:
            return np.full_like(z, self.omega_max), np.zeros_like(z)
        interp = self._interp  # type: ignore[attr-defined]
        return interp(z), interp.derivative()(z)

    def omega(self, z):
        """Scaled Rabi frequency at ``z`` (floor enforced)."""
        z = np.asarray(z, dtype=float)
        val, _ = self._raw(z)
        return np.maximum(val, self.omega_min)

    def domega(self, z):
        """d(omega)/dz; zero where the floor is active."""
        z = np.asarray(z, dtype=float)
        val, der = self._raw(z)
        return np.where(val > self.omega_min, der, 0.0)

    def omega_abs(self, params: SystemParams, z):
        """Rabi frequency in units of c/L."""
        return params.omega_unit * self.omega(z)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "omega_max": self.omega_max,
            "omega_min": self.omega_min,
            "center": self.center,
            "width": self.width,
        }
        if self.samples is not None:
            d["samples"] = [list(s) for s in self.samples]
        if self.phase_velocity is not None:
            d["phase_velocity"] = self.phase_velocity
        return d


@dataclass(frozen=True)
class VelocityClass:
    """One velocity class.

    ``k`` is hbar*k_l/m expressed in units of c; the class advects at
    ``dispersion_factor * k``.
    """

    k: float
    xi: float
    delta: float = 0.0
    big_delta: float = 0.0


@dataclass(frozen=True)
class VelocityDistribution:
    """Discrete velocity distribution of the atomic beam.

    ``pump_recoil`` is hbar*k_p/m in units of c and enters only the
    excited-state advection speed.  ``beat_k`` is (k_p - k_s) L and enters
    only the Doppler feasibility check.
    """

    classes: tuple[VelocityClass, ...]
    dispersion_factor: float = 0.5
    pump_recoil: float = 0.0
    beat_k: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise InvariantError("at least one velocity class is required")
        if self.dispersion_factor not in DISPERSION_FACTORS:
            raise InvariantError(f"dispersion_factor must be one of {DISPERSION_FACTORS}")
        xi = np.array([c.xi for c in self.classes])
        if np.any(xi < 0):
            raise InvariantError("velocity-class weights must be non-negative")
        if abs(xi.sum() - 1.0) > 1e-12:
            raise InvariantError(f"velocity-class weights must sum to 1, got {xi.sum():.15g}")

    @classmethod
    def single(cls, params: SystemParams, dispersion_factor: float = 0.5, **kw):
        """One class at the central velocity, detuned by ``params``."""
        c = VelocityClass(
            k=params.r / dispersion_factor, xi=1.0, delta=params.delta, big_delta=params.Delta
        )
        return cls(classes=(c,), dispersion_factor=dispersion_factor, **kw)

    @classmethod
    def gaussian(
        cls,
        params: SystemParams,
        spread: float,
        n_classes: int = 5,
        beat_k: float = 0.0,
        dispersion_factor: float = 0.5,
        pump_recoil: float = 0.0,
    ):
        """Symmetric Gauss-Hermite discretization of a velocity spread.

        ``spread`` is the rms velocity offset in units of c.  Each class
        picks up the Doppler two-photon detuning dv * beat_k on top of the
        common detuning from ``params``.
        """
        nodes, weights = np.polynomial.hermite_e.hermegauss(n_classes)
        weights = weights / weights.sum()
        classes = []
        for node, w in zip(nodes, weights):
            dv = spread * node
            classes.append(
                VelocityClass(
                    k=(params.r + dv) / dispersion_factor,
                    xi=float(w),
                    delta=params.delta + dv * beat_k,
                    big_delta=params.Delta,
                )
            )
        # renormalize exactly so the invariant holds to the last bit
        total = math.fsum(c.xi for c in classes)
        classes = [VelocityClass(c.k, c.xi / total, c.delta, c.big_delta) for c in classes]
        return cls(tuple(classes), dispersion_factor, pump_recoil, beat_k)

    @property
    def xi(self) -> np.ndarray:
        return np.array([c.xi for c in self.classes])

    @property
    def velocities(self) -> np.ndarray:
        """Advection speed of the ground and storage states per class."""
        return self.dispersion_factor * np.array([c.k for c in self.classes])

    @property
    def excited_velocities(self) -> np.ndarray:
        return self.dispersion_factor * (
            np.array([c.k for c in self.classes]) + self.pump_recoil
        )

    @property
    def mean_velocity(self) -> float:
        return float(np.dot(self.xi, self.velocities))

    def check_against(self, params: SystemParams, rtol: float = 1e-9) -> None:
        v0 = self.mean_velocity
        if not math.isclose(v0, params.r, rel_tol=rtol, abs_tol=1e-15):
            raise InvariantError(
                f"weighted mean velocity {v0:.12g} does not match params.r={params.r:.12g}"
            )

    def to_dict(self) -> dict:
        return {
            "classes": [asdict(c) for c in self.classes],
            "dispersion_factor": self.dispersion_factor,
            "pump_recoil": self.pump_recoil,
            "beat_k": self.beat_k,
        }


# --- operations ---------------------------------------------------------


def mixing_angle(params: SystemParams, profile: StokesProfile, z):
    """Mixing angle theta(z) with tan^2(theta) = (g^2 n / Omega0^2) * (v0/c).

    Raises
    ------
    NonPositiveVelocity
        If ``params.r <= 0``.
    """
    if params.r <= 0:
        raise NonPositiveVelocity("mixing angle is defined only for r > 0")
    omega_abs = profile.omega_abs(params, z)
    return np.arctan2(math.sqrt(params.coupling_G * params.r), omega_abs)


def mixing_angle_derivative(params: SystemParams, profile: StokesProfile, z):
    if params.r <= 0:
        raise NonPositiveVelocity("mixing angle is defined only for r > 0")
    w = profile.omega(z)
    return -profile.domega(z) / (1.0 + w * w)


def group_velocity_at(params: SystemParams, omega0):
    """Group velocity for an absolute Rabi frequency ``omega0`` (c/L units)."""
    om2 = np.asarray(omega0, dtype=float) ** 2
    G = params.coupling_G
    return (om2 + G * params.r) / (om2 + G)


def group_velocity(params: SystemParams, profile: StokesProfile, z):
    """Group velocity v_gr(z) = c (1 + G r / Omega0^2) / (1 + G / Omega0^2)."""
    return group_velocity_at(params, profile.omega_abs(params, z))


def _breakpoints(profile: StokesProfile, a: float, b: float) -> list[float]:
    if profile.kind is ProfileKind.TABULATED:
        pts = [s[0] for s in profile.samples]
    elif profile.kind is ProfileKind.CONSTANT:
        pts = []
    else:
        c, w = profile.center, profile.width
        pts = [c - w, c - w / 2, c, c + w / 2, c + w, c + 2 * w, c + 3 * w]
    return [p for p in pts if a < p < b]


def _quad(fun, a: float, b: float, profile: StokesProfile, epsrel: float) -> float:
    if b <= a:
        return 0.0
    val, _ = integrate.quad(
        fun,
        a,
        b,
        epsabs=0.0,
        epsrel=epsrel,
        limit=500,
        points=_breakpoints(profile, a, b) or None,
    )
    return val


def delay_tau(params: SystemParams, profile: StokesProfile, z, epsrel: float = 1e-9):
    """Group delay tau(z) = int_0^z dz' / v_gr(z').

    ``z`` may be a scalar or an array; arrays are integrated piecewise
    between sorted sample points and accumulated.

    Raises
    ------
    NonTransportingChannel
        If v_gr <= 0 anywhere on [0, max(z)].
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    zmax = float(z_arr.max())
    probe = np.linspace(0.0, max(zmax, 0.0), 2001)
    if np.any(group_velocity(params, profile, probe) <= 0):
        raise NonTransportingChannel("group velocity is non-positive inside [0, z]")

    def inv_vg(s):
        return 1.0 / float(group_velocity(params, profile, s))

    order = np.argsort(z_arr)
    out = np.empty_like(z_arr)
    acc, last = 0.0, 0.0
    for idx in order:
        zi = z_arr[idx]
        acc += _quad(inv_vg, last, zi, profile, epsrel)
        last = zi
        out[idx] = acc
    if np.ndim(z) == 0:
        return float(out[0])
    return out


# --- feasibility --------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    """Margins that turn asymptotic inequalities into binary checks."""

    much_less: float = 0.1
    much_greater: float = 10.0
    weak_excitation: float = 0.1


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str


@dataclass(frozen=True)
class FeasibilityReport:
    two_photon: ConditionCheck
    doppler: ConditionCheck
    adiabaticity: ConditionCheck
    opacity: ConditionCheck
    adiabatic_loss: float | None = None

    @property
    def checks(self) -> tuple[ConditionCheck, ...]:
        return (self.two_photon, self.doppler, self.adiabaticity, self.opacity)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = {c.name: asdict(c) for c in self.checks}
        d["all_passed"] = self.all_passed
        if self.adiabatic_loss is not None:
            d["adiabatic_loss"] = self.adiabatic_loss
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def adiabaticity_integral(params: SystemParams, profile: StokesProfile) -> float:
    """gamma * int_0^L v0 theta'(z)^2 / (g^2 n + Omega0(z)^2) dz."""
    G, r, gamma = params.coupling_G, params.r, params.gamma

    def integrand(z):
        th_p = float(mixing_angle_derivative(params, profile, z))
        om2 = float(profile.omega_abs(params, z)) ** 2
        return r * th_p * th_p / (G + om2)

    return gamma * _quad(integrand, 0.0, params.length_L, profile, 1e-10)


def adiabatic_loss_exponent(params: SystemParams, profile: StokesProfile) -> float:
    """Amplitude decay exponent from finite ramp steepness at delta = 0.

    Returns (gamma / g^2 n) * int_0^L sin^2(theta) theta'(z)^2 dz.  The flux
    carried onto the atoms is reduced by exp(-2 * exponent) to leading order.
    """
    G, gamma = params.coupling_G, params.gamma

    def integrand(z):
        th = float(mixing_angle(params, profile, z))
        th_p = float(mixing_angle_derivative(params, profile, z))
        return math.sin(th) ** 2 * th_p * th_p

    return gamma / G * _quad(integrand, 0.0, params.length_L, profile, 1e-10)


def check_feasibility(
    params: SystemParams,
    profile: StokesProfile,
    velocities: VelocityDistribution | None = None,
    thresholds: Thresholds = Thresholds(),
) -> FeasibilityReport:
    """Evaluate the two-photon, Doppler, adiabaticity and opacity conditions.

    Infeasible configurations are reported, never rejected.
    """
    if velocities is None:
        velocities = VelocityDistribution.single(params)
    params.require_transport()
    v0 = abs(params.r)
    L = params.length_L
    ml, mg = thresholds.much_less, thresholds.much_greater

    max_delta = max(abs(c.delta) for c in velocities.classes)
    tp = max_delta * L / v0
    dv = np.max(np.abs(velocities.velocities - velocities.mean_velocity))
    dop = float(dv / v0 * abs(velocities.beat_k))
    if params.r > 0:
        adia = adiabaticity_integral(params, profile)
        loss = 1.0 - math.exp(-2.0 * adiabatic_loss_exponent(params, profile))
    else:
        adia, loss = math.inf, None
    ratio = params.alpha / v0
    return FeasibilityReport(
        two_photon=ConditionCheck("two_photon", tp, ml, tp < ml, "|delta| L / v0 << 1"),
        doppler=ConditionCheck(
            "doppler", dop, ml, dop < ml, "|dv|/v0 * (k_p - k_s) L << 1"
        ),
        adiabaticity=ConditionCheck(
            "adiabaticity", adia, ml, adia < ml,
            "gamma int v0 theta'^2 / (g^2 n + Omega0^2) dz << 1",
        ),
        opacity=ConditionCheck("opacity", ratio, mg, ratio > mg, "alpha / (v0/c) >> 1"),
        adiabatic_loss=loss,
    )
