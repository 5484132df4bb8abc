"""Closed-form adiabatic transfer of a cw light field onto the atomic beam.

The light envelope follows E(z, t) = E(0, t - tau(z)) cos(theta(z)) / cos(theta(0))
and the storage-state amplitude is slaved to it through
Phi3 = -sqrt(c/v0) tan(theta) E.  A two-photon detuning adds a dissipative
amplitude loss factor eta(z).
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import (
    BoundInapplicableWarning,
    DegenerateProfile,
    IncompleteTransferWarning,
    OutOfRecord,
    WindowTooShort,
)
from .model import (
    StokesProfile,
    SystemParams,
    _breakpoints,
    delay_tau,
    group_velocity,
    mixing_angle,
)

Envelope = Callable[[np.ndarray], np.ndarray]

CSV_COLUMNS = ("z", "theta", "t", "s", "eta", "tau", "v_gr")


@dataclass(frozen=True)
class SampledEnvelope:
    """Input envelope known only inside a recorded window.

    Evaluating before ``t[0]`` raises :class:`OutOfRecord`; after the
    window the envelope is taken as zero.
    """

    t: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t[0] - 1e-12):
            raise OutOfRecord(f"requested time {float(np.min(t)):.6g} precedes record start")
        re = np.interp(t, self.t, self.values.real, right=0.0)
        im = np.interp(t, self.t, self.values.imag, right=0.0)
        return re + 1j * im


def gaussian_envelope(t0: float, sigma: float, amplitude: complex = 1.0) -> Envelope:
    """Gaussian field envelope with intensity rms duration ``sigma``."""

    def env(t):
        t = np.asarray(t, dtype=float)
        return amplitude * np.exp(-((t - t0) ** 2) / (4.0 * sigma**2))

    return env


@dataclass(frozen=True)
class TransferMap:
    """Sampled adiabatic transfer map.

    ``t`` and ``s`` are flux-normalized light and atom amplitudes, both
    scaled by the cumulative loss factor ``eta``.
    """

    z: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    s: np.ndarray
    eta: np.ndarray
    tau: np.ndarray
    v_gr: np.ndarray
    r: float

    @property
    def cos_theta0(self) -> float:
        return float(math.cos(self.theta[0]))

    @property
    def residual_photon_fraction(self) -> float:
        """cos^2(theta(L)): light left untransferred at the exit."""
        return float(math.cos(self.theta[-1]) ** 2)

    def at(self, name: str, z):
        return np.interp(z, self.z, getattr(self, name))

    def to_rows(self):
        for row in zip(*(getattr(self, c) for c in CSV_COLUMNS)):
            yield [float(v) for v in row]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.to_rows():
                w.writerow([repr(v) for v in row])

    def to_dict(self) -> dict:
        d = {c: getattr(self, c).tolist() for c in CSV_COLUMNS}
        d["r"] = self.r
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TransferMap":
        return cls(**{c: np.asarray(d[c], dtype=float) for c in CSV_COLUMNS}, r=float(d["r"]))

    @classmethod
    def from_json(cls, text: str) -> "TransferMap":
        return cls.from_dict(json.loads(text))


def _eta_integrand(theta, x):
    # cos^2 x^2 / (cot^4 + x^2) rewritten to stay finite as theta -> 0
    s2 = np.sin(theta) ** 2
    c2 = np.cos(theta) ** 2
    return s2 * s2 * c2 * x * x / (c2 * c2 + x * x * s2 * s2)


def eta_from_theta(alpha: float, x: float, theta_of_zeta, points=None, epsrel: float = 1e-8) -> float:
    """Loss factor for an arbitrary mixing-angle profile theta(zeta), zeta in [0, 1]."""
    if alpha == 0 or x == 0:
        return 1.0
    val, _ = integrate.quad(
        lambda zeta: float(_eta_integrand(theta_of_zeta(zeta), x)),
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=epsrel,
        limit=500,
        points=points,
    )
    return math.exp(-alpha * val)


@dataclass(frozen=True)
class LossFactor:
    eta: float
    z: np.ndarray
    eta_z: np.ndarray


def loss_factor_eta(
    params: SystemParams,
    profile: StokesProfile,
    x: float | None = None,
    n_samples: int = 201,
    epsrel: float = 1e-8,
) -> LossFactor:
    """Amplitude loss factor from a constant two-photon detuning.

    Returns the total factor at z = L together with the cumulative
    profile eta(z) on a uniform grid.
    """
    x = params.x if x is None else x
    z = np.linspace(0.0, params.length_L, n_samples)
    if x == 0:
        return LossFactor(1.0, z, np.ones_like(z))

    def theta(zeta):
        return mixing_angle(params, profile, zeta * params.length_L)

    def f(zeta):
        return float(_eta_integrand(theta(zeta), x))

    pieces = np.zeros(n_samples)
    for i in range(1, n_samples):
        a, b = z[i - 1], z[i]
        pieces[i], _ = integrate.quad(
            f, a, b, epsabs=0.0, epsrel=epsrel, limit=200,
            points=_breakpoints(profile, a, b) or None,
        )
    expo = params.alpha * np.cumsum(pieces)
    eta_z = np.exp(-expo)
    return LossFactor(float(eta_z[-1]), z, eta_z)


def loss_bound(params: SystemParams, x: float | None = None) -> float:
    """Lower bound exp(-alpha |x| / 2) on the loss factor."""
    x = params.x if x is None else x
    if abs(x) >= 0.3:
        warnings.warn(
            f"|x|={abs(x):.3g} is not small; the loss bound may be loose",
            BoundInapplicableWarning,
            stacklevel=2,
        )
    return math.exp(-params.alpha * abs(x) / 2.0)


def build_transfer_map(
    params: SystemParams,
    profile: StokesProfile,
    n_samples: int = 201,
    x: float | None = None,
) -> TransferMap:
    """Sample the adiabatic transfer map on a uniform grid over [0, L].

    Raises
    ------
    NonPositiveVelocity
        For r <= 0.
    DegenerateProfile
        If cos(theta(0)) < 1e-6.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    z = np.linspace(0.0, params.length_L, n_samples)
    theta = mixing_angle(params, profile, z)
    c0 = math.cos(theta[0])
    if c0 < 1e-6:
        raise DegenerateProfile(f"cos(theta(0)) = {c0:.3g}; input is already atomic")
    loss = loss_factor_eta(params, profile, x=x, n_samples=n_samples)
    eta = loss.eta_z
    return TransferMap(
        z=z,
        theta=theta,
        t=eta * np.cos(theta) / c0,
        s=eta * np.sin(theta) / c0,
        eta=eta,
        tau=delay_tau(params, profile, z),
        v_gr=group_velocity(params, profile, z),
        r=params.r,
    )


def field_solution(tmap: TransferMap, input_envelope: Envelope, z, t):
    """Light envelope E(z, t): the delayed, rescaled input."""
    z = np.asarray(z, dtype=float)
    tau = tmap.at("tau", z)
    return tmap.at("t", z) * input_envelope(np.asarray(t, dtype=float) - tau)


def atom_output(tmap: TransferMap, input_envelope: Envelope, t, ideal: bool = False):
    """Storage-state density amplitude Phi3(L, t).

    With ``ideal=True`` returns -sqrt(c/v0) eta(L) E(0, t - tau(L)) exactly;
    otherwise keeps the sin(theta(L)) / cos(theta(0)) factor from the
    finite Stokes floor.  Warns when more than 1e-3 of the light remains.
    """
    resid = tmap.residual_photon_fraction
    if resid > 1e-3:
        warnings.warn(
            f"residual photon fraction {resid:.3g} exceeds 1e-3",
            IncompleteTransferWarning,
            stacklevel=2,
        )
    amp = tmap.eta[-1] if ideal else tmap.s[-1]
    delayed = input_envelope(np.asarray(t, dtype=float) - tmap.tau[-1])
    return -math.sqrt(1.0 / tmap.r) * amp * delayed


@dataclass(frozen=True)
class FluxBalance:
    photon_flux_in: float
    atom_flux_out: float
    relative_mismatch: float


def flux_balance(
    tmap: TransferMap,
    input_envelope: Envelope,
    window: tuple[float, float],
    n_t: int = 8001,
    edge_tol: float = 1e-9,
) -> FluxBalance:
    """Compare integrated photon flux in with atom flux out over ``window``.

    The mismatch is measured against eta(L)^2 times the photon flux, so it
    vanishes for a complete transfer with or without detuning losses.
    """
    t = np.linspace(window[0], window[1], n_t)
    e_in = input_envelope(t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IncompleteTransferWarning)
        phi3 = atom_output(tmap, input_envelope, t)
    i_in = np.abs(e_in) ** 2
    i_out = tmap.r * np.abs(phi3) ** 2
    for series, label in ((i_in, "input"), (i_out, "output")):
        peak = series.max()
        if peak > 0 and max(series[0], series[-1]) > edge_tol * peak:
            raise WindowTooShort(f"{label} support is clipped by the window")
    n_in = float(integrate.simpson(i_in, x=t))
    n_out = float(integrate.simpson(i_out, x=t))
    if n_in == 0.0:
        return FluxBalance(0.0, n_out, 0.0 if n_out == 0.0 else math.inf)
    expected = tmap.eta[-1] ** 2 * n_in
    return FluxBalance(n_in, n_out, abs(n_out - expected) / expected)
