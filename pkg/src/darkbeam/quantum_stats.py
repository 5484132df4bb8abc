"""Counting statistics and Gaussian entanglement through the transfer channel.

The transfer acts on the input temporal mode as a three-port partition:
photons survive with probability p, become storage-state atoms with q and
are lost with l = 1 - p - q.  Quadratures use hbar = 1 with vacuum
variance 1/2.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate

from .adiabatic_map import TransferMap, build_transfer_map
from .errors import InvariantError, UnphysicalCovariance
from .model import StokesProfile, SystemParams

VACUUM = 0.5


class InputKind(str, Enum):
    FOCK = "Fock"
    COHERENT = "Coherent"
    TWO_MODE_SQUEEZED = "TwoModeSqueezed"


@dataclass(frozen=True)
class QuantumInput:
    """State of the input light mode.

    For ``TwoModeSqueezed`` the statistics refer to one arm; the pair is
    handled by :func:`gaussian_channel_apply`.
    """

    kind: InputKind
    N: int = 0
    amplitude: complex = 0j
    r_squeeze: float = 0.0
    mode_envelope: object | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", InputKind(self.kind))
        if self.kind is InputKind.FOCK and (int(self.N) != self.N or self.N < 0):
            raise InvariantError("Fock photon number must be a non-negative integer")
        if self.r_squeeze < 0:
            raise InvariantError("squeezing parameter must be >= 0")
        if self.mode_envelope is not None:
            t, f = self.mode_envelope
            norm = integrate.trapezoid(np.abs(np.asarray(f)) ** 2, np.asarray(t))
            if abs(norm - 1.0) > 1e-6:
                raise InvariantError(f"mode envelope norm is {norm:.6g}, expected 1")

    @classmethod
    def fock(cls, N: int) -> "QuantumInput":
        return cls(InputKind.FOCK, N=N)

    @classmethod
    def coherent(cls, amplitude: complex) -> "QuantumInput":
        return cls(InputKind.COHERENT, amplitude=amplitude)

    @classmethod
    def two_mode_squeezed(cls, r_squeeze: float) -> "QuantumInput":
        return cls(InputKind.TWO_MODE_SQUEEZED, r_squeeze=r_squeeze)

    @property
    def mean(self) -> float:
        if self.kind is InputKind.FOCK:
            return float(self.N)
        if self.kind is InputKind.COHERENT:
            return abs(self.amplitude) ** 2
        return math.sinh(self.r_squeeze) ** 2

    def covariance(self) -> np.ndarray:
        """Single-mode covariance (x, p); Fock states are not Gaussian."""
        if self.kind is InputKind.FOCK:
            raise ValueError("Fock states have no Gaussian covariance")
        if self.kind is InputKind.COHERENT:
            return VACUUM * np.eye(2)
        return two_mode_squeezed_cov(self.r_squeeze)[:2, :2]

    def displacement(self) -> np.ndarray:
        if self.kind is InputKind.COHERENT:
            a = complex(self.amplitude)
            return math.sqrt(2.0) * np.array([a.real, a.imag])
        return np.zeros(2)


@dataclass(frozen=True)
class ChannelSplit:
    """Per-position photon / atom / loss probabilities."""

    p_light: np.ndarray
    q_atom: np.ndarray
    l_loss: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        p, q, l = (np.atleast_1d(np.asarray(a, dtype=float))
                   for a in (self.p_light, self.q_atom, self.l_loss))
        tol = 1e-12
        if np.any(p < -tol) or np.any(q < -tol) or np.any(l < -tol):
            raise InvariantError("channel probabilities must be non-negative")
        if np.any(np.abs(p + q + l - 1.0) > 1e-9):
            raise InvariantError("channel probabilities must sum to 1")
        object.__setattr__(self, "p_light", p)
        object.__setattr__(self, "q_atom", q)
        object.__setattr__(self, "l_loss", l)

    @classmethod
    def single(cls, p: float, q: float) -> "ChannelSplit":
        return cls(np.array([p]), np.array([q]), np.array([1.0 - p - q]))

    def index(self, z: float | None) -> int:
        if z is None:
            return -1
        if self.z is None:
            raise ValueError("split carries no z grid")
        return int(np.argmin(np.abs(self.z - z)))


def channel_from_map(tmap: TransferMap) -> ChannelSplit:
    """Port probabilities p = eta^2 cos^2(theta), q = eta^2 sin^2(theta).

    With a finite Stokes field at the entrance a fraction sin^2(theta(0))
    already sits on the atom port at z = 0.
    """
    eta2 = tmap.eta**2
    p = eta2 * np.cos(tmap.theta) ** 2
    q = eta2 * np.sin(tmap.theta) ** 2
    return ChannelSplit(p, q, np.clip(1.0 - eta2, 0.0, 1.0), tmap.z.copy())


@dataclass(frozen=True)
class CountStats:
    photon_mean: np.ndarray
    photon_var: np.ndarray
    atom_mean: np.ndarray
    atom_var: np.ndarray


def single_mode_number_moments(cov: np.ndarray, disp: np.ndarray | None = None) -> tuple[float, float]:
    """Photon-number mean and variance of a single-mode Gaussian state."""
    cov = np.asarray(cov, dtype=float)
    d = np.zeros(2) if disp is None else np.asarray(disp, dtype=float)
    mean = 0.5 * (np.trace(cov) + d @ d) - 0.5
    var = 0.5 * np.trace(cov @ cov) - 0.25 + d @ cov @ d
    return float(mean), float(var)


def _port_stats(inp: QuantumInput, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if inp.kind is InputKind.TWO_MODE_SQUEEZED:
        cov = inp.covariance()
        out = [single_mode_number_moments(Ti * cov + (1 - Ti) * VACUUM * np.eye(2))
               for Ti in np.atleast_1d(T)]
        arr = np.array(out).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]
    mean_in = inp.mean
    if inp.kind is InputKind.FOCK:
        fact2 = float(inp.N * (inp.N - 1))
    else:
        fact2 = mean_in**2
    mean = T * mean_in
    # normally ordered second moment plus explicit shot noise
    var = T * T * fact2 + mean - mean * mean
    return mean, np.maximum(var, 0.0)


def count_stats(inp: QuantumInput, split: ChannelSplit, z: float | None = None,
                all_z: bool = False) -> CountStats:
    """Integrated count mean and variance for photons and storage atoms.

    With ``all_z`` the statistics are returned on the whole split grid;
    otherwise at the sample nearest ``z`` (the exit if ``z`` is None).
    """
    if all_z:
        p, q = split.p_light, split.q_atom
    else:
        i = split.index(z)
        p, q = split.p_light[[i]], split.q_atom[[i]]
    pm, pv = _port_stats(inp, p)
    am, av = _port_stats(inp, q)
    if not all_z:
        pm, pv, am, av = (np.asarray(a)[0] for a in (pm, pv, am, av))
    return CountStats(pm, pv, am, av)


@dataclass(frozen=True)
class Fig2Table:
    z: np.ndarray
    n_mean: np.ndarray
    m_mean: np.ndarray
    n_var: np.ndarray
    m_var: np.ndarray
    omega_scaled: np.ndarray

    COLUMNS = ("z", "n_mean", "m_mean", "n_var", "m_var", "omega_scaled")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in zip(*(getattr(self, c) for c in self.COLUMNS)):
                w.writerow([repr(float(v)) for v in row])


def fig2_curves(params: SystemParams, profile: StokesProfile, N: int,
                n_samples: int = 401) -> Fig2Table:
    """Photon and storage-atom counts across the beam for a Fock input.

    Means and variances are divided by N.  The detuning is forced to zero
    so the curves describe the lossless exchange.
    """
    tmap = build_transfer_map(params, profile, n_samples=n_samples, x=0.0)
    split = channel_from_map(tmap)
    st = count_stats(QuantumInput.fock(N), split, all_z=True)
    return Fig2Table(
        z=tmap.z,
        n_mean=st.photon_mean / N,
        m_mean=st.atom_mean / N,
        n_var=st.photon_var / N,
        m_var=st.atom_var / N,
        omega_scaled=profile.omega(tmap.z),
    )


# --- Gaussian states ---------------------------------------------------------


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def vacuum_cov(n_modes: int = 2) -> np.ndarray:
    return VACUUM * np.eye(2 * n_modes)


def two_mode_squeezed_cov(r: float) -> np.ndarray:
    """Covariance of a two-mode squeezed vacuum, ordering (x1, p1, x2, p2)."""
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    Z = np.diag([1.0, -1.0])
    return VACUUM * np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])


def is_physical(cov: np.ndarray, tol: float = 1e-10) -> bool:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        return False
    if not np.allclose(cov, cov.T, atol=tol):
        return False
    n = cov.shape[0] // 2
    eig = np.linalg.eigvalsh(cov + 0.5j * symplectic_form(n))
    return bool(eig.min() >= -tol)


def _require_physical(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if not is_physical(cov):
        raise UnphysicalCovariance("covariance violates the uncertainty bound")
    return cov


def _transmissions(splits: Sequence) -> np.ndarray:
    out = []
    for s in splits:
        if isinstance(s, ChannelSplit):
            out.append(float(s.q_atom[-1]))
        else:
            out.append(float(s))
    return np.array(out)


def gaussian_channel_apply(cov_in: np.ndarray, splits: Sequence) -> np.ndarray:
    """Send each mode through a pure-loss channel onto its atom port.

    ``splits`` holds one entry per mode: a :class:`ChannelSplit` (its exit
    atom probability is used) or a bare transmission q.
    """
    cov = _require_physical(cov_in)
    q = _transmissions(splits)
    if 2 * len(q) != cov.shape[0]:
        raise ValueError("need one split per mode")
    if np.any(q < 0) or np.any(q > 1):
        raise InvariantError("transmissions must lie in [0, 1]")
    amp = np.repeat(np.sqrt(q), 2)
    S = np.diag(amp)
    noise = np.diag(np.repeat(1.0 - q, 2)) * VACUUM
    return S @ cov @ S.T + noise


@dataclass(frozen=True)
class DuanResult:
    value: float
    entangled: bool
    threshold: float = 2.0


def duan_criterion(cov: np.ndarray) -> DuanResult:
    """Var(x1 - x2) + Var(p1 + p2); below 2 certifies entanglement."""
    cov = _require_physical(cov)
    if cov.shape != (4, 4):
        raise ValueError("Duan criterion needs a two-mode covariance")
    u = np.array([1.0, 0.0, -1.0, 0.0])
    v = np.array([0.0, 1.0, 0.0, 1.0])
    value = float(u @ cov @ u + v @ cov @ v)
    return DuanResult(value, value < 2.0 - 1e-12)
