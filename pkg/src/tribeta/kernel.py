"""Beta-spectrum evaluation: differential, integral, linearized and
moment forms, plus endpoint bookkeeping.

All forms share the prefactor F(p, Z) E_beta p_beta evaluated at the
electron energy (it sits outside the final-state sum).  The integral
form carries amplitude A/3 with the (.)^{3/2} radicand unscaled.

For m2nu < 0 (fit context) the standard experimental continuation is
used: gate theta(eps_n) with radicand eps_n^2 - m2nu, which is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fss import FinalStateSpectrum
from .physics import CONSTANTS, Constants, fermi_factor

ArrayLike = Union[float, np.ndarray]

#: sanity bound on the neutrino mass-squared fit parameter (eV^2)
M2NU_SANITY_EV2 = 1.0e4


@dataclass(frozen=True)
class SpectrumParams:
    """The fit quadruple (A, W0, m2nu, b) plus model options."""

    amplitude: float
    endpoint_ev: float
    m2nu_ev2: float = 0.0
    background: float = 0.0
    z_daughter: int = 2
    endpoint_drift: bool = False

    def __post_init__(self):
        if self.amplitude <= 0.0:
            raise ValidationError("amplitude must be positive")
        if not (18000.0 <= self.endpoint_ev <= 19000.0):
            raise ValidationError(
                f"endpoint {self.endpoint_ev} eV outside the physical "
                "configuration range [18000, 19000]")
        if abs(self.m2nu_ev2) >= M2NU_SANITY_EV2:
            raise ValidationError(
                f"|m2nu| = {abs(self.m2nu_ev2)} exceeds sanity bound {M2NU_SANITY_EV2}")
        if self.background < 0.0:
            raise ValidationError("background must be >= 0")

    def with_values(self, **kwargs) -> "SpectrumParams":
        return replace(self, **kwargs)


def effective_endpoint(eps_beta: ArrayLike, endpoint_ev: float,
                       constants: Constants = CONSTANTS) -> ArrayLike:
    """Energy-dependent endpoint W0 - (W0 - eps)/M_t (mass ratio units)."""
    return endpoint_ev - (endpoint_ev - np.asarray(eps_beta, dtype=float)) \
        / constants.triton_electron_ratio


def _effective_endpoints(eps: np.ndarray, params: SpectrumParams,
                         constants: Constants) -> np.ndarray:
    if params.endpoint_drift:
        return effective_endpoint(eps, params.endpoint_ev, constants)
    return np.full_like(eps, params.endpoint_ev)


def _prefactor(eps: np.ndarray, z_daughter: int,
               constants: Constants) -> np.ndarray:
    """F(p, Z) * E_beta * p_beta on an energy grid (eps > 0 required)."""
    if np.any(eps <= 0.0):
        raise ValidationError("spectrum evaluation requires eps_beta > 0")
    me = constants.electron_mass_ev
    pc = np.sqrt(eps * (eps + 2.0 * me))
    return fermi_factor(pc, z_daughter, constants) * (eps + me) * pc


def _open_energies(eps: np.ndarray, params: SpectrumParams,
                   fss: FinalStateSpectrum, constants: Constants):
    """eps_n = W0_eff - eps - E_n with the threshold gate; shape (n, lines)."""
    w0eff = _effective_endpoints(eps, params, constants)
    en = w0eff[:, None] - eps[:, None] - fss.energies[None, :]
    m2 = params.m2nu_ev2
    if m2 >= 0.0:
        gate = en > np.sqrt(m2)
        radicand = np.maximum(en * en - m2, 0.0)
    else:
        gate = en > 0.0
        radicand = en * en - m2
    return en, radicand, gate


def _as_grid(eps_beta: ArrayLike):
    eps = np.asarray(eps_beta, dtype=float)
    return np.atleast_1d(eps).ravel(), eps.shape, eps.ndim == 0


def _finalize(values: np.ndarray, shape, scalar: bool):
    if scalar:
        return float(values[0])
    return values.reshape(shape)


def spectral_sum(eps_beta: ArrayLike, params: SpectrumParams,
                 fss: FinalStateSpectrum,
                 constants: Constants = CONSTANTS) -> ArrayLike:
    """Inner integral-spectrum sum  sum_n P_n (eps_n^2 - m2nu)^{3/2} theta."""
    eps, shape, scalar = _as_grid(eps_beta)
    _, rad, gate = _open_energies(eps, params, fss, constants)
    rad = np.where(gate, rad, 0.0)
    s = (fss.probabilities[None, :] * rad * np.sqrt(rad)).sum(axis=1)
    return _finalize(s, shape, scalar)


def linearized_sum(eps_beta: ArrayLike, params: SpectrumParams,
                   fss: FinalStateSpectrum,
                   constants: Constants = CONSTANTS) -> ArrayLike:
    """Linearized inner sum  sum_n P_n [eps_n^3 - (3/2) m2nu eps_n] theta(eps_n)."""
    eps, shape, scalar = _as_grid(eps_beta)
    en, _, _ = _open_energies(eps, params, fss, constants)
    open_gate = en > 0.0
    term = en**3 - 1.5 * params.m2nu_ev2 * en
    s = (fss.probabilities[None, :] * np.where(open_gate, term, 0.0)).sum(axis=1)
    return _finalize(s, shape, scalar)


def differential_spectrum(eps_beta: ArrayLike, params: SpectrumParams,
                          fss: FinalStateSpectrum,
                          constants: Constants = CONSTANTS) -> ArrayLike:
    """dN/deps: A F E p sum_n P_n eps_n sqrt(eps_n^2 - m2nu) theta."""
    eps, shape, scalar = _as_grid(eps_beta)
    en, rad, gate = _open_energies(eps, params, fss, constants)
    inner = (fss.probabilities[None, :]
             * np.where(gate, en * np.sqrt(np.where(gate, rad, 0.0)), 0.0)).sum(axis=1)
    out = params.amplitude * _prefactor(eps, params.z_daughter, constants) * inner
    return _finalize(out, shape, scalar)


def integral_spectrum(eps_beta: ArrayLike, params: SpectrumParams,
                      fss: FinalStateSpectrum,
                      constants: Constants = CONSTANTS) -> ArrayLike:
    """Integral spectrum  (A/3) F E p sum_n P_n (eps_n^2 - m2nu)^{3/2} theta."""
    eps, shape, scalar = _as_grid(eps_beta)
    s = spectral_sum(eps, params, fss, constants)
    out = (params.amplitude / 3.0) * _prefactor(eps, params.z_daughter,
                                                constants) * s
    return _finalize(out, shape, scalar)


def linearized_spectrum(eps_beta: ArrayLike, params: SpectrumParams,
                        fss: FinalStateSpectrum,
                        constants: Constants = CONSTANTS) -> ArrayLike:
    """Integral spectrum with the linearized neutrino-mass term."""
    eps, shape, scalar = _as_grid(eps_beta)
    s = linearized_sum(eps, params, fss, constants)
    out = (params.amplitude / 3.0) * _prefactor(eps, params.z_daughter,
                                                constants) * s
    return _finalize(out, shape, scalar)


def uniform_shifts(species: str, j_initial: int, r_eq_bohr: float,
                   constants: Constants = CONSTANTS) -> float:
    """Uniform spectral shift (J+1/2)^2 / (2 M R_e^2) in eV for a nonzero
    initial rotational state; zero for J = 0 (beyond the species recoil,
    which is handled by physics.rotational_recoil)."""
    if j_initial < 0:
        raise ValidationError("initial J must be >= 0")
    if r_eq_bohr <= 0.0:
        raise ValidationError("R_e must be positive")
    if species == "T2":
        mass = constants.reduced_t_he3
    elif species == "TH":
        mt, mp = constants.triton_electron_ratio, constants.proton_electron_ratio
        mass = mt * mp / (mt + mp)
    else:
        raise ConfigurationError(f"unknown species {species!r}")
    if j_initial == 0:
        return 0.0
    return (j_initial + 0.5) ** 2 / (2.0 * mass * r_eq_bohr ** 2) \
        * constants.hartree_ev
