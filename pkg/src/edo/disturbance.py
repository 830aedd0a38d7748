"""Disturbance signals, exosystem construction, and structured splitting.

Signals live in the class of bounded functions with bounded (weak)
derivative.  An exosystem is the autonomous companion system whose output
space spans exactly the disturbance dynamics assumed known; its state
dimension is one more than the number of requested nonzero eigenvalues
because a zero eigenvalue is always built in.  ``decompose`` splits a
structured signal into the part the exosystem can generate and the
residual the observer must absorb by high gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NotConjugateClosed,
    RightHalfPlaneViolation,
    UnboundedDerivative,
    UnsupportedVariant,
)

__all__ = [
    "Signal",
    "Constant",
    "Harmonic",
    "Polynomial",
    "ExpThenHold",
    "Sum",
    "evaluate",
    "derivative",
    "s_norm",
    "Exosystem",
    "exosystem_from_spectrum",
    "Decomposition",
    "decompose",
]

#: Absolute tolerance when matching term frequencies to exosystem eigenvalues.
FREQ_ATOL = 1e-9


class Signal:
    """Base class of the tagged signal union."""

    def value(self, t):
        raise NotImplementedError

    def slope(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Signal):
    level: float

    def value(self, t):
        return t * 0.0 + self.level

    def slope(self, t):
        return t * 0.0


@dataclass(frozen=True)
class Harmonic(Signal):
    """amplitude * sin(frequency * t + phase), frequency in rad/s."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def value(self, t):
        return self.amplitude * np.sin(self.frequency * t + self.phase)

    def slope(self, t):
        return self.amplitude * self.frequency * np.cos(self.frequency * t + self.phase)


@dataclass(frozen=True)
class Polynomial(Signal):
    """Coefficients in ascending powers of t."""

    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial needs at least one coefficient")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def value(self, t):
        acc = t * 0.0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc

    def slope(self, t):
        acc = t * 0.0
        for k in range(self.degree, 0, -1):
            acc = acc * t + k * self.coefficients[k]
        return acc


@dataclass(frozen=True)
class ExpThenHold(Signal):
    """exp(t) until the switch time, frozen at exp(T) afterwards."""

    switch_time: float

    def value(self, t):
        return np.exp(np.minimum(t, self.switch_time))

    def slope(self, t):
        return np.where(np.asarray(t) < self.switch_time, np.exp(np.minimum(t, self.switch_time)), 0.0)


@dataclass(frozen=True)
class Sum(Signal):
    terms: tuple

    def __post_init__(self):
        flat = []
        for term in self.terms:
            if isinstance(term, Sum):
                flat.extend(term.terms)
            elif isinstance(term, Signal):
                flat.append(term)
            else:
                raise TypeError(f"not a Signal: {term!r}")
        object.__setattr__(self, "terms", tuple(flat))

    def value(self, t):
        acc = t * 0.0
        for term in self.terms:
            acc = acc + term.value(t)
        return acc

    def slope(self, t):
        acc = t * 0.0
        for term in self.terms:
            acc = acc + term.slope(t)
        return acc


def evaluate(s: Signal, t):
    """Pointwise value; accepts scalars or numpy arrays of times."""
    return s.value(t)


def derivative(s: Signal, t):
    """Pointwise derivative (weak derivative for the piecewise variant)."""
    return s.slope(t)


def _terms(s: Signal):
    return s.terms if isinstance(s, Sum) else (s,)


def _sup_abs_slope(s: Signal) -> float:
    """Supremum of |ds/dt|, analytic per variant, grid-refined for sums."""
    varying = []
    const_slope = 0.0
    horizon = 0.0
    fastest = 0.0
    for term in _terms(s):
        if isinstance(term, Constant):
            continue
        if isinstance(term, Polynomial):
            if term.degree >= 2:
                raise UnboundedDerivative("polynomial of degree >= 2 has unbounded derivative")
            if term.degree == 1:
                const_slope += term.coefficients[1]
            continue
        if isinstance(term, Harmonic):
            varying.append(term)
            horizon = max(horizon, 2.0 * np.pi / abs(term.frequency) if term.frequency else 0.0)
            fastest = max(fastest, abs(term.frequency))
        elif isinstance(term, ExpThenHold):
            varying.append(term)
            horizon = max(horizon, term.switch_time + 1.0)
            fastest = max(fastest, 1.0)
        else:
            raise UnsupportedVariant(f"cannot bound derivative of {type(term).__name__}")
    if not varying:
        return abs(const_slope)
    if len(varying) == 1 and isinstance(varying[0], Harmonic):
        h = varying[0]
        return abs(const_slope) + abs(h.amplitude * h.frequency)
    if len(varying) == 1 and isinstance(varying[0], ExpThenHold):
        peak = np.exp(varying[0].switch_time)  # left limit at the switch
        return max(abs(1.0 + const_slope), abs(peak + const_slope), abs(const_slope))
    # several oscillatory parts: dense sampling over the common horizon,
    # plus points just below each switch where the slope peaks
    samples = max(4096, int(64 * horizon * fastest))
    t = np.linspace(0.0, horizon, samples)
    extra = [v.switch_time * (1.0 - 1e-12) for v in varying if isinstance(v, ExpThenHold)]
    if extra:
        t = np.concatenate([t, extra])
    total = t * 0.0 + const_slope
    for term in varying:
        total = total + term.slope(t)
    return float(np.abs(total).max())


def s_norm(s: Signal) -> float:
    """Signal-class norm: |s(0)| plus the supremum of |ds/dt|."""
    return float(abs(s.value(0.0))) + _sup_abs_slope(s)


@dataclass(frozen=True)
class Exosystem:
    """Companion disturbance dynamics with a built-in zero eigenvalue.

    ``g`` holds the m free last-row entries; the full last row is
    ``[0, g_1, ..., g_m]`` so the first column vanishes, the first
    coordinate vector is an eigenvector for 0, and the characteristic
    polynomial is ``l^(m+1) - g_m l^m - ... - g_1 l``.  ``spectrum``
    records the requested eigenvalues (the built-in zero first) exactly
    as given, which keeps later frequency matching free of eigensolver
    noise.
    """

    g: tuple
    spectrum: tuple

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(float(v) for v in self.g))
        object.__setattr__(self, "spectrum", tuple(complex(v) for v in self.spectrum))

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def dim(self) -> int:
        return self.m + 1

    @property
    def G(self) -> np.ndarray:
        d = self.dim
        G = np.zeros((d, d))
        G[:-1, 1:] += np.eye(d - 1)
        G[-1, 1:] = self.g
        return G

    @property
    def E(self) -> np.ndarray:
        E = np.zeros(self.dim)
        E[-1] = 1.0
        return E

    @property
    def B_d(self) -> np.ndarray:
        B_d = np.zeros(self.dim)
        B_d[0] = 1.0
        return B_d

    @property
    def zero_multiplicity(self) -> int:
        mult = 1
        for v in self.g:
            if v != 0.0:
                break
            mult += 1
        return mult


def exosystem_from_spectrum(nonzero_eigs) -> Exosystem:
    """Build the companion exosystem whose spectrum is {0} plus the request.

    The requested eigenvalues must be closed under conjugation and must
    not lie in the open left half-plane; an additional zero eigenvalue is
    always prepended.  Repeated eigenvalues are accepted and expand the
    characteristic polynomial accordingly.
    """
    requested = [complex(v) for v in nonzero_eigs]
    for lam in requested:
        if lam.real < -1e-9:
            raise RightHalfPlaneViolation(f"eigenvalue {lam} has negative real part")
    unmatched = [lam for lam in requested if lam.imag != 0.0]
    while unmatched:
        lam = unmatched.pop()
        try:
            unmatched.remove(lam.conjugate())
        except ValueError:
            raise NotConjugateClosed(f"no conjugate partner for {lam}") from None
    coeffs = np.array([1.0 + 0.0j])
    for lam in requested:
        coeffs = np.polymul(coeffs, np.array([1.0, -lam]))
    coeffs = np.polymul(coeffs, np.array([1.0, 0.0]))  # built-in zero eigenvalue
    scale = max(1.0, np.abs(coeffs).max())
    if np.abs(coeffs.imag).max() > 1e-9 * scale:
        raise NotConjugateClosed("expansion left a complex residue")
    real = coeffs.real
    # real = [1, c_m, ..., c_1, 0]; last row entries are g_j = -c_j
    g = tuple(-v + 0.0 for v in real[1:-1][::-1])  # +0.0 kills negative zeros
    return Exosystem(g=g, spectrum=(0.0 + 0.0j,) + tuple(requested))


@dataclass(frozen=True)
class Decomposition:
    """Split of a signal into exosystem-generated and residual parts."""

    modeled: Signal
    residual: Signal
    residual_s_norm: float


def _matches(term: Signal, exo: Exosystem) -> bool:
    if isinstance(term, Constant):
        return True
    if isinstance(term, Polynomial):
        return exo.zero_multiplicity >= term.degree + 1
    if isinstance(term, Harmonic):
        for lam in exo.spectrum:
            if abs(lam.real) <= FREQ_ATOL and abs(abs(lam.imag) - abs(term.frequency)) <= FREQ_ATOL:
                return True
        return False
    if isinstance(term, ExpThenHold):
        return False  # piecewise signals are residual-only
    raise UnsupportedVariant(f"cannot route {type(term).__name__}")


def decompose(d: Signal, exo: Exosystem) -> Decomposition:
    """Term-match a structured signal against the exosystem spectrum.

    Terms whose generating frequency is an exosystem eigenvalue go to the
    modeled part, everything else to the residual.  The residual is then
    shifted by a constant so it vanishes at t = 0 (legitimate because the
    exosystem always contains the zero eigenvalue), which makes its norm
    exactly the supremum of its derivative.
    """
    modeled, residual = [], []
    for term in _terms(d):
        (modeled if _matches(term, exo) else residual).append(term)
    shift = float(Sum(tuple(residual)).value(0.0)) if residual else 0.0
    if shift != 0.0:
        residual.append(Constant(-shift))
        modeled.append(Constant(shift))
    modeled_sig = Sum(tuple(modeled))
    residual_sig = Sum(tuple(residual))
    return Decomposition(
        modeled=modeled_sig,
        residual=residual_sig,
        residual_s_norm=s_norm(residual_sig),
    )
