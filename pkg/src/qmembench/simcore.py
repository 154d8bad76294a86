"""Single-qubit pure-state primitives.

State vectors are pairs of complex amplitudes (amp_down, amp_up). All
rotations are equatorial-axis SU(2) rotations

    R_phi(theta) = exp[-i (theta/2) (cos(phi) sigma_x + sin(phi) sigma_y)]

and free-evolution dephasing is a relative z-phase on amp_up. Global
phase is never normalized or compared; every check in this package is
population- or fidelity-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PULSE_DURATION = 10e-6


@dataclass(frozen=True)
class QubitState:
    """Pure single-qubit state.

    Attributes
    ----------
    amp_down, amp_up : complex
        Amplitudes of the two basis states. Norm is preserved to
        rounding error by every operation in this module.
    """

    amp_down: complex
    amp_up: complex

    def norm(self) -> float:
        return float(np.sqrt(abs(self.amp_down) ** 2 + abs(self.amp_up) ** 2))

    def population_up(self) -> float:
        return float(abs(self.amp_up) ** 2 / (abs(self.amp_down) ** 2 + abs(self.amp_up) ** 2))

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_down, self.amp_up], dtype=complex)


def ket_down() -> QubitState:
    return QubitState(1.0 + 0.0j, 0.0 + 0.0j)


def ket_up() -> QubitState:
    return QubitState(0.0 + 0.0j, 1.0 + 0.0j)


@dataclass(frozen=True)
class Pulse:
    """One physical rotation pulse.

    Attributes
    ----------
    angle : float
        Nominal rotation angle in radians, in (-4*pi, 4*pi].
    axis_phase : float
        Azimuth of the rotation axis in the equatorial plane, radians.
    duration : float
        Nominal pulse duration in seconds (timing metadata; the default
        execution mode treats pulses as instantaneous).
    amplitude_scale : float
        Multiplies the angle; 1.0 is ideal. Used for robustness tests.
    """

    angle: float
    axis_phase: float
    duration: float = DEFAULT_PULSE_DURATION
    amplitude_scale: float = 1.0

    def __post_init__(self):
        if not (-4.0 * np.pi < self.angle <= 4.0 * np.pi):
            raise ValueError(f"pulse angle {self.angle} outside (-4*pi, 4*pi]")
        if self.duration < 0:
            raise ValueError("pulse duration must be >= 0")
        if self.amplitude_scale <= 0:
            raise ValueError("amplitude_scale must be > 0")

    @property
    def effective_angle(self) -> float:
        return self.angle * self.amplitude_scale


@dataclass(frozen=True)
class SpamModel:
    """State-preparation-and-measurement error rates.

    eps_down is the probability of misreading a prepared down state,
    eps_up the same for up. The combined figure is their mean.
    """

    eps_down: float = 0.0
    eps_up: float = 0.0

    def __post_init__(self):
        for name, v in (("eps_down", self.eps_down), ("eps_up", self.eps_up)):
            if not (0.0 <= v < 0.5):
                raise ValueError(f"{name} must be in [0, 0.5)")

    @property
    def eps_spam(self) -> float:
        return 0.5 * (self.eps_down + self.eps_up)


def rotation_unitary(angle: float, axis_phase: float) -> np.ndarray:
    """Matrix of an equatorial-axis rotation.

    Parameters
    ----------
    angle : float
        Rotation angle theta in radians.
    axis_phase : float
        Axis azimuth phi in radians.

    Returns
    -------
    ndarray, shape (2, 2), complex
        R_phi(theta) in the (down, up) basis.
    """
    c = np.cos(0.5 * angle)
    s = np.sin(0.5 * angle)
    return np.array(
        [
            [c, -1j * np.exp(-1j * axis_phase) * s],
            [-1j * np.exp(1j * axis_phase) * s, c],
        ],
        dtype=complex,
    )


def pulse_unitary(pulse: Pulse) -> np.ndarray:
    """Matrix realized by a pulse, including its amplitude scale."""
    return rotation_unitary(pulse.effective_angle, pulse.axis_phase)


def apply_pulse(state: QubitState, pulse: Pulse) -> QubitState:
    """Apply a rotation pulse to a state."""
    u = pulse_unitary(pulse)
    vec = u @ state.as_array()
    return QubitState(complex(vec[0]), complex(vec[1]))


def apply_z_phase(state: QubitState, delta_phi: float) -> QubitState:
    """Advance the relative phase of amp_up by delta_phi radians.

    Populations are unchanged; this is free-evolution dephasing in the
    rotating frame.
    """
    return QubitState(state.amp_down, state.amp_up * np.exp(1j * delta_phi))


def measure(state: QubitState, spam: SpamModel, rng: np.random.Generator) -> int:
    """Projective measurement with readout-error flips.

    The ideal outcome is drawn from the Born probabilities, then flipped
    with probability spam.eps_up (ideal up) or spam.eps_down (ideal
    down). Consumes exactly two uniforms from rng.

    Returns
    -------
    int
        0 for down, 1 for up.
    """
    p_up = state.population_up()
    ideal = int(rng.random() < p_up)
    eps = spam.eps_up if ideal == 1 else spam.eps_down
    flip = int(rng.random() < eps)
    return ideal ^ flip


def unitary_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|tr(a^dagger b)| for 2x2 unitaries; equals 2 iff a = b up to global phase."""
    return float(abs(np.trace(a.conj().T @ b)))


def unitaries_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return abs(unitary_overlap(a, b) - 2.0) < tol


def unitary_infidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Average-gate-style infidelity 1 - |tr(a^dagger b)/2|^2, phase-insensitive."""
    return float(1.0 - (unitary_overlap(a, b) / 2.0) ** 2)
