"""Internal Monte Carlo execution engine.

Sequences are compiled to an alternating program

    z(w_0) U_0 z(w_1) U_1 ... U_{n-1} [z(w_n)]

where each z window accrues a per-shot dephasing angle and each U is a
2x2 unitary. Two execution paths exist:

* fused: one composed unitary per Clifford (and per decoupling pi
  pulse), vectorized over a batch of sequences and all shots. Used when
  gates are instantaneous and error-free. The 12 us pre-pulse gaps of a
  Clifford's pulses are bunched into the single z window preceding it.
* pulsewise: one U per physical pulse, vectorized over shots only.
  Used when per-pulse depolarizing injection or finite pulse duration
  is requested.

Dephasing sampling is hybrid and per sequence:

* white: the phase over each window is drawn exactly,
  N(0, pi * s_w * w).
* pink: a frequency-domain trace spanning the sequence (at least
  2 / f_c) is synthesized per shot at resolution dt; window phases are
  its exact piecewise-constant integrals. Windows much shorter than dt
  (the 12 us gaps) receive their proportional share of the local
  integral, a negligible approximation at the supported noise levels.
* static and field offsets: deterministic 2*pi*df*w per window.
* quasi-static: one offset per shot, N(0, qs_sigma^2), times window.

Per-sequence rng draw order (fixed; chunk sizes are constants so
results never depend on memory layout):

1. white block, shape (shots, n_windows), when s_w > 0
2. pink spectra in shot chunks of PINK_SHOT_CHUNK, each chunk one
   (chunk, 2, n_bins) normal block, when s_p > 0
3. quasi-static offsets, shape (shots,), when qs_sigma > 0
4. pulsewise path only, when eps_inject > 0: one (n_pulses, shots)
   uniform block and one (n_pulses, shots) integer block
5. measurement: one (shots,) uniform block (Born), then one (shots,)
   uniform block (readout flips)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .noise import NoiseModel, TWO_PI, MAX_TRACE_SAMPLES
from .simcore import SpamModel

PINK_SHOT_CHUNK = 32
PAULI_RATE_FACTOR = 1.5  # uniform-Pauli rate giving average error eps per pulse


@dataclass(frozen=True)
class SequenceProgram:
    """Compiled sequence: len(windows) == len(unitaries) + (0 or 1)."""

    unitaries: np.ndarray        # (n_u, 2, 2) complex
    windows: np.ndarray          # (n_w,) seconds
    inject_mask: np.ndarray      # (n_u,) bool, True where injection applies
    wall_duration: float

    def __post_init__(self):
        if len(self.windows) not in (len(self.unitaries), len(self.unitaries) + 1):
            raise ValueError("window/unitary layout mismatch")


def pink_sample_interval(delay: float) -> float:
    """Trace resolution for the pink component of a sequence whose
    interleaved delay is `delay` (0 for gate-only sequences)."""
    if delay > 0:
        return min(1e-3, delay / 2.0)
    return 1e-3


def sample_phases(model: NoiseModel, windows: np.ndarray, shots: int,
                  rng: np.random.Generator, dt_pink: float | None = None) -> np.ndarray:
    """Per-shot dephasing angles for each window, shape (shots, n_w)."""
    windows = np.asarray(windows, dtype=float)
    n_w = len(windows)
    phases = np.zeros((shots, n_w))
    if n_w == 0:
        return phases
    if model.s_w > 0:
        std = np.sqrt(math.pi * model.s_w * windows)
        phases += rng.normal(size=(shots, n_w)) * std
    if model.s_p > 0:
        phases += _pink_phases(model, windows, shots, rng, dt_pink)
    df = model.constant_detuning
    if df != 0.0:
        phases += TWO_PI * df * windows
    if model.qs_sigma > 0:
        offsets = rng.normal(size=(shots, 1)) * model.qs_sigma
        phases += TWO_PI * offsets * windows
    return phases


def _pink_phases(model: NoiseModel, windows: np.ndarray, shots: int,
                 rng: np.random.Generator, dt: float | None) -> np.ndarray:
    t_seq = float(windows.sum())
    t_synth = max(t_seq, 2.0 / model.f_c)
    if dt is None:
        dt = pink_sample_interval(float(windows[windows > 0].min()) if np.any(windows > 0) else 0.0)
    dt = max(dt, t_synth / MAX_TRACE_SAMPLES)
    n = next_fast_len(max(int(math.ceil(t_synth / dt)), 8))
    freqs = np.fft.rfftfreq(n, dt)
    s_std = np.zeros(len(freqs))
    above = freqs >= model.f_c
    s_std[above] = model.s_p / TWO_PI / freqs[above]
    if model.cutoff_mode == "plateau":
        s_std[~above] = model.s_p / TWO_PI / model.f_c
    s_std[0] = 0.0
    sigma = np.sqrt(n * s_std / (4.0 * dt))
    sigma_nyq = math.sqrt(n * s_std[-1] / (2.0 * dt)) if n % 2 == 0 else None

    # Window boundaries on the trace grid: integral over [t_i, t_{i+1}]
    # of the piecewise-constant trace, evaluated by linear interpolation
    # of the cumulative integral.
    bounds = np.concatenate([[0.0], np.cumsum(windows)])
    pos = bounds / dt
    idx = np.clip(pos.astype(int), 0, n - 1)
    frac = pos - idx

    out = np.empty((shots, n_w := len(windows)))
    row = 0
    while row < shots:
        chunk = min(PINK_SHOT_CHUNK, shots - row)
        z = rng.normal(size=(chunk, 2, len(freqs)))
        spec = (z[:, 0, :] + 1j * z[:, 1, :]) * sigma
        spec[:, 0] = 0.0
        if sigma_nyq is not None:
            spec[:, -1] = z[:, 0, -1] * sigma_nyq
        trace = np.fft.irfft(spec, n, axis=1)
        cum = np.zeros((chunk, n + 1))
        np.cumsum(trace * dt, axis=1, out=cum[:, 1:])
        at_bounds = cum[:, idx] + (cum[:, np.minimum(idx + 1, n)] - cum[:, idx]) * frac
        out[row:row + chunk] = TWO_PI * np.diff(at_bounds, axis=1)
        row += chunk
    return out


def _apply_z(state: np.ndarray, phase: np.ndarray) -> None:
    # state (..., 2); phase broadcastable to state[..., 1]
    state[..., 1] *= np.exp(1j * phase)


def execute_fused(unitaries: np.ndarray, phases: np.ndarray,
                  state0: np.ndarray) -> np.ndarray:
    """Evolve a batch of sequences.

    unitaries : (kb, n_u, 2, 2), phases : (kb, shots, n_w) with
    n_w in {n_u, n_u + 1}, state0 : (2,) initial state shared by all.
    Returns final states, (kb, shots, 2).
    """
    kb, shots = phases.shape[0], phases.shape[1]
    n_u = unitaries.shape[1]
    state = np.broadcast_to(state0, (kb, shots, 2)).astype(complex).copy()
    for i in range(n_u):
        _apply_z(state, phases[:, :, i])
        state = np.einsum("kab,ksb->ksa", unitaries[:, i], state)
    if phases.shape[2] == n_u + 1:
        _apply_z(state, phases[:, :, n_u])
    return state


def execute_pulsewise(program: SequenceProgram, phases: np.ndarray,
                      state0: np.ndarray, eps_inject: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Evolve one sequence with per-pulse error injection.

    phases : (shots, n_w). After every unitary with inject_mask set, a
    uniform random Pauli is applied with probability 1.5 * eps_inject,
    which realizes an average error of eps_inject per pulse.
    Returns final states, (shots, 2).
    """
    shots = phases.shape[0]
    n_u = len(program.unitaries)
    state = np.broadcast_to(state0, (shots, 2)).astype(complex).copy()
    if eps_inject > 0:
        n_inj = int(program.inject_mask.sum())
        u_inj = rng.random((n_inj, shots))
        pauli = rng.integers(0, 3, size=(n_inj, shots))
        rate = PAULI_RATE_FACTOR * eps_inject
    inj_row = 0
    for i in range(n_u):
        _apply_z(state, phases[:, i])
        state = state @ program.unitaries[i].T
        if eps_inject > 0 and program.inject_mask[i]:
            hit = u_inj[inj_row] < rate
            if np.any(hit):
                which = pauli[inj_row]
                for code, (m00, m01, m10, m11) in enumerate(
                        [(0, 1, 1, 0), (0, -1j, 1j, 0), (1, 0, 0, -1)]):
                    sel = hit & (which == code)
                    if np.any(sel):
                        a = state[sel]
                        state[sel] = np.stack(
                            [m00 * a[:, 0] + m01 * a[:, 1],
                             m10 * a[:, 0] + m11 * a[:, 1]], axis=1)
            inj_row += 1
    if phases.shape[1] == n_u + 1:
        _apply_z(state, phases[:, n_u])
    return state


def measure_batch(state: np.ndarray, spam: SpamModel,
                  rng: np.random.Generator) -> np.ndarray:
    """Projective measurement of (shots, 2) states with readout flips.

    Returns outcomes as uint8 (0 down, 1 up). Consumes one Born uniform
    block then one flip uniform block.
    """
    p_up = np.abs(state[:, 1]) ** 2 / (np.abs(state[:, 0]) ** 2 + np.abs(state[:, 1]) ** 2)
    ideal = (rng.random(len(p_up)) < p_up).astype(np.uint8)
    eps = np.where(ideal == 1, spam.eps_up, spam.eps_down)
    flips = (rng.random(len(p_up)) < eps).astype(np.uint8)
    return ideal ^ flips
