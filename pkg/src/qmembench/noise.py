"""Qubit-frequency-noise models, trace synthesis, and PSD estimation.

PSD convention
--------------
Model parameters (s_w, s_p) are quoted in the convention where the
white level relates to the idle memory error as

    eps_m(tau) = (pi/3) * s_w * tau / 2        (white term)

which makes the dephasing-phase variance over an idle window tau

    Var[phi(tau)] = pi * s_w * tau.

Equivalently, the standard one-sided PSD of the frequency offset is
S_std(f) = s(f) / (2*pi). Synthesis draws spectra at S_std and
``estimate_psd`` reports in model units, so a model with s_w = 0.0019
reads back a flat PSD at 0.0019. All frequencies are Hz, times seconds,
phases radians.

Pink noise s_p / f carries a low-frequency cutoff f_c. Two cutoff
semantics are supported: ``hard`` (spectrum zero below f_c, default)
and ``plateau`` (flat at s_p / f_c below f_c). The closed-form memory
error model in :mod:`qmembench.analysis` corresponds to the hard
cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi

# Largest sample count synthesize_trace will attempt.
MAX_TRACE_SAMPLES = 2 ** 24


@dataclass(frozen=True)
class FieldModel:
    """Magnetic-field sensitivities of the two relevant transitions.

    d2f_db2: curvature of the field-insensitive (clock) transition,
    Hz per mG^2. df_db_stretch: linear sensitivity of the stretch
    transition, Hz per uG. b0: operating field in G (metadata).
    """

    d2f_db2: float = 2.42e-3
    df_db_stretch: float = -2.36
    b0: float = 146.0


DEFAULT_FIELD_MODEL = FieldModel()


def detuning_from_field(delta_b_mg: float, fm: FieldModel = DEFAULT_FIELD_MODEL) -> float:
    """Clock-transition frequency offset (Hz) for a field offset in mG.

    Quadratic around the field-insensitive point: 0.5 * d2f/dB^2 * dB^2.
    Even in delta_b_mg and zero at zero by construction.
    """
    return 0.5 * fm.d2f_db2 * delta_b_mg ** 2


@dataclass(frozen=True)
class NoiseModel:
    """Frequency-offset noise model.

    s_w : white PSD level (model units, see module docstring).
    s_p : pink 1/f coefficient.
    f_c : pink low-frequency cutoff, Hz.
    static_detuning : constant offset, Hz.
    field_offset : magnetic-field offset in mG, mapped through the
        quadratic clock-transition curve and added as a constant.
    qs_sigma : rms of a quasi-static per-trace offset, Hz. Models noise
        components much slower than a single shot; each synthesized
        trace draws one constant from N(0, qs_sigma^2).
    cutoff_mode : 'hard' or 'plateau' (pink spectrum below f_c).
    """

    s_w: float = 0.0
    s_p: float = 0.0
    f_c: float = 0.025
    static_detuning: float = 0.0
    field_offset: float = 0.0
    qs_sigma: float = 0.0
    cutoff_mode: str = "hard"
    field_model: FieldModel = field(default=DEFAULT_FIELD_MODEL)

    def __post_init__(self):
        if self.s_w < 0 or self.s_p < 0:
            raise ValueError("PSD levels must be >= 0")
        if self.s_p > 0 and self.f_c <= 0:
            raise ValueError("pink noise requires f_c > 0")
        if self.qs_sigma < 0:
            raise ValueError("qs_sigma must be >= 0")
        if self.cutoff_mode not in ("hard", "plateau"):
            raise ValueError("cutoff_mode must be 'hard' or 'plateau'")

    @property
    def constant_detuning(self) -> float:
        """Static detuning plus the field-offset contribution, Hz."""
        return self.static_detuning + detuning_from_field(self.field_offset, self.field_model)

    def psd_standard(self, f: np.ndarray) -> np.ndarray:
        """Standard one-sided PSD S_std(f) = s(f) / (2*pi), Hz^2/Hz."""
        f = np.asarray(f, dtype=float)
        out = np.full(f.shape, self.s_w / TWO_PI, dtype=float)
        if self.s_p > 0:
            pink = np.zeros_like(out)
            above = f >= self.f_c
            pink[above] = self.s_p / TWO_PI / f[above]
            if self.cutoff_mode == "plateau":
                pink[~above] = self.s_p / TWO_PI / self.f_c
            out = out + pink
        out[f == 0] = 0.0
        return out


@dataclass(frozen=True)
class NoiseTrace:
    """A sampled frequency-offset time series.

    samples[i] is the offset in Hz, constant over
    [i*dt, (i+1)*dt). Phase integrals are exact for this
    piecewise-constant convention.
    """

    dt: float
    samples: np.ndarray
    seed: int | None = None

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    def _cumulative(self) -> np.ndarray:
        cum = np.empty(len(self.samples) + 1)
        cum[0] = 0.0
        np.cumsum(self.samples * self.dt, out=cum[1:])
        return cum

    def phase_between(self, t0: float, t1: float) -> float:
        return phase_between(self, t0, t1)


def phase_between(trace: NoiseTrace, t0: float, t1: float) -> float:
    """Dephasing angle 2*pi * integral of the offset over [t0, t1], rad.

    The integral is the exact piecewise-constant one; it is additive
    over adjacent intervals.
    """
    eps = 1e-9 * max(trace.dt, 1.0)
    if not (0.0 <= t0 <= t1 <= trace.duration + eps):
        raise ValueError(f"interval [{t0}, {t1}] outside trace of duration {trace.duration}")
    edges = np.arange(len(trace.samples) + 1) * trace.dt
    cum = trace._cumulative()
    i0, i1 = np.interp([t0, t1], edges, cum)
    return TWO_PI * float(i1 - i0)


def synthesize_trace(model: NoiseModel, duration: float, dt: float,
                     rng: np.random.Generator, seed: int | None = None) -> NoiseTrace:
    """Draw one frequency-offset trace with the model's PSD.

    Frequency-domain construction: independent complex Gaussians per
    rfft bin scaled to the target PSD, inverse-transformed. The DC bin
    is zero; constant offsets (static_detuning, field_offset, and a
    per-trace quasi-static draw when qs_sigma > 0) are added in the
    time domain.

    Draw order from rng: one (2, n_bins) normal block for the spectrum
    (skipped when s_w = s_p = 0), then one normal for the quasi-static
    offset (skipped when qs_sigma = 0).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if duration < dt:
        raise ValueError("duration must be >= dt")
    n = int(round(duration / dt))
    if n > MAX_TRACE_SAMPLES:
        raise ValueError(f"trace of {n} samples exceeds the {MAX_TRACE_SAMPLES} cap")
    if model.s_w > 0 or model.s_p > 0:
        freqs = np.fft.rfftfreq(n, dt)
        s_std = model.psd_standard(freqs)
        # E|X_k|^2 = n * S_std / (2 dt) makes the one-sided periodogram
        # (2 dt / n) |X_k|^2 estimate S_std.
        sigma = np.sqrt(n * s_std / (4.0 * dt))
        z = rng.normal(size=(2, len(freqs)))
        spec = (z[0] + 1j * z[1]) * sigma
        spec[0] = 0.0
        if n % 2 == 0:
            # Nyquist bin of a real signal is real.
            spec[-1] = z[0, -1] * np.sqrt(n * s_std[-1] / (2.0 * dt))
        samples = np.fft.irfft(spec, n)
    else:
        samples = np.zeros(n)
    const = model.constant_detuning
    if model.qs_sigma > 0:
        const += float(rng.normal()) * model.qs_sigma
    if const != 0.0:
        samples = samples + const
    return NoiseTrace(dt=dt, samples=samples, seed=seed)


def estimate_psd(traces: list[NoiseTrace]) -> tuple[np.ndarray, np.ndarray]:
    """Averaged one-sided periodogram of traces, in model units.

    Returns (frequencies, psd). The DC bin carries any constant offset.
    Dividing the returned PSD by 2*pi gives the standard one-sided
    periodogram, whose sum times the bin width equals the time-domain
    mean square.
    """
    if not traces:
        raise ValueError("need at least one trace")
    n = len(traces[0].samples)
    dt = traces[0].dt
    for t in traces:
        if len(t.samples) != n or t.dt != dt:
            raise ValueError("traces must share dt and length")
    acc = np.zeros(n // 2 + 1)
    for t in traces:
        spec = np.fft.rfft(t.samples)
        acc += (2.0 * dt / n) * np.abs(spec) ** 2
    acc /= len(traces)
    # One-sided convention: DC and Nyquist bins are not doubled.
    acc[0] /= 2.0
    if n % 2 == 0:
        acc[-1] /= 2.0
    return np.fft.rfftfreq(n, dt), TWO_PI * acc


def white_phase_variance(s_w: float, tau: float) -> float:
    """Variance of the dephasing angle over an idle window under white
    noise of level s_w (model units)."""
    return math.pi * s_w * tau


PRESETS: dict[str, NoiseModel] = {
    "paper-fit": NoiseModel(s_w=0.0016, s_p=0.0014, f_c=0.025),
    "rb-clock": NoiseModel(s_w=0.0019, s_p=0.0),
    "field-offset-10": NoiseModel(field_offset=10.0),
    "field-offset-25": NoiseModel(field_offset=25.0),
    "field-offset-50": NoiseModel(field_offset=50.0),
}


def get_preset(name: str) -> NoiseModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown noise preset {name!r}; available: {sorted(PRESETS)}") from None


def list_presets() -> list[str]:
    return sorted(PRESETS)


def stretch_noise_model(rms_ug: float = 47.0, static_offset_mg: float = 0.0,
                        t_experiment: float = 3600.0, t_shot: float = 5e-3,
                        fm: FieldModel = DEFAULT_FIELD_MODEL) -> NoiseModel:
    """Noise model emulating a field-sensitive (stretch) transition.

    The field noise is 1/f with per-octave rms amplitude `rms_ug` (uG);
    through the linear sensitivity it becomes frequency noise of
    per-octave rms sigma_f = |df_db_stretch| * rms_ug. The 1/f
    coefficient is then A = sigma_f^2 / ln 2 (standard units), i.e.
    s_p = 2*pi*A in model units. Spectral content between 1/t_experiment
    and 1/t_shot is far slower than one shot and is folded into a
    quasi-static per-shot offset of variance A * ln(t_experiment /
    t_shot). The synthesized band starts at f_c = 1/t_shot.

    static_offset_mg adds a constant detuning through the stretch
    sensitivity (not the quadratic clock curve).
    """
    sigma_f = abs(fm.df_db_stretch) * rms_ug
    a_std = sigma_f ** 2 / math.log(2.0)
    qs = math.sqrt(a_std * math.log(t_experiment / t_shot))
    static_hz = fm.df_db_stretch * static_offset_mg * 1e3
    return NoiseModel(s_w=0.0, s_p=TWO_PI * a_std, f_c=1.0 / t_shot,
                      static_detuning=static_hz, qs_sigma=qs)


def with_detuning(model: NoiseModel, static_detuning: float) -> NoiseModel:
    return replace(model, static_detuning=static_detuning)
