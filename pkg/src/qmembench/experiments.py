"""Simulated pulse-sequence experiments.

Builds and executes two-point Ramsey (with SPAM controls), spin echo,
standard and interleaved randomized benchmarking, and decoupled
variants, Monte Carlo over shots and sequence randomizations.

Timing model: every physical pulse is preceded by a fixed idle gap
(12 us default) during which dephasing accrues; pulses themselves are
instantaneous by default (an optional finite-duration mode slices each
pulse and interleaves dephasing). The wall-model duration of a sequence
is the sum of all idle windows (plus pulse durations in finite mode).

Interleaved-vs-reference time matching: the interleaved sequence
places a delay tau after each of the m Cliffords; the reference
sequence appends one trailing delay of m * tau after the recovery gate,
so both have identical wall duration by construction. With decoupling
enabled, the trailing delay is patterned as m chunks decoupled exactly
like one interleaved delay, keeping pulse counts and wall time equal.

Dynamical decoupling places an even number n = 2 * floor(tau / (2 *
period)) of X pi pulses per delay, at the standard equally-spaced
refocusing positions (2j - 1) * tau / (2n), so the net ideal rotation
per delay is identity and static detuning cancels.

Randomness: every sequence owns two derived streams (content and
noise/measurement), spawned as
SeedSequence([master_seed, KIND, point_tag, m, stream, k]).
The content stream (stream = CONTENT_STREAM) is shared by the
interleaved and reference sets, which therefore use identical Clifford
draws, targets, and recovery gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine
from .analysis import predict_memory_error
from .cliffords import (
    CliffordElement,
    GateSetVariant,
    compose,
    enumerate_group,
    expand_gateset,
    recovery_gate,
)
from .noise import NoiseModel
from .simcore import Pulse, SpamModel, pulse_unitary, rotation_unitary

DEFAULT_GAP = 12e-6
DEFAULT_MAX_SEQ_DURATION = 40.0
TARGET_SEQUENCE_INFIDELITY = 0.1

# Stream tags for SeedSequence spawning.
_KIND_RB = 11
_KIND_RAMSEY = 3
_STREAM_IRB = 0
_STREAM_REF = 1
_STREAM_CTRL_UP = 2
_STREAM_CTRL_DOWN = 3
CONTENT_STREAM = 4

_FUSED_BATCH = 8

_X_PI = rotation_unitary(np.pi, 0.0)
_KET_UP = np.array([0.0, 1.0], dtype=complex)
_KET_DOWN = np.array([1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class RamseyConfig:
    """Two-point Ramsey configuration.

    The fringe is probed at the two closing phases {phi0, phi0 + pi}.
    phi0 = None resolves to the bright-fringe phase: 0 without echo,
    pi with the echo pulse. shots applies per phase point and per
    control block.
    """

    tau_r: float
    shots: int = 10000
    phi0: float | None = None
    spam: SpamModel = field(default_factory=SpamModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    echo: bool = False

    def __post_init__(self):
        if self.tau_r <= 0:
            raise ValueError("tau_r must be > 0")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def bright_phase(self) -> float:
        if self.phi0 is not None:
            return self.phi0
        return math.pi if self.echo else 0.0


@dataclass(frozen=True)
class RamseyBlock:
    label: str
    closing_phase: float | None
    outcomes: np.ndarray

    @property
    def fraction_up(self) -> float:
        return float(np.mean(self.outcomes))


@dataclass(frozen=True)
class RamseyResult:
    tau_r: float
    echo: bool
    contrast: float
    contrast_loss: float
    spam_measured: float
    eps_down_measured: float
    eps_up_measured: float
    blocks: tuple[RamseyBlock, ...]


def _ramsey_windows(config: RamseyConfig) -> np.ndarray:
    if config.echo:
        return np.array([0.0, config.tau_r / 2.0, config.tau_r / 2.0])
    return np.array([0.0, config.tau_r])


def _ramsey_unitaries(config: RamseyConfig, closing_phase: float) -> np.ndarray:
    first = rotation_unitary(np.pi / 2, 0.0)
    last = rotation_unitary(np.pi / 2, closing_phase)
    if config.echo:
        return np.stack([first, _X_PI, last])
    return np.stack([first, last])


def run_ramsey(config: RamseyConfig, rng: np.random.Generator) -> RamseyResult:
    """Simulate a two-point Ramsey (or echo) measurement.

    Per shot, dephasing over the delay is drawn from a fresh noise
    realization. Four blocks run in fixed order: bright fringe, dark
    fringe, then the two SPAM controls of matched duration (idle ->
    expect down; pi pulse then idle -> expect up; the idle state sits at
    a pole, so its dephasing is a no-op and is skipped). The returned
    contrast loss is SPAM-corrected using the measured control error:
    loss = 1 - contrast / (1 - 2 * eps_spam_measured).
    """
    dt_pink = min(config.tau_r / 20.0, 1e-3)
    windows = _ramsey_windows(config)
    bright = config.bright_phase
    blocks = []
    for label, phase in (("bright", bright), ("dark", bright + math.pi)):
        phases = _engine.sample_phases(config.noise, windows, config.shots, rng, dt_pink)
        state = _engine.execute_fused(
            _ramsey_unitaries(config, phase)[None, :], phases[None, :], _KET_DOWN)[0]
        outcomes = _engine.measure_batch(state, config.spam, rng)
        blocks.append(RamseyBlock(label, phase, outcomes))
    for label, state_vec in (("ctrl-down", _KET_DOWN), ("ctrl-up", _KET_UP)):
        state = np.broadcast_to(state_vec, (config.shots, 2))
        outcomes = _engine.measure_batch(state, config.spam, rng)
        blocks.append(RamseyBlock(label, None, outcomes))

    p_bright, p_dark = blocks[0].fraction_up, blocks[1].fraction_up
    eps_down = blocks[2].fraction_up               # prepared down, read up
    eps_up = 1.0 - blocks[3].fraction_up           # prepared up, read down
    eps_spam = 0.5 * (eps_down + eps_up)
    contrast = p_bright - p_dark
    if eps_spam >= 0.49:
        raise ValueError("measured SPAM error too large to correct contrast")
    loss = 1.0 - contrast / (1.0 - 2.0 * eps_spam)
    return RamseyResult(
        tau_r=config.tau_r, echo=config.echo, contrast=contrast,
        contrast_loss=loss, spam_measured=eps_spam,
        eps_down_measured=eps_down, eps_up_measured=eps_up,
        blocks=tuple(blocks))


def run_spin_echo(config: RamseyConfig, rng: np.random.Generator) -> RamseyResult:
    """Ramsey with a refocusing pi pulse halfway through the delay."""
    if not config.echo:
        config = replace(config, echo=True)
    return run_ramsey(config, rng)


@dataclass(frozen=True)
class RbConfig:
    """One randomized-benchmarking point (fixed sequence length).

    tau = 0 is standard RB (gates only, labeled 'ref'); tau > 0 runs
    the interleaved set and its time-matched reference set. dd_period
    inserts X pi pulses during delays (requires tau >= 2 * dd_period).
    eps_inject applies a uniform random Pauli with probability
    1.5 * eps_inject after every physical pulse (average error
    eps_inject per pulse) and forces pulse-level execution.
    """

    m: int
    master_seed: int
    k: int = 50
    tau: float = 0.0
    gateset: GateSetVariant = GateSetVariant.FOUR_GENERATOR
    dd_period: float | None = None
    eps_inject: float = 0.0
    shots: int = 100
    spam: SpamModel = field(default_factory=SpamModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    gap: float = DEFAULT_GAP
    gate_timing: str = "instantaneous"
    finite_slices: int = 8
    max_seq_duration: float = DEFAULT_MAX_SEQ_DURATION
    point_tag: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.dd_period is not None and self.tau < 2.0 * self.dd_period:
            raise ValueError("decoupling requires tau >= 2 * dd_period")
        if not (0.0 <= self.eps_inject < 0.5):
            raise ValueError("eps_inject must be in [0, 0.5)")
        if self.m * self.tau > self.max_seq_duration * (1 + 1e-9):
            raise ValueError(
                f"m * tau = {self.m * self.tau:.3g} s exceeds the "
                f"{self.max_seq_duration:.3g} s sequence-duration cap")
        if self.gate_timing not in ("instantaneous", "finite"):
            raise ValueError("gate_timing must be 'instantaneous' or 'finite'")


@dataclass(frozen=True)
class SequenceRecord:
    """Outcome of one randomized sequence (or control block)."""

    set_label: str
    seq_index: int
    m: int
    tau: float
    target: str
    outcomes: np.ndarray
    fidelity: float
    wall_duration: float
    seed_key: tuple[int, ...]
    dd_period: float | None = None

    def __post_init__(self):
        if not (0.0 - 1e-12 <= self.fidelity <= 1.0 + 1e-12):
            raise ValueError("fidelity outside [0, 1]")


@dataclass(frozen=True)
class RbPointResult:
    config: RbConfig
    records: tuple[SequenceRecord, ...]

    def records_for(self, set_label: str) -> list[SequenceRecord]:
        return [r for r in self.records if r.set_label == set_label]

    def fidelities(self, set_label: str) -> list[float]:
        return [r.fidelity for r in self.records_for(set_label)]


def dd_pulse_count(tau: float, dd_period: float | None) -> int:
    """Even refocusing-pulse count for one delay of length tau."""
    if dd_period is None or tau < 2.0 * dd_period:
        return 0
    return 2 * int(tau / (2.0 * dd_period))


def _emit_delay(tokens: list, tau: float, dd_period: float | None, gap: float,
                pulse_level: bool):
    n = dd_pulse_count(tau, dd_period)
    if tau <= 0:
        return
    if n == 0:
        tokens.append(("z", tau))
        return
    seg_edge = tau / (2 * n)
    seg_mid = tau / n
    tokens.append(("z", seg_edge))
    for j in range(n):
        tokens.append(("z", gap))
        tokens.append(("u", _X_PI, True))
        tokens.append(("z", seg_mid if j < n - 1 else seg_edge))


def _emit_element(tokens: list, elem: CliffordElement, gateset: GateSetVariant,
                  gap: float, pulse_level: bool, finite_slices: int | None):
    pulses = expand_gateset(elem, gateset)
    if not pulse_level:
        tokens.append(("z", gap * len(pulses)))
        tokens.append(("u", elem.unitary, False))
        return
    for p in pulses:
        tokens.append(("z", gap))
        if finite_slices:
            _emit_finite_pulse(tokens, p, finite_slices)
        else:
            tokens.append(("u", pulse_unitary(p), True))


def _emit_finite_pulse(tokens: list, p: Pulse, slices: int):
    slice_u = rotation_unitary(p.effective_angle / slices, p.axis_phase)
    sub = p.duration / slices
    for s in range(slices):
        tokens.append(("u", slice_u, s == slices - 1))
        tokens.append(("z", sub))


def _compile(tokens: list) -> _engine.SequenceProgram:
    windows: list[float] = []
    unitaries: list[np.ndarray] = []
    inject: list[bool] = []
    pending = 0.0
    for tok in tokens:
        if tok[0] == "z":
            pending += tok[1]
        else:
            windows.append(pending)
            pending = 0.0
            unitaries.append(tok[1])
            inject.append(tok[2])
    if pending > 0.0:
        windows.append(pending)
    return _engine.SequenceProgram(
        unitaries=np.array(unitaries, dtype=complex),
        windows=np.array(windows, dtype=float),
        inject_mask=np.array(inject, dtype=bool),
        wall_duration=float(sum(w for w in windows)),
    )


def build_rb_program(cliffs: list[CliffordElement], rec: CliffordElement,
                     tau: float, interleaved: bool, gateset: GateSetVariant,
                     dd_period: float | None, gap: float = DEFAULT_GAP,
                     pulse_level: bool = False,
                     finite_slices: int | None = None) -> _engine.SequenceProgram:
    """Compile one RB sequence to an executable program."""
    tokens: list = []
    for c in cliffs:
        _emit_element(tokens, c, gateset, gap, pulse_level, finite_slices)
        if interleaved:
            _emit_delay(tokens, tau, dd_period, gap, pulse_level)
    _emit_element(tokens, rec, gateset, gap, pulse_level, finite_slices)
    if not interleaved:
        for _ in range(len(cliffs)):
            _emit_delay(tokens, tau, dd_period, gap, pulse_level)
    return _compile(tokens)


def _seq_rng(config: RbConfig, stream: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        [config.master_seed, _KIND_RB, config.point_tag, config.m, stream, k]))


def _seq_key(config: RbConfig, stream: int, k: int) -> tuple[int, ...]:
    return (config.master_seed, _KIND_RB, config.point_tag, config.m, stream, k)


def _draw_content(config: RbConfig) -> list[tuple[list[CliffordElement], CliffordElement, int]]:
    """Clifford draws, recovery gate, and target for each randomization.
    Shared by the interleaved and reference sets."""
    group = enumerate_group()
    out = []
    for k in range(config.k):
        rng = _seq_rng(config, CONTENT_STREAM, k)
        idxs = rng.integers(0, len(group), size=config.m)
        cliffs = [group[int(i)] for i in idxs]
        net = group[0]
        for c in cliffs:
            net = compose(net, c)
        target = int(rng.integers(2))
        rec = recovery_gate(net, target, rng)
        out.append((cliffs, rec, target))
    return out


def run_rb_campaign(config: RbConfig, rng: np.random.Generator | None = None) -> RbPointResult:
    """Execute one RB point: k randomized sequences per set, plus two
    SPAM control blocks per randomization.

    Returns records for the interleaved set ('irb', when tau > 0), the
    reference set ('ref'), and controls ('ctrl-up', 'ctrl-down').
    Fully determined by the config (master_seed); the optional rng is
    only consulted when config.master_seed is None.
    """
    del rng  # determinism comes from config.master_seed
    pulse_level = config.eps_inject > 0 or config.gate_timing == "finite"
    finite = config.finite_slices if config.gate_timing == "finite" else None
    content = _draw_content(config)

    sets = [("ref", _STREAM_REF, False)]
    if config.tau > 0:
        sets.insert(0, ("irb", _STREAM_IRB, True))

    records: list[SequenceRecord] = []
    wall_by_k: dict[int, float] = {}
    for set_label, stream, interleaved in sets:
        programs = []
        for k in range(config.k):
            cliffs, rec, target = content[k]
            prog = build_rb_program(
                cliffs, rec, config.tau, interleaved, config.gateset,
                config.dd_period, config.gap, pulse_level, finite)
            programs.append((k, prog, target))
            wall_by_k[k] = prog.wall_duration
        if pulse_level:
            set_records = _run_pulse_level(config, set_label, stream, programs)
        else:
            set_records = _run_fused(config, set_label, stream, programs)
        records.extend(set_records)

    records.extend(_run_controls(config, wall_by_k))
    return RbPointResult(config=config, records=tuple(records))


def _target_name(target: int) -> str:
    return "up" if target == 1 else "down"


def _make_record(config: RbConfig, set_label: str, stream: int, k: int,
                 prog: _engine.SequenceProgram, target: int,
                 outcomes: np.ndarray) -> SequenceRecord:
    return SequenceRecord(
        set_label=set_label, seq_index=k, m=config.m, tau=config.tau,
        target=_target_name(target), outcomes=outcomes,
        fidelity=float(np.mean(outcomes == target)),
        wall_duration=prog.wall_duration,
        seed_key=_seq_key(config, stream, k),
        dd_period=config.dd_period)


def _run_fused(config: RbConfig, set_label: str, stream: int,
               programs: list) -> list[SequenceRecord]:
    records = []
    dt_pink = _engine.pink_sample_interval(config.tau)
    for start in range(0, len(programs), _FUSED_BATCH):
        chunk = programs[start:start + _FUSED_BATCH]
        rngs = [_seq_rng(config, stream, k) for k, _, _ in chunk]
        phases = np.stack([
            _engine.sample_phases(config.noise, prog.windows, config.shots, r, dt_pink)
            for (_, prog, _), r in zip(chunk, rngs)])
        unitaries = np.stack([prog.unitaries for _, prog, _ in chunk])
        states = _engine.execute_fused(unitaries, phases, _KET_UP)
        for (k, prog, target), r, state in zip(chunk, rngs, states):
            outcomes = _engine.measure_batch(state, config.spam, r)
            records.append(_make_record(config, set_label, stream, k, prog, target, outcomes))
    return records


def _run_pulse_level(config: RbConfig, set_label: str, stream: int,
                     programs: list) -> list[SequenceRecord]:
    records = []
    dt_pink = _engine.pink_sample_interval(config.tau)
    for k, prog, target in programs:
        r = _seq_rng(config, stream, k)
        phases = _engine.sample_phases(config.noise, prog.windows, config.shots, r, dt_pink)
        state = _engine.execute_pulsewise(prog, phases, _KET_UP, config.eps_inject, r)
        outcomes = _engine.measure_batch(state, config.spam, r)
        records.append(_make_record(config, set_label, stream, k, prog, target, outcomes))
    return records


def _run_controls(config: RbConfig, wall_by_k: dict[int, float]) -> list[SequenceRecord]:
    """Duration-matched SPAM controls: prepare up and idle (expect up),
    or prepare up, apply a pi pulse, and idle (expect down). The idle
    state sits at a pole, so dephasing cannot change the outcome and
    noise synthesis is skipped; only measurement draws are consumed."""
    records = []
    for set_label, stream, state_vec, target in (
            ("ctrl-up", _STREAM_CTRL_UP, _KET_UP, 1),
            ("ctrl-down", _STREAM_CTRL_DOWN, _X_PI @ _KET_UP, 0)):
        for k in range(config.k):
            r = _seq_rng(config, stream, k)
            state = np.broadcast_to(state_vec, (config.shots, 2))
            outcomes = _engine.measure_batch(state, config.spam, r)
            records.append(SequenceRecord(
                set_label=set_label, seq_index=k, m=config.m, tau=config.tau,
                target=_target_name(target), outcomes=outcomes,
                fidelity=float(np.mean(outcomes == target)),
                wall_duration=wall_by_k[k],
                seed_key=_seq_key(config, stream, k),
                dd_period=config.dd_period))
    return records


def average_pulses_per_clifford(gateset: GateSetVariant) -> float:
    group = enumerate_group()
    if gateset is GateSetVariant.FOUR_GENERATOR:
        return sum(len(e.decomposition_4gen) for e in group) / len(group)
    return sum(4 * len(e.decomposition_2gen) for e in group) / len(group)


def plan_m_grid(noise: NoiseModel, tau: float,
                gateset: GateSetVariant = GateSetVariant.FOUR_GENERATOR,
                dd_period: float | None = None,
                target_infidelity: float = TARGET_SEQUENCE_INFIDELITY,
                max_seq_duration: float = DEFAULT_MAX_SEQ_DURATION,
                gap: float = DEFAULT_GAP) -> list[int]:
    """Sequence lengths for one delay point: the longest length aims at
    a total infidelity of ~target_infidelity (capped by the sequence-
    duration budget), probed together with ~1/2 and ~1/6 of it.

    With decoupling active the per-delay error is predicted from the
    white and static terms only, since the refocusing pulses suppress
    the pink contribution.
    """
    if dd_period is not None and dd_pulse_count(tau, dd_period) > 0:
        model = replace(noise, s_p=0.0)
    else:
        model = noise
    eps = predict_memory_error(model, tau, quiet=True) if tau > 0 else 0.0
    slot = tau + gap * (average_pulses_per_clifford(gateset)
                        + dd_pulse_count(tau, dd_period))
    m_cap = max(int(max_seq_duration / slot), 2)
    m_hat = int(round(target_infidelity / eps)) if eps > 0 else m_cap
    m_top = min(max(m_hat, 2), m_cap)
    grid = {m_top, max(2, math.ceil(m_top / 2)), max(2, math.ceil(m_top / 6))}
    fill = 1
    while len(grid) < 3:
        if fill not in grid:
            grid.add(fill)
        fill += 1
    return sorted(grid)


def estimate_cost(config: RbConfig, m_values: list[int] | None = None) -> float:
    """Rough cost in elementary random-sample units, used for budget
    checks before running."""
    ms = m_values if m_values is not None else [config.m]
    n_sets = 2 if config.tau > 0 else 1
    pulses = average_pulses_per_clifford(config.gateset)
    cost = 0.0
    for m in ms:
        windows = m * (1 + dd_pulse_count(config.tau, config.dd_period)) + 2
        per_seq = windows * config.shots
        if config.noise.s_p > 0:
            t_seq = m * (config.tau + config.gap * pulses)
            t_synth = max(t_seq, 2.0 / config.noise.f_c)
            dt = max(_engine.pink_sample_interval(config.tau), t_synth / MAX := 2 ** 24) \
                if False else max(_engine.pink_sample_interval(config.tau),
                                  t_synth / 2 ** 24)
            per_seq += (t_synth / dt) * config.shots
        cost += n_sets * config.k * per_seq
    return cost
