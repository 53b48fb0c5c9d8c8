"""Time-domain validation: band-limited inputs, trajectories, realized gain, IQC.

The scalar IQC functional integrates He([xdot* x*] Psi [xdot; x]) along a
simulated trajectory; its sign is the time-domain witness for band-limited
state behavior that the LMI certificates presuppose.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rk4 import propagate_vector, step_matrices, step_offsets
from .model import FrequencyRange, FrequencyWeight, LpvSystem, frequency_weight


@dataclass(frozen=True)
class BandLimitedSignal:
    """Sum of cosines a_i cos(w_i t + phi_i), optionally discounted by e^{-lam t}.

    Zero for t < 0.  When a band is declared, all component frequencies must
    lie inside it, and a nonzero discount must stay well below the slowest
    component.
    """

    components: tuple  # of (amplitude, frequency [rad/s], phase [rad])
    discount_lambda: float = 0.0
    band: FrequencyRange = None
    truncate_negative_time: bool = True

    def __post_init__(self):
        comps = tuple((float(a), float(w), float(ph)) for a, w, ph in self.components)
        object.__setattr__(self, "components", comps)
        if self.discount_lambda < 0:
            raise ValueError("discount must be nonnegative")
        if self.band is not None:
            for _, w, _ in comps:
                if not self.band.contains(w):
                    raise ValueError(f"component frequency {w} lies outside {self.band}")
        if self.discount_lambda > 0 and comps:
            wmin = min(w for _, w, _ in comps if w > 0) if any(w > 0 for _, w, _ in comps) else np.inf
            if self.discount_lambda >= wmin / 10.0:
                raise ValueError("discount must stay below the slowest component / 10")

    @classmethod
    def in_band(cls, rng: FrequencyRange, n_components: int, seed=0, amplitude=1.0,
                interior=0.2, discount=0.0):
        """Random multi-cosine with frequencies strictly inside the band."""
        g = np.random.default_rng(seed)
        if rng.kind == "high":
            lo, hi = rng.lo * (1.0 + interior), rng.lo * 3.0
        elif rng.kind == "entire":
            lo, hi = 0.1, 3.0
        else:
            width = rng.hi - rng.lo
            lo, hi = rng.lo + interior * width, rng.hi - interior * width
            lo = max(lo, 0.05 * rng.hi if rng.kind == "low" else lo)
        freqs = g.uniform(lo, hi, n_components)
        phases = g.uniform(0.0, 2.0 * np.pi, n_components)
        comps = tuple((amplitude, f, ph) for f, ph in zip(freqs, phases))
        return cls(comps, discount, rng)

    @property
    def max_frequency(self):
        return max((w for _, w, _ in self.components), default=0.0)

    def __call__(self, t):
        return sample_signal(self, t)


def sample_signal(signal: BandLimitedSignal, t):
    """Evaluate the signal; scalar in, scalar out; array in, array out."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for a, w, ph in signal.components:
        out = out + a * np.cos(w * t + ph)
    if signal.discount_lambda > 0:
        out = out * np.exp(-signal.discount_lambda * t)
    if signal.truncate_negative_time:
        out = np.where(t < 0, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScheduleTrajectory:
    """Scheduling-parameter curve p(t) with an exact derivative.

    kinds: 'constant', 'sinusoid' (p = center + amplitude*sin(rate*t + phase)),
    'pwl' (piecewise-linear interpolation of samples).
    """

    kind: str
    center: np.ndarray = None
    amplitude: np.ndarray = None
    rate: float = 0.0
    phase: float = 0.0
    times: np.ndarray = None
    values: np.ndarray = None
    box: object = None

    @classmethod
    def constant(cls, p0, box=None):
        return cls("constant", center=np.atleast_1d(np.asarray(p0, float)), box=box)

    @classmethod
    def sinusoid(cls, center, amplitude, rate, phase=0.0, box=None):
        return cls("sinusoid", center=np.atleast_1d(np.asarray(center, float)),
                   amplitude=np.atleast_1d(np.asarray(amplitude, float)),
                   rate=float(rate), phase=float(phase), box=box)

    @classmethod
    def piecewise_linear(cls, times, values, box=None):
        times = np.asarray(times, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != times.size:
            values = values.T
        return cls("pwl", times=times, values=values, box=box)

    def p(self, t):
        """p(t): shape (l,) for scalar t, (l, N) for an array of times."""
        t = np.asarray(t, dtype=float)
        ts = np.atleast_1d(t)
        if self.kind == "constant":
            out = np.repeat(self.center[:, None], ts.size, axis=1)
        elif self.kind == "sinusoid":
            out = self.center[:, None] + self.amplitude[:, None] \
                * np.sin(self.rate * ts + self.phase)[None, :]
        else:
            out = np.stack([np.interp(ts, self.times, self.values[:, i])
                            for i in range(self.values.shape[1])])
        return out if t.ndim else out[:, 0]

    def pdot(self, t):
        """dp/dt with the same shape conventions as p."""
        t = np.asarray(t, dtype=float)
        ts = np.atleast_1d(t)
        if self.kind == "constant":
            out = np.zeros((self.center.size, ts.size))
        elif self.kind == "sinusoid":
            out = (self.amplitude * self.rate)[:, None] \
                * np.cos(self.rate * ts + self.phase)[None, :]
        else:
            slope = np.gradient(self.values, self.times, axis=0)
            out = np.stack([np.interp(ts, self.times, slope[:, i])
                            for i in range(self.values.shape[1])])
        return out if t.ndim else out[:, 0]

    @property
    def rate_cap(self):
        if self.kind == "constant":
            return np.zeros_like(self.center)
        if self.kind == "sinusoid":
            return np.abs(self.amplitude * self.rate)
        return np.abs(np.gradient(self.values, self.times, axis=0)).max(axis=0)

    @property
    def nparams(self):
        if self.kind == "pwl":
            return self.values.shape[1]
        return self.center.size


@dataclass
class SimulationResult:
    """Sampled trajectories; x_dot comes from the right-hand side, not differencing."""

    times: np.ndarray
    u: np.ndarray       # (N+1, n_inputs)
    x: np.ndarray       # (N+1, n)
    x_dot: np.ndarray   # (N+1, n)
    y: np.ndarray       # (N+1, n_outputs)
    step: float


def simulate(system: LpvSystem, trajectory: ScheduleTrajectory, signal: BandLimitedSignal,
             t_end: float, step: float = 1e-3) -> SimulationResult:
    """RK4 integration from zero initial state with exact stage evaluations."""
    if step <= 0 or t_end <= 0:
        raise ValueError("step and t_end must be positive")
    wmax = signal.max_frequency
    if wmax > 0 and step > 1.0 / (10.0 * wmax):
        warnings.warn("step is coarse for the fastest input component", stacklevel=2)

    N = int(round(t_end / step))
    times = step * np.arange(N + 1)
    l = system.nparams

    def eval_families(ts):
        P = np.atleast_2d(np.asarray(trajectory.p(ts), dtype=float).T).reshape(len(ts), -1) \
            if l else np.zeros((len(ts), 0))
        A = np.broadcast_to(system.A.constant, (len(ts),) + system.A.shape).copy()
        B = np.broadcast_to(system.B.constant, (len(ts),) + system.B.shape).copy()
        for i in range(l):
            A += P[:, i][:, None, None] * system.A.coeffs[i]
            B += P[:, i][:, None, None] * system.B.coeffs[i]
        return A, B

    if l and trajectory.box is not None and not all(
            trajectory.box.contains(p) for p in
            np.atleast_2d(np.asarray(trajectory.p(times[:: max(1, N // 64)]), float).T)):
        warnings.warn("schedule leaves the parameter box", stacklevel=2)

    stages = []
    for off in (0.0, 0.5 * step, step):
        A_s, B_s = eval_families(times[:-1] + off)
        u_s = np.atleast_1d(sample_signal(signal, times[:-1] + off))
        stages.append((A_s, (B_s * u_s[:, None, None]).sum(axis=2)))
    M = step_matrices(tuple(A for A, _ in stages), step)
    g = step_offsets(tuple(A for A, _ in stages), tuple(b for _, b in stages), step)
    xs = propagate_vector(M, g, np.zeros(system.n))
    if not np.all(np.isfinite(xs)):
        raise RuntimeError("integration diverged")

    A_all, B_all = eval_families(times)
    u = np.atleast_1d(sample_signal(signal, times))[:, None] * np.ones((1, system.n_inputs))
    x_dot = np.einsum("tij,tj->ti", A_all, xs) + np.einsum("tij,tj->ti", B_all, u)
    P = np.atleast_2d(np.asarray(trajectory.p(times), dtype=float).T).reshape(len(times), -1) \
        if l else np.zeros((len(times), 0))
    C = np.broadcast_to(system.C.constant, (len(times),) + system.C.shape).copy()
    D = np.broadcast_to(system.D.constant, (len(times),) + system.D.shape).copy()
    for i in range(l):
        C += P[:, i][:, None, None] * system.C.coeffs[i]
        D += P[:, i][:, None, None] * system.D.coeffs[i]
    y = np.einsum("tij,tj->ti", C, xs) + np.einsum("tij,tj->ti", D, u)
    return SimulationResult(times, u, xs, x_dot, y, step)


def performance_ratio(result: SimulationResult) -> np.ndarray:
    """Running realized gain sqrt(int |y|^2 / int |u|^2); zero until input energy accrues."""
    h = result.step
    eu = np.einsum("ti,ti->t", result.u, result.u)
    ey = np.einsum("ti,ti->t", result.y, result.y)

    def cumtrapz(v):
        out = np.zeros_like(v)
        out[1:] = np.cumsum(0.5 * h * (v[1:] + v[:-1]))
        return out

    Eu, Ey = cumtrapz(eu), cumtrapz(ey)
    if Eu[-1] <= 0:
        raise ValueError("input energy is zero; realized gain undefined")
    with np.errstate(divide="ignore", invalid="ignore"):
        curve = np.sqrt(np.where(Eu > 0, Ey / np.where(Eu > 0, Eu, 1.0), 0.0))
    return curve


@dataclass
class IqcReport:
    """Running band IQC functional and its sign verdict."""

    s_curve: np.ndarray
    final_value: float
    sign_verdict: str  # 'nonnegative' | 'negative'
    range: FrequencyRange
    scale: float


def iqc_value(result: SimulationResult, weight) -> IqcReport:
    """Integrate He([xdot* x*] Psi [xdot; x]) along the trajectory."""
    if isinstance(weight, FrequencyRange):
        rng, psi = weight, frequency_weight(weight).psi
    elif isinstance(weight, FrequencyWeight):
        rng, psi = None, weight.psi
    else:
        raise TypeError("weight must be a FrequencyRange or FrequencyWeight")
    dd = np.einsum("ti,ti->t", result.x_dot, result.x_dot)
    xx = np.einsum("ti,ti->t", result.x, result.x)
    dx = np.einsum("ti,ti->t", result.x_dot, result.x)
    p00, p01, p11 = psi[0, 0], psi[0, 1], psi[1, 1]
    integrand = 2.0 * (np.real(p00) * dd + np.real(p11) * xx + 2.0 * np.real(p01) * dx)
    h = result.step
    s = np.zeros_like(integrand)
    s[1:] = np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]))
    absint = 2.0 * (abs(p00) * dd + abs(p11) * xx + 2.0 * abs(p01) * np.abs(dx))
    scale = float(np.trapezoid(absint, dx=h))
    final = float(s[-1])
    verdict = "nonnegative" if final >= -1e-9 * max(scale, 1.0) else "negative"
    return IqcReport(s, final, verdict, rng, scale)


def spectrum_fraction(data, rng: FrequencyRange, step: float = None,
                      t_end: float = 60.0) -> float:
    """Fraction of (Hann-windowed) spectral energy inside the band, in [0, 1].

    Accepts a SimulationResult (uses its input channel), a BandLimitedSignal
    (sampled on a default window), or a uniformly sampled array with ``step``.
    """
    if isinstance(data, SimulationResult):
        u = data.u[:, 0] if data.u.ndim > 1 else data.u
        step = data.step
    elif isinstance(data, BandLimitedSignal):
        step = step or 1e-3
        u = sample_signal(data, step * np.arange(int(round(t_end / step)) + 1))
    else:
        u = np.asarray(data, dtype=float)
        if step is None:
            raise ValueError("step required for raw sample arrays")
    if not np.any(u):
        return 1.0  # vacuously band limited
    w = np.hanning(u.size)
    U = np.fft.rfft(u * w)
    freqs = 2.0 * np.pi * np.fft.rfftfreq(u.size, d=step)
    energy = np.abs(U) ** 2
    mask = np.array([rng.contains(f) for f in freqs])
    return float(energy[mask].sum() / energy.sum())
