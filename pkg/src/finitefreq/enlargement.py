"""Pole/band gap, minimal band enlargement, and the uniform-radius shortcut.

The gap measures how far the frozen system matrix sits outside the analysis
band; the minimal enlargement delta^2 scales the gap by a ratio of
controllability-Gramian traces and widens the band just enough to restore the
nonnegativity of the band IQC for parameter-varying systems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gramians import ShiftedTraceBound, gramian_lpv_frozen, gramian_lpv_weighted, \
    quadrature_trace_bound, shifted_trace_bound
from .lmi import UasCertificate, uas_certificate
from .model import FrequencyRange, LpvSystem, frequency_weight
from .sdp import real_embedding


def gap(system: LpvSystem, rng: FrequencyRange, p_grid_density: int = 11) -> float:
    """Squared gap between the frozen system matrix and the band.

    For each grid parameter p the block [A* I](Psi (x) I)[A; I] is formed; the
    gap squared at p is lambda_max of its negation when that is positive, else
    zero, and the reported value is the supremum over the grid (vertices
    always included).  For a low band this reduces to
    max(0, sigma_max(A(p))^2 - edge^2).
    """
    psi = frequency_weight(rng).psi
    n = system.n
    I = np.eye(n)
    worst = 0.0
    for p in system.box.p_grid(p_grid_density):
        A = system.A(p)
        K = psi[0, 0] * (A.conj().T @ A) + psi[0, 1] * A.conj().T + psi[1, 0] * A + psi[1, 1] * I
        if np.iscomplexobj(K):
            lam = float(np.linalg.eigvalsh(real_embedding(-K)).max())
        else:
            lam = float(np.linalg.eigvalsh(-K).max())
        worst = max(worst, max(0.0, lam))
    return worst


def delta_squared(gap_sq: float, traces: dict, mode: str = "UAS") -> float:
    """Minimal admissible band widening (squared), clamped at zero.

    traces carries 'tr_w_p_min' (denominator), 'tr_w_dot_p', and for BIBS mode
    also 'tr_w_hat_p' which enters with a negative sign.
    """
    if gap_sq < 0:
        raise ValueError("gap_sq must be nonnegative")
    tr_w_p = float(traces["tr_w_p_min"])
    if tr_w_p <= 0:
        raise ValueError("system not finite-frequency controllable on this band "
                         "(nonpositive Gramian trace)")
    if gap_sq == 0.0:
        return 0.0
    tr_dot = float(traces["tr_w_dot_p"])
    if mode.upper() == "UAS":
        raw = gap_sq * tr_dot / tr_w_p
    elif mode.upper() == "BIBS":
        raw = gap_sq * (-float(traces["tr_w_hat_p"]) + tr_dot) / tr_w_p
    else:
        raise ValueError("mode must be 'UAS' or 'BIBS'")
    return max(0.0, raw)


def enlarge_range(rng: FrequencyRange, delta_sq: float) -> FrequencyRange:
    """Widen the band by delta: low and middle bands grow, a high band's edge drops."""
    if delta_sq < 0:
        raise ValueError("delta_sq must be nonnegative")
    if delta_sq == 0.0 or rng.kind == "entire":
        return rng
    if rng.kind == "low":
        return FrequencyRange.low(np.sqrt(rng.hi**2 + delta_sq))
    if rng.kind == "middle":
        # center is preserved; the half width grows from (hi-lo)/2 to s/2
        wc = 0.5 * (rng.lo + rng.hi)
        s = np.sqrt((rng.hi - rng.lo) ** 2 + 4.0 * delta_sq)
        lo = wc - 0.5 * s
        if lo <= 0:
            return FrequencyRange.low(wc + 0.5 * s)
        return FrequencyRange.middle(lo, wc + 0.5 * s)
    # high
    if rng.lo**2 <= delta_sq:
        warnings.warn("high band edge consumed by the enlargement; "
                      "falling back to the entire axis", stacklevel=2)
        return FrequencyRange.entire()
    return FrequencyRange.high(np.sqrt(rng.lo**2 - delta_sq))


def uniform_spectral_radius(system: LpvSystem, p_grid_density: int = 11) -> float:
    """Largest spectral norm of the frozen system matrix over the box.

    The matrix 2-norm (largest singular value) is used: it dominates the
    eigenvalue radius, coincides with it for normal matrices, and for low
    bands a band edge at or above this value makes the gap vanish exactly.
    """
    return max(float(np.linalg.norm(system.A(p), 2))
               for p in system.box.p_grid(p_grid_density))


@dataclass
class EnlargementResult:
    gap_squared: float
    delta_squared: float
    mode: str
    trace_W_p_min: float
    trace_W_hat_p: float
    trace_W_dot_p: float
    enlarged: FrequencyRange
    original: FrequencyRange
    rho_unif: float
    trace_provenance: str  # 'lyapunov_lmi' | 'quadrature' | 'none (gap is zero)'


def recommend_range(system: LpvSystem, rng: FrequencyRange, mode: str = "UAS",
                    uas: UasCertificate = None, c3_target: float = 1.0,
                    trajectory=None, t: float = 20.0, use_quadrature: bool = False,
                    p_grid_density: int = 11, quad_nodes: int = 201,
                    step: float = 1e-3) -> EnlargementResult:
    """End-to-end band recommendation: gap, traces, widening, enlarged band.

    A zero gap short-circuits everything (no widening needed; the
    uniform-radius comparison is reported alongside as a quick diagnostic).
    The drift traces come from the decay-certificate bound by default, or from
    direct quadrature along a supplied schedule.
    """
    rho = uniform_spectral_radius(system, p_grid_density)
    g2 = gap(system, rng, p_grid_density)
    if g2 == 0.0:
        return EnlargementResult(0.0, 0.0, mode.upper(), np.nan, np.nan, 0.0,
                                 rng, rng, rho, "none (gap is zero)")

    tr_w_p_min = min(float(np.trace(gramian_lpv_frozen(system, p, rng, quad_nodes)))
                     for p in system.box.p_grid(p_grid_density))
    tr_hat = 0.0
    if mode.upper() == "UAS":
        if use_quadrature:
            if trajectory is None:
                raise ValueError("quadrature trace path needs a schedule")
            bound = quadrature_trace_bound(system, trajectory, t, rng, quad_nodes, step)
        else:
            bound = _bound_with_cert(system, rng, uas, c3_target, p_grid_density)
        tr_dot = bound.bound_1 + bound.bound_2
        prov = bound.method
    else:
        if trajectory is None:
            raise ValueError("BIBS mode needs a schedule for the weighted Gramian")
        tr_hat = float(np.trace(gramian_lpv_weighted(system, trajectory, t, rng,
                                                     quad_nodes, step)))
        bound = quadrature_trace_bound(system, trajectory, t, rng, quad_nodes, step)
        tr_dot = bound.bound_1 + bound.bound_2
        prov = "quadrature"

    d2 = delta_squared(g2, {"tr_w_p_min": tr_w_p_min, "tr_w_hat_p": tr_hat,
                            "tr_w_dot_p": tr_dot}, mode)
    return EnlargementResult(g2, d2, mode.upper(), tr_w_p_min, tr_hat, tr_dot,
                             enlarge_range(rng, d2), rng, rho, prov)


def _bound_with_cert(system, rng, uas, c3_target, p_grid_density) -> ShiftedTraceBound:
    try:
        return shifted_trace_bound(system, rng, uas, grid_density=p_grid_density)
    except ValueError:
        if uas is not None:
            raise
        uas = uas_certificate(system, c3_target)
        return shifted_trace_bound(system, rng, uas, grid_density=p_grid_density)
