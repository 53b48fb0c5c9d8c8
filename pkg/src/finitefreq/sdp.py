"""Dense small-scale semidefinite feasibility engine.

Decides whether an affine symmetric block form F(x) = F0 + sum_j x_j Fj admits
F(x) >= margin*I by minimizing a log-sum-exp smoothing of the largest
eigenvalue of -F(x) over a doubling temperature schedule.  Problems here are
desk scale (blocks up to ~12x12, tens of variables), so dense eigensolves per
iteration are cheap and the verdict is re-verified with an exact eigensolve.

The solver certifies feasibility (every "feasible" verdict carries a point x
checked by a fresh eigensolve); an infeasible verdict means "no feasible point
found", not a dual certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize


@dataclass
class AffineSymmetricForm:
    """Block-diagonal symmetric matrix pencil F(x) = C_b + sum_j x_j K_bj per block."""

    constant_blocks: list
    coeff_blocks: list  # one (nvar, k, k) array per block
    block_sizes: list = field(default_factory=list)

    def __post_init__(self):
        self.constant_blocks = [np.array(C, dtype=float) for C in self.constant_blocks]
        self.coeff_blocks = [np.array(K, dtype=float) for K in self.coeff_blocks]
        if len(self.constant_blocks) != len(self.coeff_blocks):
            raise ValueError("need one coefficient stack per constant block")
        nv = {K.shape[0] for K in self.coeff_blocks}
        if len(nv) > 1:
            raise ValueError("all blocks must share the decision dimension")
        for C, K in zip(self.constant_blocks, self.coeff_blocks):
            k = C.shape[0]
            if C.shape != (k, k) or K.shape[1:] != (k, k):
                raise ValueError("block shapes inconsistent")
            if not np.allclose(C, C.T, atol=1e-10) or not np.allclose(K, K.transpose(0, 2, 1), atol=1e-10):
                raise ValueError("blocks must be symmetric")
        self.block_sizes = [C.shape[0] for C in self.constant_blocks]

    @property
    def nvar(self):
        return self.coeff_blocks[0].shape[0] if self.coeff_blocks else 0

    def eval_blocks(self, x):
        x = np.asarray(x, dtype=float)
        return [C + np.tensordot(x, K, axes=(0, 0))
                for C, K in zip(self.constant_blocks, self.coeff_blocks)]

    def scale(self):
        s = 0.0
        for C, K in zip(self.constant_blocks, self.coeff_blocks):
            s = max(s, float(np.abs(C).max(initial=0.0)), float(np.abs(K).max(initial=0.0)))
        return max(s, 1.0)

    @staticmethod
    def stack(forms):
        """Concatenate block lists of forms sharing one decision vector."""
        forms = list(forms)
        cs = [C for f in forms for C in f.constant_blocks]
        ks = [K for f in forms for K in f.coeff_blocks]
        return AffineSymmetricForm(cs, ks)

    def dump_json(self, path):
        """Debug dump of the full form for offline inspection."""
        obj = {
            "block_sizes": self.block_sizes,
            "nvar": self.nvar,
            "constant_blocks": [C.tolist() for C in self.constant_blocks],
            "coeff_blocks": [K.tolist() for K in self.coeff_blocks],
        }
        with open(path, "w") as fh:
            json.dump(obj, fh, sort_keys=True)


@dataclass
class FeasibilityResult:
    feasible: bool
    x: np.ndarray
    achieved_margin: float  # -lambda_max(-F(x)) at the returned point
    iterations: int


def max_eig_neg(form: AffineSymmetricForm, x) -> float:
    """lambda_max(-F(x)), computed blockwise as the max over blocks."""
    return max(float(np.linalg.eigvalsh(-Fb).max()) for Fb in form.eval_blocks(x))


def real_embedding(H) -> np.ndarray:
    """[[Re H, -Im H], [Im H, Re H]] for Hermitian H.

    The embedding is PSD iff H is, and carries H's spectrum with every
    eigenvalue doubled in multiplicity.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or not np.allclose(H, H.conj().T, atol=1e-10):
        raise ValueError("real_embedding needs a Hermitian matrix")
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def _smoothed_objective(form, s, beta, margin, state):
    """f(z) = softmax_beta of eigenvalues of -F(z/s), with its gradient."""

    def fg(z):
        x = z / s
        vals, vecs = [], []
        for C, K in zip(form.constant_blocks, form.coeff_blocks):
            Fb = C + np.tensordot(x, K, axes=(0, 0))
            w, V = np.linalg.eigh(-Fb)
            vals.append(w)
            vecs.append(V)
        allv = np.concatenate(vals)
        vmax = float(allv.max())
        if vmax <= -margin and state["found"] is None:
            state["found"] = x.copy()  # feasible point met mid-search
        ew = np.exp(beta * (allv - vmax))
        Z = ew.sum()
        f = vmax + np.log(Z) / beta
        g = np.zeros(form.nvar)
        i0 = 0
        for K, w, V in zip(form.coeff_blocks, vals, vecs):
            wts = ew[i0:i0 + w.size] / Z
            i0 += w.size
            # gradient of the softmax through the eigenvectors
            Wm = (V * wts) @ V.T
            g -= np.einsum("jkl,kl->j", K, Wm)
        return f, g / s

    return fg


def solve_feasibility(form: AffineSymmetricForm, margin: float, max_iters: int = 6000,
                      x0=None) -> FeasibilityResult:
    """Search for x with F(x) >= margin*I.

    Works on a normalized pencil: the margin is folded into the constant
    blocks and every block is scaled to unit size, so that
    F(x) >= margin*I is exactly lambda_max over blocks of -Ftilde(x) <= 0 and
    the smoothing temperature means the same thing on every block.  The
    smoothed objective is minimized per temperature stage by a quasi-Newton
    line-search descent with warm starts across the doubling schedule; the
    search returns as soon as an exactly verified feasible point appears.  A
    False verdict after the full schedule is "no feasible point found", not an
    infeasibility certificate.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    nvar = form.nvar
    x = np.zeros(nvar) if x0 is None else np.array(x0, dtype=float)
    if x.size != nvar:
        raise ValueError("warm start has wrong length")
    if nvar == 0:
        v = max_eig_neg(form, x)
        return FeasibilityResult(v <= -margin, x, -v, 0)

    # Normalized pencil: shift by the margin, scale each block to unit size.
    consts, coeffs = [], []
    for C, K in zip(form.constant_blocks, form.coeff_blocks):
        Cs = C - margin * np.eye(C.shape[0])
        sb = max(float(np.linalg.norm(Cs, 2)), max(float(np.linalg.norm(Kj, 2)) for Kj in K), 1e-12)
        consts.append(Cs / sb)
        coeffs.append(K / sb)
    scaled = AffineSymmetricForm(consts, coeffs)

    # Per-variable preconditioning on top of the block scaling.
    s = np.ones(nvar)
    for K in scaled.coeff_blocks:
        s = np.maximum(s, np.sqrt((K**2).sum(axis=(1, 2))))

    state = {"found": None}
    beta = 1.0
    nit = 0
    best_v, best_x = max_eig_neg(scaled, x), x.copy()
    stage = 0
    prev_v = np.inf
    stalled = 0
    while stage < 32 and nit < max_iters:
        fg = _smoothed_objective(scaled, s, beta, 0.0, state)
        res = minimize(fg, x * s, jac=True, method="L-BFGS-B",
                       options=dict(maxiter=min(300, max_iters - nit), ftol=1e-18, gtol=1e-16))
        nit += max(res.nit, 1)
        x = res.x / s
        v = max_eig_neg(scaled, x)
        if v < best_v:
            best_v, best_x = v, x.copy()
        if state["found"] is not None:
            xf = state["found"]
            return FeasibilityResult(True, xf, -max_eig_neg(form, xf), nit)
        if v <= 0.0:
            return FeasibilityResult(True, x, -max_eig_neg(form, x), nit)
        # Plateaued on the clearly infeasible side: stop sharpening.
        stalled = stalled + 1 if v > prev_v - (1e-10 + 1e-3 * abs(v)) else 0
        if stage >= 8 and stalled >= 2 and v > 1e-4:
            break
        prev_v = v
        beta *= 2.0
        stage += 1

    feas = max_eig_neg(scaled, best_x) <= 0.0
    return FeasibilityResult(feas, best_x, -max_eig_neg(form, best_x), nit)
