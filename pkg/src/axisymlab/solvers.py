"""Preconditioned conjugate gradients in a weighted inner product.

The elliptic and diffusion operators used here are self-adjoint and positive
in diagonal weighted inner products (weight 1/r for the stream operator, cell
averages of r^3 for the relative-vorticity diffusion, r for the vorticity
diffusion).  CG with every dot product taken against the weight handles all
of them; Jacobi preconditioning is enough at the grid sizes this lab targets.

Reductions use np.sum on full arrays (pairwise summation, single threaded),
which keeps reruns bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PCGResult:
    iterations: int
    residual: float
    converged: bool


def weighted_pcg(
    apply_op,
    b: np.ndarray,
    weight: np.ndarray,
    diag: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    maxiter: int = 20000,
):
    """Solve A x = b with A self-adjoint positive in <a, c> = sum(weight*a*c).

    diag is the diagonal of A (positive), used as Jacobi preconditioner.
    Returns (x, PCGResult); convergence is declared on the relative weighted
    residual norm.
    """
    bnorm = np.sqrt(np.sum(weight * b * b))
    if bnorm == 0.0:
        return np.zeros_like(b), PCGResult(0, 0.0, True)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_op(x)
    z = r / diag
    p = z.copy()
    rz = np.sum(weight * r * z)
    relres = np.sqrt(np.sum(weight * r * r)) / bnorm
    if relres <= tol:
        return x, PCGResult(0, float(relres), True)
    for it in range(1, maxiter + 1):
        ap = apply_op(p)
        pap = np.sum(weight * p * ap)
        if pap <= 0.0:
            # loss of positivity means the operator/weight pairing is broken
            return x, PCGResult(it, float(relres), False)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        relres = np.sqrt(np.sum(weight * r * r)) / bnorm
        if relres <= tol:
            return x, PCGResult(it, float(relres), True)
        z = r / diag
        rz_new = np.sum(weight * r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, PCGResult(maxiter, float(relres), False)
