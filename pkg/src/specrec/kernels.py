"""Regularization kernels and the spectral gains they induce.

Each family defines a penalty R(lambda) that grows with frequency; the
reconstruction filter applies the gain H(lambda) = 1 / (1 + R(lambda)/phi)
where phi is the regularization magnitude.  The hard bandlimit family is
the limiting case: an infinite penalty above the cutoff collapses the
gain to exactly 0 there and exactly 1 inside the band, independent of
phi.

Families and penalties:

    tikhonov        R = gamma * lambda
    diffusion       R = exp(gamma * lambda / 2)
    random-walk     R = 1 / (a - lambda),      requires lambda < a
    inverse-cosine  R = 1 / cos(lambda pi/4),  requires lambda in [0, 2)
    cutoff          R = 1 if lambda <= omega else infinity
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("tikhonov", "diffusion", "random-walk", "inverse-cosine", "cutoff")


class KernelDomainError(ValueError):
    """An eigenvalue lies outside the kernel family's domain."""


@dataclass(frozen=True)
class KernelSpec:
    """A penalty family plus its free parameters.

    gamma scales tikhonov/diffusion penalties (gamma >= 0), ``a`` is the
    random-walk origin (a >= 2 keeps the penalty positive on [0, 2]),
    and omega is the cutoff band edge (required for the cutoff family).
    """

    family: str
    gamma: float = 1.0
    a: float = 4.0
    omega: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelDomainError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.gamma < 0:
            raise KernelDomainError(f"gamma must be >= 0, got {self.gamma}")
        if self.a < 2:
            raise KernelDomainError(f"random-walk origin a must be >= 2, got {self.a}")
        if self.family == "cutoff":
            if self.omega is None or self.omega < 0:
                raise KernelDomainError("cutoff kernel needs a band edge omega >= 0")


def _check_domain(kernel: KernelSpec, lam: np.ndarray) -> None:
    if np.any(lam < 0):
        raise KernelDomainError("eigenvalues must be nonnegative")
    if kernel.family == "random-walk" and np.any(lam >= kernel.a):
        raise KernelDomainError(
            f"random-walk kernel needs lambda < a = {kernel.a}, spectrum reaches {lam.max():.6g}"
        )
    if kernel.family == "inverse-cosine" and np.any(lam >= 2.0):
        raise KernelDomainError(
            f"inverse-cosine kernel needs lambda < 2, spectrum reaches {lam.max():.6g}"
        )


def r_value(kernel: KernelSpec, lam):
    """Penalty R(lambda); scalar in, scalar out, array in, array out.

    The cutoff family returns math.inf above the band edge.
    """
    arr = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    _check_domain(kernel, arr)
    if kernel.family == "tikhonov":
        out = kernel.gamma * arr
    elif kernel.family == "diffusion":
        out = np.exp(kernel.gamma * arr / 2.0)
    elif kernel.family == "random-walk":
        out = 1.0 / (kernel.a - arr)
    elif kernel.family == "inverse-cosine":
        out = 1.0 / np.cos(arr * math.pi / 4.0)
    else:  # cutoff
        out = np.where(arr <= kernel.omega, 1.0, math.inf)
    return float(out[0]) if np.isscalar(lam) else out


def h_value(kernel: KernelSpec, lam, phi: float):
    """Filter gain H(lambda) = 1 / (1 + R(lambda)/phi).

    For the cutoff family the infinite penalty is taken symbolically:
    the gain is exactly 1 inside the band and exactly 0 outside, with no
    dependence on phi.
    """
    if phi <= 0:
        raise KernelDomainError(f"phi must be positive, got {phi}")
    arr = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    _check_domain(kernel, arr)
    if kernel.family == "cutoff":
        out = np.where(arr <= kernel.omega, 1.0, 0.0)
    else:
        out = 1.0 / (1.0 + r_value(kernel, arr) / phi)
    return float(out[0]) if np.isscalar(lam) else out


def h_diagonal(kernel: KernelSpec, eigenvalues: np.ndarray, phi: float) -> np.ndarray:
    """Gains for a whole spectrum at once, in eigenvalue order."""
    return np.asarray(h_value(kernel, np.asarray(eigenvalues, dtype=np.float64), phi))
