"""Solvability checks for the affine material law M0 + integral * M1.

The single hypothesis everything rests on: rho*M0 + sym(M1) is strictly
positive definite in the weighted inner product.  Its smallest eigenvalue
c0 bounds the solution operator by 1/c0.  The symbol check confirms that
for affine laws the Hermitian part of z*M0 + M1 does not depend on the
imaginary part of z, so one real eigenvalue problem settles every frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import EvobeamError, NumericError, ParameterError, WeightMatrix

__all__ = [
    "NotCoerciveError",
    "InvalidSampleError",
    "CoercivityReport",
    "NevanlinnaSpec",
    "symmetric_part",
    "coercivity",
    "find_rho0",
    "symbol_range_check",
    "nevanlinna_check",
]

RHO_SCAN_EXPONENTS = range(-10, 41)
RHO_BISECT_RELTOL = 1e-6


class NotCoerciveError(EvobeamError):
    """No rho in the scan range reaches the requested coercivity."""


class InvalidSampleError(EvobeamError):
    """A Nevanlinna sample point lies outside the open upper half-plane."""


@dataclass(frozen=True)
class CoercivityReport:
    rho: float
    c0: float
    satisfied: bool
    bound: float | None

    def __post_init__(self):
        if self.satisfied != (self.c0 > 0):
            raise NumericError("inconsistent coercivity report")


@dataclass(frozen=True)
class NevanlinnaSpec:
    """Affine trace law mu0 + integral * mu1, i.e. R(z) = mu0*z + mu1.

    Construction only rejects the degenerate all-zero pair; sign validation
    is the job of nevanlinna_check and of the scenario constructors, so a
    bad sign is caught by the checker rather than masked at construction.
    """

    mu0: float
    mu1: float

    def __post_init__(self):
        if self.mu0 == 0 and self.mu1 == 0:
            raise ParameterError("trace law must not have both coefficients zero")

    def evaluate(self, z: complex) -> complex:
        return self.mu0 * z + self.mu1


def _dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def symmetric_part(M, W: WeightMatrix) -> np.ndarray:
    """W-symmetrization (M + W^{-1} M^T W)/2; selfadjoint in the W product."""
    Md = _dense(M)
    if Md.shape[0] != Md.shape[1] or Md.shape[0] != W.dim:
        raise NumericError(f"square operator of size {W.dim} required, got {Md.shape}")
    return 0.5 * (Md + (Md.T * W.diag[None, :]) / W.diag[:, None])


def _w_min_eig(S: np.ndarray, W: WeightMatrix) -> float:
    """Smallest eigenvalue of a W-selfadjoint S via the W^{1/2} similarity."""
    sq = np.sqrt(W.diag)
    sym = (S * sq[:, None]) / sq[None, :]
    sym = 0.5 * (sym + sym.T)
    if not np.all(np.isfinite(sym)):
        raise NumericError("non-finite entries in coercivity operator")
    return float(np.linalg.eigvalsh(sym)[0])


def coercivity(M0, M1, rho: float, W: WeightMatrix) -> CoercivityReport:
    """Report on rho*M0 + sym(M1) >= c0 in the W inner product."""
    if rho < 0:
        raise ParameterError("rho must be nonnegative")
    S = rho * _dense(M0) + symmetric_part(M1, W)
    c0 = _w_min_eig(S, W)
    satisfied = c0 > 0
    return CoercivityReport(rho=rho, c0=c0, satisfied=satisfied, bound=1.0 / c0 if satisfied else None)


def find_rho0(M0, M1, c_target: float, W: WeightMatrix) -> float:
    """Smallest rho (to 1e-6 relative) with coercivity c0 >= c_target.

    Scans rho = 2^k for k in -10..40 and bisects the first bracketing pair;
    monotonicity of c0 in rho (M0 is positive semidefinite) makes the
    bisection valid.  No admissible rho in the range raises NotCoerciveError.
    """
    if c_target <= 0:
        raise ParameterError("c_target must be positive")
    M0d, M1sym = _dense(M0), symmetric_part(M1, W)

    def ok(rho: float) -> bool:
        return _w_min_eig(rho * M0d + M1sym, W) >= c_target

    hit = None
    for k in RHO_SCAN_EXPONENTS:
        if ok(2.0**k):
            hit = k
            break
    if hit is None:
        raise NotCoerciveError(
            f"no rho in [2^-10, 2^40] reaches c0 >= {c_target} (law not coercive)"
        )
    hi = 2.0**hit
    if hit == RHO_SCAN_EXPONENTS.start:
        return hi
    lo = 2.0 ** (hit - 1)
    while (hi - lo) / hi > RHO_BISECT_RELTOL:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def symbol_range_check(M0, M1, rho: float, lambda_grid, W: WeightMatrix) -> float:
    """Minimum over z = rho + i*lambda of the smallest Hermitian-part eigenvalue.

    For an affine law the Hermitian part of z*M0 + M1 equals
    rho*M0 + sym(M1) for every lambda; the check recomputes it per grid
    point from the complex matrix and asserts agreement with the real
    coercivity path to 1e-12 before returning the minimum.
    """
    lams = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if lams.size == 0:
        raise ParameterError("lambda grid must be nonempty")
    base = coercivity(M0, M1, rho, W).c0
    M0d, M1d = _dense(M0), _dense(M1)
    sq = np.sqrt(W.diag)
    out = np.inf
    for lam in lams:
        Mz = (rho + 1j * lam) * M0d + M1d
        herm_w = 0.5 * (Mz + (Mz.conj().T * W.diag[None, :]) / W.diag[:, None])
        sym = (herm_w * sq[:, None]) / sq[None, :]
        sym = 0.5 * (sym + sym.conj().T)
        ev = float(np.linalg.eigvalsh(sym)[0])
        if abs(ev - base) > 1e-12 * max(1.0, abs(base)):
            raise NumericError(
                f"affine symbol lost lambda-independence at lambda={lam}: {ev} vs {base}"
            )
        out = min(out, ev)
    return out


def nevanlinna_check(spec: NevanlinnaSpec, samples) -> bool:
    """True iff Im(mu0*z + mu1) >= -1e-14 at every upper-half-plane sample."""
    zs = np.atleast_1d(np.asarray(samples, dtype=complex))
    if np.any(zs.imag <= 0):
        raise InvalidSampleError("all samples must have positive imaginary part")
    im = (spec.mu0 * zs + spec.mu1).imag
    return bool(np.all(im >= -1e-14))
