"""Spectral modulation filter and the fixed-point propagation operator.

The filter's frequency response is

    h_s(lambda) = 1 / ((1+s) * lambda - s * lambda**2)

over the spectrum of the normalized Laplacian. Filtering a signal X with
h_s amounts to solving ((1+s) L - s L^2) H = X, which rearranges to the
fixed-point form H = P H + X with the propagation operator

    P = ((1-s) I + s * Ahat) Ahat,

a weighted mix of 1-hop and 2-hop diffusion. Two things matter in
practice and are encoded here:

* ``Ahat**2`` is never materialized; P is applied as two successive
  sparse-dense products.
* h_s diverges at lambda = 0, and every connected graph has that
  eigenvalue, so the exact linear system is singular. The dense oracle
  :func:`direct_filter_solve` therefore deflates the nullspace (zero
  eigenvalue modes are zeroed, not inverted). The learning path never
  inverts anything: it unrolls finitely many fixed-point steps, which are
  well defined regardless.
"""

from __future__ import annotations

import numpy as np

from .graph import SparseMatrix, SpectralDecomposition

SINGULARITY_TOL = 1e-12
NULLSPACE_TOL = 1e-10
DEFAULT_POWER_ITERS = 1000


class FilterSingularityError(ArithmeticError):
    """Raised when h_s is evaluated where its denominator vanishes."""


def validate_scaling_parameter(s: float) -> float:
    """Check s is a finite scalar in [0, 1] and return it as a float.

    The interior (0, 1) gives the modulation filter proper; the endpoints
    are admitted because they reduce the propagation to plain 1-hop
    (s = 0) and pure 2-hop (s = 1) aggregation. Values outside [0, 1] are
    rejected: the spectral-radius bound that makes propagation stable does
    not survive them.
    """
    s = float(s)
    if not np.isfinite(s) or not 0.0 <= s <= 1.0:
        raise ValueError(f"scaling parameter must lie in [0, 1], got {s}")
    return s


def transfer_function(s: float, lam: float) -> float:
    """Evaluate h_s(lambda) = 1 / ((1+s) lambda - s lambda^2).

    Raises :class:`FilterSingularityError` when the denominator is within
    ``SINGULARITY_TOL`` of zero (lambda = 0 always; lambda = (1+s)/s when
    that falls in range).
    """
    denom = (1.0 + s) * lam - s * lam * lam
    if abs(denom) <= SINGULARITY_TOL:
        raise FilterSingularityError(
            f"h_s singular at s={s}, lambda={lam}: denominator {denom}")
    return 1.0 / denom


def filter_response_table(s: float, num_points: int = 201,
                          lam_max: float = 2.0) -> list[tuple[float, float]]:
    """Sample h_s on an even grid over [0, lam_max], skipping singular points.

    The conceptual grid has ``num_points`` equally spaced values including
    both endpoints; grid points where the response is singular (always
    lambda = 0, and lambda = (1+s)/s when it lands on the grid) are
    omitted from the returned rows.
    """
    s = validate_scaling_parameter(s)
    rows = []
    # Multiply before dividing so round grid points (1.0 in particular)
    # come out exact.
    grid = np.arange(num_points) * float(lam_max) / (num_points - 1)
    for lam in grid:
        try:
            rows.append((float(lam), transfer_function(s, float(lam))))
        except FilterSingularityError:
            continue
    return rows


class PropagationOperator:
    """P = ((1-s) I + s Ahat) Ahat applied via two sparse products.

    Immutable and shareable across workers; ``apply`` is re-entrant. The
    operator is symmetric (Ahat is), which the model's gradient rule
    relies on.
    """

    __slots__ = ("ahat", "s")

    def __init__(self, ahat: SparseMatrix, s: float):
        if ahat.shape[0] != ahat.shape[1]:
            raise ValueError("propagation operator needs a square matrix")
        self.ahat = ahat
        self.s = validate_scaling_parameter(s)

    @property
    def num_nodes(self) -> int:
        return self.ahat.shape[0]

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Return (1-s) (Ahat h) + s (Ahat (Ahat h))."""
        if h.shape[0] != self.num_nodes:
            raise ValueError(
                f"input has {h.shape[0]} rows, operator expects {self.num_nodes}")
        ah = self.ahat.matmul_dense(h)
        if self.s == 0.0:
            return ah
        aah = self.ahat.matmul_dense(ah)
        if self.s == 1.0:
            return aah
        return (1.0 - self.s) * ah + self.s * aah


def apply_propagation(op: PropagationOperator, h: np.ndarray) -> np.ndarray:
    """Apply the propagation operator to a dense signal."""
    return op.apply(np.asarray(h, dtype=np.float64))


def fixed_point_iterate(op: PropagationOperator, x: np.ndarray,
                        t: int) -> np.ndarray:
    """Run t steps of H <- P H + X starting from H = X.

    With that initial guess the t-th iterate is the truncated Neumann sum
    sum_{k=0..t} P^k X, which is exactly the unrolled-layer view of the
    model's propagation; it converges to the deflated filter solution
    whenever the iteration contracts on the complement of the nullspace.
    """
    if t < 0:
        raise ValueError("iteration count must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != op.num_nodes:
        raise ValueError(
            f"signal has {x.shape[0]} rows, operator expects {op.num_nodes}")
    h = x.copy()
    for _ in range(t):
        h = op.apply(h) + x
    return h


def direct_filter_solve(l_spec: SpectralDecomposition, x: np.ndarray,
                        s: float, null_tol: float = NULLSPACE_TOL) -> np.ndarray:
    """Filter x exactly in the Laplacian eigenbasis, deflating the nullspace.

    Each eigen-coefficient c_i of x is scaled by h_s(lambda_i) for
    lambda_i > ``null_tol``; coefficients along (near-)zero eigenvalues are
    zeroed, since h_s has a pole there and the underlying linear system is
    singular on that subspace. Dense test-scale oracle only.

    Requires s strictly inside (0, 1): at the endpoints the response has a
    second pole inside [0, 2] (lambda = 2 for s = 1), so the deflation
    contract would no longer make the solve well defined.
    """
    s = validate_scaling_parameter(s)
    if s == 0.0 or s == 1.0:
        raise ValueError(
            "direct filter solve needs s strictly inside (0, 1); the "
            "endpoint reductions are handled by the iterative path")
    x = np.asarray(x, dtype=np.float64)
    lam = l_spec.eigenvalues
    u = l_spec.eigenvectors
    if x.shape[0] != u.shape[0]:
        raise ValueError("signal rows must match the decomposition size")
    coeffs = u.T @ x
    gains = np.zeros_like(lam)
    live = lam > null_tol
    gains[live] = 1.0 / ((1.0 + s) * lam[live] - s * lam[live] ** 2)
    if coeffs.ndim == 1:
        return u @ (gains * coeffs)
    return u @ (gains[:, None] * coeffs)


def spectral_radius_estimate(op: PropagationOperator, iters: int = DEFAULT_POWER_ITERS,
                             seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius of P.

    For the symmetric P the per-step growth ratio ||P x|| / ||x|| never
    exceeds the true radius, so the estimate approaches it from below.
    Deterministic for a given seed. If the iterate collapses into the
    nullspace the start vector is redrawn (up to 5 attempts).
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    n = op.num_nodes
    for attempt in range(5):
        rng = np.random.default_rng(seed + attempt)
        x = rng.standard_normal(n)
        norm = np.linalg.norm(x)
        if norm < 1e-30:
            continue
        x /= norm
        growth = 0.0
        collapsed = False
        for _ in range(iters):
            y = op.apply(x)
            norm = np.linalg.norm(y)
            if norm < 1e-300:
                collapsed = True
                break
            growth = norm
            x = y / norm
        if not collapsed:
            return float(growth)
    raise RuntimeError(
        "power iteration start vector collapsed 5 times; the operator "
        "appears to annihilate every probe (all-zero adjacency?)")
