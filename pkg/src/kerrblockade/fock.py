"""Truncated Fock-space primitives: operators, states, Gaussian maps, observables.

Everything in this package lives in a single-mode Fock basis truncated to
``dim`` levels (indices 0..dim-1).  All constructors validate the physical
invariants (unit norm, Hermiticity, unit trace, positivity up to integrator
roundoff) and raise rather than silently renormalizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.special import gammaln

__all__ = [
    "Truncation",
    "Operator",
    "KetState",
    "DensityMatrix",
    "Moments",
    "TruncationError",
    "UndefinedG2Error",
    "annihilation",
    "creation",
    "number_op",
    "parity_op",
    "quadrature_ops",
    "fock_state",
    "coherent_state",
    "displacement_operator",
    "thermal_state",
    "squeeze_operator",
    "g2_instantaneous",
    "wigner_point",
    "field_moments",
    "trace_distance",
    "average_displaced_vacuum",
]

# g2 denominator floor: below this mean photon number the ratio is meaningless.
G2_MEAN_FLOOR = 1e-8


class TruncationError(ValueError):
    """Requested state/operator does not fit the Fock truncation."""


class UndefinedG2Error(ArithmeticError):
    """g2(0) requested for a state with mean photon number below the floor."""


@dataclass(frozen=True)
class Truncation:
    """Number of Fock levels retained."""

    dim: int

    def __post_init__(self) -> None:
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise ValueError(f"truncation dim must be an integer >= 2, got {self.dim!r}")


def _as_complex_matrix(entries, dim: int) -> np.ndarray:
    m = np.array(entries, dtype=complex, copy=True)
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class Operator:
    """A linear operator on the truncated Fock space.

    ``layout`` records which representation the operator was constructed
    from; dense and sparse views of the same operator agree entrywise.
    """

    trunc: Truncation
    matrix: np.ndarray
    layout: str = "dense"

    def __post_init__(self) -> None:
        if self.layout not in ("dense", "sparse"):
            raise ValueError(f"layout must be 'dense' or 'sparse', got {self.layout!r}")
        object.__setattr__(self, "matrix", _as_complex_matrix(self.matrix, self.trunc.dim))
        self.matrix.setflags(write=False)

    @classmethod
    def from_sparse(cls, trunc: Truncation, matrix: sp.spmatrix) -> "Operator":
        return cls(trunc, matrix.toarray(), layout="sparse")

    @property
    def dim(self) -> int:
        return self.trunc.dim

    def sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix)

    def dag(self) -> "Operator":
        return Operator(self.trunc, self.matrix.conj().T, self.layout)

    def is_hermitian(self, tol: float = 1e-13) -> bool:
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol * scale)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Operator(self.trunc, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Operator(self.trunc, self.matrix + other.matrix)


@dataclass(frozen=True)
class KetState:
    """Pure state, unit norm within 1e-12."""

    trunc: Truncation
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.amplitudes, dtype=complex, copy=True)
        if v.shape != (self.trunc.dim,):
            raise ValueError(f"expected amplitude vector of length {self.trunc.dim}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"ket norm deviates from 1 by {abs(norm - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", v)
        v.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.trunc.dim

    def overlap(self, other: "KetState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: Operator) -> complex:
        return complex(np.vdot(self.amplitudes, op.matrix @ self.amplitudes))

    def to_density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.trunc, np.outer(v, v.conj()))


# Positivity tolerance: adaptive integrators leave eigenvalues as low as
# -1e-8; we assert, never clip.
DENSITY_EIG_FLOOR = -1e-8


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state: Hermitian within 1e-12, unit trace within 1e-10."""

    trunc: Truncation
    matrix: np.ndarray
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        m = _as_complex_matrix(self.matrix, self.trunc.dim)
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)
        if self._validate:
            self.validate()

    def validate(self) -> None:
        m = self.matrix
        scale = max(1.0, float(np.abs(m).max()))
        herm = np.abs(m - m.conj().T).max()
        if herm > 1e-12 * scale:
            raise ValueError(f"density matrix not Hermitian: deviation {herm:.3e}")
        tr = m.trace()
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace deviates from 1 by {abs(tr - 1.0):.3e}")
        lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0).min())
        if lo < DENSITY_EIG_FLOOR:
            raise ValueError(f"density matrix has eigenvalue {lo:.3e} below {DENSITY_EIG_FLOOR}")

    @property
    def dim(self) -> int:
        return self.trunc.dim

    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def expectation(self, op: Operator) -> complex:
        return complex(np.trace(op.matrix @ self.matrix))

    def n_mean(self) -> float:
        n = np.arange(self.dim)
        return float(n @ self.populations())

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


# ---------------------------------------------------------------------------
# operators


def annihilation(trunc: Truncation) -> Operator:
    """Ladder lowering operator: (a)_{n-1,n} = sqrt(n)."""
    dim = trunc.dim
    return Operator(trunc, np.diag(np.sqrt(np.arange(1.0, dim)), k=1))


def creation(trunc: Truncation) -> Operator:
    return annihilation(trunc).dag()


def number_op(trunc: Truncation) -> Operator:
    return Operator(trunc, np.diag(np.arange(trunc.dim, dtype=float)))


def parity_op(trunc: Truncation) -> Operator:
    """Photon-number parity (-1)^n."""
    return Operator(trunc, np.diag((-1.0) ** np.arange(trunc.dim)))


def quadrature_ops(trunc: Truncation) -> tuple[Operator, Operator]:
    """X = (a + a†)/sqrt(2), Y = (a - a†)/(i sqrt(2))."""
    a = annihilation(trunc).matrix
    x = (a + a.conj().T) / math.sqrt(2.0)
    y = (a - a.conj().T) / (1j * math.sqrt(2.0))
    return Operator(trunc, x), Operator(trunc, y)


# ---------------------------------------------------------------------------
# states


def fock_state(n: int, trunc: Truncation) -> KetState:
    if not 0 <= n < trunc.dim:
        raise ValueError(f"Fock index {n} outside truncation dim {trunc.dim}")
    v = np.zeros(trunc.dim, dtype=complex)
    v[n] = 1.0
    return KetState(trunc, v)


def coherent_fits(alpha: complex, dim: int) -> bool:
    """Truncation adequacy guard: keeps coherent tail mass below ~1e-10."""
    a = abs(alpha)
    return a * a + 6.0 * a + 10.0 <= dim


def _require_fits(alpha: complex, trunc: Truncation, what: str) -> None:
    if not coherent_fits(alpha, trunc.dim):
        a = abs(alpha)
        need = math.ceil(a * a + 6.0 * a + 10.0)
        raise TruncationError(
            f"{what} with |alpha|={a:.4g} needs dim >= {need}, got {trunc.dim}"
        )


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Unnormalized-in-truncation coherent amplitudes, evaluated in log space."""
    if alpha == 0:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    n = np.arange(dim)
    log_amp = n * np.log(complex(alpha)) - 0.5 * gammaln(n + 1.0) - abs(alpha) ** 2 / 2.0
    return np.exp(log_amp)


def coherent_state(alpha: complex, trunc: Truncation) -> KetState:
    """Coherent state |alpha> in the truncated basis, renormalized.

    The truncation guard keeps the renormalization correction below 1e-10;
    a larger correction raises ``TruncationError``.
    """
    _require_fits(alpha, trunc, "coherent state")
    v = _coherent_amplitudes(alpha, trunc.dim)
    norm = np.linalg.norm(v)
    if abs(1.0 - norm) > 1e-10:
        raise TruncationError(
            f"coherent-state tail mass {abs(1.0 - norm * norm):.3e} exceeds guard at dim={trunc.dim}"
        )
    return KetState(trunc, v / norm)


def displacement_operator(alpha: complex, trunc: Truncation) -> Operator:
    """D(alpha) = exp(alpha a† - alpha* a), exact matrix exponential.

    Unitary only on an interior block: truncation necessarily breaks it at
    the top ~6|alpha| levels.
    """
    _require_fits(alpha, trunc, "displacement")
    a = annihilation(trunc).matrix
    return Operator(trunc, expm(alpha * a.conj().T - np.conj(alpha) * a))


def thermal_state(nbar: float, trunc: Truncation) -> DensityMatrix:
    """Thermal state with mean occupation nbar, diagonal geometric weights."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    if nbar * 20.0 > trunc.dim:
        raise TruncationError(
            f"thermal state with nbar={nbar} needs dim >= {math.ceil(20 * nbar)}, got {trunc.dim}"
        )
    if nbar == 0:
        return fock_state(0, trunc).to_density()
    q = nbar / (1.0 + nbar)
    p = q ** np.arange(trunc.dim)
    p /= p.sum()
    return DensityMatrix(trunc, np.diag(p).astype(complex))


def squeeze_operator(xi: float, trunc: Truncation) -> Operator:
    """Single-quadrature squeeze S(xi) = exp(xi (a² - a†²)/2), xi real.

    Acting on vacuum: <dX²> = e^{-2 xi}/2 and <dY²> = e^{+2 xi}/2.
    """
    # Heuristic guard: a squeezed vacuum of parameter xi needs roughly
    # 6 e^{2|xi|} + 10 levels for its tail.
    need = math.ceil(6.0 * math.exp(2.0 * abs(xi)) + 10.0)
    if trunc.dim < need:
        raise TruncationError(f"squeeze xi={xi} needs dim >= {need}, got {trunc.dim}")
    a = annihilation(trunc).matrix
    return Operator(trunc, expm(0.5 * xi * (a @ a - a.conj().T @ a.conj().T)))


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Moments:
    """Field moments needed by the blockade figure of merit and noise bounds."""

    n: float            # <a† a>
    n2corr: float       # <a† a† a a>
    a: complex          # <a>
    aa: complex         # <a a>


def field_moments(rho: DensityMatrix) -> Moments:
    p = rho.matrix.diagonal().real
    n = np.arange(rho.dim)
    a = annihilation(rho.trunc).matrix
    return Moments(
        n=float(n @ p),
        n2corr=float((n * (n - 1)) @ p),
        a=complex(np.trace(rho.matrix @ a)),
        aa=complex(np.trace(rho.matrix @ a @ a)),
    )


def g2_instantaneous(rho: DensityMatrix) -> float:
    """Equal-time second-order coherence <a†a†aa>/<a†a>²."""
    m = field_moments(rho)
    if m.n <= G2_MEAN_FLOOR:
        raise UndefinedG2Error(f"mean photon number {m.n:.3e} at or below floor {G2_MEAN_FLOOR}")
    return m.n2corr / m.n**2


def wigner_point(rho: DensityMatrix, beta: complex) -> float:
    """W(beta) = (2/pi) Tr[D(beta)† rho D(beta) Pi], Pi the parity operator."""
    d = displacement_operator(beta, rho.trunc).matrix
    pi = parity_op(rho.trunc).matrix
    return float((2.0 / math.pi) * np.trace(d.conj().T @ rho.matrix @ d @ pi).real)


def trace_distance(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    diff = rho1.matrix - rho2.matrix
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2.0)).sum())


def average_displaced_vacuum(
    alpha: complex,
    sigma: float,
    n_samples: int,
    trunc: Truncation,
    rng: np.random.Generator,
) -> DensityMatrix:
    """Monte-Carlo average of displaced vacua with Gaussian amplitude errors.

    Samples delta as a complex zero-mean Gaussian with E|delta|² = sigma²
    and averages |alpha+delta><alpha+delta|.  Converges to the perfectly
    displaced thermal state of occupation sigma².
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    delta = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) * (
        sigma / math.sqrt(2.0)
    )
    alphas = alpha + delta
    worst = alphas[np.argmax(np.abs(alphas))]
    _require_fits(worst, trunc, "sampled displacement")
    n = np.arange(trunc.dim)
    # (n_samples, dim) log-space amplitude table; renormalize each row.
    # log(0) rows are repaired to vacuum below.
    nonzero = np.where(alphas == 0, 1.0, alphas).astype(complex)
    log_amp = (
        np.outer(np.log(nonzero), n)
        - 0.5 * gammaln(n + 1.0)[None, :]
        - (np.abs(alphas) ** 2 / 2.0)[:, None]
    )
    kets = np.exp(log_amp)
    kets[alphas == 0, :] = 0.0
    kets[alphas == 0, 0] = 1.0
    kets /= np.linalg.norm(kets, axis=1)[:, None]
    rho = (kets.T @ kets.conj()) / n_samples
    rho = (rho + rho.conj().T) / 2.0
    rho /= rho.trace().real
    return DensityMatrix(trunc, rho)
