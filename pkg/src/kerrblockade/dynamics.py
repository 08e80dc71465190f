"""Lindblad time evolution and time-resolved observables.

The master equation drho/dt = -i[H, rho] + sum_j rate_j D[L_j] rho is
integrated with adaptive embedded Runge-Kutta schemes on the vectorized
density matrix.  Column-stacking vectorization is used throughout:
vec(A rho B) = (B^T kron A) vec(rho).

Two integration paths share one contract:

* explicit RK45 with the right-hand side applied in operator form (the
  dim^4 dense superoperator is never materialized) -- the default for
  short horizons;
* implicit Radau IIA on the real Hermitian-basis parametrization of rho,
  with the sparse Liouvillian as Jacobian -- used automatically when the
  Kerr ladder makes the problem stiff over a long horizon (explicit
  stepping would be stability-limited to ~1e6 steps there).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .fock import DensityMatrix, G2_MEAN_FLOOR, Operator
from .model import BlockadeSpec

__all__ = [
    "LindbladGenerator",
    "TimeGrid",
    "ObservableSeries",
    "EscapeFit",
    "LeakageBudgetError",
    "EvolveToleranceError",
    "EscapeFitError",
    "cavity_loss_generator",
    "liouvillian_matrix",
    "evolve",
    "steady_P1_analytic",
    "fit_escape_rate",
]

DEFAULT_LEAK_BUDGET = 1e-6

# method="auto" switches to the implicit path when (2 max|H|) * span
# exceeds this; explicit RK45 would need >~1e5 stability-limited steps.
STIFF_SPAN_THRESHOLD = 3e4


class LeakageBudgetError(RuntimeError):
    """Population reached the top Fock levels: the truncation is too small."""


class EvolveToleranceError(RuntimeError):
    """The integrator failed or violated the trace-preservation tolerance."""


class EscapeFitError(RuntimeError):
    """Escape-rate fit rejected (non-monotone window or poor residual)."""


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus weighted jump operators."""

    H: Operator
    jumps: tuple[tuple[Operator, float], ...]

    def __post_init__(self) -> None:
        if not self.H.is_hermitian():
            raise ValueError("Hamiltonian must be Hermitian")
        for op, rate in self.jumps:
            if rate < 0:
                raise ValueError("jump rates must be >= 0")
            if op.dim != self.H.dim:
                raise ValueError("jump operator dimension mismatch")
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def dim(self) -> int:
        return self.H.dim

    def rate_scale(self) -> float:
        """Magnitude scale of the generator, for residual thresholds."""
        s = max((rate for _, rate in self.jumps), default=0.0)
        return max(s, 1e-300)


def cavity_loss_generator(H: Operator, kappa: float) -> LindbladGenerator:
    """H with single-photon loss at rate kappa."""
    from .fock import annihilation

    return LindbladGenerator(H, ((annihilation(H.trunc), kappa),))


@dataclass(frozen=True)
class TimeGrid:
    """Output grid: record observables every ``stride`` from t0 to t1."""

    t0: float
    t1: float
    stride: float

    def __post_init__(self) -> None:
        if not self.t1 > self.t0:
            raise ValueError("need t1 > t0")
        if not self.stride > 0:
            raise ValueError("need stride > 0")

    def times(self) -> np.ndarray:
        t = np.arange(self.t0, self.t1 + 0.5 * self.stride, self.stride)
        return np.minimum(t, self.t1)


@dataclass
class ObservableSeries:
    """Time-indexed observables of an evolution run.

    g2 entries are NaN wherever the mean photon number is at or below the
    g2 floor (e.g. at t=0 from vacuum).  ``final_state`` is the validated
    density matrix at the last grid point.
    """

    times: np.ndarray
    n_mean: np.ndarray
    g2: np.ndarray
    P0: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    leak_top3: np.ndarray
    final_state: DensityMatrix | None = None
    trace_drift: float = 0.0
    leak_exceeded: bool = False
    convergence_diff: float | None = field(default=None, repr=False)


def _vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def _unvec(y: np.ndarray, dim: int) -> np.ndarray:
    return y.reshape((dim, dim), order="F")


def liouvillian_matrix(gen: LindbladGenerator) -> sp.csr_matrix:
    """Sparse dim² x dim² generator in column-stacking convention."""
    dim = gen.dim
    eye = sp.identity(dim, format="csr", dtype=complex)
    h = gen.H.sparse()
    L = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for op, rate in gen.jumps:
        ls = op.sparse()
        k = (ls.conj().T @ ls).tocsr()
        L = L + rate * (
            sp.kron(ls.conj(), ls) - 0.5 * sp.kron(eye, k) - 0.5 * sp.kron(k.T, eye)
        )
    return L.tocsr()


@lru_cache(maxsize=8)
def _hermitian_basis(dim: int) -> sp.csc_matrix:
    """Unitary map from real Hermitian coordinates to vec(rho).

    Columns are vectorized orthonormal Hermitian matrices: the dim
    projectors |i><i|, then (|i><j| + h.c.)/sqrt(2) and
    (i|j><i| - i|i><j|)/sqrt(2) for i < j.
    """
    rows, cols, vals = [], [], []
    col = 0
    inv = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        rows.append(i + i * dim)
        cols.append(col)
        vals.append(1.0 + 0.0j)
        col += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            rows += [i + j * dim, j + i * dim]
            cols += [col, col]
            vals += [inv, inv]
            col += 1
            rows += [i + j * dim, j + i * dim]
            cols += [col, col]
            vals += [-1j * inv, 1j * inv]
            col += 1
    n2 = dim * dim
    return sp.csc_matrix((vals, (rows, cols)), shape=(n2, n2))


def _liouvillian_real(gen: LindbladGenerator) -> sp.csc_matrix:
    """The Lindblad generator restricted to the (real) Hermitian subspace."""
    b = _hermitian_basis(gen.dim)
    m = (b.conj().T @ liouvillian_matrix(gen) @ b).tocsc()
    drop = abs(m.imag).max() if m.nnz else 0.0
    if drop > 1e-10 * max(1.0, abs(m.real).max()):
        raise AssertionError(f"Hermiticity-preservation violated: imag part {drop:.3e}")
    return m.real.tocsc()


def _rhs_factory(gen: LindbladGenerator):
    """Operator-form RHS acting on the vectorized (complex) density matrix.

    Exploits Hermiticity of rho (preserved along the flow and by real
    Runge-Kutta stage combinations): rho H = (H rho)† for Hermitian H.
    """
    dim = gen.dim
    hs = gen.H.sparse()
    terms = []
    for op, rate in gen.jumps:
        ls = op.sparse()
        k = (ls.conj().T @ ls).tocsr()
        kdiag = k.diagonal().real if abs(k - sp.diags(k.diagonal())).max() == 0 else None
        terms.append((rate, ls, k, kdiag))

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        rho = _unvec(y, dim)
        hr = hs @ rho
        out = -1j * (hr - hr.conj().T)
        for rate, ls, k, kdiag in terms:
            m = ls @ rho
            # m.conj().T = rho L† for Hermitian rho, so this is L rho L†
            out += rate * (ls @ m.conj().T)
            if kdiag is not None:
                out -= (0.5 * rate) * (kdiag[:, None] * rho + rho * kdiag[None, :])
            else:
                kr = k @ rho
                out -= (0.5 * rate) * (kr + kr.conj().T)
        return _vec(out)

    return rhs


def _series_from_states(times: np.ndarray, states: list[np.ndarray]) -> ObservableSeries:
    dim = states[0].shape[0]
    npt = len(times)
    n_idx = np.arange(dim)
    n_mean = np.empty(npt)
    g2 = np.empty(npt)
    p0 = np.empty(npt)
    p1 = np.empty(npt)
    p2 = np.empty(npt)
    leak = np.empty(npt)
    for i, rho in enumerate(states):
        p = rho.diagonal().real
        nm = float(n_idx @ p)
        m2 = float((n_idx * (n_idx - 1)) @ p)
        n_mean[i] = nm
        g2[i] = m2 / nm**2 if nm > G2_MEAN_FLOOR else np.nan
        p0[i] = p[0]
        p1[i] = p[1]
        p2[i] = p[2] if dim > 2 else 0.0
        leak[i] = float(p[-3:].sum())
    return ObservableSeries(
        times=times, n_mean=n_mean, g2=g2, P0=p0, P1=p1, P2=p2, leak_top3=leak
    )


def _pick_method(gen: LindbladGenerator, span: float) -> str:
    omega = 2.0 * float(np.abs(gen.H.matrix).max())
    return "radau" if omega * span > STIFF_SPAN_THRESHOLD else "rk45"


def evolve(
    gen: LindbladGenerator,
    rho0: DensityMatrix,
    grid: TimeGrid,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    method: str = "auto",
    leak_budget: float = DEFAULT_LEAK_BUDGET,
    strict_leak: bool = True,
    convergence_check: bool = False,
    dense_output: bool = False,
):
    """Integrate the master equation and record observables on the grid.

    Raises ``LeakageBudgetError`` when the top-3-level population exceeds
    ``leak_budget`` (set ``strict_leak=False`` to flag instead), and
    ``EvolveToleranceError`` on integrator failure or trace drift > 1e-8.
    With ``convergence_check`` the run is repeated at 16x tighter tolerance
    and the sup-norm deviation of <n> is stored on the series.
    With ``dense_output`` returns ``(series, sol)`` with the solver's
    continuous interpolant (rk45 path only; used for pulse-time search).
    """
    if rho0.dim != gen.dim:
        raise ValueError("initial state dimension mismatch")
    if method not in ("auto", "rk45", "radau"):
        raise ValueError(f"unknown method {method!r}")
    times = grid.times()
    if method == "auto":
        method = _pick_method(gen, times[-1] - grid.t0)
    if dense_output and method != "rk45":
        raise ValueError("dense_output requires the rk45 path")

    if method == "rk45":
        sol = solve_ivp(
            _rhs_factory(gen),
            (grid.t0, times[-1]),
            _vec(rho0.matrix.astype(complex)),
            t_eval=times,
            method="RK45",
            rtol=rtol,
            atol=atol,
            dense_output=dense_output,
        )
        if not sol.success:
            raise EvolveToleranceError(f"integration failed: {sol.message}")
        states = [_unvec(sol.y[:, i], gen.dim) for i in range(len(sol.t))]
    else:
        basis = _hermitian_basis(gen.dim)
        m_real = _liouvillian_real(gen)

        def rhs_real(_t: float, y: np.ndarray) -> np.ndarray:
            return m_real @ y

        y0 = (basis.conj().T @ _vec(rho0.matrix.astype(complex))).real
        sol = solve_ivp(
            rhs_real,
            (grid.t0, times[-1]),
            y0,
            t_eval=times,
            method="Radau",
            jac=m_real,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise EvolveToleranceError(f"integration failed: {sol.message}")
        states = [_unvec(basis @ sol.y[:, i], gen.dim) for i in range(len(sol.t))]

    series = _series_from_states(sol.t, states)

    traces = np.array([rho.trace().real for rho in states])
    series.trace_drift = float(np.abs(traces - 1.0).max())
    if series.trace_drift > 1e-8:
        raise EvolveToleranceError(f"trace drift {series.trace_drift:.3e} exceeds 1e-8")

    max_leak = float(series.leak_top3.max())
    if max_leak > leak_budget:
        series.leak_exceeded = True
        if strict_leak:
            raise LeakageBudgetError(
                f"top-3-level population {max_leak:.3e} exceeds budget {leak_budget:.1e}; "
                "raise the truncation dim"
            )

    rho_f = states[-1]
    rho_f = (rho_f + rho_f.conj().T) / 2.0
    rho_f = rho_f / rho_f.trace().real
    series.final_state = DensityMatrix(gen.H.trunc, rho_f)

    if convergence_check:
        ref = evolve(
            gen, rho0, grid, rtol=rtol / 16.0, atol=atol / 16.0, method=method,
            leak_budget=leak_budget, strict_leak=False,
        )
        series.convergence_diff = float(np.abs(ref.n_mean - series.n_mean).max())

    if dense_output:
        return series, sol
    return series


def steady_P1_analytic(lambda3: complex, kappa: float) -> float:
    """Closed-form single-photon occupancy of the blockaded steady state:
    4|lambda3/kappa|² / (1 + 8|lambda3/kappa|²)."""
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    x = abs(lambda3 / kappa) ** 2
    return 4.0 * x / (1.0 + 8.0 * x)


@dataclass(frozen=True)
class EscapeFit:
    """Result of the late-time exponential heating fit."""

    gamma_esc: float
    c: float
    n_ss: float
    log_rms: float
    window: tuple[float, float]
    valid: bool


def fit_escape_rate(
    series: ObservableSeries,
    spec: BlockadeSpec,
    window: tuple[float, float] | None = None,
    n_ss: float | None = None,
    *,
    log_rms_max: float = 0.1,
) -> EscapeFit:
    """Fit log|n_ss - <n>(t)| over the window; gamma_esc = -slope.

    c = gamma_esc * kappa / |lambda3 * delta_lambda1|².  If ``n_ss`` is not
    given it is estimated from the final 10% of the series, which then must
    be flat.  A flat residual over the whole window (no heating, e.g.
    delta_lambda1 = 0) is reported as gamma_esc = 0 with ``valid=False``.
    """
    t = np.asarray(series.times, dtype=float)
    n = np.asarray(series.n_mean, dtype=float)
    if window is None:
        window = (t[0] + 5.0 / spec.kappa, t[-1])
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 8:
        raise EscapeFitError("fit window contains fewer than 8 samples")
    tw, nw = t[mask], n[mask]

    if n_ss is None:
        tail_mask = t >= t[0] + 0.9 * (t[-1] - t[0])
        tail_t, tail = t[tail_mask], n[tail_mask]
        slope_tail = np.polyfit(tail_t, tail, 1)[0]
        n_ss = float(tail.mean())
        if abs(slope_tail) * (t[-1] - t[0]) > 0.01 * max(abs(n_ss), 1.0):
            raise EscapeFitError(
                "series has not plateaued; pass the steady-state photon number explicitly"
            )

    resid = n_ss - nw
    span = float(np.abs(resid).max())
    if span < 1e-6 * max(abs(n_ss), 1.0):
        return EscapeFit(0.0, 0.0, float(n_ss), 0.0, window, valid=False)

    # monotone approach check (allow jitter at the numerical-noise scale)
    jitter = 1e-6 * max(span, 1.0)
    dn = np.diff(nw)
    if not (np.all(dn >= -jitter) or np.all(dn <= jitter)):
        raise EscapeFitError("photon number is not monotone within the fit window")
    if np.any(resid * resid[0] <= 0):
        raise EscapeFitError("residual changes sign within the fit window")

    y = np.log(np.abs(resid))
    slope, intercept = np.polyfit(tw, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * tw + intercept)) ** 2)))
    if rms > log_rms_max:
        raise EscapeFitError(f"log-residual rms {rms:.3f} exceeds {log_rms_max}")
    gamma = float(-slope)
    dl1 = abs(spec.lambda3 * spec.delta_lambda1)
    c = gamma * spec.kappa / dl1**2 if dl1 > 0 else 0.0
    return EscapeFit(gamma, c, float(n_ss), rms, window, valid=True)
