"""Krylov (Lanczos) time evolution under a time-independent Hermitian H.

One Lanczos factorization per internal step; the step size is chosen
adaptively from the residual-coupling error estimate, and every output
sample inside the accepted step is reconstructed from the same Krylov
subspace, so the sampling grid never forces small steps.  A dense
eigendecomposition propagator doubles as the verification oracle on
small spaces.

Norm and true energy are recorded at every sample without any
renormalization, so conservation violations are measurable, not hidden.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import HermiticityError, SpaceMismatchError, ToleranceError
from .operators import SparseOperator, StateVector
from .sop import SumOfProducts, Workspace

__all__ = [
    "PropagatorConfig",
    "Trajectory",
    "evolve",
    "evolve_dense_oracle",
    "DensePropagator",
]

# below this dimension Lanczos uses full reorthogonalization (cheap there,
# and it pins the basis orthonormality that norm conservation rests on)
_FULL_REORTH_DIM = 65536

_DENSE_ORACLE_LIMIT = 4096


@dataclass(frozen=True)
class PropagatorConfig:
    """Evolution controls.

    `step_tolerance` bounds the local Krylov error per step; it is
    enforced as err <= step_tolerance * min(1, dt) so the accumulated
    error over a run of duration T stays near step_tolerance * T.
    `max_substep` caps the number of internal Lanczos steps.
    """

    dt_sample: float = 0.05
    t_end: float = 32.0
    krylov_dim: int = 30
    step_tolerance: float = 1e-10
    max_substep: int = 200_000

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt_sample <= 0:
            raise ValueError("dt_sample must be positive")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be >= 2")
        if self.step_tolerance <= 0:
            raise ValueError("step_tolerance must be positive")
        if self.max_substep < 1:
            raise ValueError("max_substep must be >= 1")


@dataclass
class Trajectory:
    """Sampled observable records of one evolution."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    norms: np.ndarray
    energies: np.ndarray
    n_steps: int = 0
    n_matvecs: int = 0
    dt_min: float = np.inf
    dt_max: float = 0.0
    wall_time: float = 0.0
    snapshots: dict[float, StateVector] = field(default_factory=dict)

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]


class _Applier:
    """Uniform matvec interface over SparseOperator / SumOfProducts."""

    def __init__(self, h):
        if isinstance(h, SumOfProducts):
            self.work = Workspace(h.space.total_dim)
            self._apply = lambda v, out: h.apply_raw(v, out=out, work=self.work)
        elif isinstance(h, SparseOperator):
            self._apply = lambda v, out: h.apply_raw(v, out=out)
        else:
            raise TypeError(f"cannot evolve under {type(h).__name__}")
        self.h = h
        self.dim = h.shape[0]
        self.fingerprint = h.fingerprint
        self.count = 0

    def __call__(self, v, out):
        self.count += 1
        return self._apply(v, out)


def _verify_hermitian(h) -> None:
    if getattr(h, "hermitian_hint", None) is not True:
        raise HermiticityError(
            "evolution requires a Hermitian Hamiltonian (hermitian_hint=True)"
        )
    if isinstance(h, SparseOperator) and h.shape[0] <= _FULL_REORTH_DIM:
        h.check_hermitian()


def _lanczos_factorization(applier, v0, m, full_reorth):
    """Build V (rows), alphas, betas from a normalized start vector.

    Returns (V, alphas, betas, k_eff, breakdown).  betas[j] couples
    v_j to v_{j+1}; betas[k_eff-1] is the residual coupling used in the
    error estimate.  `breakdown` means the Krylov space closed early and
    the factorization is exact.
    """
    dim = applier.dim
    V = np.empty((m, dim), np.complex128)
    alphas = np.zeros(m)
    betas = np.zeros(m)
    w = np.empty(dim, np.complex128)
    scale = 1.0
    v = v0
    for j in range(m):
        V[j] = v
        applier(V[j], w)
        alpha = _kernels.vdot_chunked(V[j], w).real
        alphas[j] = alpha
        _kernels.axpy(w, -alpha, V[j])
        if j > 0:
            _kernels.axpy(w, -betas[j - 1], V[j - 1])
        if full_reorth:
            coeffs = _kernels.row_dots(V, j + 1, w)
            _kernels.subtract_projections(V, j + 1, coeffs, w)
        else:
            # one local re-pass against the two newest vectors
            c1 = _kernels.vdot_chunked(V[j], w)
            _kernels.axpy(w, -c1, V[j])
            if j > 0:
                c2 = _kernels.vdot_chunked(V[j - 1], w)
                _kernels.axpy(w, -c2, V[j - 1])
        beta = float(np.sqrt(_kernels.norm_sq(w)))
        betas[j] = beta
        scale = max(scale, abs(alpha), beta)
        if beta <= 1e-13 * scale:
            return V, alphas, betas, j + 1, True
        if j + 1 < m:
            v = w / beta
    return V, alphas, betas, m, False


class _StepSolver:
    """Evaluate e^{-i s T} e1 and the local error estimate for any s."""

    def __init__(self, alphas, betas, k, breakdown):
        self.k = k
        self.beta_resid = 0.0 if breakdown else betas[k - 1]
        if k == 1:
            self.theta = alphas[:1]
            self.u = np.ones((1, 1))
        else:
            self.theta, self.u = scipy.linalg.eigh_tridiagonal(
                alphas[:k], betas[: k - 1]
            )
        self.first_row = self.u[0, :].copy()
        self.last_row = self.u[-1, :].copy()

    def coefficients(self, s: float) -> np.ndarray:
        return self.u @ (np.exp(-1j * s * self.theta) * self.first_row)

    def error_estimate(self, s: float) -> float:
        if self.beta_resid == 0.0:
            return 0.0
        amp = abs(self.last_row @ (np.exp(-1j * s * self.theta) * self.first_row))
        amp2 = abs(
            self.last_row @ (np.exp(-1j * 0.77 * s * self.theta) * self.first_row)
        )
        return self.beta_resid * max(amp, amp2)


def evolve(
    h,
    psi0: StateVector,
    cfg: PropagatorConfig,
    observers: dict | None = None,
    snapshot_times=None,
    snapshot_callback=None,
) -> Trajectory:
    """Evolve psi0 under exp(-i h t), sampling every cfg.dt_sample.

    `observers` maps names to operators (SparseOperator, SumOfProducts,
    or any object with apply_raw); their expectation values are recorded
    at every sample time.  Diagonal observables (DiagonalObservable) are
    batched into a single pass per sample.

    `snapshot_times` requests full-state access at the nearest sample
    times; each snapshot is handed to `snapshot_callback(t, state)` if
    given, otherwise stored on the returned Trajectory (memory!).
    """
    t_start_wall = time.perf_counter()
    _verify_hermitian(h)
    if psi0.fingerprint != h.fingerprint:
        raise SpaceMismatchError("initial state and Hamiltonian spaces differ")
    applier = _Applier(h)
    observers = dict(observers or {})
    for name, op in observers.items():
        if op.fingerprint != h.fingerprint:
            raise SpaceMismatchError(f"observer {name!r} lives on a different space")

    n_samples = int(round(cfg.t_end / cfg.dt_sample))
    if abs(n_samples * cfg.dt_sample - cfg.t_end) > 1e-9 * cfg.t_end:
        raise ValueError("t_end must be an integer multiple of dt_sample")
    times = np.arange(n_samples + 1) * cfg.dt_sample

    snap_idx: set[int] = set()
    if snapshot_times is not None:
        for ts in np.atleast_1d(np.asarray(snapshot_times, dtype=float)):
            snap_idx.add(int(round(ts / cfg.dt_sample)))

    diag_names = [n for n, o in observers.items() if isinstance(o, DiagonalObservable)]
    diag_weights = (
        np.ascontiguousarray(np.vstack([observers[n].diag_real for n in diag_names]))
        if diag_names
        else None
    )
    gen_names = [n for n in observers if n not in set(diag_names)]

    traj = Trajectory(
        times=times,
        observables={n: np.zeros(n_samples + 1, np.complex128) for n in observers},
        norms=np.zeros(n_samples + 1),
        energies=np.zeros(n_samples + 1),
    )

    dim = applier.dim
    m = min(cfg.krylov_dim, dim)
    full_reorth = dim <= _FULL_REORTH_DIM
    scratch = np.empty(dim, np.complex128)

    def record(k_sample: int, psi_arr: np.ndarray):
        traj.norms[k_sample] = np.sqrt(_kernels.norm_sq(psi_arr))
        applier(psi_arr, scratch)
        traj.energies[k_sample] = _kernels.vdot_chunked(psi_arr, scratch).real
        if diag_weights is not None:
            vals = _kernels.weighted_abs2_sums(psi_arr, diag_weights)
            for name, val in zip(diag_names, vals):
                traj.observables[name][k_sample] = val
        for name in gen_names:
            op = observers[name]
            if isinstance(op, SumOfProducts):
                op.apply_raw(psi_arr, out=scratch, work=applier.work)
            else:
                op.apply_raw(psi_arr, out=scratch)
            traj.observables[name][k_sample] = _kernels.vdot_chunked(psi_arr, scratch)
        if k_sample in snap_idx:
            state = StateVector(psi0.space, psi_arr.copy())
            if snapshot_callback is not None:
                snapshot_callback(times[k_sample], state)
            else:
                traj.snapshots[float(times[k_sample])] = state

    psi = np.array(psi0.data, np.complex128)
    record(0, psi)

    t = 0.0
    next_sample = 1
    dt_try = cfg.dt_sample
    last_err = float("nan")
    recon = np.empty(dim, np.complex128)
    tol_of = lambda s: cfg.step_tolerance * min(1.0, s)
    while next_sample <= n_samples:
        if traj.n_steps >= cfg.max_substep:
            raise ToleranceError(
                f"exceeded max_substep={cfg.max_substep} at t={t:.6g}; "
                f"last accepted local error {last_err:.3e}"
            )
        nrm = float(np.sqrt(_kernels.norm_sq(psi)))
        V, alphas, betas, k_eff, breakdown = _lanczos_factorization(
            applier, psi / nrm, m, full_reorth
        )
        solver = _StepSolver(alphas, betas, k_eff, breakdown)

        remaining = cfg.t_end - t
        dt = min(dt_try, remaining)
        err = solver.error_estimate(dt)
        shrink = 0
        while err > tol_of(dt) and dt > 1e-12 * cfg.t_end:
            dt *= max(0.5, 0.8 * (tol_of(dt) / err) ** (1.0 / k_eff))
            err = solver.error_estimate(dt)
            shrink += 1
            if shrink > 200:
                break
        if err > tol_of(dt):
            raise ToleranceError(
                f"local error {err:.3e} > bound {tol_of(dt):.3e} at t={t:.6g} "
                f"even at dt={dt:.3e}; raise krylov_dim or step_tolerance"
            )
        last_err = err
        if shrink == 0 and dt < remaining:
            # room to grow next time
            grown = dt * 1.4
            if solver.error_estimate(grown) <= tol_of(grown):
                dt_try = min(grown, cfg.t_end)
            else:
                dt_try = dt
        else:
            dt_try = dt

        t_next = t + dt
        # emit every sample that falls inside (t, t_next]
        while next_sample <= n_samples and times[next_sample] <= t_next + 1e-9 * cfg.dt_sample:
            s = times[next_sample] - t
            w = solver.coefficients(s) * nrm
            _kernels.reconstruct_blocked(V[:k_eff], w.astype(np.complex128), recon)
            record(next_sample, recon)
            next_sample += 1
        w = solver.coefficients(dt) * nrm
        _kernels.reconstruct_blocked(V[:k_eff], w.astype(np.complex128), psi)
        t = t_next
        traj.n_steps += 1
        traj.dt_min = min(traj.dt_min, dt)
        traj.dt_max = max(traj.dt_max, dt)

    traj.n_matvecs = applier.count
    traj.wall_time = time.perf_counter() - t_start_wall
    return traj


class DiagonalObservable:
    """A real diagonal observable evaluated in a batched |psi|^2 pass."""

    def __init__(self, space, diag_real: np.ndarray):
        diag_real = np.ascontiguousarray(diag_real, np.float64)
        if diag_real.shape != (space.total_dim,):
            raise ValueError("diagonal length does not match space dimension")
        self.space = space
        self.diag_real = diag_real
        self.hermitian_hint = True

    @property
    def fingerprint(self):
        return self.space.fingerprint

    @property
    def shape(self):
        n = self.space.total_dim
        return (n, n)

    def apply_raw(self, v, out=None):
        if out is None:
            out = np.empty_like(v)
        _kernels.diag_mul(self.diag_real, v, out)
        return out


class DensePropagator:
    """Exact evolution by dense Hermitian eigendecomposition (oracle).

    Reusable across times: the factorization happens once.
    """

    def __init__(self, h):
        if h.shape[0] > _DENSE_ORACLE_LIMIT:
            raise ValueError(
                f"dense oracle limited to dim <= {_DENSE_ORACLE_LIMIT}, got {h.shape[0]}"
            )
        _verify_hermitian(h)
        self.h = h
        mat = h.to_sparse().to_dense() if isinstance(h, SumOfProducts) else h.to_dense()
        self.eigvals, self.eigvecs = np.linalg.eigh(mat)
        self.space = h.space

    def at(self, t: float, psi0: StateVector) -> StateVector:
        if psi0.fingerprint != self.space.fingerprint:
            raise SpaceMismatchError("state lives on a different space")
        coeff = self.eigvecs.conj().T @ psi0.data
        out = self.eigvecs @ (np.exp(-1j * t * self.eigvals) * coeff)
        return StateVector(self.space, out)


def evolve_dense_oracle(h, psi0: StateVector, t: float) -> StateVector:
    """Machine-precision evolution for spaces of dim <= 4096."""
    return DensePropagator(h).at(t, psi0)
