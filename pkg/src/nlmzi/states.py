"""Initial state preparation: coherent pumps, vacuum, matter ground state.

The interferometer input splits a coherent pump |alpha> on the first
beam splitter; the split is applied analytically (coherent in, coherent
out), so the simulation space only ever holds the two arm modes:

    |Phi(0)> = |alpha/sqrt(2)>_pump_A (x) |i alpha/sqrt(2)>_pump_B
               (x) vacuum idlers/signals (x) |G>_A (x) |G>_B

|G> is the matter ground state.  The matter Hamiltonian
w a'a + n_e {nu(a'+a) + eps} is block-diagonal in the electronic
population: the n_e=0 block is a bare oscillator with ground state
|g, 0> at energy 0, and the n_e=1 block is a displaced oscillator with
minimum eps - nu^2/w.  For eps > nu^2/w the global ground state is
therefore exactly |g, 0>; a numerical eigensolve cross-check is provided.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import TailBoundError
from .hspace import Boson, HilbertSpace
from .model import ModelParams, SiteLabels, site_labels_for
from .operators import StateVector

__all__ = [
    "coherent_amplitudes",
    "coherent_tail",
    "coherent",
    "product_state",
    "matter_ground",
    "matter_ground_numeric",
    "initial_state",
]

log = logging.getLogger(__name__)

DEFAULT_TAIL_BOUND = 1e-8


def coherent_amplitudes(alpha: complex, dim: int) -> tuple[np.ndarray, float]:
    """Truncated coherent amplitudes (renormalized) and the dropped tail mass.

    Amplitudes follow e^{-|a|^2/2} a^n / sqrt(n!); the tail is the
    probability removed by the cutoff, 1 - sum_n |c_n|^2 before
    renormalization.
    """
    amps = np.empty(dim, np.complex128)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    kept = float(np.sum(np.abs(amps) ** 2))
    tail = max(0.0, 1.0 - kept)
    if kept == 0.0:
        raise TailBoundError(
            f"coherent amplitudes underflowed at |alpha|^2 = {abs(alpha)**2:.3g}"
        )
    return amps / np.sqrt(kept), tail


def coherent_tail(alpha: complex, cutoff: int) -> float:
    """Probability mass a cutoff drops from |alpha> (Poisson upper tail)."""
    return coherent_amplitudes(alpha, cutoff + 1)[1]


def product_state(space: HilbertSpace, locals_: dict | None = None) -> StateVector:
    """Product state with given local vectors; unlisted subsystems get |0>.

    Local vectors are renormalized so the result has norm 1.
    """
    locals_ = locals_ or {}
    unknown = set(locals_) - set(space.labels)
    if unknown:
        raise KeyError(f"unknown labels {sorted(unknown)}")
    vec = np.ones(1, np.complex128)
    for sub in space.subsystems:
        if sub.label in locals_:
            local = np.asarray(locals_[sub.label], np.complex128)
            if local.shape != (sub.dim,):
                raise ValueError(
                    f"local vector for {sub.label!r} has shape {local.shape}, "
                    f"expected ({sub.dim},)"
                )
            nrm = np.linalg.norm(local)
            if nrm == 0:
                raise ValueError(f"zero local vector for {sub.label!r}")
            local = local / nrm
        else:
            local = np.zeros(sub.dim, np.complex128)
            local[0] = 1.0
        vec = np.kron(vec, local)
    return StateVector(space, vec)


def coherent(
    space: HilbertSpace,
    label: str,
    alpha: complex,
    tail_bound: float = DEFAULT_TAIL_BOUND,
) -> StateVector:
    """Coherent state |alpha> on one mode, vacuum elsewhere.

    Fails if the cutoff drops more than `tail_bound` probability, which
    signals the cutoff is too small for this amplitude.
    """
    sub = space.subsystem(label)
    if not isinstance(sub.kind, Boson):
        raise TypeError(f"subsystem {label!r} is not a boson mode")
    amps, tail = coherent_amplitudes(alpha, sub.dim)
    if tail > tail_bound:
        raise TailBoundError(
            f"coherent tail {tail:.3e} exceeds bound {tail_bound:.1e} for "
            f"|alpha|^2 = {abs(alpha)**2:.4g} at cutoff {sub.kind.cutoff} on {label!r}"
        )
    log.debug(
        "coherent %s: |alpha|^2=%.4g cutoff=%d tail=%.3e (renormalized)",
        label, abs(alpha) ** 2, sub.kind.cutoff, tail,
    )
    return product_state(space, {label: amps})


def _check_ground_is_bare(params: ModelParams) -> None:
    if params.epsilon <= params.nu**2 / params.omega:
        raise ValueError(
            "matter ground state is not |g, 0>: requires epsilon > nu^2/omega, "
            f"got epsilon={params.epsilon}, nu^2/omega={params.nu**2 / params.omega:.4g}"
        )


def matter_ground(
    space: HilbertSpace, labels: SiteLabels, params: ModelParams | None = None
) -> StateVector:
    """|G> = |g> (x) |0_phonon> on one site, vacuum elsewhere."""
    params = params or ModelParams()
    _check_ground_is_bare(params)
    space.axis(labels.phonon)
    space.axis(labels.electron)
    return product_state(space, {})


def matter_ground_numeric(params: ModelParams, phonon_cutoff: int):
    """Smallest eigenpair of the local matter block (phonon x electron).

    Returns (energy, local vector over the (phonon, electron) joint
    basis).  Used to cross-check the analytic |g, 0> form.
    """
    d = phonon_cutoff + 1
    a = np.zeros((d, d))
    for n in range(1, d):
        a[n - 1, n] = np.sqrt(n)
    x = a + a.T
    n_ph = np.diag(np.arange(d, dtype=float))
    ne = np.diag([0.0, 1.0])
    h = (
        params.omega * np.kron(n_ph, np.eye(2))
        + params.nu * np.kron(x, ne)
        + params.epsilon * np.kron(np.eye(d), ne)
    )
    vals, vecs = np.linalg.eigh(h)
    return float(vals[0]), vecs[:, 0]


def initial_state(
    space: HilbertSpace,
    topology: str,
    alpha: complex,
    params: ModelParams | None = None,
    tail_bound: float = DEFAULT_TAIL_BOUND,
) -> StateVector:
    """The interferometer input state for a topology.

    `alpha` is the amplitude of the single coherent pump entering the
    first beam splitter; each arm receives |alpha|^2/2 mean photons,
    with the reflected arm (B) picking up the factor i.
    """
    params = params or ModelParams()
    _check_ground_is_bare(params)
    if topology == "single_site":
        lbl = site_labels_for("single_site")
        sub = space.subsystem(lbl.pump)
        amps, tail = coherent_amplitudes(alpha, sub.dim)
        _require_tail(tail, tail_bound, lbl.pump, alpha, sub)
        return product_state(space, {lbl.pump: amps})
    if topology not in ("c1", "c2"):
        raise ValueError(f"unknown topology {topology!r}")
    arm = alpha / np.sqrt(2.0)
    la = site_labels_for(topology, "A")
    lb = site_labels_for(topology, "B")
    sub_a = space.subsystem(la.pump)
    sub_b = space.subsystem(lb.pump)
    amps_a, tail_a = coherent_amplitudes(arm, sub_a.dim)
    amps_b, tail_b = coherent_amplitudes(1j * arm, sub_b.dim)
    _require_tail(tail_a, tail_bound, la.pump, arm, sub_a)
    _require_tail(tail_b, tail_bound, lb.pump, 1j * arm, sub_b)
    return product_state(space, {la.pump: amps_a, lb.pump: amps_b})


def _require_tail(tail, bound, label, alpha, sub):
    if tail > bound:
        raise TailBoundError(
            f"coherent tail {tail:.3e} exceeds bound {bound:.1e} for "
            f"|alpha|^2 = {abs(alpha)**2:.4g} at cutoff {sub.kind.cutoff} on {label!r}"
        )
    log.debug("coherent %s: tail %.3e", label, tail)
