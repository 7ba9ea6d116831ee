"""Hamiltonians of the electron-phonon-photon media and interferometer layouts.

A single medium couples three photon modes (pump, idler, signal) to a
two-level electronic system and one optical phonon mode:

    H0 = W1 n1 + W2 n2 + W3 n3 + w a'a + n_e {nu (a'+a) + eps}
         + M * sum_i (c_i' + c_i),
    n_e = (1 + sigma_z)/2,
    M   = {mu + tau (a'+a)} sigma_x + tau (a'+a).

Two media A and B form a Mach-Zehnder-type interferometer in one of two
topologies: in the "c1" layout the signal mode is shared (what A emits
drives B), in "c2" each site keeps a private signal mode, so the sites
evolve fully independently.  No rotating-wave approximation anywhere:
the couplings keep their counter-rotating parts.

Units: hbar = 1 and frequencies in units of the phonon frequency, so the
default `omega` is 1 and time is measured in 1/omega.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .hspace import Boson, HilbertSpace, Subsystem, TwoLevel, build_space
from .operators import (
    SparseOperator,
    embed,
    identity,
    lowering_matrix,
    number,
    pauli,
)
from .sop import AxesFactor, AxisSumFactor, SumOfProducts

__all__ = [
    "ModelParams",
    "Cutoffs",
    "SiteLabels",
    "TOPOLOGIES",
    "build_space_for",
    "site_labels_for",
    "symbol_table",
    "build_h0",
    "build_h1",
    "build_h2",
    "build_h0_sop",
    "build_h1_sop",
    "build_h2_sop",
    "hamiltonian_terms",
    "dipole_operator",
    "MATERIALIZE_LIMIT",
]

TOPOLOGIES = ("single_site", "c1", "c2")

# build_h* materialize CSR matrices; above this dimension that is a
# memory mistake and the SOP form should be used instead
MATERIALIZE_LIMIT = 500_000


@dataclass(frozen=True)
class ModelParams:
    """Scalar couplings and frequencies, in units of the phonon frequency.

    Defaults follow the nonresonant terahertz down-conversion setting:
    pump 13.5, idler 12.5, signal 1, gap 27, dipole mu=0.5, tau=0.1.
    The electron-phonon coupling strength defaults to 1.0 (same order as
    the phonon frequency); it must be nonzero for phonon-assisted signal
    generation.
    """

    omega: float = 1.0
    Omega1: float = 13.5
    Omega2: float = 12.5
    Omega3: float = 1.0
    mu: float = 0.5
    tau: float = 0.1
    nu: float = 1.0
    epsilon: float = 27.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        for name in ("Omega1", "Omega2", "Omega3", "epsilon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class Cutoffs:
    """Fock cutoffs per mode class (cutoff N keeps |0>..|N>)."""

    pump: int = 12
    idler: int = 4
    signal: int = 4
    phonon: int = 6

    def bump(self, mode_class: str, by: int = 1) -> "Cutoffs":
        if mode_class not in ("pump", "idler", "signal", "phonon"):
            raise ValueError(f"unknown cutoff class {mode_class!r}")
        return replace(self, **{mode_class: getattr(self, mode_class) + by})


@dataclass(frozen=True)
class SiteLabels:
    pump: str
    idler: str
    signal: str
    phonon: str
    electron: str


def build_space_for(topology: str, cutoffs: Cutoffs) -> HilbertSpace:
    """Hilbert space of a topology with the given per-class cutoffs.

    The c1 layout groups subsystems by class (pumps, idlers, shared
    signal, phonons, electrons); the c2 layout is site-major so the
    joint space is literally (site A) x (site B), which downstream code
    exploits for exact factorized evolution.
    """
    c = cutoffs
    if topology == "single_site":
        subs = [
            Subsystem("pump", Boson(c.pump)),
            Subsystem("idler", Boson(c.idler)),
            Subsystem("signal", Boson(c.signal)),
            Subsystem("phonon", Boson(c.phonon)),
            Subsystem("electron", TwoLevel()),
        ]
    elif topology == "c1":
        subs = [
            Subsystem("pump_A", Boson(c.pump)),
            Subsystem("pump_B", Boson(c.pump)),
            Subsystem("idler_A", Boson(c.idler)),
            Subsystem("idler_B", Boson(c.idler)),
            Subsystem("signal", Boson(c.signal)),
            Subsystem("phonon_A", Boson(c.phonon)),
            Subsystem("phonon_B", Boson(c.phonon)),
            Subsystem("electron_A", TwoLevel()),
            Subsystem("electron_B", TwoLevel()),
        ]
    elif topology == "c2":
        subs = []
        for site in ("A", "B"):
            subs += [
                Subsystem(f"pump_{site}", Boson(c.pump)),
                Subsystem(f"idler_{site}", Boson(c.idler)),
                Subsystem(f"signal_{site}", Boson(c.signal)),
                Subsystem(f"phonon_{site}", Boson(c.phonon)),
                Subsystem(f"electron_{site}", TwoLevel()),
            ]
    else:
        raise ValueError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")
    return build_space(subs)


def c2_site_space(cutoffs: Cutoffs, site: str) -> HilbertSpace:
    """The single-site factor of the c2 layout, with the site's labels."""
    c = cutoffs
    return build_space(
        [
            Subsystem(f"pump_{site}", Boson(c.pump)),
            Subsystem(f"idler_{site}", Boson(c.idler)),
            Subsystem(f"signal_{site}", Boson(c.signal)),
            Subsystem(f"phonon_{site}", Boson(c.phonon)),
            Subsystem(f"electron_{site}", TwoLevel()),
        ]
    )


def site_labels_for(topology: str, site: str | None = None) -> SiteLabels:
    if topology == "single_site":
        return SiteLabels("pump", "idler", "signal", "phonon", "electron")
    if site not in ("A", "B"):
        raise ValueError("site must be 'A' or 'B' for interferometer topologies")
    signal = "signal" if topology == "c1" else f"signal_{site}"
    return SiteLabels(
        f"pump_{site}", f"idler_{site}", signal, f"phonon_{site}", f"electron_{site}"
    )


def symbol_table(topology: str) -> dict:
    """DSL symbols for a topology (c1A, c2B, c3, a_A, sx_A, ...)."""
    if topology == "single_site":
        return {
            "c1": ("boson", "pump"),
            "c2": ("boson", "idler"),
            "c3": ("boson", "signal"),
            "a": ("boson", "phonon"),
            "sx": ("pauli_x", "electron"),
            "sy": ("pauli_y", "electron"),
            "sz": ("pauli_z", "electron"),
        }
    table = {}
    for site in ("A", "B"):
        table[f"c1{site}"] = ("boson", f"pump_{site}")
        table[f"c2{site}"] = ("boson", f"idler_{site}")
        table[f"a_{site}"] = ("boson", f"phonon_{site}")
        for ax in "xyz":
            table[f"s{ax}_{site}"] = (f"pauli_{ax}", f"electron_{site}")
    if topology == "c1":
        table["c3"] = ("boson", "signal")
    elif topology == "c2":
        table["c3A"] = ("boson", "signal_A")
        table["c3B"] = ("boson", "signal_B")
    else:
        raise ValueError(f"unknown topology {topology!r}")
    return table


# -- local building blocks --------------------------------------------------


def _x_matrix(dim: int) -> np.ndarray:
    a = lowering_matrix(dim)
    return a + a.conj().T


_SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_NE = np.array([[0, 0], [0, 1]], dtype=np.complex128)  # (1 + sigma_z)/2
_I2 = np.eye(2, dtype=np.complex128)


def _dipole_local(params: ModelParams, phonon_dim: int) -> np.ndarray:
    """M = {mu + tau (a'+a)} sigma_x + tau (a'+a) on (phonon x electron)."""
    x = _x_matrix(phonon_dim)
    ip = np.eye(phonon_dim, dtype=np.complex128)
    return (
        params.mu * np.kron(ip, _SX)
        + params.tau * np.kron(x, _SX)
        + params.tau * np.kron(x, _I2)
    )


def _site_sop_pieces(space: HilbertSpace, params: ModelParams, lbl: SiteLabels):
    """Off-diagonal SOP terms and the matter diagonal of one site."""
    ph_ax = space.axis(lbl.phonon)
    el_ax = space.axis(lbl.electron)
    ph_dim = space.dims[ph_ax]

    coupling = AxisSumFactor(
        space,
        [
            (space.axis(lbl.pump), _x_matrix(space.dim_of(lbl.pump))),
            (space.axis(lbl.idler), _x_matrix(space.dim_of(lbl.idler))),
            (space.axis(lbl.signal), _x_matrix(space.dim_of(lbl.signal))),
        ],
    )
    dipole = AxesFactor(space, (ph_ax, el_ax), _dipole_local(params, ph_dim))
    phonon_drive = AxesFactor(
        space, (ph_ax, el_ax), params.nu * np.kron(_x_matrix(ph_dim), _NE)
    )
    terms = [(1.0, [coupling, dipole]), (1.0, [phonon_drive])]

    diag = params.omega * space.occupation_array(lbl.phonon).astype(np.float64)
    diag += params.epsilon * space.occupation_array(lbl.electron).astype(np.float64)
    diag += params.Omega1 * space.occupation_array(lbl.pump).astype(np.float64)
    diag += params.Omega2 * space.occupation_array(lbl.idler).astype(np.float64)
    return terms, diag


def build_h0_sop(
    space: HilbertSpace, params: ModelParams, labels: SiteLabels | None = None
) -> SumOfProducts:
    """Single-medium Hamiltonian in sum-of-products form."""
    lbl = labels or site_labels_for("single_site")
    terms, diag = _site_sop_pieces(space, params, lbl)
    diag += params.Omega3 * space.occupation_array(lbl.signal).astype(np.float64)
    return SumOfProducts(space, terms, diag=diag, hermitian_hint=True)


def build_h1_sop(
    space: HilbertSpace, params: ModelParams, params_b: ModelParams | None = None
) -> SumOfProducts:
    """Shared-signal interferometer Hamiltonian (both sites drive one c3)."""
    pa, pb = params, params_b or params
    la = site_labels_for("c1", "A")
    lb = site_labels_for("c1", "B")
    terms_a, diag_a = _site_sop_pieces(space, pa, la)
    terms_b, diag_b = _site_sop_pieces(space, pb, lb)
    diag = diag_a + diag_b
    # one shared signal mode: its free energy enters once
    diag += pa.Omega3 * space.occupation_array("signal").astype(np.float64)
    return SumOfProducts(space, terms_a + terms_b, diag=diag, hermitian_hint=True)


def build_h2_sop(
    space: HilbertSpace, params: ModelParams, params_b: ModelParams | None = None
) -> SumOfProducts:
    """Blocked-signal Hamiltonian: independent copies of H0 per site."""
    pa, pb = params, params_b or params
    la = site_labels_for("c2", "A")
    lb = site_labels_for("c2", "B")
    terms_a, diag_a = _site_sop_pieces(space, pa, la)
    terms_b, diag_b = _site_sop_pieces(space, pb, lb)
    diag = diag_a + diag_b
    diag += pa.Omega3 * space.occupation_array(la.signal).astype(np.float64)
    diag += pb.Omega3 * space.occupation_array(lb.signal).astype(np.float64)
    return SumOfProducts(space, terms_a + terms_b, diag=diag, hermitian_hint=True)


def _materialize(h: SumOfProducts, space: HilbertSpace) -> SparseOperator:
    if space.total_dim > MATERIALIZE_LIMIT:
        raise MemoryError(
            f"refusing to materialize a CSR Hamiltonian at dim {space.total_dim}; "
            "use the *_sop builder for large spaces"
        )
    op = h.to_sparse()
    op.check_hermitian()
    return op


def build_h0(
    space: HilbertSpace, params: ModelParams, labels: SiteLabels | None = None
) -> SparseOperator:
    """Single-medium Hamiltonian as a CSR operator (small spaces)."""
    return _materialize(build_h0_sop(space, params, labels), space)


def build_h1(
    space: HilbertSpace, params: ModelParams, params_b: ModelParams | None = None
) -> SparseOperator:
    required = {lbl for s in ("A", "B") for lbl in vars(site_labels_for("c1", s)).values()}
    missing = required - set(space.labels)
    if missing:
        raise ValueError(f"space is not a c1 layout; missing labels {sorted(missing)}")
    return _materialize(build_h1_sop(space, params, params_b), space)


def build_h2(
    space: HilbertSpace, params: ModelParams, params_b: ModelParams | None = None
) -> SparseOperator:
    required = {lbl for s in ("A", "B") for lbl in vars(site_labels_for("c2", s)).values()}
    missing = required - set(space.labels)
    if missing:
        raise ValueError(f"space is not a c2 layout; missing labels {sorted(missing)}")
    return _materialize(build_h2_sop(space, params, params_b), space)


# -- diagnostics -------------------------------------------------------------


def dipole_operator(
    space: HilbertSpace, params: ModelParams, lbl: SiteLabels
) -> SparseOperator:
    """The embedded dipole operator M of one site (CSR)."""
    ph_ax = space.axis(lbl.phonon)
    el_ax = space.axis(lbl.electron)
    fac = AxesFactor(space, (ph_ax, el_ax), _dipole_local(params, space.dims[ph_ax]))
    return SparseOperator(space, fac.to_csr(space), hermitian_hint=True)


def hamiltonian_terms(
    space: HilbertSpace, params: ModelParams, topology: str,
    params_b: ModelParams | None = None,
) -> dict[str, SparseOperator]:
    """Term-by-term decomposition for debugging (CSR, small spaces only)."""
    if space.total_dim > MATERIALIZE_LIMIT:
        raise MemoryError("term dump is a small-space debugging aid")
    sites = [None] if topology == "single_site" else ["A", "B"]
    out: dict[str, SparseOperator] = {}
    signals_seen = set()
    for site in sites:
        lbl = site_labels_for(topology, site)
        p = params_b if (site == "B" and params_b is not None) else params
        tag = "" if site is None else f"_{site}"
        out[f"pump_energy{tag}"] = p.Omega1 * number(space, lbl.pump)
        out[f"idler_energy{tag}"] = p.Omega2 * number(space, lbl.idler)
        if lbl.signal not in signals_seen:
            out[f"signal_energy{tag}"] = p.Omega3 * number(space, lbl.signal)
            signals_seen.add(lbl.signal)
        out[f"phonon_energy{tag}"] = p.omega * number(space, lbl.phonon)
        n_e = embed(space, lbl.electron, _NE, hermitian_hint=True)
        out[f"electron_gap{tag}"] = p.epsilon * n_e
        x_ph = embed(space, lbl.phonon, _x_matrix(space.dim_of(lbl.phonon)), True)
        out[f"phonon_coupling{tag}"] = p.nu * (n_e @ x_ph)
        field = None
        for mode in (lbl.pump, lbl.idler, lbl.signal):
            xm = embed(space, mode, _x_matrix(space.dim_of(mode)), True)
            field = xm if field is None else field + xm
        out[f"light_matter{tag}"] = dipole_operator(space, p, lbl) @ field
    return out
