import numpy as np
import pytest
import scipy.linalg

from nlmzi.hspace import basis_index, basis_unindex
from nlmzi.model import (
    Cutoffs,
    ModelParams,
    build_h0,
    build_h0_sop,
    build_h1,
    build_h2,
    build_space_for,
    c2_site_space,
    dipole_operator,
    hamiltonian_terms,
    site_labels_for,
    symbol_table,
)
from nlmzi.opdsl import lower, parse
from nlmzi.operators import (
    commutator,
    destroy,
    entrywise_max_diff,
    identity,
    number,
)

PAPER = ModelParams()  # omega=1, Omega=(13.5, 12.5, 1), mu=0.5, tau=0.1, eps=27


def kron_chain(*mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def dense_site_matrices(np_, ni, ns, nph):
    """Local matrices for one medium: (x_pump, x_idler, x_signal, x_ph, paulis)."""

    def low(d):
        m = np.zeros((d, d))
        for n in range(1, d):
            m[n - 1, n] = np.sqrt(n)
        return m

    xs = {k: low(d) + low(d).T for k, d in dict(p=np_, i=ni, s=ns, ph=nph).items()}
    nums = {k: np.diag(np.arange(d)) for k, d in dict(p=np_, i=ni, s=ns, ph=nph).items()}
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    ne = np.diag([0.0, 1.0])
    return xs, nums, sx, ne


def hand_built_h0(p: ModelParams, cut: Cutoffs) -> np.ndarray:
    """Independent dense assembly of the single-medium Hamiltonian."""
    dp, di, ds, dph = cut.pump + 1, cut.idler + 1, cut.signal + 1, cut.phonon + 1
    xs, nums, sx, ne = dense_site_matrices(dp, di, ds, dph)
    ip, ii, is_, iph, ie = (np.eye(d) for d in (dp, di, ds, dph, 2))
    h = p.Omega1 * kron_chain(nums["p"], ii, is_, iph, ie)
    h = h + p.Omega2 * kron_chain(ip, nums["i"], is_, iph, ie)
    h = h + p.Omega3 * kron_chain(ip, ii, nums["s"], iph, ie)
    h = h + p.omega * kron_chain(ip, ii, is_, nums["ph"], ie)
    h = h + p.nu * kron_chain(ip, ii, is_, xs["ph"], ne)
    h = h + p.epsilon * kron_chain(ip, ii, is_, iph, ne)
    m_local = p.mu * np.kron(iph, sx) + p.tau * np.kron(xs["ph"], sx) + p.tau * np.kron(
        xs["ph"], ie
    )
    field = (
        kron_chain(xs["p"], ii, is_)
        + kron_chain(ip, xs["i"], is_)
        + kron_chain(ip, ii, xs["s"])
    )
    h = h + np.kron(field, m_local)
    return h


class TestSingleSite:
    def test_decoupled_is_diagonal_with_expected_energies(self):
        cut = Cutoffs(pump=2, idler=2, signal=2, phonon=2)
        space = build_space_for("single_site", cut)
        p = PAPER.replace(mu=0.0, tau=0.0, nu=0.0)
        h = build_h0(space, p).to_dense()
        assert np.abs(h - np.diag(np.diag(h))).max() == 0.0
        for idx in range(space.total_dim):
            n1, n2, n3, m, ne = basis_unindex(space, idx)
            expect = 13.5 * n1 + 12.5 * n2 + 1.0 * n3 + 1.0 * m + 27.0 * ne
            assert h[idx, idx].real == pytest.approx(expect, abs=1e-12)

    def test_vacuum_energy_zero(self):
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("single_site", cut)
        h = build_h0(space, PAPER).to_dense()
        assert abs(h[0, 0]) == 0.0

    def test_matches_hand_built_dense(self):
        cut = Cutoffs(pump=2, idler=2, signal=2, phonon=2)
        space = build_space_for("single_site", cut)
        h = build_h0(space, PAPER).to_dense()
        np.testing.assert_allclose(h, hand_built_h0(PAPER, cut), atol=1e-13)

    def test_hermitian_at_tolerance(self):
        cut = Cutoffs(pump=3, idler=2, signal=2, phonon=3)
        space = build_space_for("single_site", cut)
        assert build_h0(space, PAPER).hermiticity_defect() <= 1e-12

    def test_number_conservation_when_light_decoupled(self):
        cut = Cutoffs(pump=2, idler=2, signal=2, phonon=2)
        space = build_space_for("single_site", cut)
        p = PAPER.replace(mu=0.0, tau=0.0)  # nu stays on
        h = build_h0(space, p)
        for mode in ("pump", "idler", "signal"):
            assert entrywise_max_diff(
                commutator(h, number(space, mode)), 0.0 * identity(space)
            ) < 1e-12

    def test_terms_sum_to_hamiltonian(self):
        cut = Cutoffs(pump=2, idler=1, signal=1, phonon=2)
        space = build_space_for("single_site", cut)
        terms = hamiltonian_terms(space, PAPER, "single_site")
        total = None
        for op in terms.values():
            total = op if total is None else total + op
        assert entrywise_max_diff(total, build_h0(space, PAPER)) < 1e-12


class TestC1:
    def hand_built_h1(self, p: ModelParams, cut: Cutoffs) -> np.ndarray:
        dp, di, ds, dph = cut.pump + 1, cut.idler + 1, cut.signal + 1, cut.phonon + 1
        xs, nums, sx, ne = dense_site_matrices(dp, di, ds, dph)
        eyes = {
            "pA": np.eye(dp), "pB": np.eye(dp), "iA": np.eye(di), "iB": np.eye(di),
            "s": np.eye(ds), "phA": np.eye(dph), "phB": np.eye(dph),
            "eA": np.eye(2), "eB": np.eye(2),
        }
        order = ["pA", "pB", "iA", "iB", "s", "phA", "phB", "eA", "eB"]

        def place(**ops):
            return kron_chain(*[ops.get(k, eyes[k]) for k in order])

        h = p.Omega3 * place(s=nums["s"])
        for site in ("A", "B"):
            pk, ik, phk, ek = f"p{site}", f"i{site}", f"ph{site}", f"e{site}"
            h = h + p.Omega1 * place(**{pk: nums["p"]})
            h = h + p.Omega2 * place(**{ik: nums["i"]})
            h = h + p.omega * place(**{phk: nums["ph"]})
            h = h + p.nu * place(**{phk: xs["ph"], ek: ne})
            h = h + p.epsilon * place(**{ek: ne})
            field = (
                place(**{pk: xs["p"]}) + place(**{ik: xs["i"]}) + place(s=xs["s"])
            )
            m_op = (
                p.mu * place(**{ek: sx})
                + p.tau * place(**{phk: xs["ph"], ek: sx})
                + p.tau * place(**{phk: xs["ph"]})
            )
            h = h + m_op @ field
        return h

    def test_matches_hand_built_dense_minimal(self):
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("c1", cut)
        assert space.total_dim == 512
        h = build_h1(space, PAPER).to_dense()
        np.testing.assert_allclose(h, self.hand_built_h1(PAPER, cut), atol=1e-13)

    def test_hermitian(self):
        cut = Cutoffs(pump=2, idler=1, signal=1, phonon=2)
        space = build_space_for("c1", cut)
        assert build_h1(space, PAPER).hermiticity_defect() <= 1e-12

    def test_frozen_b_reduces_to_single_site(self):
        # with all B couplings zero and B in vacuum/ground, the A-sector
        # dynamics equals the single-medium Hamiltonian's
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        c1 = build_space_for("c1", cut)
        single = build_space_for("single_site", cut)
        pb = PAPER.replace(mu=0.0, tau=0.0, nu=0.0)
        h1 = build_h1(c1, PAPER, params_b=pb).to_dense()
        h0 = build_h0(single, PAPER).to_dense()

        rng = np.random.default_rng(0)
        psi0 = rng.normal(size=single.total_dim) + 1j * rng.normal(size=single.total_dim)
        psi0 /= np.linalg.norm(psi0)
        big0 = np.zeros(c1.total_dim, complex)
        # embed: (n1, n2, n3, m, e) -> (n1A=n1, n1B=0, n2A=n2, n2B=0, s=n3, ...)
        for idx in range(single.total_dim):
            n1, n2, n3, m, e = basis_unindex(single, idx)
            big_idx = basis_index(c1, [n1, 0, n2, 0, n3, m, 0, e, 0])
            big0[big_idx] = psi0[idx]
        t = 0.7
        small_t = scipy.linalg.expm(-1j * t * h0) @ psi0
        big_t = scipy.linalg.expm(-1j * t * h1) @ big0
        for idx in range(single.total_dim):
            n1, n2, n3, m, e = basis_unindex(single, idx)
            big_idx = basis_index(c1, [n1, 0, n2, 0, n3, m, 0, e, 0])
            assert big_t[big_idx] == pytest.approx(small_t[idx], abs=1e-10)

    def test_photon_conservation_fully_decoupled(self):
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("c1", cut)
        p = PAPER.replace(mu=0.0, tau=0.0, nu=0.0)
        h = build_h1(space, p)
        for mode in ("pump_A", "idler_B", "signal"):
            assert entrywise_max_diff(
                commutator(h, number(space, mode)), 0.0 * identity(space)
            ) < 1e-12

    def test_wrong_topology_rejected(self):
        space = build_space_for("c2", Cutoffs(1, 1, 1, 1))
        with pytest.raises(ValueError, match="c1 layout"):
            build_h1(space, PAPER)


class TestC2:
    def test_kronecker_sum_structure(self):
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("c2", cut)
        sa = c2_site_space(cut, "A")
        sb = c2_site_space(cut, "B")
        ha = build_h0(sa, PAPER, site_labels_for("c2", "A")).to_dense()
        hb = build_h0(sb, PAPER, site_labels_for("c2", "B")).to_dense()
        expect = np.kron(ha, np.eye(sb.total_dim)) + np.kron(np.eye(sa.total_dim), hb)
        h2 = build_h2(space, PAPER).to_dense()
        np.testing.assert_allclose(h2, expect, atol=1e-13)

    def test_spectrum_is_pairwise_sums(self):
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("c2", cut)
        sa = c2_site_space(cut, "A")
        ha = build_h0(sa, PAPER, site_labels_for("c2", "A")).to_dense()
        ea = np.linalg.eigvalsh(ha)
        e2 = np.linalg.eigvalsh(build_h2(space, PAPER).to_dense())
        pairwise = np.sort((ea[:, None] + ea[None, :]).ravel())
        np.testing.assert_allclose(e2, pairwise, atol=1e-9)

    def test_local_observable_commutator_structure(self):
        # [H2, O_A x I] = [H_A, O_A] x I
        cut = Cutoffs(pump=1, idler=1, signal=1, phonon=1)
        space = build_space_for("c2", cut)
        sa = c2_site_space(cut, "A")
        dim_b = sa.total_dim
        o_local = build_h0(sa, PAPER.replace(mu=0.3), site_labels_for("c2", "A")).to_dense()
        o_a = np.kron(o_local, np.eye(dim_b))
        h2 = build_h2(space, PAPER).to_dense()
        ha = build_h0(sa, PAPER, site_labels_for("c2", "A")).to_dense()
        lhs = h2 @ o_a - o_a @ h2
        rhs = np.kron(ha @ o_local - o_local @ ha, np.eye(dim_b))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_wrong_topology_rejected(self):
        space = build_space_for("c1", Cutoffs(1, 1, 1, 1))
        with pytest.raises(ValueError, match="c2 layout"):
            build_h2(space, PAPER)


class TestSymbols:
    def test_c1_symbols_lower_to_expected_subsystems(self):
        space = build_space_for("c1", Cutoffs(1, 1, 1, 1))
        table = symbol_table("c1")
        op = lower(parse("c2A"), space, table)
        assert entrywise_max_diff(op, destroy(space, "idler_A")) == 0.0
        op3 = lower(parse("c3"), space, table)
        assert entrywise_max_diff(op3, destroy(space, "signal")) == 0.0

    def test_c2_signal_symbols(self):
        space = build_space_for("c2", Cutoffs(1, 1, 1, 1))
        table = symbol_table("c2")
        assert "c3" not in table
        op = lower(parse("c3B"), space, table)
        assert entrywise_max_diff(op, destroy(space, "signal_B")) == 0.0

    def test_dipole_operator_hermitian(self):
        space = build_space_for("c1", Cutoffs(1, 1, 1, 2))
        m = dipole_operator(space, PAPER, site_labels_for("c1", "B"))
        m.check_hermitian()


class TestDefaults:
    def test_paper_values(self):
        p = ModelParams()
        assert (p.omega, p.mu, p.tau) == (1.0, 0.5, 0.1)
        assert (p.Omega1, p.Omega2, p.Omega3) == (13.5, 12.5, 1.0)
        assert p.epsilon == 27.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(omega=0.0)
        with pytest.raises(ValueError):
            ModelParams(Omega1=-1.0)

    def test_cutoff_bump(self):
        c = Cutoffs()
        assert c.bump("idler").idler == c.idler + 1
        with pytest.raises(ValueError):
            c.bump("zz")
