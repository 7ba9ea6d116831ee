import numpy as np
import pytest

from nlmzi.errors import HermiticityError, ToleranceError
from nlmzi.hspace import Boson, Subsystem, TwoLevel, build_space
from nlmzi.model import Cutoffs, ModelParams, build_h0, build_h0_sop, build_space_for
from nlmzi.operators import SparseOperator, StateVector, identity, number, pauli
from nlmzi.propagate import (
    DensePropagator,
    DiagonalObservable,
    PropagatorConfig,
    Trajectory,
    evolve,
    evolve_dense_oracle,
)
from nlmzi.states import initial_state, product_state

PAPER = ModelParams()


def two_level_space():
    return build_space([Subsystem("e", TwoLevel())])


def small_h0(cutoffs=Cutoffs(2, 1, 1, 2)):
    space = build_space_for("single_site", cutoffs)
    return space, build_h0(space, PAPER)


class TestDiagonalCase:
    def test_basis_state_gets_only_phase(self):
        space = build_space([Subsystem("a", Boson(4))])
        h = 2.5 * number(space, "a")
        h = SparseOperator(h.space, h.matrix, hermitian_hint=True)
        psi0 = StateVector(space, np.eye(5)[3])
        cfg = PropagatorConfig(dt_sample=0.5, t_end=4.0)
        traj = evolve(h, psi0, cfg, observers={"n": number(space, "a")})
        np.testing.assert_allclose(traj.observables["n"].real, 3.0, atol=1e-12)
        np.testing.assert_allclose(traj.norms, 1.0, atol=1e-13)
        np.testing.assert_allclose(traj.energies, 7.5, atol=1e-11)


class TestRabi:
    def test_sigma_z_analytic(self):
        # H = mu sigma_x from |g>: <sigma_z>(t) = -cos(2 mu t)
        space = two_level_space()
        mu = 0.5
        h = mu * pauli(space, "e", "x")
        psi0 = StateVector(space, [1.0, 0.0])
        cfg = PropagatorConfig(dt_sample=0.1, t_end=10.0, step_tolerance=1e-12)
        traj = evolve(h, psi0, cfg, observers={"sz": pauli(space, "e", "z")})
        expect = -np.cos(2 * mu * traj.times)
        np.testing.assert_allclose(traj.observables["sz"].real, expect, atol=1e-8)


class TestDenseOracle:
    def test_t_zero_identity(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        out = evolve_dense_oracle(h, psi0, 0.0)
        np.testing.assert_allclose(out.data, psi0.data, atol=1e-14)

    def test_composition(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        prop = DensePropagator(h)
        one = prop.at(1.3, psi0)
        two = prop.at(0.9, one)
        direct = prop.at(2.2, psi0)
        assert np.linalg.norm(two.data - direct.data) < 1e-12

    def test_unitarity(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        out = evolve_dense_oracle(h, psi0, 32.0)
        assert abs(out.norm() - 1.0) < 1e-13

    def test_dimension_guard(self):
        space = build_space([Subsystem("a", Boson(4999))])
        h = number(space, "a")
        psi0 = product_state(space)
        with pytest.raises(ValueError, match="dense oracle"):
            evolve_dense_oracle(h, psi0, 1.0)


class TestKrylovVsDense:
    @pytest.mark.parametrize(
        "cutoffs",
        [Cutoffs(1, 1, 1, 1), Cutoffs(2, 1, 1, 2), Cutoffs(3, 2, 2, 3)],
    )
    def test_h0_agreement_at_t32(self, cutoffs):
        space, h = small_h0(cutoffs)
        assert space.total_dim <= 4096
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=1.0, t_end=32.0)
        traj = evolve(h, psi0, cfg, snapshot_times=[32.0])
        psi_k = traj.snapshots[32.0]
        psi_d = evolve_dense_oracle(h, psi0, 32.0)
        assert np.linalg.norm(psi_k.data - psi_d.data) <= 1e-8

    def test_sop_form_agrees(self):
        cutoffs = Cutoffs(2, 1, 1, 2)
        space = build_space_for("single_site", cutoffs)
        h_sop = build_h0_sop(space, PAPER)
        h_csr = build_h0(space, PAPER)
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=1.0, t_end=8.0)
        t1 = evolve(h_sop, psi0, cfg, snapshot_times=[8.0])
        t2 = evolve(h_csr, psi0, cfg, snapshot_times=[8.0])
        assert np.linalg.norm(t1.snapshots[8.0].data - t2.snapshots[8.0].data) < 1e-10


class TestConservation:
    def test_norm_and_energy_over_run(self):
        space, h = small_h0(Cutoffs(3, 2, 2, 3))
        psi0 = initial_state(space, "single_site", 1.4, tail_bound=0.2)
        cfg = PropagatorConfig(dt_sample=0.25, t_end=32.0)
        traj = evolve(h, psi0, cfg)
        assert np.abs(traj.norms - 1.0).max() <= 1e-9
        e0 = traj.energies[0]
        assert np.abs(traj.energies - e0).max() <= 1e-8 * (1 + abs(e0))

    def test_time_reversal(self):
        space, h = small_h0(Cutoffs(2, 1, 1, 2))
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=1.0, t_end=8.0)
        fwd = evolve(h, psi0, cfg, snapshot_times=[8.0]).snapshots[8.0]
        back = evolve(-1.0 * h, fwd, cfg, snapshot_times=[8.0]).snapshots[8.0]
        fidelity = abs(psi0.inner(back))
        assert fidelity >= 1 - 1e-8


class TestRobustness:
    def test_krylov_dim_independence(self):
        space, h = small_h0(Cutoffs(2, 2, 2, 2))
        psi0 = initial_state(space, "single_site", 1.2, tail_bound=0.2)
        traces = {}
        for m in (20, 40):
            cfg = PropagatorConfig(dt_sample=0.25, t_end=16.0, krylov_dim=m)
            traj = evolve(h, psi0, cfg, observers={"n2": number(space, "idler")})
            traces[m] = traj.observables["n2"].real
        assert np.abs(traces[20] - traces[40]).max() <= 1e-7

    def test_substep_independence(self):
        space, h = small_h0(Cutoffs(2, 1, 1, 2))
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        outs = []
        for tol in (1e-9, 1e-12):
            cfg = PropagatorConfig(dt_sample=0.5, t_end=16.0, step_tolerance=tol)
            traj = evolve(h, psi0, cfg, observers={"n2": number(space, "idler")})
            outs.append(traj.observables["n2"].real)
        assert np.abs(outs[0] - outs[1]).max() <= 1e-7

    def test_max_substep_reported(self):
        space, h = small_h0(Cutoffs(2, 1, 1, 2))
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=0.5, t_end=32.0, max_substep=2)
        with pytest.raises(ToleranceError, match="max_substep"):
            evolve(h, psi0, cfg)

    def test_non_hermitian_rejected(self):
        space = build_space([Subsystem("a", Boson(3))])
        from nlmzi.operators import destroy

        psi0 = product_state(space)
        with pytest.raises(HermiticityError):
            evolve(destroy(space, "a"), psi0, PropagatorConfig(dt_sample=1, t_end=1))

    def test_lying_hint_rejected_small(self):
        space = build_space([Subsystem("a", Boson(3))])
        bad = SparseOperator(
            space, np.diag([0, 1, 0, 0]) * 1j, hermitian_hint=True
        )
        psi0 = product_state(space)
        with pytest.raises(HermiticityError):
            evolve(bad, psi0, PropagatorConfig(dt_sample=1, t_end=1))


class TestSamplingMachinery:
    def test_first_sample_is_initial_state(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=0.5, t_end=2.0)
        traj = evolve(h, psi0, cfg, snapshot_times=[0.0])
        np.testing.assert_array_equal(traj.snapshots[0.0].data, psi0.data)
        assert traj.times[0] == 0.0

    def test_times_strictly_increasing_and_complete(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=0.25, t_end=3.0)
        traj = evolve(h, psi0, cfg, observers={"n1": number(space, "pump")})
        assert len(traj.times) == 13
        assert np.all(np.diff(traj.times) > 0)
        assert np.all(np.isfinite(traj.observables["n1"].real))

    def test_snapshot_callback(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        seen = []
        cfg = PropagatorConfig(dt_sample=0.5, t_end=2.0)
        evolve(
            h, psi0, cfg,
            snapshot_times=[1.0, 2.0],
            snapshot_callback=lambda t, st: seen.append((t, st.norm())),
        )
        assert [t for t, _ in seen] == [1.0, 2.0]
        for _, nrm in seen:
            assert abs(nrm - 1.0) < 1e-9

    def test_diagonal_observable_batch(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        occ = space.occupation_array("pump").astype(float)
        cfg = PropagatorConfig(dt_sample=0.5, t_end=2.0)
        traj = evolve(
            h, psi0, cfg,
            observers={
                "n1_diag": DiagonalObservable(space, occ),
                "n1_op": number(space, "pump"),
            },
        )
        np.testing.assert_allclose(
            traj.observables["n1_diag"].real,
            traj.observables["n1_op"].real,
            atol=1e-11,
        )

    def test_rerun_bit_identical(self):
        space, h = small_h0()
        psi0 = initial_state(space, "single_site", 1.0, tail_bound=0.5)
        cfg = PropagatorConfig(dt_sample=0.5, t_end=4.0)
        t1 = evolve(h, psi0, cfg, observers={"n2": number(space, "idler")})
        t2 = evolve(h, psi0, cfg, observers={"n2": number(space, "idler")})
        np.testing.assert_array_equal(
            t1.observables["n2"], t2.observables["n2"]
        )
        np.testing.assert_array_equal(t1.norms, t2.norms)
