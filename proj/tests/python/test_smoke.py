import math
import os
import pathlib

import numpy as np
import pytest

import qengine as q

q.set_quiet(True)


def test_ladder_operators():
    a = q.annihilation(6)
    ad = q.creation(6)
    assert np.allclose(ad, a.conj().T)
    assert np.allclose(ad @ a, q.number(6))
    assert a[2, 3] == pytest.approx(math.sqrt(3))


def test_states_are_density_matrices():
    for rho in (q.fock_state(2, 8), q.coherent_state(0.5 + 0.5j, 20), q.thermal_state(1.0, 30)):
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.allclose(rho, rho.conj().T)
        assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_invalid_state_raises():
    with pytest.raises(q.DomainError):
        q.von_neumann_entropy(np.diag([0.5, 0.6]).astype(complex))
    with pytest.raises(q.TruncationError):
        q.coherent_state(4.0, 5)
    assert issubclass(q.TruncationError, q.Error)


def test_thermal_stationary_state():
    gen = q.linear_laser(1.0, 0.3, 1.0)
    rho = q.stationary_state(gen, 40)
    p = np.real(np.diag(rho))
    ratio = 0.3
    expected = (1 - ratio) * ratio ** np.arange(40)
    assert np.allclose(p, expected / expected.sum(), atol=1e-10)
    assert np.abs(q.generator_apply(gen, rho)).max() < 1e-10


def test_evolve_decay():
    gen = q.linear_laser(1.0, 0.0, 1.0)
    traj = q.evolve(gen, q.fock_state(3, 8), 1.0, 0.01, 10)
    assert traj["times"][0] == 0.0
    assert traj["times"][-1] == pytest.approx(1.0)
    n_final = np.trace(q.number(8) @ traj["states"][-1]).real
    assert n_final == pytest.approx(3 * math.exp(-1.0), rel=1e-6)


def test_dense_and_ladder_generators_agree():
    lad = q.loaded_laser(1.0, 0.5, 1.0, 0.1)
    a = q.annihilation(6)
    n = q.number(6)
    jumps = [a, math.sqrt(0.5) * a.conj().T, math.sqrt(0.1) * a @ np.diag(np.sqrt(np.arange(6.0)))]
    dense = q.general_gkls(n.astype(complex), jumps)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert np.allclose(q.generator_apply(lad, x)[:5, :5], q.generator_apply(dense, x)[:5, :5], atol=1e-12)


def test_birth_death_matches_geometric():
    model = q.BirthDeathModel.linear(0.5, 1.0)
    p = q.stationary_distribution(model, q.auto_cutoff(model))
    mean, var, fano = q.moments(p)
    assert mean == pytest.approx(1.0, rel=1e-9)
    assert fano == pytest.approx(2.0, rel=1e-9)


def test_gillespie_reproducible():
    model = q.BirthDeathModel.loaded(2.0, 1.0, 0.05)
    a = q.gillespie_endpoints(model, 10, 2.0, 7, 50)
    b = q.gillespie_endpoints(model, 10, 2.0, 7, 50)
    assert a == b
    times, counts = q.gillespie_sample(model, 10, 2.0, 7)
    assert np.all(np.abs(np.diff(counts)) == 1)


def test_relative_entropy_and_ergotropy():
    rho = q.thermal_state(0.5, 10)
    assert q.relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-12)
    h = q.number(10)
    assert q.ergotropy(rho, h) == pytest.approx(0.0, abs=1e-12)
    assert q.ergotropy(q.fock_state(3, 10), h) == pytest.approx(3.0)


def test_chemical_engine_and_analytic_energy():
    pot = q.ChemicalPotentials(beta=1.0, mu_a=0.5, mu_b=0.0, omega=1.0)
    eng = q.chemical_engine(pot, 1.0)
    assert eng["gamma_up"] == pytest.approx(math.exp(-pot.delta_g))
    assert not eng["amplifying"]
    assert q.analytic_energy(pot, 1.0, 2.0, 0.0) == pytest.approx(2.0)


def test_thermo_report_on_preset():
    s = q.preset("loaded_laser", {"t_final": 1.0})
    traj = q.evolve(s.generator, s.initial_state, s.t_final, s.dt, s.sample_every)
    rows = q.thermo_report(traj["times"], traj["states"], s.bath, s.load, s.pot)
    assert len(rows) == len(traj["times"])
    assert all(r["second_law_lhs"] >= -1e-6 for r in rows)


def test_unknown_preset():
    with pytest.raises(q.UnknownPreset):
        q.preset("nope")


def test_run_config(tmp_path):
    configs = pathlib.Path(os.environ.get("QENGINE_CONFIG_DIR", pathlib.Path(__file__).parents[2] / "configs"))
    code, err = q.run_config(str(configs / "below_threshold.json"), str(tmp_path))
    assert code == 0, err
    assert any(tmp_path.iterdir())
