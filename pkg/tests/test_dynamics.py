import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from garnetspin.dynamics import (NoiseModel, PulseElement, PulseSequence, check_state,
                                 propagate_element, pure, run_sequence, sequence_template, su2)
from garnetspin.dynamics.propagation import DOWN, SX, SY, SZ, UP, readout
from garnetspin.dynamics.sequences import CYCLE, MX, MY, X, Y
from garnetspin.errors import ConfigError, InputError


def hamiltonian(d, w, phi):
    return 0.5 * d * SZ + 0.5 * w * (math.cos(phi) * SX + math.sin(phi) * SY)


def test_pi_pulse_flips_up_to_down():
    pi = PulseElement("drive", duration_ns=50.0, rabi_mhz=10.0)
    rho = propagate_element(UP, pi)
    assert np.max(np.abs(rho - DOWN)) < 1e-12


def test_delay_keeps_populations(rng):
    traj = lambda t: 3.0 * math.sin(0.1 * t) + 2.0
    rho = propagate_element(UP, PulseElement("delay", 120.0), traj, n_substeps=37)
    assert np.max(np.abs(rho - UP)) < 1e-12


def test_constant_detuning_phase_advance():
    plus = pure([1, 1])
    d, t = 1.7, 230.0
    rho = propagate_element(plus, PulseElement("delay", t, detuning_offset_mhz=d))
    # rho_01 = <up|rho|down> picks up exp(-i 2 pi d t)
    assert rho[0, 1] == pytest.approx(0.5 * np.exp(-1j * CYCLE * d * t), abs=1e-12)
    U = expm(-1j * CYCLE * t * hamiltonian(d, 0.0, 0.0))
    assert np.allclose(rho, U @ plus @ U.conj().T, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(d=st.floats(-50, 50), w=st.floats(0, 80), phi=st.floats(-4, 4), t=st.floats(0, 300))
def test_su2_matches_expm_and_is_unitary(d, w, phi, t):
    U = su2(d, w, phi, t)
    assert np.max(np.abs(U.conj().T @ U - np.eye(2))) < 1e-12
    ref = expm(-1j * CYCLE * t * hamiltonian(d, w, phi))
    assert np.max(np.abs(U - ref)) < 1e-9


def test_su2_batched():
    d = np.array([-3.0, 0.0, 4.5])
    U = su2(d, 20.0, 0.3, 17.0)
    assert U.shape == (3, 2, 2)
    for k in range(3):
        assert np.allclose(U[k], su2(d[k], 20.0, 0.3, 17.0), atol=1e-15)


def test_purity_preserved_without_t1(rng):
    rho = pure([0.6, 0.8j])
    for _ in range(30):
        e = PulseElement("drive", duration_ns=rng.uniform(0, 40), rabi_mhz=rng.uniform(0, 60),
                         phase=rng.uniform(-3, 3), detuning_offset_mhz=rng.uniform(-5, 5))
        rho = propagate_element(rho, e, n_substeps=3)
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)
    check_state(rho)


def test_t1_channel_relaxes_to_mixed():
    noise = NoiseModel(t1_ns=100.0)
    rho = propagate_element(UP, PulseElement("delay", 70.0), n_substeps=7, noise=noise)
    assert rho[0, 0].real == pytest.approx(0.5 + 0.5 * math.exp(-0.7), abs=1e-12)
    plus = propagate_element(pure([1, 1]), PulseElement("delay", 70.0), n_substeps=5, noise=noise)
    assert abs(plus[0, 1]) == pytest.approx(0.5 * math.exp(-0.35), abs=1e-12)
    check_state(rho)


def test_substep_validation():
    with pytest.raises(InputError):
        propagate_element(UP, PulseElement("delay", 10.0), n_substeps=0)


def test_check_state_rejects_bad_matrices():
    with pytest.raises(InputError):
        check_state(np.eye(2))
    with pytest.raises(InputError):
        check_state(np.array([[1.5, 0], [0, -0.5]]))
    with pytest.raises(InputError):
        check_state(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_readout_axes():
    assert readout(DOWN, "z") == 1.0
    assert readout(pure([1, 1]), "x") == pytest.approx(0.0)
    assert readout(pure([1, -1]), "x") == pytest.approx(1.0)
    assert readout(pure([1, 1j]), "y") == pytest.approx(0.0)


def test_element_validation():
    with pytest.raises(InputError):
        PulseElement("delay", 10.0, rabi_mhz=1.0)
    with pytest.raises(InputError):
        PulseElement("pulse", 10.0)
    with pytest.raises(InputError):
        PulseElement("drive", -1.0)


# -- templates ---------------------------------------------------------------

def test_rabi_noiseless_is_sin_squared():
    t = np.linspace(0, 200, 41)
    sig = run_sequence(sequence_template("rabi", 10.0), NoiseModel(), t, 100, 0)
    assert np.allclose(sig.y, np.sin(math.pi * 10.0 * t * 1e-3) ** 2, atol=1e-12)
    assert sig.metadata["n_trajectories"] == 1


def test_fid_zero_delay_is_net_pi():
    sig = run_sequence(sequence_template("fid", 50.0), NoiseModel(), [0.0, 10.0], 1, 0)
    assert sig.y[0] == pytest.approx(1.0, abs=1e-12)


def test_cpmg1_matches_hahn_structure():
    h = sequence_template("hahn", 50.0)
    c = sequence_template("cpmg", 50.0, n_pulses=1)
    assert [(e.kind, e.duration_ns) for e in h.expand(200.0)] == \
        [(e.kind, e.duration_ns) for e in c.expand(200.0)]


def test_cpmg_pulse_spacing():
    seq = sequence_template("cpmg", 50.0, n_pulses=4)
    els = seq.expand(400.0)
    delays = [e.duration_ns for e in els if e.kind == "delay"]
    assert delays == pytest.approx([50.0] + [50.0, 50.0] * 3 + [50.0])
    assert seq.free_time(400.0) == pytest.approx(400.0)
    assert sum(1 for e in els if e.kind == "drive" and e.phase == Y) == 4


def test_wahuha_cycle_layout():
    seq = sequence_template("wahuha", 50.0, tau_ns=10.0, swept="cycles")
    els = seq.expand(1)
    drives = [e for e in els if e.kind == "drive"]
    assert len(drives) == 6
    assert [e.phase for e in drives[1:5]] == [MX, Y, MY, X]
    assert all(e.duration_ns == pytest.approx(5.0) for e in drives)
    delays = [e.duration_ns for e in els if e.kind == "delay"]
    assert delays == pytest.approx([10, 10, 20, 10, 10])
    by_time = sequence_template("wahuha", 50.0, tau_ns=10.0)
    assert len(by_time.expand(400.0)) == 2 + 5 * 9
    with pytest.raises(ConfigError):
        by_time.expand(100.0)


def test_template_errors():
    with pytest.raises(ConfigError):
        sequence_template("ramsey")
    with pytest.raises(InputError):
        sequence_template("cpmg", n_pulses=0)
    with pytest.raises(ConfigError):
        sequence_template("fid", swept="total_ns")


def test_unknown_sweep_identifier():
    seq = PulseSequence("x", (PulseElement("delay", sweep_scale=1.0),), "length_ns")
    with pytest.raises(ConfigError):
        seq.validate()
    with pytest.raises(ConfigError):
        run_sequence(seq, NoiseModel(), [1.0, 2.0], 1, 0)


@pytest.mark.parametrize("name,kw", [("rabi", {}), ("fid", {}), ("hahn", {"swept": "tau_ns"}),
                                     ("cpmg", {"n_pulses": 3}), ("wahuha", {"ideal_pulses": True})])
def test_sequence_text_roundtrip(name, kw):
    seq = sequence_template(name, 40.0, **kw)
    back = PulseSequence.from_text(seq.to_text())
    assert back == seq


def test_sequence_text_errors_carry_line_numbers():
    text = "name = fid\nswept = delay_ns\nelement.0 = delay duration_ns=abc\n"
    with pytest.raises(ConfigError, match="3"):
        PulseSequence.from_text(text)
    with pytest.raises(ConfigError, match="2"):
        PulseSequence.from_text("name = fid\nbogus = 1\n")


def test_grid_and_trajectory_validation():
    seq = sequence_template("fid")
    with pytest.raises(InputError):
        run_sequence(seq, NoiseModel(), [], 1, 0)
    with pytest.raises(InputError):
        run_sequence(seq, NoiseModel(), [1.0, 2.0], 0, 0)


def test_noise_model_validation():
    with pytest.raises(InputError):
        NoiseModel("pink")
    with pytest.raises(InputError):
        NoiseModel("ornstein_uhlenbeck", 1.0, 0.0)
    with pytest.raises(InputError):
        NoiseModel(sigma_mhz=-1.0)
    with pytest.raises(InputError):
        NoiseModel(t1_ns=0.0)


def test_substep_rule():
    ou = NoiseModel("ornstein_uhlenbeck", 1.0, 100.0)
    assert ou.substeps(1000.0, False) == 16
    assert ou.substeps(50.0, False) == 10  # h = tau_c / 20
    assert NoiseModel("quasi_static_gaussian", 1.0).substeps(500.0, False) == 1
    assert NoiseModel(t1_ns=10.0).substeps(5.0, True) == 16
