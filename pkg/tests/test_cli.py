import io
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from garnetspin.cli import EXIT_IO, EXIT_NONCONVERGED, EXIT_OK, EXIT_VALIDATION, run
from garnetspin.crystal import FieldSpec, GTensor
from garnetspin.signals import parse_table, read_signal
from garnetspin.spectrum import transition_frequencies

DATA = resources.files("garnetspin").joinpath("data")


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def data_rows(text):
    _, _, names, data = parse_table(text)
    return names, data


def test_spectrum_summary_lists_sites_and_groups():
    code, out, err = call("spectrum", "--config", str(DATA / "spectrum.ini"))
    assert code == EXIT_OK
    for i in range(1, 7):
        assert f"site {i}:" in err
    assert "394.834 MHz x1" in err and "811.362 MHz x1" in err
    assert "954.056 MHz x4 (sites 3 4 5 6)" in err
    names, data = data_rows(out)
    assert names[0] == "frequency_mhz" and data.shape == (1001, 2)
    assert "# config.spectrum.field_gauss=310.0" in out


def test_zeeman_single_point_matches_spectrum(tmp_path):
    cfg = write(tmp_path, "z.ini", "[zeeman]\nb_start_gauss = 310\nb_points = 1\n")
    code, out, _ = call("zeeman", "--config", cfg)
    assert code == EXIT_OK
    names, data = data_rows(out)
    assert names == ["field_gauss"] + [f"site{i}_mhz" for i in range(1, 7)]
    expect = [ln.frequency for ln in transition_frequencies(FieldSpec.along(310, [1, 1, 0]), GTensor())]
    assert np.allclose(data[0, 1:], expect, rtol=1e-12)


def test_zeeman_reversed_direction_gives_same_data(tmp_path):
    a = write(tmp_path, "a.ini", "[zeeman]\ndirection = 1 1 0\n")
    b = write(tmp_path, "b.ini", "[zeeman]\ndirection = -1 -1 0\n")
    _, out_a, err_a = call("zeeman", "--config", a)
    _, out_b, err_b = call("zeeman", "--config", b)
    assert np.array_equal(data_rows(out_a)[1], data_rows(out_b)[1])
    assert err_a == err_b
    assert "2.61730" in err_a and "1.27366" in err_a and "3.07760" in err_a


def test_zeeman_rejects_zero_direction(tmp_path):
    cfg = write(tmp_path, "z.ini", "[zeeman]\ndirection = 0 0 0\n")
    code, _, err = call("zeeman", "--config", cfg)
    assert code == EXIT_VALIDATION and "nonzero" in err


def test_pump_ideal_and_nonideal():
    code, out, err = call("pump", "--config", str(DATA / "pump_ideal.ini"))
    assert code == EXIT_OK
    assert "steady-state polarization: 0.997001" in err
    code, out, err = call("pump", "--config", str(DATA / "pump_nonideal.ini"))
    meta, _, names, data = parse_table(out)
    assert abs(float(meta["final_polarization"]) - 0.115) < 0.005
    assert data.shape[0] == 500 and data[0, 0] == 1


def test_simulate_requires_seed(tmp_path):
    cfg = write(tmp_path, "s.ini", "[simulate]\nn_trajectories = 10\n")
    code, out, err = call("simulate", "--config", cfg)
    assert code == EXIT_VALIDATION and "seed" in err and out == ""
    assert call("simulate", "--config", cfg, "--seed", "1")[0] == EXIT_OK


def test_simulate_rabi_feeds_fit(tmp_path):
    cfg = write(tmp_path, "r.ini", """[run]
seed = 0
[simulate]
sequence = rabi
noise = none
t1_ns = inf
rabi_mhz = 12.5
n_trajectories = 1
sweep_start = 0
sweep_stop = 400
sweep_points = 201
""")
    csv = str(tmp_path / "rabi.csv")
    code, out, _ = call("simulate", "--config", cfg, "--out", csv)
    assert code == EXIT_OK and "201 points" in out
    fitcfg = write(tmp_path, "f.ini", """[fit]
model = exp_cosine
guess_tau_ns = 1e12
guess_f_mhz = 12
fixed = tau
""")
    code, text, _ = call("fit", csv, "--config", fitcfg)
    assert code == EXIT_OK
    fields = dict(line.split("=", 1) for line in text.splitlines())
    assert float(fields["f"]) == pytest.approx(12.5, abs=1e-6)
    assert abs(float(fields["A"])) == pytest.approx(0.5, abs=1e-6)


def test_simulate_analytic_column(tmp_path):
    cfg = write(tmp_path, "h.ini", "[run]\nseed = 3\n[simulate]\nsequence = hahn\n"
                                   "n_trajectories = 200\nsweep_points = 9\n")
    code, out, _ = call("simulate", "--config", cfg)
    sig = read_signal(out)
    assert "analytic" in sig.extras
    assert sig.extras["analytic"][0] == pytest.approx(1.0)
    assert np.all(np.diff(sig.extras["analytic"]) <= 0)
    assert np.max(np.abs(sig.y - sig.extras["analytic"])) < 0.1


def test_cluster_pair_matches_reference():
    code, out, _ = call("cluster", "--config", str(DATA / "cluster_pair.ini"))
    assert code == EXIT_OK
    ref = read_signal(str(DATA / "pair_fid_reference.csv"))
    sig = read_signal(out)
    assert np.array_equal(sig.x, ref.x)
    assert np.max(np.abs(sig.y - ref.y)) < 1e-8


def test_cluster_zero_couplings_flat(tmp_path):
    write(tmp_path, "zero.txt", "n_spins = 3\ncoupling.0 = 0 0 0\ncoupling.1 = 0 0 0\n"
                                "coupling.2 = 0 0 0\n")
    cfg = write(tmp_path, "c.ini", "[run]\nseed = 1\n[cluster]\nsource = file\n"
                                   "cluster_file = zero.txt\nsequence = hahn\nideal_pulses = true\n")
    code, out, _ = call("cluster", "--config", cfg)
    assert code == EXIT_OK
    assert np.allclose(read_signal(out).y, 1.0, atol=1e-12)


def test_cluster_rejects_ten_spins(tmp_path):
    cfg = write(tmp_path, "c.ini", "[run]\nseed = 1\n[cluster]\nn_spins = 10\n")
    code, _, err = call("cluster", "--config", cfg)
    assert code == EXIT_VALIDATION and "9" in err


def test_fit_shipped_hahn_data():
    code, text, err = call("fit", "--config", str(DATA / "fit_hahn.ini"), "--csv")
    assert code == EXIT_OK
    header, row = text.splitlines()
    fields = dict(zip(header.split(","), row.split(",")))
    assert float(fields["tau"]) == pytest.approx(194.0, rel=0.03)


def test_fit_constant_data_does_not_converge(tmp_path):
    csv = write(tmp_path, "flat.csv", "t_ns,y\n" + "".join(f"{i},0.5\n" for i in range(20)))
    code, _, err = call("fit", csv)
    assert code == EXIT_NONCONVERGED and "did not converge" in err


def test_fit_malformed_csv_names_line(tmp_path):
    csv = write(tmp_path, "bad.csv", "t_ns,y\n0,1\n1,0.5,3\n")
    code, _, err = call("fit", csv)
    assert code == EXIT_VALIDATION and "bad.csv:3" in err


def test_fit_missing_file(tmp_path):
    code, _, err = call("fit", str(tmp_path / "nope.csv"))
    assert code == EXIT_IO


def test_bad_config_line_reported(tmp_path):
    cfg = write(tmp_path, "x.ini", "[pump]\nn_pulses = 5\nbogus = 1\n")
    code, _, err = call("pump", "--config", cfg)
    assert code == EXIT_VALIDATION and "x.ini:3" in err


def test_missing_config_is_io_error(tmp_path):
    assert call("pump", "--config", str(tmp_path / "none.ini"))[0] == EXIT_IO


@pytest.mark.parametrize("argv", [
    ["spectrum", "--config", str(DATA / "spectrum.ini")],
    ["pump", "--config", str(DATA / "pump_nonideal.ini")],
    ["cluster", "--config", str(DATA / "cluster_demo_wahuha.ini")],
    ["simulate", "--seed", "5", "--threads", "1"],
])
def test_reruns_are_byte_identical(argv, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(*argv, "--out", str(a))[0] == EXIT_OK
    assert call(*argv, "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_thread_count_does_not_change_output(tmp_path):
    cfg = write(tmp_path, "s.ini", "[run]\nseed = 9\n[simulate]\nsequence = fid\n"
                                   "n_trajectories = 300\nsweep_stop = 160\nsweep_points = 17\n")
    one = call("simulate", "--config", cfg, "--threads", "1")[1]
    four = call("simulate", "--config", cfg, "--threads", "4")[1]
    assert one.replace("config.run.threads=1", "") == four.replace("config.run.threads=4", "")


def test_console_entry_point(tmp_path):
    out = tmp_path / "p.csv"
    proc = subprocess.run([sys.executable, "-m", "garnetspin.cli", "pump", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "steady-state polarization" in proc.stdout
    assert out.read_text().startswith("#")
