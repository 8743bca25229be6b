import json

import pytest

from mqft.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from mqft.experiment import (
    ConfigError,
    emit_records,
    oracle_check,
    parse_config,
    run_experiment,
    run_length_histogram,
    summary_text,
    trial_rng,
)

NOISY = """\
mode = noisy
profile = device
n_qubits = 64
n_trials = 12
master_seed = 7
stop_at_first_error = true
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- config parsing ------------------------------------------------------------


def test_parse_defaults_and_given():
    cfg = parse_config(NOISY)
    assert cfg.mode == "noisy" and cfg["n_qubits"] == 64 and cfg["M"] == 1
    assert cfg["stop_at_first_error"] is True
    assert "M" not in cfg.given
    noise = cfg.noise()
    assert noise.v == 0.98 and noise.m == 5


@pytest.mark.parametrize(
    "text, key",
    [
        ("mode = noisy\nbogus = 1\n", "bogus"),
        ("mode = noisy\nmode = ideal\n", "mode"),
        ("mode = weird\n", "mode"),
        ("n_qubits = 4\n", "mode"),
        ("mode = ideal\nn_qubits = 4\nn_trials = 2\n", "master_seed"),
        ("mode = ideal\nn_qubits = x\nn_trials = 2\nmaster_seed = 1\n", "n_qubits"),
        ("mode = ideal\nn_qubits = 5000\nn_trials = 2\nmaster_seed = 1\n", "n_qubits"),
        ("mode = majority\nn_qubits = 4\nn_trials = 2\nmaster_seed = 1\n", "M"),
        ("mode = noisy\nn_qubits = 4\nn_trials = 2\nmaster_seed = 1\nv = 1.5\n", "v"),
        ("mode = ideal\nn_qubits = 3\nn_trials = 2\nmaster_seed = 1\nphase_word = 0101\n", "phase_word"),
        ("mode = oracle-check\nn_qubits = 15\nmaster_seed = 1\n", "n_qubits"),
        ("mode = fringe\nmaster_seed = 1\nv_max = -1\n", "v_max"),
        ("mode = ideal\njust text\n", "line 2"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_echo_round_trip():
    cfg = parse_config(NOISY + "v = 0.99\nworkers = 3\n", {"out_dir": "/tmp/x"})
    echo = cfg.echo()
    assert "workers" not in echo and "out_dir" not in echo
    again = parse_config(echo)
    assert again.echo() == echo
    assert again.noise() == cfg.noise()


def test_summary_is_a_runnable_config():
    summary = run_experiment(parse_config(NOISY))
    text = summary_text(summary)
    assert text.startswith("# mqft run summary")
    assert "# p_hat_censored:" in text
    rerun = run_experiment(parse_config(text))
    assert summary_text(rerun) == text


def test_trial_rng_streams_are_independent_of_order():
    a = trial_rng(5, 3).random(4)
    trial_rng(5, 2).random(10)
    assert (trial_rng(5, 3).random(4) == a).all()
    assert (trial_rng(5, 4).random(4) != a).all()


def test_histogram_bins():
    rows = run_length_histogram([1, 10, 11, 25], 25, 10)
    assert rows == [(1, 2), (11, 1), (21, 1)]


# -- runs and files -------------------------------------------------------------


def test_run_writes_files(tmp_path, capsys):
    cfg = write(tmp_path, NOISY + "record_bits = true\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    lines = (out / "trials.jsonl").read_text().splitlines()
    assert len(lines) == 12
    first = json.loads(lines[0])
    assert first["index"] == 0 and {"run_length", "censored", "truth", "recovered"} <= set(first)
    hist = (out / "histogram.csv").read_text().splitlines()
    assert hist[0] == "bin,count"
    assert sum(int(r.split(",")[1]) for r in hist[1:]) == 12
    assert capsys.readouterr().out == (out / "summary.txt").read_text()


def test_workers_do_not_change_outputs(tmp_path):
    cfg = write(tmp_path, NOISY)
    outputs = []
    for workers in ("1", "3"):
        out = tmp_path / f"w{workers}"
        assert main(["run", str(cfg), "--out-dir", str(out), "--workers", workers]) == EXIT_OK
        outputs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outputs[0] == outputs[1]


def test_seed_flag_overrides(tmp_path):
    cfg = write(tmp_path, NOISY)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", str(cfg), "--out-dir", str(a), "--seed", "1"])
    main(["run", str(cfg), "--out-dir", str(b), "--seed", "2"])
    assert (a / "trials.jsonl").read_bytes() != (b / "trials.jsonl").read_bytes()
    assert "master_seed = 1" in (a / "summary.txt").read_text()


def test_fixed_phase_word_from_file(tmp_path):
    words = tmp_path / "words.txt"
    words.write_text("1011\n0110\n")
    text = f"mode = ideal\nn_qubits = 4\nn_trials = 4\nmaster_seed = 1\nrecord_bits = true\nphase_word = file:{words}\n"
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, text)), "--out-dir", str(out)]) == EXIT_OK
    truths = [json.loads(line)["truth"] for line in (out / "trials.jsonl").read_text().splitlines()]
    assert truths == ["1011", "0110", "1011", "0110"]


def test_majority_mode_reports_analytic(tmp_path):
    text = "mode = majority\nn_qubits = 32\nn_trials = 5\nmaster_seed = 2\nM = 3\np_override = 0.1\n"
    summary = run_experiment(parse_config(text))
    assert summary.results["p_majority_analytic"] == pytest.approx(0.028)


def test_fringe_mode(tmp_path):
    text = "mode = fringe\nprofile = device\nmaster_seed = 3\n"
    summary = run_experiment(parse_config(text))
    assert summary.passed
    assert summary.results["v_pi_fit"] == pytest.approx(5.80, rel=0.01)
    paths = emit_records(summary, tmp_path)
    assert (tmp_path / "fringe.csv").read_text().startswith("voltage,counts\n")
    assert len(paths) == 2


def test_census_mode():
    text = "mode = census\nprofile = device\nn_qubits = 64\nn_trials = 10\nmaster_seed = 4\ndac_digits = none\n"
    summary = run_experiment(parse_config(text))
    assert summary.results["rotations"] == 640
    assert summary.results["min_abs_cos_delta"] >= 0.9807


def test_oracle_check_function():
    worst = oracle_check(4, 3, 0)
    assert set(worst) == {1, 2, 3, 4}
    assert max(worst.values()) < 1e-12


# -- exit codes ---------------------------------------------------------------


def test_exit_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "mode = noisy\nbogus = 1\n")
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err


def test_exit_io_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_exit_io_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write(tmp_path, NOISY)
    assert main(["run", str(cfg), "--out-dir", str(blocker / "sub")]) == EXIT_IO


def test_exit_abort_fraction(tmp_path):
    text = (
        "mode = noisy\nn_qubits = 8\nn_trials = 5\nmaster_seed = 1\n"
        "mu = 0.0001\neta_det = 0.01\nretry_cap = 3\n"
    )
    assert main(["run", str(write(tmp_path, text)), "--out-dir", str(tmp_path / "o")]) == EXIT_ABORT
    rows = [json.loads(x) for x in (tmp_path / "o" / "trials.jsonl").read_text().splitlines()]
    assert all(r["aborted"] for r in rows)


def test_oracle_check_command(capsys):
    assert main(["oracle-check", "--n", "3", "--random-phases", "2"]) == EXIT_OK
    assert "max_total_variation" in capsys.readouterr().out


def test_bounds_command(capsys):
    args = ["bounds", "--kmax", "1024", "--nmax", "24", "--kmin", "23", "--nmin", "1", "--trials", "30"]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    p_max = float(next(line for line in out.splitlines() if line.startswith("# p_max")).split(":")[1])
    assert 3.8e-4 <= p_max <= 4.8e-4


def test_bounds_command_bad_counts():
    args = ["bounds", "--kmax", "10", "--nmax", "40", "--kmin", "3", "--nmin", "1", "--trials", "30"]
    assert main(args) == EXIT_CONFIG
