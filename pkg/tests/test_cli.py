import json
import math

import numpy as np
import pytest

from feedbeam import ConfigError, RandomStream, run_convergence
from feedbeam.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_UNKNOWN_COMMAND,
    EXIT_UNWRITABLE,
    ExperimentSpec,
    load_config,
    loads_config,
    main,
    serialize,
)
from feedbeam.config import NetworkConfig


def base_doc(**config_overrides):
    config = dict(
        M=1,
        N=100,
        P=100.0,
        N_o=1.0,
        T_f=50,
        k_o=10.0,
        epsilon_o=0.1,
        delta=0.5,
        seed=42,
        estimation_mode="perfect",
        trials=50,
    )
    config.update(config_overrides)
    return {"config": config}


def write_doc(tmp_path, doc, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------------------
# config loading


def test_round_trip(tmp_path):
    spec = ExperimentSpec(
        command="bounds",
        config=NetworkConfig(**base_doc()["config"]),
        sweep=(100, 200),
        output_path="out.json",
        format="json",
    )
    path = tmp_path / "spec.json"
    path.write_text(serialize(spec))
    assert load_config(str(path)) == spec


def test_minimal_config_accepted():
    doc = base_doc()
    doc["command"] = "convergence"
    spec = loads_config(json.dumps(doc))
    assert spec.config.N == 100
    assert spec.config.estimation_mode == "perfect"


def test_unknown_keys_rejected():
    doc = base_doc()
    doc["config"]["epsilon"] = 0.1  # typo for epsilon_o
    with pytest.raises(ConfigError, match="epsilon"):
        loads_config(json.dumps(doc))
    doc = base_doc()
    doc["outputs"] = "x.csv"
    with pytest.raises(ConfigError, match="outputs"):
        loads_config(json.dumps(doc))


def test_missing_physics_key_rejected():
    doc = base_doc()
    del doc["config"]["P"]
    with pytest.raises(ConfigError, match="P"):
        loads_config(json.dumps(doc))


def test_optional_keys_have_defaults():
    doc = base_doc()
    del doc["config"]["trials"]
    del doc["config"]["estimation_mode"]
    spec = loads_config(json.dumps(doc))
    assert spec.config.trials == 1
    assert spec.config.estimation_mode == "perfect"


def test_infeasible_epsilon_rejected_for_outage():
    doc = base_doc(epsilon_o=0.5)
    doc["command"] = "outage"
    with pytest.raises(ConfigError) as err:
        loads_config(json.dumps(doc))
    assert "epsilon_o" in str(err.value)
    assert "0.20036" in str(err.value) or "feasibility" in str(err.value)


def test_parse_error_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        loads_config('{"config": {,}}')


def test_sweep_validation():
    doc = base_doc()
    doc["command"] = "bounds"
    doc["sweep"] = [100, 0]
    with pytest.raises(ConfigError, match="sweep"):
        loads_config(json.dumps(doc))
    doc["sweep"] = [100, 200]
    assert loads_config(json.dumps(doc)).sweep == (100, 200)
    doc["command"] = "convergence"
    with pytest.raises(ConfigError, match="sweep"):
        loads_config(json.dumps(doc))


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_command_exit_code(tmp_path, capsys):
    path = write_doc(tmp_path, base_doc())
    code = main(["--config", path, "--command", "frobnicate"])
    assert code == EXIT_UNKNOWN_COMMAND
    assert json.loads(capsys.readouterr().err)["error"] == "unknown-command"


def test_invalid_config_exit_code(tmp_path, capsys):
    doc = base_doc(epsilon_o=0.5)
    doc["command"] = "outage"
    path = write_doc(tmp_path, doc)
    assert main(["--config", path]) == EXIT_CONFIG
    assert json.loads(capsys.readouterr().err)["error"] == "invalid-config"


def test_unwritable_path_exit_code(tmp_path, capsys):
    doc = base_doc(N=50, M=2, epsilon_o=0.05)
    doc["command"] = "bounds"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "no-such-dir" / "x.json")
    assert main(["--config", path, "--out", out]) == EXIT_UNWRITABLE
    assert json.loads(capsys.readouterr().err)["error"] == "unwritable-path"


# ---------------------------------------------------------------------------
# commands end to end


def test_bounds_command_values(tmp_path):
    doc = base_doc(N=200, M=2, epsilon_o=0.05, delta=0.5)
    doc["command"] = "bounds"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "bounds.json")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    report = json.loads(open(out).read())
    assert report["c_1"] == pytest.approx(0.1197, abs=2e-4)
    assert report["term3"] == pytest.approx(1.70e-3, abs=2e-5)
    assert report["N"] == 200


def test_bounds_sweep_csv(tmp_path):
    doc = base_doc(N=200, M=2, epsilon_o=0.05)
    doc["command"] = "bounds"
    doc["sweep"] = [100, 200, 400]
    doc["format"] = "csv"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "bounds.csv")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    lines = open(out).read().splitlines()
    assert lines[0].split(",")[:4] == ["N", "M", "epsilon_o", "delta"]
    assert len(lines) == 4


def test_markov_verify_with_explicit_channel(tmp_path):
    doc = base_doc(N=2, trials=5000)
    doc["command"] = "markov-verify"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "markov.csv")
    assert main(["--config", path, "--out", out, "--channel", "1,2"]) == EXIT_OK
    rows = [line.split(",") for line in open(out).read().splitlines()]
    assert rows[0] == ["state_code", "gain", "p_to_absorbing"]
    table = {int(r[0]): (float(r[1]), float(r[2])) for r in rows[1:]}
    assert table[0b00] == (-3.0, 0.25)  # all-reverse state jumps in one step
    assert table[0b11] == (3.0, 1.0)    # absorbing state


def test_markov_verify_json_simulation_agrees(tmp_path):
    doc = base_doc(N=3, trials=20_000)
    doc["command"] = "markov-verify"
    doc["format"] = "json"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "markov.json")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    report = json.loads(open(out).read())
    assert len(report["states"]) == 8
    for entry in report["expected_gain"]:
        assert abs(entry["simulated"] - entry["exact"]) <= 3 * entry["stderr"] + 1e-9


def test_convergence_command_matches_library_and_reaches_ceiling(tmp_path):
    doc = base_doc(N=100, M=1, trials=50, k_o=20.0)
    doc["command"] = "convergence"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "conv.csv")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    lines = open(out).read().splitlines()
    assert lines[0] == "trial,group,t,gain,aligned_count,accepted"
    cfg = NetworkConfig(**base_doc(N=100, M=1, trials=50, k_o=20.0)["config"])
    res = run_convergence(cfg, RandomStream(cfg.seed, "convergence"))
    assert len(lines) - 1 == cfg.trials * cfg.M * res.frames.size
    # mean gain at t = 10N clears 90% of the mean attainable amplitude
    gains_10n = np.array(
        [float(l.split(",")[3]) for l in lines[1:] if int(l.split(",")[2]) == 10 * cfg.N]
    )
    assert gains_10n.mean() >= 0.9 * res.abs_sum.mean()
    assert gains_10n.mean() == pytest.approx(res.gain[:, 0, 10 * cfg.N].mean(), rel=1e-12)


def test_outage_command_schema_and_modes(tmp_path):
    doc = base_doc(N=50, M=2, epsilon_o=0.05, trials=2000)
    doc["command"] = "outage"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "outage.csv")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    lines = open(out).read().splitlines()
    assert lines[0] == (
        "N,M,epsilon_o,delta,rate,trials,outage_empirical,stderr,"
        "bound_finite,bound_asymptotic,mode"
    )
    assert lines[1].endswith("idealized")
    out2 = str(tmp_path / "outage-trained.csv")
    doc2 = base_doc(N=50, M=2, epsilon_o=0.05, trials=500, k_o=5.0)
    doc2["command"] = "outage"
    path2 = write_doc(tmp_path, doc2, "spec2.json")
    assert main(["--config", path2, "--out", out2, "--mode", "trained"]) == EXIT_OK
    assert open(out2).read().splitlines()[1].endswith("trained")


def test_interference_probe_sweep(tmp_path):
    doc = base_doc(N=20, trials=300, k_o=4.0)
    doc["command"] = "interference-probe"
    doc["sweep"] = [20, 40]
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "probe.csv")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    lines = open(out).read().splitlines()
    assert lines[0] == "N,trials,mean_sq,control_sq,sample_mean,slope"
    assert len(lines) == 3


def test_protocol_compare_json(tmp_path):
    doc = base_doc(N=32, M=4, P=10.0, N_o=1.0, trials=128, k_o=4.0)
    doc["command"] = "protocol-compare"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "protocol.json")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    report = json.loads(open(out).read())
    assert report["sigma_source"] == "monte-carlo"
    assert report["modified_better"] is False
    assert len(report["sigma_per_link"]) == 4
    out2 = str(tmp_path / "protocol2.json")
    assert main(["--config", path, "--out", out2, "--sigma-source", "analytic"]) == EXIT_OK
    analytic = json.loads(open(out2).read())
    assert analytic["sigma_I2"] == pytest.approx(10.0 * 4 / 2)  # P * M / 2


def test_artifacts_are_byte_identical_across_reruns_and_workers(tmp_path):
    doc = base_doc(N=20, trials=600, k_o=4.0)
    doc["command"] = "interference-probe"
    path = write_doc(tmp_path, doc)
    outs = [str(tmp_path / f"probe{i}.csv") for i in range(3)]
    assert main(["--config", path, "--out", outs[0]]) == EXIT_OK
    assert main(["--config", path, "--out", outs[1]]) == EXIT_OK
    assert main(["--config", path, "--out", outs[2], "--workers", "2"]) == EXIT_OK
    blobs = [open(o, "rb").read() for o in outs]
    assert blobs[0] == blobs[1] == blobs[2]


def test_seed_override_changes_artifact(tmp_path):
    doc = base_doc(N=20, trials=200, k_o=4.0)
    doc["command"] = "interference-probe"
    path = write_doc(tmp_path, doc)
    out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main(["--config", path, "--out", out1]) == EXIT_OK
    assert main(["--config", path, "--out", out2, "--seed", "777"]) == EXIT_OK
    assert open(out1).read() != open(out2).read()


def test_command_flag_with_commandless_file(tmp_path):
    doc = base_doc(N=50, M=2, epsilon_o=0.05)
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "bounds.json")
    assert main(["--config", path, "--command", "bounds", "--out", out]) == EXIT_OK
    assert json.loads(open(out).read())["N"] == 50


def test_channel_flag_validation(tmp_path, capsys):
    doc = base_doc(N=3, trials=100)
    doc["command"] = "markov-verify"
    path = write_doc(tmp_path, doc)
    assert main(["--config", path, "--channel", "1,2"]) == EXIT_CONFIG
    assert main(["--config", path, "--channel", "1,x,3"]) == EXIT_CONFIG
    capsys.readouterr()


def test_csv_floats_round_trip_losslessly(tmp_path):
    doc = base_doc(N=50, M=2, epsilon_o=0.05)
    doc["command"] = "bounds"
    doc["format"] = "csv"
    path = write_doc(tmp_path, doc)
    out = str(tmp_path / "bounds.csv")
    assert main(["--config", path, "--out", out]) == EXIT_OK
    header, row = [l.split(",") for l in open(out).read().splitlines()]
    from feedbeam import outage_bound

    report = outage_bound(50, loads_config(json.dumps(doc)).config)
    for name, cell in zip(header, row):
        assert float(cell) == getattr(report, name if name != "mode" else "N")
