import copy
import json
import os

import numpy as np
import pytest

from axisymlab import (
    ConfigError,
    NumericalBlowupError,
    RunConfig,
    cli_main,
    load_config_file,
    run_from_config,
    signed_moment_experiment,
    sweep,
    validate_config_dict,
)


def base_doc(**overrides):
    doc = {
        "grid": {"nr": 24, "nz": 48, "r_max": 3.0, "z_min": -3.0, "z_max": 3.0},
        "nu": 1e-3,
        "tfinal": 0.04,
        "scheme": "xi_semilagrangian",
        "initial_condition": {
            "kind": "gaussian_ring", "r0": 1.0, "z0": 0.0, "sigma": 0.3, "amplitude": 1.0,
        },
        "p_list": [1.0, 2.0],
        "dt": 0.02,
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_validate_config_roundtrip():
    doc = base_doc()
    assert validate_config_dict(doc) is doc
    config = RunConfig.from_dict(doc)
    assert config.nu == 1e-3 and config.dt == 0.02
    assert config.sample_every == 1 and config.checkpoint_every == 0
    grid = config.build_grid()
    assert (grid.nr, grid.nz) == (24, 48)
    plan = config.time_step_plan()
    assert plan.scheme == "viscous" and plan.dt == 0.02


@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda d: d.update(surprise=1), "surprise"),
        (lambda d: d["grid"].update(hx=0.1), "hx"),
        (lambda d: d.pop("nu"), "nu"),
        (lambda d: d.update(nu=-0.1), "nu"),
        (lambda d: d.update(scheme="leapfrog"), "scheme"),
        (lambda d: d.update(p_list=[]), "p_list"),
        (lambda d: d.update(p_list=[0.5]), "p_list"),
        (lambda d: d.update(p_list=[1.0, float("inf")]), "p_list"),
        (lambda d: d["grid"].update(z_min=2.0, z_max=-2.0), "z_min"),
        (lambda d: d.update(theta=0.4), "theta"),
        (lambda d: d.update(cfl=1.5), "cfl"),
        (lambda d: d.update(tfinal=-1.0), "tfinal"),
        (lambda d: d["grid"].update(nr=2), "nr"),
        (lambda d: d.update(initial_condition={"sigma": 1.0}), "kind"),
    ],
)
def test_validate_config_rejections(mutate, needle):
    doc = copy.deepcopy(base_doc())
    mutate(doc)
    with pytest.raises(ConfigError) as err:
        validate_config_dict(doc)
    assert needle in str(err.value)


def test_validate_config_not_a_dict():
    with pytest.raises(ConfigError):
        validate_config_dict([1, 2, 3])


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config_file(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config_file(str(bad))


def test_run_from_config_outputs(tmp_path):
    out = tmp_path / "run"
    final, records = run_from_config(base_doc(), str(out))
    assert np.isclose(final.t, 0.04) and final.step_index == 2
    assert len(records) == 3  # steps 0, 1, 2 all sampled
    names = sorted(os.listdir(out))
    assert names == ["checkpoint_final.axf1", "config.json", "diagnostics.csv", "manifest.json"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["records"] == 3
    assert manifest["checkpoints"] == ["checkpoint_final.axf1"]
    assert manifest["ic_info"] == {}
    csv_lines = (out / "diagnostics.csv").read_text().strip().split("\n")
    assert len(csv_lines) == 4
    # stored config revalidates
    assert load_config_file(str(out / "config.json")) == base_doc()


def test_run_from_config_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_from_config(base_doc(), str(a))
    run_from_config(base_doc(), str(b))
    for name in sorted(os.listdir(a)):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_tfinal_zero_single_row(tmp_path):
    out = tmp_path / "frozen"
    final, records = run_from_config(base_doc(tfinal=0.0), str(out))
    assert final.t == 0.0 and len(records) == 1
    lines = (out / "diagnostics.csv").read_text().strip().split("\n")
    assert len(lines) == 2


def test_run_aborted_manifest(tmp_path):
    out = tmp_path / "boom"
    with pytest.raises(NumericalBlowupError):
        run_from_config(base_doc(blowup_limit=1e-12), str(out))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "aborted"
    assert "blowup" in manifest["error"]
    assert os.path.exists(out / "diagnostics.csv")
    assert not os.path.exists(out / "checkpoint_final.axf1")


def test_checkpoint_cadence_counts_sampling_events(tmp_path):
    out = tmp_path / "ck"
    doc = base_doc(tfinal=0.08, dt=0.01, sample_every=2, checkpoint_every=2)
    run_from_config(doc, str(out))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checkpoints"] == [
        "checkpoint_000004.axf1", "checkpoint_000008.axf1", "checkpoint_final.axf1",
    ]
    for name in manifest["checkpoints"]:
        assert os.path.exists(out / name)


def test_singular_ring_gate_through_config(tmp_path):
    ic = {"kind": "singular_ring", "r0": 1.0, "z0": 0.0, "alpha": 1.9,
          "cutoff": 0.5, "amplitude": 1.0}
    ok = base_doc(tfinal=0.0, initial_condition=ic, p_list=[1.5])
    final, _ = run_from_config(ok, str(tmp_path / "ok"))
    assert np.max(final.xi.values) > 0.0
    bad_alpha = dict(ic, alpha=2.1)
    with pytest.raises(ConfigError, match="alpha"):
        run_from_config(base_doc(tfinal=0.0, initial_condition=bad_alpha,
                                 p_list=[1.5]), str(tmp_path / "bad"))
    # the same alpha dies against a stricter monitored exponent
    with pytest.raises(ConfigError, match="alpha"):
        run_from_config(base_doc(tfinal=0.0, initial_condition=ic,
                                 p_list=[2.0]), str(tmp_path / "bad2"))


def test_checkpoint_restart_through_config(tmp_path):
    first = tmp_path / "first"
    final, _ = run_from_config(base_doc(), str(first))
    restart_doc = base_doc(
        initial_condition={"kind": "checkpoint", "path": str(first / "checkpoint_final.axf1")},
        tfinal=0.0,
    )
    state, _ = run_from_config(restart_doc, str(tmp_path / "second"))
    assert np.array_equal(state.xi.values, final.xi.values)
    manifest = json.loads((tmp_path / "second" / "manifest.json").read_text())
    assert manifest["ic_info"]["restart_t"] == pytest.approx(0.04)
    mismatched = base_doc(
        grid={"nr": 16, "nz": 32, "r_max": 3.0, "z_min": -3.0, "z_max": 3.0},
        initial_condition={"kind": "checkpoint", "path": str(first / "checkpoint_final.axf1")},
        tfinal=0.0,
    )
    with pytest.raises(ConfigError, match="does not match"):
        run_from_config(mismatched, str(tmp_path / "third"))


def test_cli_run_and_diag(tmp_path, capsys):
    config = write_config(tmp_path, base_doc())
    out = str(tmp_path / "run")
    assert cli_main(["run", "--config", config, "--out", out]) == 0
    summary = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert summary == {"out": out, "records": 3, "steps": 2, "t_final": 0.04}
    ckpt = os.path.join(out, "checkpoint_final.axf1")
    assert cli_main(["diag", "--checkpoint", ckpt]) == 0
    row = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert row["t"] == pytest.approx(0.04)
    assert set(row["lp_norms"]) == {"1", "2", "3"}
    assert cli_main(["diag", "--checkpoint", str(tmp_path / "nope.axf1")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_exit_code_validation(tmp_path, capsys):
    assert cli_main(["run", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err
    # argparse problems are validation errors, not tracebacks
    assert cli_main(["run"]) == 1
    assert cli_main(["bogus"]) == 1
    capsys.readouterr()


def test_cli_exit_code_numerical(tmp_path, capsys):
    config = write_config(tmp_path, base_doc(blowup_limit=1e-12))
    assert cli_main(["run", "--config", config, "--out", str(tmp_path / "o")]) == 2
    assert "numerical failure:" in capsys.readouterr().err


def test_cli_verify_ineq(tmp_path, capsys):
    out = str(tmp_path / "ineq")
    assert cli_main(["verify", "ineq", "--suite", "nash", "--samples", "5",
                     "--seed", "3", "--out", out]) == 0
    printed = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    on_disk = json.loads((tmp_path / "ineq" / "ineq_nash.json").read_text())
    assert printed == on_disk
    assert on_disk["samples"] == 5 and on_disk["empirical_sup"] > 0.0
    # ap scan floor: tiny sample counts are a validation error
    assert cli_main(["verify", "ineq", "--suite", "ap", "--samples", "50",
                     "--out", out]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_renorm_check(tmp_path, capsys):
    config = write_config(tmp_path, base_doc())
    run_dir = str(tmp_path / "run")
    assert cli_main(["run", "--config", config, "--out", run_dir]) == 0
    capsys.readouterr()
    assert cli_main(["renorm-check", "--run", run_dir, "--beta", "quadratic_clip",
                     "--tests", "4"]) == 0
    report = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert list(report["residuals"]) == ["quadratic_clip"]
    assert np.isfinite(report["residuals"]["quadratic_clip"])
    assert os.path.exists(os.path.join(run_dir, "renorm_report.json"))
    assert cli_main(["renorm-check", "--run", run_dir, "--beta", "nope"]) == 1
    assert cli_main(["renorm-check", "--run", str(tmp_path / "empty")]) == 1
    frozen_cfg = write_config(tmp_path, base_doc(tfinal=0.0), name="frozen.json")
    frozen_dir = str(tmp_path / "frozen")
    assert cli_main(["run", "--config", frozen_cfg, "--out", frozen_dir]) == 0
    assert cli_main(["renorm-check", "--run", frozen_dir]) == 1
    capsys.readouterr()


def sweep_doc():
    return base_doc(
        grid={"nr": 16, "nz": 32, "r_max": 3.0, "z_min": -3.0, "z_max": 3.0},
        tfinal=0.02, dt=0.01,
    )


def test_sweep_aggregation(tmp_path):
    nus = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
    result = sweep(sweep_doc(), nus, str(tmp_path / "sweep"))
    assert result.nus == nus
    assert len(result.pairwise) == 3
    for (a, b), gaps in result.pairwise.items():
        assert a > b and len(gaps) == len(result.pairwise_times)
        assert all(g >= 0.0 for g in gaps)
    assert len(result.deficit_table) == 4 * len(result.sample_times)
    assert result.bound_constant >= 0.0
    summary = json.loads((tmp_path / "sweep" / "sweep_summary.json").read_text())
    assert summary["status"] == "completed"
    assert sorted(os.listdir(tmp_path / "sweep")) == [
        "nu_0.00125", "nu_0.0025", "nu_0.005", "nu_0.01", "sweep_summary.json",
    ]


def test_sweep_validation(tmp_path):
    out = str(tmp_path / "s")
    with pytest.raises(ConfigError, match="at least 4"):
        sweep(sweep_doc(), [1e-2, 5e-3], out)
    with pytest.raises(ConfigError, match="decreasing"):
        sweep(sweep_doc(), [1e-2, 5e-3, 5e-3, 1e-3], out)
    doc = sweep_doc()
    doc.pop("dt")
    with pytest.raises(ConfigError, match="dt"):
        sweep(doc, [1e-2, 5e-3, 2.5e-3, 1.25e-3], out)
    with pytest.raises(ConfigError, match="p > 3/2"):
        sweep(sweep_doc(), [1e-2, 5e-3, 2.5e-3, 1.25e-3], out, bound_p=1.2)


def test_cli_sweep_bad_nus(tmp_path, capsys):
    config = write_config(tmp_path, sweep_doc())
    assert cli_main(["sweep", "--config", config, "--nus", "a,b,c,d",
                     "--out", str(tmp_path / "s")]) == 1
    assert "comma-separated" in capsys.readouterr().err


def test_signed_moment_experiment_smoke():
    out = signed_moment_experiment(
        grid_doc={"nr": 24, "nz": 48, "r_max": 3.0, "z_min": -3.0, "z_max": 3.0},
        nu=1e-3, tfinal=0.02, dt=0.01, sample_every=1,
    )
    assert out["base_moment"] > 0.0
    ratios = [row["moment_ratio"] for row in out["trajectory"]]
    assert ratios[0] == pytest.approx(1.0)
    assert all(np.isfinite(v) for v in ratios)
