import json

import numpy as np
import pytest

from twotime.cli import main
from twotime.scenario import Scenario

SMALL = {"T1": 1.0, "T2": 1.0, "epsilon": 0.25, "e1e2": 1e-3, "n_endpoint_sets": 4, "n_trajectories": 2}


def write_config(tmp_path, **fields):
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(fields))
    return str(p)


def test_validate_free_names_single_convention(tmp_path):
    assert main(["validate-free", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validate_free.json").read_text())
    assert report["passing"] == ["eq29"] and report["selected"] == "eq29"
    assert report["scenario"] == Scenario(out=str(tmp_path)).to_dict()
    assert (tmp_path / "free_residual_eq29.tsv").exists()


def test_validate_free_refuses_coupling(tmp_path):
    cfg = write_config(tmp_path, e1e2=0.5)
    assert main(["validate-free", "--config", cfg, "--out", str(tmp_path)]) == 64


def test_validate_free_zero_tolerance(tmp_path):
    assert main(["validate-free", "--tol", "0", "--out", str(tmp_path)]) == 2


def test_validate_free_ambiguous_on_square_grid(tmp_path):
    cfg = write_config(tmp_path, T1=1.0, T2=1.0)
    assert main(["validate-free", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert json.loads((tmp_path / "validate_free.json").read_text())["passing"] == ["eq23", "eq29"]


def exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv", [["suite", "nonsense"], ["frobnicate"], ["suite", "kernel", "--sigma", "x"],
                                  ["validate-free", "--convention", "eq99"], []])
def test_usage_errors(tmp_path, argv):
    assert exit_code(argv + ["--out", str(tmp_path)] if argv else argv) == 64


def test_unknown_config_key(tmp_path):
    cfg = write_config(tmp_path, warp=9)
    assert main(["energy", "--config", cfg, "--out", str(tmp_path)]) == 64


def test_suite_hermiticity(tmp_path, capsys):
    assert main(["suite", "hermiticity", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS hermiticity.symmetric_p8_e0 value=0.0" in out
    summary = json.loads((tmp_path / "suite_hermiticity.json").read_text())
    assert summary["passed"] and all(c["passed"] for c in summary["criteria"])


def test_suite_energy(tmp_path):
    assert main(["suite", "energy", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "suite_energy.json").read_text())
    assert summary["details"]["W"] == pytest.approx(1.5, abs=1e-10)


def test_suite_kernel_table(tmp_path):
    main(["suite", "kernel", "--out", str(tmp_path)])
    table = np.loadtxt(tmp_path / "kernel_sigma_sweep.tsv")
    assert table.shape == (5, 3)
    assert np.all(np.diff(table[:, 2]) < 0)
    assert table[-1, 1] == pytest.approx(2.0, abs=1e-3)


def test_energy_command(tmp_path, capsys):
    assert main(["energy", "--out", str(tmp_path)]) == 0
    assert "W = 1.5" in capsys.readouterr().out


def test_solve_command(tmp_path):
    cfg = write_config(tmp_path, **SMALL)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "solve.json").read_text())
    assert rep["converged"]


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, sigma=0.5, seed=1)
    main(["suite", "hermiticity", "--config", cfg, "--sigma", "0.25", "--seed", "7", "--out", str(tmp_path)])
    sc = json.loads((tmp_path / "suite_hermiticity.json").read_text())["scenario"]
    assert sc["sigma"] == 0.25 and sc["seed"] == 7


def _payloads(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "metadata.json"}


def test_suite_solve_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, **SMALL)
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["suite", "solve", "--config", cfg, "--seed", "11", "--out", str(out)]) == 0
        runs.append(_payloads(out))
    assert runs[0].keys() == runs[1].keys() and len(runs[0]) >= 3
    a = {k: v.replace(b"/a", b"/X") for k, v in runs[0].items()}
    b = {k: v.replace(b"/b", b"/X") for k, v in runs[1].items()}
    assert a == b


def test_every_output_embeds_scenario(tmp_path):
    cfg = write_config(tmp_path, **SMALL)
    main(["suite", "solve", "--config", cfg, "--out", str(tmp_path / "o")])
    for p in (tmp_path / "o").iterdir():
        if p.name != "metadata.json":
            assert "scenario" in p.read_text()
