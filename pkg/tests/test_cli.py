import subprocess
import sys

import numpy as np
import pytest

from qudit_bell.analyzer import AnalyzerReport
from qudit_bell.cli import main, parse_state_spec, read_config
from qudit_bell.fock import SparseState, load_state


def head(out: str) -> dict:
    return dict(item.split("=", 1) for item in out.splitlines()[0].split())


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["gate", "ns"], 0.25),
        (["gate", "csign"], 1 / 16),
        (["gate", "csign", "--backend", "teleported", "--n", "2"], 4 / 9),
        (["gate", "csign", "--backend", "teleported:1"], 0.25),
        (["gate", "cswap", "--backend", "basic"], 1 / 16),
        (["gate", "cshift", "--d", "2", "--backend", "ideal"], 1.0),
    ],
)
def test_gate_exact(capsys, argv, expected):
    assert main(argv) == 0
    rec = head(capsys.readouterr().out)
    assert rec["invariants_ok"] == "true"
    assert float(rec["success_probability"]) == pytest.approx(expected, abs=1e-9)
    assert float(rec["total_probability"]) == pytest.approx(1, abs=1e-9)


def test_gate_sample_is_reproducible(capsys):
    assert main(["gate", "csign", "--sample", "4000", "--seed", "3"]) == 0
    first = capsys.readouterr().out
    assert main(["gate", "csign", "--sample", "4000", "--seed", "3"]) == 0
    assert capsys.readouterr().out == first
    assert head(first)["mode"] == "sample"


def test_gate_custom_input_and_dump(tmp_path, capsys):
    dump = tmp_path / "out.txt"
    assert main(["gate", "csign", "--input", "1,1:1;0,1:1j", "--dump-state", str(dump)]) == 0
    state = load_state(dump.read_text())
    expected = SparseState(2, {(1, 1): -1, (0, 1): 1j}).normalized()
    assert abs(abs(sum(np.conj(state.amplitude(k)) * v for k, v in expected.terms.items())) - 1) < 1e-9
    assert "record=branch" in capsys.readouterr().out


def test_gate_input_wrong_width():
    with pytest.raises(SystemExit):
        main(["gate", "csign", "--input", "1,0,0:1"])


def test_analyze_writes_report_and_csv(tmp_path, capsys):
    rep, csv = tmp_path / "r.txt", tmp_path / "c.csv"
    assert main(["analyze", "--d", "2", "--report", str(rep), "--csv", str(csv)]) == 0
    report = AnalyzerReport.from_text(rep.read_text())
    assert report.zero_confusion
    assert capsys.readouterr().out == rep.read_text()
    assert csv.read_text().startswith("input,0_0,0_1,1_0,1_1\n")


def test_analyze_sampled(capsys):
    assert main(["analyze", "--d", "2", "--backend", "teleported:1", "--sample", "500", "--seed", "1"]) == 0
    rec = head(capsys.readouterr().out)
    assert rec["mode"] == "sample" and rec["trials"] == "500"


def test_config_file_with_cli_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# analyzer run\nd = 3\nbackend = ideal\nmax-swaps = 3\n")
    assert read_config(str(cfg)) == {"d": 3, "backend": "ideal", "max_swaps": 3}
    assert main(["--config", str(cfg), "analyze", "--d", "2"]) == 0
    rec = head(capsys.readouterr().out)
    assert rec["d"] == "2" and rec["backend"] == "ideal"


def test_network_search(capsys):
    assert main(["network", "search", "--d", "3", "--max-swaps", "3"]) == 0
    assert "found=false" in capsys.readouterr().out
    assert main(["network", "search", "--d", "3", "--max-swaps", "4"]) == 0
    out = capsys.readouterr().out
    assert "found=true swaps=4" in out
    assert out.count("CSWAP") == 4


def test_decompose(tmp_path, capsys):
    path = tmp_path / "u.txt"
    path.write_text("0.70710678118654752 -0.70710678118654752\n0.70710678118654752 0.70710678118654752\n")
    assert main(["decompose", "--unitary", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# d=2 splitters=1")


def test_decompose_rejects_non_unitary(tmp_path, capsys):
    path = tmp_path / "u.txt"
    path.write_text("1 1\n0 1\n")
    assert main(["decompose", "--unitary", str(path)]) == 2
    assert "not unitary" in capsys.readouterr().err


def test_budget_error_exit_code(capsys):
    assert main(["analyze", "--d", "5", "--network", "searched"]) == 2
    assert "error:" in capsys.readouterr().err


def test_parse_state_spec():
    s = parse_state_spec("1,0:1;0,1:-1j")
    assert s.allclose(SparseState(2, {(1, 0): 2**-0.5, (0, 1): -1j * 2**-0.5}))
    assert parse_state_spec("2").terms == {(2,): 1}
    with pytest.raises(ValueError):
        parse_state_spec("1,0:1;1:1")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qudit_bell", "gate", "ns"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "invariants_ok=true" in proc.stdout
