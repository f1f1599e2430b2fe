import io
import json
import subprocess
import sys

import pytest

from hocoulomb.cli import format_value, main
from hocoulomb.tensor_store import import_store


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_format_value_roundtrips():
    assert format_value(0.7978845608028654) == "7.9788456080286541e-1"
    assert format_value(0.0) == "0"
    for x in (1e-300, -3.14159, 123456789.123):
        assert float(format_value(x)) == x


def test_element_ground_state():
    code, out = run("element", *["0"] * 12)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "7.9788456080286541e-1"
    assert "selection rule: allowed" in out
    assert "exact: 1 * sqrt(2/pi) / a" in out


def test_element_parity_zero():
    code, out = run("element", "1", *["0"] * 11)
    assert code == 0
    assert out.splitlines()[0] == "0"
    assert "vanishes (x odd)" in out


def test_element_radicand_and_scale():
    code, out = run("element", *"0 0 0 0 0 0 0 0 0 2 0 0".split(), "--a", "2")
    assert code == 0
    assert "exact: -1/12 * sqrt(2) * sqrt(2/pi) / a" in out
    assert float(out.splitlines()[0]) == pytest.approx(-(2 ** 0.5) / 12 * 0.7978845608028654 / 2)


def test_element_float_backend_env(monkeypatch):
    monkeypatch.setenv("HOCOULOMB_BACKEND", "float")
    code, out = run("element", "1", "0", "0", *["0"] * 6, "1", "0", "0")
    assert code == 0
    assert "exact:" not in out
    assert float(out.splitlines()[0]) == pytest.approx(0.6649038006690536, rel=1e-12)


@pytest.mark.parametrize("argv", [
    ["element", "1", "2"],
    ["element", *["0"] * 11, "-1"],
    ["element", *["0"] * 12, "--a", "0"],
    ["tensor", "--shells", "1", "--n-max", "1", "--out", "x.bin"],
    ["tensor", "--out", "x.bin"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _ = run(*argv)
    assert code == 2


def test_tensor_shells_one(tmp_path):
    path = tmp_path / "t.bin"
    code, out = run("tensor", "--shells", "1", "--out", str(path))
    assert code == 0
    assert "count=16 " in out
    assert import_store(path).count == 16


def test_tensor_strategies_same_digest(tmp_path):
    digests = []
    for strategy in ("direct", "recurrence"):
        code, out = run("tensor", "--shells", "2", "--strategy", strategy,
                        "--out", str(tmp_path / f"{strategy}.bin"))
        assert code == 0
        digests.append(out.split("digest=")[1].split()[0])
    assert digests[0] == digests[1]
    assert (tmp_path / "direct.bin").read_bytes() == (tmp_path / "recurrence.bin").read_bytes()


def test_tensor_format_from_extension(tmp_path):
    path = tmp_path / "t.json"
    assert run("tensor", "--n-max", "1", "--out", str(path))[0] == 0
    assert json.loads(path.read_text())["header"]["format"] == "OSCV"


def test_tensor_refuses_large(tmp_path):
    code, _ = run("tensor", "--shells", "5", "--max-keys", "10", "--out", str(tmp_path / "t.bin"))
    assert code == 2


def test_validate_passes_small():
    code, out = run("validate", "--shells", "1")
    assert code == 0
    assert out.strip().endswith("PASS")
    assert " zero" in out


def test_validate_quiet_summary_only():
    code, out = run("validate", "--n-max", "1", "--quiet")
    assert code == 0
    assert len(out.splitlines()) == 1 and "exact_zero_matches=" in out


def test_validate_negative_control(monkeypatch, capsys):
    from hocoulomb import validation
    from hocoulomb.closed_form import element_direct

    flipped = (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0)

    def sign_flip(key, a):
        v = element_direct(key, a).value
        return -v if tuple(key) == flipped else v

    report = validation.validate(validation.BasisCutoff(1, "shell"), evaluator=sign_flip)
    assert not report.passed
    assert [r.key for r in report.failures] == [flipped]

    monkeypatch.setattr(
        "hocoulomb.cli.validate",
        lambda cutoff, a, spec, threshold: validation.validate(cutoff, a, spec, threshold, sign_flip),
    )
    code, _ = run("validate", "--shells", "1", "--quiet")
    assert code == 1
    assert "FAIL key=(0, 0, 0" in capsys.readouterr().err


def test_bench_json():
    code, out = run("bench", "--n-max", "0", "--repetitions", "1", "--json")
    assert code == 0
    doc = json.loads(out)
    assert {"direct_ns", "recurrence_ns", "ratio"} <= doc.keys()
    assert doc["entries"] == 1


def test_bench_text_and_limit():
    code, out = run("bench", "--n-max", "3", "--repetitions", "1")
    assert code == 0 and "speedup=" in out
    assert run("bench", "--n-max", "40")[0] == 2


def test_audit_output():
    code, out = run("audit", "--max-index", "6", "--samples", "4")
    assert code == 0
    assert "first_failure=none" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hocoulomb", "element", *["0"] * 12],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "7.9788456080286541e-1"


def test_deterministic_output(tmp_path):
    first = run("validate", "--shells", "1")[1]
    second = run("validate", "--shells", "1")[1]
    assert first == second
