import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multichain.cli import dumps_json, main, seed_grid
from multichain.config import ConfigError, load_config, parse_config
from multichain.graded_space import SpectralOperator
from multichain.rmatrix import r_override

ROOT = Path(__file__).resolve().parents[1]

MODEL = """
[model]
m = {m}
n = {n}
multiplicities = {mult}
q_re = {q_re}
q_im = {q_im}
lift_convention = "{conv}"

[chain]
p0 = {p0}
homogeneous = true
"""


def write(tmp_path, body, name="run.toml", **kw):
    params = dict(m=2, n=0, mult="[2, 1]", q_re=0.62, q_im=0.21, conv="exchange", p0=3)
    params.update(kw)
    path = tmp_path / name
    path.write_text(MODEL.format(**params) + body)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# ------------------------------------------------------------------ exit codes


def test_check_passes_on_sample(capsys):
    code, out, _ = run(["check", "--config", str(ROOT / "configs" / "su21_check.toml")], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["passed"] is True
    names = [c["name"] for c in payload["checks"]]
    assert names == ["yang_baxter", "form_constraint", "regularity", "rtt", "transfer_commutativity", "hamiltonian_density"]


def test_check_fails_with_corrupted_r(tmp_path, capsys):
    cfg = write(tmp_path, "", m=1, n=1, mult="[1, 1]")

    def corrupt(R):
        E = R.entries.copy()
        E[1, 1] *= 1.5
        return SpectralOperator(R.factors, E)

    with r_override(corrupt):
        code, out, err = run(["check", "--config", cfg], capsys)
    assert code == 1
    assert "yang_baxter" in err
    failed = {c["name"] for c in json.loads(out)["checks"] if not c["passed"]}
    assert "yang_baxter" in failed


def test_diagonal_lift_with_multiplicity_fails_check(tmp_path, capsys):
    cfg = write(tmp_path, "", m=1, n=1, mult="[2, 1]", conv="diagonal")
    code, out, _ = run(["check", "--config", cfg], capsys)
    assert code == 1
    failed = {c["name"] for c in json.loads(out)["checks"] if not c["passed"]}
    assert {"yang_baxter", "rtt"} <= failed


def test_q_equal_one_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "", q_re=1.0, q_im=0.0)
    code, _, err = run(["check", "--config", cfg], capsys)
    assert code == 2
    assert "q**2 != 1" in err


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "\n[spectrum]\noperator = \"hamiltonian\"\ncolour = 3\n")
    code, _, err = run(["spectrum", "--config", cfg], capsys)
    assert code == 2
    assert "colour" in err


def test_dimension_cap_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "", m=2, n=1, mult="[2, 1, 3]", p0=6)
    code, _, err = run(["spectrum", "--config", cfg], capsys)
    assert code == 2
    assert "cap" in err


def test_missing_file_is_config_error(tmp_path, capsys):
    code, _, err = run(["check", "--config", str(tmp_path / "nope.toml")], capsys)
    assert code == 2
    assert err.startswith("config error")


# ------------------------------------------------------------------ spectrum


def test_spectrum_round_trip_is_byte_identical(tmp_path):
    cfg = str(ROOT / "configs" / "susy_spectrum.toml")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["spectrum", "--config", cfg, "--out", str(a)]) == 0
    assert main(["spectrum", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    payload = json.loads(a.read_text())
    assert len(payload["eigenvalues"]) == 27
    assert sum(d["count"] for d in payload["degeneracies"]) == 27
    meta = json.loads(Path(str(a) + ".meta.json").read_text())
    assert meta["command"] == "spectrum"


def test_transfer_spectrum(tmp_path, capsys):
    cfg = write(tmp_path, '\n[spectrum]\noperator = "transfer"\nmu = [0.3, 0.1]\n')
    code, out, _ = run(["spectrum", "--config", cfg], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["mu"] == {"re": 0.3, "im": 0.1}
    assert len(payload["eigenvalues"]) == 27


def test_multiplicity_raises_degeneracy(tmp_path, capsys):
    body = '\n[spectrum]\noperator = "hamiltonian"\n'
    counts = {}
    for mult in ("[1, 1]", "[2, 1]"):
        cfg = write(tmp_path, body, name=f"{mult[1]}.toml", m=1, n=1, mult=mult, conv="exchange")
        # fermionic multiplicity would also do; bosonic keeps the example small
        code, out, _ = run(["spectrum", "--config", cfg], capsys)
        assert code == 0
        counts[mult] = max(d["count"] for d in json.loads(out)["degeneracies"])
    assert counts["[2, 1]"] > counts["[1, 1]"]


# ------------------------------------------------------------------ bethe


def test_bethe_sample_matches_ed(capsys):
    code, out, _ = run(["bethe", "--config", str(ROOT / "configs" / "xxz_bethe.toml")], capsys)
    assert code == 0
    payload = json.loads(out)
    converged = [s for s in payload["solutions"] if s["converged"]]
    assert converged
    for s in converged:
        assert s["residual"] < 1e-10
        if s["duplicate_of"] is None:
            assert s["ed_match"] is not None and s["ed_match"]["deviation"] < 1e-8


def test_bethe_vacuum(tmp_path, capsys):
    cfg = write(tmp_path, "\n[bethe]\nmagnon_counts = [0]\n")
    code, out, _ = run(["bethe", "--config", cfg], capsys)
    assert code == 0
    (sol,) = json.loads(out)["solutions"]
    assert sol["converged"] and sol["iterations"] == 0
    assert sol["ed_match"]["deviation"] < 1e-12
    assert sol["energy"] == {"re": 0.0, "im": 0.0}


def test_bethe_collision_reported(tmp_path, capsys):
    body = "\n[bethe]\nmagnon_counts = [2]\nseeds = [[[[0.2, 0.1], [0.2, 0.1]]], [[[0.2, 0.1], [-0.5, 0.3]]]]\n"
    cfg = write(tmp_path, body, p0=4)
    code, out, _ = run(["bethe", "--config", cfg], capsys)
    first = json.loads(out)["solutions"][0]
    assert first["converged"] is False and first["reason"] == "collision"
    assert code in (0, 1)


def test_bethe_all_failing_exits_one(tmp_path, capsys):
    body = "\n[bethe]\nmagnon_counts = [1]\nseeds = [[[[0.9, 0.4]]]]\nmax_iter = 1\n"
    code, out, _ = run(["bethe", "--config", write(tmp_path, body, p0=4)], capsys)
    assert code == 1
    assert json.loads(out)["solutions"][0]["reason"] == "non-convergence"


def test_bethe_seed_grid_marks_duplicates(tmp_path, capsys):
    body = "\n[bethe]\nmagnon_counts = [1]\n"
    code, out, _ = run(["bethe", "--config", write(tmp_path, body, p0=3), "--seed-grid", "3"], capsys)
    assert code == 0
    sols = [s for s in json.loads(out)["solutions"] if s["converged"]]
    assert any(s["duplicate_of"] is not None for s in sols)


def test_bethe_without_seeds_is_config_error(tmp_path, capsys):
    code, _, err = run(["bethe", "--config", write(tmp_path, "\n[bethe]\nmagnon_counts = [1]\n")], capsys)
    assert code == 2 and "seeds" in err


def test_seed_grid_layout():
    seeds = seed_grid([2], 3)
    assert len(seeds) == 9
    assert all(len(s) == 1 and len(s[0]) == 2 for s in seeds)
    assert all(abs(v.imag) < math.pi / 2 for s in seeds for v in s[0])
    with pytest.raises(ConfigError):
        seed_grid([20], 3)


def test_bethe_output_deterministic(tmp_path):
    cfg = str(ROOT / "configs" / "xxz_bethe.toml")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["bethe", "--config", cfg, "--out", str(a)])
    main(["bethe", "--config", cfg, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    cfg = str(ROOT / "configs" / "su21_check.toml")
    proc = subprocess.run([sys.executable, "-m", "multichain", "check", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


# ------------------------------------------------------------------ config and JSON


def test_config_parses_inhomogeneous_chain():
    cfg = parse_config(
        {
            "model": {"m": 1, "n": 1, "multiplicities": [1, 1], "q_re": 0.5, "q_im": 0.0},
            "chain": {"p0": 2, "homogeneous": False, "inhomogeneities": [[0.1, 0.0], [0.0, 0.2]]},
        }
    )
    assert cfg.chain.inhomogeneities == (0.1 + 0j, 0.2j)


def test_config_rejects_bad_seed_shape():
    with pytest.raises(ConfigError):
        parse_config(
            {
                "model": {"m": 2, "n": 0, "multiplicities": [1, 1], "q_re": 0.5, "q_im": 0.0},
                "chain": {"p0": 3},
                "bethe": {"magnon_counts": [1], "seeds": [[[[0.1, 0.0], [0.2, 0.0]]]]},
            }
        )


def test_load_sample_configs():
    for path in (ROOT / "configs").glob("*.toml"):
        load_config(path)


finite = st.floats(allow_nan=False, allow_infinity=False)
json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | finite | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_dumps_json_round_trips(value):
    back = json.loads(dumps_json(value))
    assert back == value or (isinstance(value, float) and value == 0.0 and back == 0.0)


def test_dumps_json_folds_negative_zero():
    assert not dumps_json(-0.0).startswith("-")
    assert "-0" not in dumps_json({"x": -0.0})
    assert json.loads(dumps_json(np.float64(0.1))) == 0.1


def test_inadmissible_final_branch_is_config_error(tmp_path, capsys):
    body = "\n[bethe]\nmagnon_counts = [2]\nfinal_branch = 1\nseeds = [[[[0.2, 0.1], [-0.5, 0.3]]]]\n"
    cfg = write(tmp_path, body, m=1, n=1, mult="[1, 1]", p0=4)
    code, _, err = run(["bethe", "--config", cfg], capsys)
    assert code == 2 and "omega = 1" in err
