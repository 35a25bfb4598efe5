import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dare import io
from dare.envmodel import EnvironmentSpec, GroundTruth, LabeledDataset, gen_environments
from dare.solvers import LinearModel, dare_fit

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.lists(floats, min_size=3, max_size=3), min_size=1, max_size=4))
def test_matrix_round_trip_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("m") / "m.txt"
    M = np.array(rows)
    io.write_matrix(path, M)
    assert path.read_text().splitlines()[0] == f"d {M.shape[0]} 3"
    assert io.read_matrix(path).tobytes() == M.tobytes()


def test_matrix_header_without_prefix(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n1 2\n3 4\n")
    np.testing.assert_array_equal(io.read_matrix(p), [[1, 2], [3, 4]])


def test_matrix_parse_errors(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("d 2 2\n1 2\n3\n")
    with pytest.raises(io.DataParseError) as exc:
        io.read_matrix(p)
    assert exc.value.line == 3 and exc.value.field == "row 1"
    p.write_text("d 2 2\n1 2\n3 x\n")
    with pytest.raises(io.DataParseError):
        io.read_matrix(p)


@pytest.mark.parametrize("task", ["classify", "regress"])
def test_dataset_round_trip(tmp_path, task):
    rng = np.random.default_rng(0)
    specs = [EnvironmentSpec(np.eye(3), rng.standard_normal(3)) for _ in range(2)]
    data = gen_environments(specs, GroundTruth(np.ones(3)), 25, task, seed=1)
    io.save_datasets(tmp_path / "d.csv", data)
    back = io.load_datasets(tmp_path / "d.csv")
    assert [b.env_id for b in back] == ["0", "1"]
    for a, b in zip(data, back):
        assert a.X.tobytes() == b.X.tobytes()
        np.testing.assert_array_equal(a.y, b.y)
        assert b.task == task


def test_dataset_wrong_column_count_names_row(tmp_path):
    ds = LabeledDataset(np.arange(6.0).reshape(3, 2), [0, 1, 0])
    io.save_datasets(tmp_path / "d.csv", [ds])
    lines = (tmp_path / "d.csv").read_text().splitlines()
    lines[2] += ",9.0"
    (tmp_path / "d.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(io.DataParseError) as exc:
        io.load_datasets(tmp_path / "d.csv")
    assert exc.value.line == 3 and exc.value.field == "row 2"
    assert "d.csv:3" in str(exc.value)


def test_dataset_bad_label_and_missing_sidecar(tmp_path):
    ds = LabeledDataset(np.zeros((2, 1)), [0, 1])
    io.save_datasets(tmp_path / "d.csv", [ds])
    text = (tmp_path / "d.csv").read_text().replace("\n0,1,", "\n0,x,", 1)
    (tmp_path / "d.csv").write_text(text)
    with pytest.raises(io.DataParseError) as exc:
        io.load_datasets(tmp_path / "d.csv")
    assert exc.value.field == "y"
    (tmp_path / "d.csv.json").unlink()
    with pytest.raises(io.DataParseError):
        io.load_datasets(tmp_path / "d.csv")


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    model = LinearModel(rng.standard_normal((4, 3)), rng.standard_normal(3), "classify",
                        rng.standard_normal((4, 4)), "dare", lam=10.0,
                        convergence={"iters": 7, "grad_norm": 1e-9})
    io.save_model(tmp_path / "m.json", model)
    back = io.load_model(tmp_path / "m.json")
    assert back.beta.tobytes() == model.beta.tobytes()
    assert back.bias.tobytes() == model.bias.tobytes()
    assert back.test_whitener.tobytes() == model.test_whitener.tobytes()
    assert (back.method_tag, back.task, back.lam) == ("dare", "classify", 10.0)
    obj = json.loads((tmp_path / "m.json").read_text())
    assert set(obj) >= {"method_tag", "task", "beta", "bias", "test_whitener", "lambda",
                        "convergence"}


def test_fitted_model_round_trip(tmp_path):
    data = gen_environments([EnvironmentSpec(np.eye(2), np.zeros(2))] * 2, GroundTruth([1.0, 0.0]),
                            200, "regress", seed=0)
    model = dare_fit(data)
    io.save_model(tmp_path / "m.json", model)
    np.testing.assert_array_equal(io.load_model(tmp_path / "m.json").beta, model.beta)


def test_model_missing_key(tmp_path):
    (tmp_path / "m.json").write_text('{"task": "regress"}')
    with pytest.raises(io.DataParseError) as exc:
        io.load_model(tmp_path / "m.json")
    assert exc.value.field == "method_tag"


def test_long_csv_round_trip(tmp_path):
    rows = [("E=8", 0, "gap", 0.1 + 0.2), ("E=16", 3, "gap", 1e-300)]
    io.write_long_csv(tmp_path / "r.csv", rows)
    assert io.read_long_csv(tmp_path / "r.csv") == rows


def test_report_json_handles_numpy(tmp_path):
    io.write_json(tmp_path / "s.json", {"a": np.float64(0.1), "b": np.arange(2), "c": np.bool_(True),
                                        "d": float("nan")})
    assert io.read_json(tmp_path / "s.json") == {"a": 0.1, "b": [0, 1], "c": True, "d": "nan"}


def test_config_hash_stable_under_reordering():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})


def test_manifest_lists_outputs(tmp_path):
    (tmp_path / "x").mkdir()
    (tmp_path / "x" / "a.csv").write_text("1\n")
    (tmp_path / io.TIMING).write_text("{}\n")
    m = io.write_manifest(tmp_path, {"k": 1}, {"v": "0"}, {"x": True})
    files = {f["path"]: f["sha256"] for f in m["files"]}
    assert files == {"timing.json": None, "x/a.csv": io.sha256_file(tmp_path / "x" / "a.csv")}
