import json

import numpy as np
import pytest

from mcstfa.fileio import (
    InputError,
    load_model,
    read_labels,
    read_matrix_csv,
    save_model,
    write_labels,
    write_matrix_csv,
)
from mcstfa.model import mixture_log_density
from mcstfa.simulate import benchmark_spec, simulate


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_header_detection(tmp_path):
    dm = read_matrix_csv(write(tmp_path, "a,b\n1,2\n3,4.5\n"))
    assert dm.column_names == ("a", "b")
    np.testing.assert_array_equal(dm.values, [[1, 2], [3, 4.5]])
    dm = read_matrix_csv(write(tmp_path, "1,2\n-3e2,4\n"))
    assert dm.column_names is None and dm.rows == 2


@pytest.mark.parametrize(
    "text,where",
    [
        ("a,b\n1,2\n3\n", "row 3"),
        ("1,2\n3,NA\n", "row 2, column 2"),
        ("1,2\n,4\n", "row 2, column 1"),
        ("1,2\n3,x\n", "row 2, column 2"),
        ("1,inf\n", "row 1, column 2"),
        ("x,y\n", "no data"),
    ],
)
def test_bad_csv_names_the_spot(tmp_path, text, where):
    with pytest.raises(InputError, match=where):
        read_matrix_csv(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_matrix_csv(tmp_path / "nope.csv")


def test_matrix_round_trip_is_exact(tmp_path):
    vals = np.random.default_rng(0).standard_normal((7, 3)) * 1e3
    write_matrix_csv(tmp_path / "m.csv", vals)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv").values, vals)


def test_labels(tmp_path):
    write_labels(tmp_path / "l.csv", ["A", "B", 3])
    assert read_labels(tmp_path / "l.csv") == ["A", "B", "3"]
    assert read_labels(write(tmp_path, "1\n2\n1\n", "k.csv")) == ["1", "2", "1"]
    with pytest.raises(InputError):
        read_labels(write(tmp_path, "1,2\n", "bad.csv"))
    with pytest.raises(InputError):
        read_labels(write(tmp_path, "label\n", "empty.csv"))


def test_model_round_trip(tmp_path):
    sim = simulate(benchmark_spec(1))
    meta = {"loglik": -1.5, "converged": True}
    save_model(tmp_path / "m.json", sim.params, "mcstfa", meta)
    params, doc = load_model(tmp_path / "m.json")
    assert doc["fit"] == meta and doc["schema_version"] == 1
    probes = sim.data.values[:20]
    np.testing.assert_allclose(mixture_log_density(probes, params), mixture_log_density(probes, sim.params),
                               rtol=0, atol=1e-12)
    np.testing.assert_array_equal(params.loadings, sim.params.loadings)


def test_model_file_validation(tmp_path):
    sim = simulate(benchmark_spec(1))
    save_model(tmp_path / "m.json", sim.params)
    doc = json.loads((tmp_path / "m.json").read_text())
    for key, value in (("schema_version", 99), ("model", "gmm"), ("p", 14)):
        bad = dict(doc, **{key: value})
        (tmp_path / "bad.json").write_text(json.dumps(bad))
        with pytest.raises(InputError):
            load_model(tmp_path / "bad.json")
