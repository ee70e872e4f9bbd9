import json
import math
import time

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from manage import cli
from multimatrix.services.datasets import PACKAGED_TRAJECTORY


@pytest.fixture
def runner():
    return CliRunner()


def write(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def error_of(result):
    for line in result.stdout.splitlines():
        if line.startswith('{"command"'):
            return json.loads(line)
    raise AssertionError(f"no error payload in output: {result.stdout!r}")


def beta2_dataset(values):
    return {
        "structure": {"block_rows": [1, 1], "cols": 1},
        "roles": ["F"],
        "replicates": [[[[v]]] for v in values],
    }


def test_logpdf_report(runner, tmp_path, schema):
    data = write(tmp_path / "data.json", beta2_dataset([1.0]))
    params = write(tmp_path / "params.json", {"a0": 1.0, "a": 1.0})
    out = tmp_path / "report.json"
    result = runner.invoke(cli, ["logpdf", "beta2", "--data", data, "--params", params, "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    jsonschema.validate(report, schema("report"))
    assert report["command"] == "logpdf"
    assert report["results"]["replicates"] == 1
    assert report["results"]["sum"] == pytest.approx(-2 * math.log(2), abs=1e-14)


def test_logpdf_accepts_family_alias(runner, tmp_path):
    data = write(tmp_path / "data.json", beta2_dataset([0.5, 2.0]))
    out = tmp_path / "report.json"
    result = runner.invoke(cli, ["logpdf", "mb2", "--data", data, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text(encoding="utf-8"))["inputs"]["family"] == "beta2"


def test_logpdf_malformed_json(runner, tmp_path):
    bad = tmp_path / "data.json"
    bad.write_text("{not json", encoding="utf-8")
    result = runner.invoke(cli, ["logpdf", "beta2", "--data", str(bad)])
    assert result.exit_code == 2
    payload = error_of(result)
    assert payload["kind"] == "DatasetError"
    assert payload["exit_code"] == 2


def test_logpdf_reports_failing_replicate(runner, tmp_path):
    doc = {
        "structure": {"block_rows": [2, 2], "cols": 2},
        "roles": ["F"],
        "replicates": [[np.eye(2).tolist()]] * 3 + [[[[1.0, 2.0], [2.0, 1.0]]]],
    }
    data = write(tmp_path / "data.json", doc)
    result = runner.invoke(cli, ["logpdf", "beta2", "--data", data])
    assert result.exit_code == 3
    assert "replicate 3" in error_of(result)["error"]


def test_logpdf_needs_kernel_for_joint_only_family(runner, tmp_path):
    doc = {"structure": {"block_rows": [1, 1], "cols": 1}, "roles": ["W"], "replicates": [{"v": 1.0, "blocks": [[[1.0]]]}]}
    data = write(tmp_path / "data.json", doc)
    result = runner.invoke(cli, ["logpdf", "wishart", "--data", data])
    assert result.exit_code == 2
    out = tmp_path / "report.json"
    result = runner.invoke(cli, ["logpdf", "wishart", "--data", data, "--kernel", "normal", "--out", str(out)])
    assert result.exit_code == 0, result.output


def test_sample_is_reproducible(runner, tmp_path, schema):
    args = ["sample", "beta2", "--rows", "3,2,2", "--cols", "2", "--count", "5", "--seed", "17"]
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert runner.invoke(cli, args + ["--out", str(first)]).exit_code == 0
    assert runner.invoke(cli, args + ["--out", str(second)]).exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    doc = json.loads(first.read_text(encoding="utf-8"))
    jsonschema.validate(doc, schema("dataset"))
    assert doc["roles"] == ["F", "F"]
    assert len(doc["replicates"]) == 5
    assert doc["meta"]["seed"] == 17


def test_sample_then_fit(runner, tmp_path, schema):
    data = tmp_path / "data.json"
    result = runner.invoke(
        cli, ["sample", "beta2", "--rows", "4,3,3", "--cols", "1", "--count", "200", "--seed", "3", "--out", str(data)]
    )
    assert result.exit_code == 0, result.output
    out = tmp_path / "fit.json"
    result = runner.invoke(cli, ["fit", "--data", str(data), "--restarts", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    jsonschema.validate(report, schema("report"))
    assert report["results"]["a0_hat"] > 0
    assert report["inputs"]["k"] == 2


def test_sample_rejects_bad_kernel_and_family(runner):
    result = runner.invoke(cli, ["sample", "beta2", "--rows", "2,2", "--cols", "1", "--kernel", "pearson7"])
    assert result.exit_code == 2
    assert error_of(result)["command"] == "sample"
    result = runner.invoke(cli, ["sample", "located-p7", "--rows", "2,2", "--cols", "1"])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["sample", "beta2", "--rows", "2,x", "--cols", "1"])
    assert result.exit_code == 2


def test_fit_empty_replicates(runner, tmp_path):
    doc = {"structure": {"block_rows": [1, 1], "cols": 1}, "roles": ["F"], "replicates": []}
    data = write(tmp_path / "data.json", doc)
    result = runner.invoke(cli, ["fit", "--data", data])
    assert result.exit_code == 2


def test_fit_needs_f_roles(runner, tmp_path):
    doc = {"structure": {"block_rows": [1, 1], "cols": 1}, "roles": ["B"], "replicates": [[[[0.5]]]]}
    data = write(tmp_path / "data.json", doc)
    assert runner.invoke(cli, ["fit", "--data", data]).exit_code == 2


def test_check_fast(runner, tmp_path, schema):
    out = tmp_path / "check.json"
    result = runner.invoke(cli, ["check", "--family", "pearson2", "--rows", "1,1", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    jsonschema.validate(report, schema("report"))
    assert report["results"]["passed"] == report["results"]["total"]
    assert report["seed"] == 1


def test_check_fast_on_matrix_case_is_unsupported(runner):
    result = runner.invoke(cli, ["check", "--family", "beta2", "--rows", "3,2", "--cols", "2"])
    assert result.exit_code == 2
    assert error_of(result)["kind"] == "UnsupportedConfiguration"


def test_transform_compress_and_expand(runner, tmp_path):
    src = write(tmp_path / "in.json", {"matrices": [[[3.0, 4.0]]]})
    out = tmp_path / "out.json"
    result = runner.invoke(cli, ["transform", "compress", src, "--out", str(out)])
    assert result.exit_code == 0, result.output
    compressed = json.loads(out.read_text(encoding="utf-8"))["results"]["matrices"]
    np.testing.assert_allclose(compressed, [[[3.0 / math.sqrt(26.0), 4.0 / math.sqrt(26.0)]]])

    back = write(tmp_path / "back.json", {"matrices": compressed})
    result = runner.invoke(cli, ["transform", "expand", back, "--out", str(out)])
    assert result.exit_code == 0, result.output
    np.testing.assert_allclose(json.loads(out.read_text(encoding="utf-8"))["results"]["matrices"], [[[3.0, 4.0]]])

    outside = write(tmp_path / "outside.json", {"matrices": [[[0.6, 0.8]]]})
    assert runner.invoke(cli, ["transform", "expand", outside]).exit_code == 3


def test_transform_derive(runner, tmp_path, schema):
    doc = {
        "structure": {"block_rows": [2, 1], "cols": 1},
        "roles": ["T"],
        "raw": [[[[1.0], [1.0]], [[0.5]]]],
    }
    src = write(tmp_path / "raw.json", doc)
    out = tmp_path / "derived.json"
    result = runner.invoke(cli, ["transform", "derive", src, "--out", str(out)])
    assert result.exit_code == 0, result.output
    dataset = json.loads(out.read_text(encoding="utf-8"))
    jsonschema.validate(dataset, schema("dataset"))
    (replicate,) = dataset["replicates"]
    assert replicate["v"] == pytest.approx(2.0)
    assert replicate["blocks"][0][0][0] == pytest.approx(0.5 / math.sqrt(2.0))


def test_logpdf_from_csv_manifest(runner, tmp_path):
    np.savetxt(tmp_path / "f0.csv", np.array([[1.0]]), delimiter=",")
    np.savetxt(tmp_path / "f1.csv", np.array([[0.25]]), delimiter=",")
    manifest = {
        "structure": {"block_rows": [1, 1], "cols": 1},
        "roles": ["F"],
        "replicates": [["f0.csv"], ["f1.csv"]],
    }
    path = write(tmp_path / "manifest.json", manifest)
    out = tmp_path / "report.json"
    result = runner.invoke(cli, ["logpdf", "beta2", "--from-csv", path, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text(encoding="utf-8"))["results"]["replicates"] == 2


@pytest.mark.parametrize(
    "family, params",
    [
        ("beta2", {"a0": "abc", "a": 1}),
        ("beta2", {"kernel": {"family": "pearson7", "q": "x", "r": 1}}),
        ("beta2", {"kernel": "normal"}),
        ("located-p7", {"location_scale": {"mu": [[[0.0]]]}}),
        ("located-p7", {"location_scale": {"mu": [[[0.0]]], "sigma": [[[1.0]]], "theta": [[["x"]]], "r": [1.0]}}),
    ],
)
def test_logpdf_malformed_params(runner, tmp_path, family, params):
    roles = {"beta2": ["F"], "located-p7": ["X"]}[family]
    doc = {"structure": {"block_rows": [1, 1], "cols": 1}, "roles": roles, "replicates": [[[[0.5]]]]}
    data = write(tmp_path / "data.json", doc)
    path = write(tmp_path / "params.json", params)
    result = runner.invoke(cli, ["logpdf", family, "--data", data, "--params", path])
    assert result.exit_code == 2
    payload = error_of(result)
    assert payload["command"] == "logpdf"
    assert payload["exit_code"] == 2


def test_fit_is_byte_identical(runner, tmp_path):
    data = tmp_path / "data.json"
    args = ["sample", "beta2", "--rows", "4,3,3", "--cols", "2", "--count", "100", "--seed", "5", "--out", str(data)]
    assert runner.invoke(cli, args).exit_code == 0
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for out in (first, second):
        result = runner.invoke(cli, ["fit", "--data", str(data), "--restarts", "1", "--out", str(out)])
        assert result.exit_code == 0, result.output
    assert first.read_bytes() == second.read_bytes()


def test_kernel_shape_flags_need_kernel(runner):
    result = runner.invoke(cli, ["sample", "beta2", "--rows", "2,2", "--cols", "1", "--q", "3"])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["check", "--family", "beta2", "--rows", "1,1", "--r", "1"])
    assert result.exit_code == 2


def test_transform_derive_unknown_role(runner, tmp_path):
    doc = {"structure": {"block_rows": [2, 1], "cols": 1}, "roles": ["Q"], "raw": [[[[1.0], [1.0]], [[0.5]]]]}
    src = write(tmp_path / "raw.json", doc)
    result = runner.invoke(cli, ["transform", "derive", src])
    assert result.exit_code == 2
    assert error_of(result)["command"] == "transform"


def test_bad_environment_setting(runner):
    result = runner.invoke(cli, ["check", "--family", "beta2", "--rows", "1,1"], env={"MULTIMATRIX_SEED": "abc"})
    assert result.exit_code == 2
    assert error_of(result)["kind"] == "ConfigError"


@pytest.mark.slow
def test_fit_packaged_trajectory(runner, tmp_path, golden):
    out = tmp_path / "fit.json"
    started = time.perf_counter()
    result = runner.invoke(cli, ["fit", "--data", str(PACKAGED_TRAJECTORY), "--out", str(out)])
    elapsed = time.perf_counter() - started
    assert result.exit_code == 0, result.output
    assert elapsed < 30.0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["inputs"]["k"] == 56
    golden("trajectory_fit", {k: report["results"][k] for k in ("a0_hat", "a_hat", "log_likelihood", "iterations")})
