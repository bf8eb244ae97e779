import json

import pytest

from causalpipe.cli import AnalysisConfig, main, parse_config, run_pipeline
from causalpipe.dataset import SyntheticSpec, generate_linear_dataset
from causalpipe.errors import ConfigError
from causalpipe.parsing import render_dot, render_gml
from causalpipe.report import render_report

REQUIRED = ["--data", "d.csv", "--graph", "g.dot", "--treatment", "T", "--outcome", "Y"]


@pytest.fixture(scope="module")
def fixture_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    d, g, _ = generate_linear_dataset(SyntheticSpec(n=5000, beta=10.0, num_common_causes=3, seed=42))
    (root / "data.csv").write_text(d.to_csv())
    (root / "graph.dot").write_text(render_dot(g))
    (root / "graph.gml").write_text(render_gml(g))
    return root


def analyze_args(root, *extra, graph="graph.dot"):
    return ["--data", str(root / "data.csv"), "--graph", str(root / graph),
            "--treatment", "T", "--outcome", "Y", *extra]


def test_parse_config_defaults():
    cfg = parse_config(REQUIRED, environ={})
    assert cfg == AnalysisConfig("d.csv", "g.dot", "T", "Y")
    assert cfg.seed == 0 and cfg.method is None and cfg.refuters is None and cfg.output_format == "json"


def test_parse_config_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 5, "bootstrap_reps": 30, "refuters": ["bootstrap"]}))
    cfg = parse_config(REQUIRED + ["--config", str(path), "--seed", "9"], environ={"CAUSAL_SEED": "1"})
    assert cfg.seed == 9 and cfg.bootstrap_reps == 30 and cfg.refuters == ("bootstrap",)
    assert parse_config(REQUIRED + ["--config", str(path)], environ={"CAUSAL_SEED": "1"}).seed == 5
    assert parse_config(REQUIRED, environ={"CAUSAL_SEED": "7"}).seed == 7


@pytest.mark.parametrize("args", [
    REQUIRED + ["--bogus"],
    REQUIRED[:4],
    REQUIRED + ["--refuters", "bootstrap,nonsense"],
    REQUIRED + ["--method", "no.such"],
    REQUIRED + ["--config", "/nonexistent.json"],
])
def test_parse_config_errors(args):
    with pytest.raises(ConfigError):
        parse_config(args, environ={})


def test_bad_env_seed():
    with pytest.raises(ConfigError, match="CAUSAL_SEED"):
        parse_config(REQUIRED, environ={"CAUSAL_SEED": "x"})


def test_gml_auto_detected(fixture_files):
    cfg = parse_config(analyze_args(fixture_files, graph="graph.gml"), environ={})
    assert cfg.resolved_format() == "gml"


def test_method_mismatch_deferred(fixture_files):
    cfg = parse_config(analyze_args(fixture_files, "--method", "iv.wald"), environ={})
    with pytest.raises(ConfigError, match="iv estimand"):
        run_pipeline(cfg)


@pytest.fixture(scope="module")
def fixture_report(fixture_files):
    cfg = parse_config(analyze_args(fixture_files), environ={})
    return run_pipeline(cfg)


def test_fixture_run(fixture_report):
    r = fixture_report.to_dict()
    assert r["status"] == "ok"
    assert abs(r["estimate"]["value"] - 10.0) < 0.5
    assert [x["refuter"] for x in r["refutations"]] == [
        "random_common_cause", "placebo_treatment", "dummy_outcome", "simulated_outcome",
        "add_unobserved_common_cause", "data_subset", "bootstrap"]
    assert all(x["passed"] for x in r["refutations"])


def test_json_round_trip(fixture_report):
    text = render_report(fixture_report, "json")
    assert text.endswith("\n")
    assert render_report(json.loads(text), "json") == text
    assert render_report(fixture_report, "json") == text


def test_text_sections(fixture_report):
    text = render_report(fixture_report, "text")
    for title in ("MODEL", "IDENTIFY", "ESTIMATE", "REFUTE"):
        assert f"\n{title}\n" in "\n" + text


def test_main_byte_identical(fixture_files, tmp_path):
    outs = []
    out = tmp_path / "report.json"
    for _ in range(2):
        assert main(["analyze", *analyze_args(fixture_files, "--refuter-reps", "20", "--out", str(out))]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bow_not_identified(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("T,Y\n0,1\n1,2\n0,0\n1,3\n")
    (tmp_path / "g.dot").write_text("digraph { U [observed=false]; U -> T; U -> Y; T -> Y; }\n")
    code = main(["analyze", "--data", str(tmp_path / "d.csv"), "--graph", str(tmp_path / "g.dot"),
                 "--treatment", "T", "--outcome", "Y", "--format", "text"])
    assert code == 2
    assert "identified: no" in capsys.readouterr().out


def test_main_errors(tmp_path, capsys):
    assert main(["analyze", "--data", str(tmp_path / "missing.csv"), "--graph", "g.dot",
                 "--treatment", "T", "--outcome", "Y"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["analyze", "--bogus"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["--version"]) == 0


def test_generate(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n": 50, "beta": 3.0, "num_common_causes": 2, "seed": 1}))
    prefix = str(tmp_path / "out")
    assert main(["generate", "--spec-json", str(spec), "--out-prefix", prefix]) == 0
    truth = json.loads((tmp_path / "out.truth.json").read_text())
    assert truth["true_ate"] == 3.0
    assert (tmp_path / "out.csv").read_text().startswith("W0,W1,T,Y")
    assert "digraph" in (tmp_path / "out.dot").read_text()
    spec.write_text(json.dumps({"n": 50, "beta": 3.0, "bogus": 1}))
    assert main(["generate", "--spec-json", str(spec), "--out-prefix", prefix]) == 1


def test_missing_graph_variable_treated_as_latent(tmp_path):
    (tmp_path / "d.csv").write_text("T,Y\n" + "".join(f"{i % 2},{i % 3}\n" for i in range(40)))
    (tmp_path / "g.dot").write_text("digraph { Z -> T; T -> Y; }\n")
    cfg = parse_config(["--data", str(tmp_path / "d.csv"), "--graph", str(tmp_path / "g.dot"),
                        "--treatment", "T", "--outcome", "Y", "--bootstrap-reps", "0",
                        "--permutation-reps", "0", "--refuters", "bootstrap"], environ={})
    r = run_pipeline(cfg)
    assert "Z" in r.model["latent"]
    assert any("absent from the data" in w for w in r.warnings)
