import pytest

from quasibvp.config import (
    DEFAULT_N_LIST,
    QuantitySpec,
    RunConfig,
    build_run_config,
    config_hash,
    load_config_file,
)
from quasibvp.errors import ConfigurationError
from quasibvp.grid import MapKind
from quasibvp.problems import ColloidProblem, LinearProblem


def test_quantity_parse():
    q = QuantitySpec.parse("comp=1,node=3")
    assert (q.component, q.node) == (1, 3)
    assert q.label == "U1[3]"
    assert QuantitySpec.parse("node=2") == QuantitySpec(component=2, node=2)


@pytest.mark.parametrize("text", ["comp=x", "foo=1", "comp", "comp=0"])
def test_quantity_parse_rejects(text):
    with pytest.raises(ConfigurationError):
        QuantitySpec.parse(text)


def test_defaults():
    cfg = RunConfig()
    assert cfg.problem == "colloid" and cfg.u0 == 1.0
    assert cfg.n_list == DEFAULT_N_LIST
    assert DEFAULT_N_LIST[0] == 5 and DEFAULT_N_LIST[-1] == 5120
    assert cfg.map.kind == MapKind.ALGEBRAIC and cfg.map.c == 10.0
    assert (cfg.p0, cfg.order_step, cfg.levels) == (2.0, 2.0, 2)
    assert cfg.newton_config().tol == 1e-12
    assert isinstance(cfg.make_problem(), ColloidProblem)
    assert isinstance(RunConfig(problem="linear").make_problem(), LinearProblem)


def test_string_settings_are_parsed():
    cfg = RunConfig(n_list="5,10,20", pair="10,20", quantity="comp=1,node=2")
    assert cfg.n_list == (5, 10, 20)
    assert cfg.pair == (10, 20)
    assert cfg.quantity == QuantitySpec(component=1, node=2)


@pytest.mark.parametrize(
    "settings",
    [
        {"n_list": "5,10,30"},
        {"n_list": []},
        {"pair": "20,30"},
        {"u0": 0.0},
        {"damping": 1.5},
        {"norm": "l2"},
        {"output": "xml"},
        {"map": {"kind": "log", "c": -1.0}},
        {"no_such_setting": 1},
    ],
)
def test_invalid_settings(settings):
    with pytest.raises(ConfigurationError):
        RunConfig(**settings)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("u0: 7\nproblem: colloid\nmap:\n  kind: log\nn_list: [5, 10, 20]\n")
    cfg = build_run_config(path)
    assert cfg.u0 == 7.0 and cfg.map.kind == MapKind.LOGARITHMIC and cfg.n_list == (5, 10, 20)

    cfg = build_run_config(path, {"u0": 3.0, "map": {"c": 5.0}, "tol": None})
    assert cfg.u0 == 3.0
    assert cfg.map.kind == MapKind.LOGARITHMIC and cfg.map.c == 5.0
    assert cfg.tol == 1e-12


def test_with_coarse_from_yaml_and_flags(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("with_coarse: true\n")
    assert build_run_config(path).with_coarse is True
    assert build_run_config(path, {"with_coarse": None}).with_coarse is True
    assert RunConfig().with_coarse is False
    assert config_hash(RunConfig()) != config_hash(RunConfig(with_coarse=True))


def test_overrides_without_a_file():
    cfg = build_run_config(overrides={"map": {"kind": "log"}, "levels": 1})
    assert cfg.map.kind == MapKind.LOGARITHMIC and cfg.map.c == 10.0
    assert cfg.levels == 1


def test_empty_config_file(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config_file(path) == {}


@pytest.mark.parametrize(
    "content", ["u0: 1\nspeed: 3\n", "- 1\n- 2\n", "u0: [1, 2\n"], ids=["unknown-key", "not-a-mapping", "bad-yaml"]
)
def test_bad_config_files(tmp_path, content):
    path = tmp_path / "bad.yaml"
    path.write_text(content)
    with pytest.raises(ConfigurationError):
        load_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        build_run_config(tmp_path / "nope.yaml")


def test_config_hash():
    base = RunConfig(u0=2.0)
    assert len(config_hash(base)) == 8
    assert config_hash(base) == config_hash(RunConfig(u0=2.0))
    assert config_hash(base) == config_hash(RunConfig(u0=2.0, output="json", overwrite=True))
    assert config_hash(base) != config_hash(RunConfig(u0=3.0))


def test_metadata():
    metadata = RunConfig(problem="linear", n_list="10,20").metadata()
    assert metadata["map"] == "alg" and metadata["c"] == 10.0
    assert metadata["n_list"] == [10, 20]
    assert metadata["config_hash"] == config_hash(RunConfig(problem="linear", n_list="10,20"))
    assert "output_path" not in metadata
