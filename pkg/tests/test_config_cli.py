import json
import math
import os

import pandas as pd
import pytest

from kirlab.cli import EXIT_CONFIG, EXIT_OK, run
from kirlab.config import config_from_dict, load_config
from kirlab.data import example_configs
from kirlab.exceptions import ConfigurationError
from kirlab.output import conf_writer_path

BRANCH_TOML = """
[params]
a = 0.25
b = 0.25
alpha = 1.0
p = 2.0

[branch]
S = 1.0
"""

BAD_SUPERLINEAR_TOML = """
[domain]
shape = "disk"
resolution = 32

[params]
a = 1.0
b = 1.0
alpha = 1.0
p = 5.0

[perturbation]
kind = "superlinear"
lam_fraction = 1.5
q = 2.0
"""

GROUNDSTATE_TOML = """
[domain]
shape = "disk"
resolution = 128

[params]
a = 1.0
b = 1.0
alpha = 1.0
p = 0.5
"""

SUBLINEAR_TOML = """
[domain]
shape = "disk"
resolution = 32

[params]
a = 1.0
b = 1.0
alpha = 1.0
p = 0.5

[perturbation]
kind = "sublinear"
mu = 1.0
q = 0.7
q1 = 0.8
"""


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _report(prefix):
    with open(f"{prefix}.report.json") as f:
        return json.load(f)


def test_branch_command(tmp_path):
    prefix = str(tmp_path / "branch")
    assert run(["branch", "-c", _write(tmp_path, BRANCH_TOML), "-o", prefix]) == EXIT_OK
    table = pd.read_csv(f"{prefix}.csv")
    assert table["case"][0] == "subcritical_two_branch"
    assert table["root1"][0] == pytest.approx((2 - math.sqrt(3)) ** 2, rel=1e-10)
    assert table["root2"][0] == pytest.approx((2 + math.sqrt(3)) ** 2, rel=1e-10)
    report = _report(prefix)
    assert report["status"] == "ok"
    assert report["config"]["params"]["a"] == 0.25
    assert report["result"]["regime"]["predicted_count"] == 2


def test_reports_are_reproducible(tmp_path):
    config = _write(tmp_path, BRANCH_TOML)
    first, second = str(tmp_path / "first"), str(tmp_path / "second")
    assert run(["branch", "-c", config, "-o", first]) == EXIT_OK
    assert run(["branch", "-c", config, "-o", second]) == EXIT_OK
    one, two = _report(first), _report(second)
    one["config"].pop("output")
    two["config"].pop("output")
    assert json.dumps(one, sort_keys=True) == json.dumps(two, sort_keys=True)
    with open(f"{first}.csv") as f1, open(f"{second}.csv") as f2:
        assert f1.read() == f2.read()


def test_hypothesis_violation_exits_with_config_status(tmp_path):
    prefix = str(tmp_path / "bad")
    assert run(["continuation", "-c", _write(tmp_path, BAD_SUPERLINEAR_TOML), "-o", prefix]) == EXIT_CONFIG
    report = _report(prefix)
    assert report["status"] == "error"
    assert any("(H2)" in e for e in report["errors"])


def test_missing_config(tmp_path):
    prefix = str(tmp_path / "missing")
    assert run(["solve", "-c", str(tmp_path / "nope.toml"), "-o", prefix]) == EXIT_CONFIG
    assert run(["solve", "-o", prefix]) == EXIT_CONFIG


def test_oracle_needs_disk(tmp_path):
    text = BRANCH_TOML.replace("p = 2.0", "p = 3.0")
    assert run(["oracle", "-c", _write(tmp_path, text), "-o", str(tmp_path / "oracle")]) == EXIT_CONFIG


def test_groundstate_command_with_overrides(tmp_path):
    prefix = str(tmp_path / "gs")
    config = _write(tmp_path, GROUNDSTATE_TOML)
    assert run(["groundstate", "-c", config, "-o", prefix, "--resolution", "32"]) == EXIT_OK
    report = _report(prefix)
    assert report["config"]["domain"]["resolution"] == 32
    assert report["result"]["groundstate"]["monotone"]
    assert len(pd.read_csv(f"{prefix}.csv")) == 32


def test_unknown_keys_are_collected():
    data = {"params": {"a": 1.0, "b": 1.0, "alpha": 1.0, "p": 2.0, "c": 1.0}, "foo": 1, "extra": {}}
    with pytest.raises(ConfigurationError) as err:
        config_from_dict(data)
    assert len(err.value.violations) == 3


def test_violations_are_collected():
    data = {"domain": {"shape": "disk", "resolution": 4},
            "params": {"a": -1.0, "b": 1.0, "alpha": 1.0, "p": 2.0},
            "continuation": {"method": "newton"}}
    with pytest.raises(ConfigurationError) as err:
        config_from_dict(data)
    assert len(err.value.violations) >= 3


def test_superlinear_lam_is_resolved():
    data = {**example_configs["superlinear"], "domain": {"shape": "disk", "resolution": 32}}
    cfg = config_from_dict(data, {"threads": 2})
    assert cfg.threads == 2
    assert cfg.perturbation.lam == pytest.approx(0.5 * cfg.lam1)
    assert cfg.step_kwargs()["lam1"] == cfg.lam1


def test_shipped_configs_load():
    root = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
    for name in sorted(os.listdir(root)):
        cfg = load_config(os.path.join(root, name), resolve=False)
        assert cfg.params is not None


def test_writer_path_increments(tmp_path):
    prefix = str(tmp_path / "run")
    first = conf_writer_path(prefix)
    assert first.endswith("run_TB_001")
    os.makedirs(first)
    assert conf_writer_path(prefix).endswith("run_TB_002")


def test_continuation_reports_hypothesis_limits(tmp_path):
    prefix = str(tmp_path / "cont")
    assert run(["continuation", "-c", _write(tmp_path, SUBLINEAR_TOML), "-o", prefix]) == EXIT_OK
    limits = _report(prefix)["result"]["hypothesis_limits"]
    assert limits["quantity"] == "h/s^p"
    assert limits["monotone"] and limits["nonnegative"]
