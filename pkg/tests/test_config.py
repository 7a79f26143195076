from pathlib import Path

import pytest

from dualalign.config import load_config, parse_config
from dualalign.errors import ConfigError
from dualalign.optimizers import ExactProjection, Penalties

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults_fill_every_key():
    cfg = parse_config("experiment: synthetic_align\n")
    opt = cfg.optimizer_for("dual_kernel")
    assert opt.lam == 10.0 and opt.clamp_eps == 1e-6 and opt.iterations == 5000
    assert cfg.penalties_for("dual_kernel") == Penalties(0.01, 0.0)
    assert cfg.grid_cells() == [{}] and cfg.objectives == ["dual_kernel"]


def test_lr_inner_maps_per_objective():
    cfg = parse_config("experiment: synthetic_align\nobjectives: [primal, dual_linear]\n"
                       "grid: {lr_inner: [0.5]}\n")
    assert cfg.optimizer_for("primal", {"lr_inner": 0.5}).lr_disc == 0.5
    assert cfg.optimizer_for("dual_linear", {"lr_inner": 0.5}).lr_alpha == 0.5


def test_objective_overrides_and_grids():
    text = ("experiment: synthetic_align\nobjectives: [primal, dual_kernel]\n"
            "grid: {lr_theta: [1, 2]}\n"
            "objective_overrides:\n  primal:\n    optimizer: {lam: 1.0}\n    grid: {lr_theta: [0.1, 0.2, 0.3]}\n")
    cfg = parse_config(text)
    assert cfg.optimizer_for("primal").lam == 1.0 and cfg.optimizer_for("dual_kernel").lam == 10.0
    assert len(cfg.grid_cells("primal")) == 3 and len(cfg.grid_cells("dual_kernel")) == 2


def test_exact_projection_flag():
    cfg = parse_config("experiment: synthetic_align\npenalties: {exact: true}\n")
    assert isinstance(cfg.penalties_for("dual_kernel"), ExactProjection)


def test_overrides_take_precedence():
    cfg = parse_config("experiment: synthetic_align\noptimizer: {lam: 2.0}\n",
                       ["optimizer.lam=7", "kernel.sigma=1.5", "objectives=[mmd]"])
    assert cfg.optimizer_for("mmd").lam == 7.0 and cfg.raw["kernel"]["sigma"] == 1.5
    assert cfg.objectives == ["mmd"]


@pytest.mark.parametrize("text, fragment", [
    ("", "missing required key 'experiment'"),
    ("experiment: nope\n", "experiment"),
    ("experiment: synthetic_align\nmatcher: spline\n", "matcher"),
    ("experiment: synthetic_align\ngrid: {lr_beta: [1]}\n", "lr_beta"),
    ("experiment: synthetic_align\ngrid: {lr_theta: []}\n", "nonempty"),
    ("experiment: synthetic_align\ngrid: {lr_theta: [1, 2, 3]}\ngrid_cap: 2\n", "grid_cap"),
    ("experiment: synthetic_align\ndata:\n  a: {kind: gaussian_blob, mean: [0, 0], covariance: [[1, 2], [2, 1]],"
     " count: 3, seed: 1}\n", "missing 'b'"),
    ("experiment: synthetic_align\ndata:\n  a: {kind: gaussian_blob, mean: [0, 0], covariance: [[1, 2], [2, 1]],"
     " count: 3, seed: 1}\n  b: {kind: gaussian_blob, mean: [0, 0], covariance: [[1, 0], [0, 1]], count: 3, seed: 2}\n",
     "positive definite"),
    ("- just\n- a list\n", "mapping"),
])
def test_validation_messages(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value) and str(info.value).startswith("line ")


def test_bad_override_syntax():
    with pytest.raises(ConfigError):
        parse_config("experiment: saddle\n", ["no_equals_sign"])


@pytest.mark.parametrize("name", ["saddle.yaml", "synthetic.yaml", "toy_da.yaml"])
def test_shipped_configs_parse(name):
    cfg = load_config(str(CONFIGS / name))
    assert cfg.experiment in ("saddle", "synthetic_align", "toy_da")
    if cfg.experiment != "saddle":
        assert all(len(cfg.grid_cells(o)) == 9 for o in cfg.objectives)
