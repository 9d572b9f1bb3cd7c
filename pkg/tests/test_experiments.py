import math

import pytest

from ifsresonance.config import parse_config
from ifsresonance.errors import ResourceError
from ifsresonance.experiments import plan, run
from ifsresonance.settings import settings


def test_budgets_restored_after_run():
    before = (settings.MAX_CELLS, settings.MAX_PAIRS, settings.MAX_TREE_NODES, settings.SEED)
    run(parse_config('command = "dim"\na = "1/3"\nk_min = 2\nk_max = 6\nmax_cells = 5000\nseed = 9\n'))
    plan(parse_config('command = "sumdim"\na = "1/9"\nb = "1/3"\nmax_pairs = 10\nmax_tree_nodes = 3\n'))
    assert (settings.MAX_CELLS, settings.MAX_PAIRS, settings.MAX_TREE_NODES, settings.SEED) == before

def test_budgets_restored_after_error():
    before = settings.MAX_CELLS
    cfg = parse_config('command = "dim"\na = "1/3"\nk_min = 2\nk_max = 8\nmax_cells = 10\n')
    with pytest.raises(ResourceError):
        run(cfg)
    assert settings.MAX_CELLS == before

def test_homogenize_reports_reductions():
    cfg = parse_config('command = "homogenize"\nwalk = 4\nb = "1/3"\nprune = "1/4"\n'
                       '[left]\nratios = ["1/2", "1/2", "1/2"]\ntranslations = ["0", "1/4", "1/2"]\n')
    summary = run(cfg).summary
    assert [step["step"] for step in summary["steps"]] == [
        "prune", "homogenize", "prune", "homogenize", "repair", "repair",
    ]
    assert summary["repair"] == "unchanged"
    assert all(step["dimension_after"] <= step["dimension_before"] + 1e-12 for step in summary["steps"])

def test_homogenize_walk_only():
    summary = run(parse_config('command = "homogenize"\na = "1/3"\nwalk = 6\n')).summary
    assert "steps" not in summary
    assert summary["k"] == 6

def test_drop_reports_exact_dimension():
    cfg = parse_config('command = "drop"\nxi = "1/4"\na_exponents = [1, 1]\nb_exponents = [1, 1]\nk_min = 3\nk_max = 8\n')
    summary = run(cfg).summary
    assert summary["digit_sum_dimension"] == pytest.approx(math.log(3) / math.log(4))
    assert summary["coincidence_scale"] == "1"
    assert abs(summary["slope"] - summary["digit_sum_dimension"]) < 0.02

def test_project_orients_reflections():
    cfg = parse_config('command = "project"\nxi_steps = 4\nk_min = 3\nk_max = 8\n'
                       '[planar]\nn = 3\nzeta = 0.3\nreflect = true\n')
    summary = run(cfg).summary
    assert summary["oriented_dimension_before"] == pytest.approx(math.log(3) / math.log(1 / 0.3))
    assert summary["oriented_dimension_after"] < summary["oriented_dimension_before"]
