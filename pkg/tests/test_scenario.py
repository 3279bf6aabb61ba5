"""Scenario parsing tests: strict keys, range grammar, block validation."""

import pytest

from gora.scenario import (
    ScenarioError,
    SimBlock,
    load_scenario,
    parse_n_list,
    scenario_from_dict,
)

GOAL = [{"start_age": 0.0, "coefficients": [25.0, -10.0, 1.0]}]


def base(**overrides):
    data = {"name": "unit", "goal": GOAL, "n_list": [10, 50]}
    data.update(overrides)
    return data


# -- n_list grammar ----------------------------------------------------------


def test_n_list_single_int():
    assert parse_n_list(7) == (7,)


def test_n_list_explicit_list():
    assert parse_n_list([5, 10, 20]) == (5, 10, 20)


def test_n_list_range_default_step():
    assert parse_n_list("3..6") == (3, 4, 5, 6)


def test_n_list_range_with_step_keeps_endpoints_inclusive():
    assert parse_n_list("500..2500 step 500") == (500, 1000, 1500, 2000, 2500)


def test_n_list_range_step_overshoot_drops_endpoint():
    assert parse_n_list("1..10 step 4") == (1, 5, 9)


@pytest.mark.parametrize(
    "bad", ["..5", "5..", "5..3", "1..9 step 0", 0, -3, True, [1, True], [], 2.5]
)
def test_n_list_rejects_malformed(bad):
    with pytest.raises(ScenarioError):
        parse_n_list(bad)


# -- top-level validation ----------------------------------------------------


def test_minimal_scenario_fills_defaults():
    sc = scenario_from_dict(base())
    assert sc.name == "unit"
    assert sc.d == 1.0
    assert sc.n_list == (10, 50)
    assert sc.policies == ("GORA", "TA", "SA")
    assert sc.sim is None
    assert sc.goal.value(5.0) == 0.0
    assert sc.source == base()


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioError, match="unknown scenario.*keys.*\\['extra'\\]"):
        scenario_from_dict(base(extra=1))


def test_missing_required_keys_reported_together():
    with pytest.raises(ScenarioError, match="missing keys \\['goal', 'n_list'\\]"):
        scenario_from_dict({"name": "x"})


def test_bad_goal_records_wrapped_as_scenario_error():
    with pytest.raises(ScenarioError, match="bad goal declaration"):
        scenario_from_dict(base(goal=[{"start_age": 0.0}]))


def test_nonpositive_slot_duration_rejected():
    with pytest.raises(ScenarioError, match="slot duration"):
        scenario_from_dict(base(d=0.0))


def test_policies_normalized_to_canonical_order():
    sc = scenario_from_dict(base(policies=["SA", "GORA"]))
    assert sc.policies == ("GORA", "SA")


def test_unknown_policy_rejected():
    with pytest.raises(ScenarioError, match="unknown policies \\['CSMA'\\]"):
        scenario_from_dict(base(policies=["GORA", "CSMA"]))


# -- sim block ---------------------------------------------------------------


def test_sim_block_parsed():
    sc = scenario_from_dict(
        base(sim={"horizon": 1000, "warmup": 100, "seeds": [1, 2]})
    )
    assert sc.sim == SimBlock(horizon=1000, warmup=100, seeds=(1, 2))


def test_sim_single_seed_promoted_to_list():
    sc = scenario_from_dict(base(sim={"horizon": 1000, "seeds": 3}))
    assert sc.sim.seeds == (3,)
    assert sc.sim.warmup == 0


def test_sim_unknown_key_rejected():
    with pytest.raises(ScenarioError, match="unknown sim keys"):
        scenario_from_dict(
            base(sim={"horizon": 1000, "seeds": [1], "horizons": 5})
        )


@pytest.mark.parametrize(
    "blk",
    [
        {"horizon": 0, "seeds": [1]},
        {"horizon": 100, "warmup": 100, "seeds": [1]},
        {"horizon": 100, "seeds": []},
        {"horizon": 100, "seeds": [-1]},
        {"seeds": [1]},
        {"horizon": 100},
    ],
)
def test_sim_block_invariants(blk):
    with pytest.raises(ScenarioError):
        scenario_from_dict(base(sim=blk))


# -- optimizer block ---------------------------------------------------------


def test_optimizer_options_pass_through():
    sc = scenario_from_dict(
        base(optimizer={"tau_grid": [0.1, 0.2], "newton_tol_rel": 1e-10})
    )
    assert sc.optimizer.tau_grid == (0.1, 0.2)
    assert sc.optimizer.newton_tol_rel == 1e-10


def test_optimizer_series_subblock():
    sc = scenario_from_dict(base(optimizer={"series": {"tail_mass": 1e-10}}))
    assert sc.optimizer.series.tail_mass == 1e-10


def test_optimizer_unknown_key_rejected():
    with pytest.raises(ScenarioError, match="unknown optimizer keys"):
        scenario_from_dict(base(optimizer={"tau_gird": [0.1]}))


def test_optimizer_series_unknown_key_rejected():
    with pytest.raises(ScenarioError, match="unknown optimizer.series keys"):
        scenario_from_dict(base(optimizer={"series": {"epsilon": 1e-10}}))


# -- file loading ------------------------------------------------------------


def test_load_scenario_round_trips_yaml(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(
        "name: disk\n"
        "goal:\n"
        "  - {start_age: 0.0, coefficients: [25.0, -10.0, 1.0]}\n"
        "n_list: 2..4\n"
        "policies: [TA]\n",
        encoding="utf-8",
    )
    sc = load_scenario(path)
    assert sc.name == "disk"
    assert sc.n_list == (2, 3, 4)
    assert sc.policies == ("TA",)


def test_load_scenario_rejects_non_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match="mapping at top level"):
        load_scenario(path)


def test_load_scenario_rejects_broken_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("name: [unclosed\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match="cannot parse"):
        load_scenario(path)


def test_shipped_scenarios_parse():
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1] / "scenarios"
    names = sorted(p.name for p in root.glob("*.yaml"))
    assert names, "no shipped scenario files found"
    for p in root.glob("*.yaml"):
        sc = load_scenario(p)
        assert sc.n_list and sc.policies
