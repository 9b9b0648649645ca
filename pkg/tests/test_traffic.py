import itertools
import json

import numpy as np
import pytest

from aase.errors import ConfigError
from aase.model import validate_model
from aase.traffic import (
    ACTION_LABELS,
    COLORS,
    LIGHT_LABELS,
    LIGHT_STATES,
    LOCAL_LABELS,
    TrafficConfig,
    build_traffic_model,
    default_policy_doc,
    driver_policy,
    legal_cycle_default,
    light_transition,
    policy_to_doc,
    vehicle_transition,
)


def _legal_idx(cfg=None):
    cycle = (cfg or TrafficConfig()).legal_cycle
    return [LIGHT_STATES.index(tuple(s)) for s in cycle]


def test_spaces_for_three_agents():
    m = build_traffic_model(TrafficConfig(n_parallel=1, n_perpendicular=2))
    assert m.n_agents == 3
    assert m.global_chain.space.size == 9
    for a in m.agents:
        assert a.space.size == 12 and a.actions.size == 9
    assert validate_model(m).ok


def test_label_sets():
    assert len(set(LIGHT_LABELS)) == 9 and len(set(LOCAL_LABELS)) == 12 and len(set(ACTION_LABELS)) == 9


def test_legal_cycle_order():
    cycle = legal_cycle_default()
    assert cycle == [("Green", "Red"), ("Yellow", "Red"), ("Red", "Green"), ("Red", "Yellow")]
    assert cycle[(cycle.index(("Green", "Red")) + 1) % 4] == ("Yellow", "Red")


def test_no_mass_reaches_illegal_states():
    m = build_traffic_model()
    g = m.global_chain
    illegal = [j for j in range(9) if j not in _legal_idx()]
    assert LIGHT_STATES.index(("Green", "Green")) in illegal
    assert np.all(g.prior[illegal] == 0)
    assert np.all(g.transition[:, illegal] == 0)


def test_transition_structure():
    cfg = TrafficConfig()
    T = light_transition(cfg)
    idx = {s: LIGHT_STATES.index(s) for s in LIGHT_STATES}
    gr, yr, rg, ry = (idx[s] for s in legal_cycle_default())
    assert T[gr, gr] == cfg.self_stay
    assert T[gr, yr] == cfg.advance
    assert T[ry, gr] == cfg.advance
    # out of sequence: yellow back to green, spread over the two skipped states
    assert T[yr, gr] == pytest.approx(cfg.out_of_sequence / 2)
    assert T[yr, ry] == pytest.approx(cfg.out_of_sequence / 2)


def test_observation_accuracies_as_configured():
    m = build_traffic_model(TrafficConfig(n_parallel=1, n_perpendicular=1))
    Z0 = m.global_chain.obs
    for s, (par, _) in enumerate(LIGHT_STATES):
        assert Z0[s, COLORS.index(par)] == 0.92
        assert sorted(Z0[s])[:2] == pytest.approx([0.04, 0.04])
    for a in m.agents:
        assert np.all(np.diag(a.obs) == 0.95)
        off = a.obs[~np.eye(12, dtype=bool)]
        assert off == pytest.approx(np.full(off.size, 0.05 / 11))


def test_equal_parallel_color_means_equal_z0_rows():
    Z0 = build_traffic_model().global_chain.obs
    for i, j in itertools.combinations(range(9), 2):
        if LIGHT_STATES[i][0] == LIGHT_STATES[j][0]:
            assert np.array_equal(Z0[i], Z0[j])


def test_perfect_light_sensor_is_one_hot():
    Z0 = build_traffic_model(TrafficConfig(z0_correct=1.0)).global_chain.obs
    assert set(np.unique(Z0)) == {0.0, 1.0}
    assert np.array_equal(Z0[LIGHT_STATES.index(("Red", "Green"))], Z0[LIGHT_STATES.index(("Red", "Yellow"))])


def test_policy_ignores_the_other_direction():
    m = build_traffic_model(TrafficConfig(n_parallel=2, n_perpendicular=2))
    for a in m.agents:
        own = 0 if a.id <= 2 else 1
        for i, j in itertools.combinations(range(9), 2):
            if LIGHT_STATES[i][own] == LIGHT_STATES[j][own]:
                assert np.array_equal(a.policy[i], a.policy[j])
    assert not np.array_equal(m.agents[0].policy, m.agents[2].policy)


def test_stopped_car_stays_at_red_without_noise():
    m = build_traffic_model(TrafficConfig(n_parallel=1, n_perpendicular=0, compliance=1.0, velocity_noise=0.0))
    psi = m.agents[0].local_transition()
    s = LOCAL_LABELS.index("AtIntersection:None")
    for s0, (par, _) in enumerate(LIGHT_STATES):
        if par == "Red":
            assert psi[s0, s, s] == 1.0


def test_default_policy_rules():
    c = 0.9
    P = driver_policy(c)
    acc = lambda table, s, a: sum(table[LOCAL_LABELS.index(s), ACTION_LABELS.index(f"{st}:{a}")] for st in ("Left", "Straight", "Right"))  # noqa: E731
    assert acc(P["Red"], "AtIntersection:High", "Minus") == pytest.approx(c)
    assert acc(P["Red"], "AtIntersection:High", "Zero") == pytest.approx(0.09)
    assert acc(P["Red"], "AtIntersection:High", "Plus") == pytest.approx(0.01)
    assert acc(P["Red"], "AtIntersection:None", "Zero") == pytest.approx(c)
    assert acc(P["Green"], "AtIntersection:None", "Plus") == pytest.approx(c)
    row = P["Green"][LOCAL_LABELS.index("DrivingStraight:Low")]
    straight = sum(row[ACTION_LABELS.index(f"Straight:{a}")] for a in ("Minus", "Zero", "Plus"))
    assert straight == pytest.approx(c)


def test_kinematics():
    T = vehicle_transition(0.05)
    s = LOCAL_LABELS.index("AtIntersection:None")
    a = ACTION_LABELS.index("Left:Plus")
    assert T[s, a, LOCAL_LABELS.index("TurningLeft:Low")] == pytest.approx(0.95)
    assert T[s, a, s] == pytest.approx(0.05)
    hold = ACTION_LABELS.index("Right:Zero")
    assert T[s, hold, s] == 1.0
    turning = LOCAL_LABELS.index("TurningRight:High")
    for act in range(9):
        dest = np.nonzero(T[turning, act])[0]
        assert all(LOCAL_LABELS[d].startswith("TurningRight") for d in dest)


def test_shipped_policy_artifact_matches_rules():
    doc = default_policy_doc()
    assert doc["table"] == json.loads(json.dumps(policy_to_doc(driver_policy(doc["compliance"]))))


def test_policy_file_override(tmp_path):
    tables = driver_policy(0.7)
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"table": policy_to_doc(tables)}))
    m = build_traffic_model(TrafficConfig(n_parallel=1, n_perpendicular=0, policy_file=str(path)))
    assert np.allclose(m.agents[0].policy[LIGHT_STATES.index(("Red", "Green"))], tables["Red"])


@pytest.mark.parametrize(
    "kw",
    [
        {"self_stay": 0.9},
        {"compliance": 1.5},
        {"n_parallel": -1},
        {"legal_cycle": [("Green", "Red"), ("Green", "Red"), ("Red", "Green")]},
        {"initial_velocity": {"None": 0.5}},
    ],
)
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        build_traffic_model(TrafficConfig(**kw))


def test_config_from_camel_case_dict():
    cfg = TrafficConfig.from_dict({"nParallel": 2, "z0Correct": 0.9, "legalCycle": legal_cycle_default()})
    assert cfg.n_parallel == 2 and cfg.z0_correct == 0.9
    assert TrafficConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        TrafficConfig.from_dict({"lanes": 3})
