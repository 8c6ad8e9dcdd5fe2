import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binomtest

from qcommit.adversary import AttackStrategy
from qcommit.codec import canonical_json
from qcommit.errors import InvalidConfig
from qcommit.experiments import (
    BINDING,
    EPR_DEMO,
    HIDING,
    SWEEP,
    ExperimentConfig,
    ExperimentResult,
    derive_seed,
    estimate_hiding,
    helstrom_bound,
    load_config,
    parse_result,
    run_binding_experiment,
    run_epr_demo,
    run_experiment,
    run_sweep,
    serialize_result,
    wilson_interval,
)
from qcommit.protocol import BasisPair, ProtocolParams, UnitaryFamily
from qcommit.qcore import DensityMatrix

GRID = UnitaryFamily.parse("rot:x,y,z:16")
COMP = BasisPair.computational()


def params(m=1, alice=GRID, bob=GRID, basis=COMP):
    return ProtocolParams(basis, alice, bob, m=m)


def binding(strategy="honest", trials=2000, seed=0, **kw):
    strat = strategy if isinstance(strategy, AttackStrategy) else AttackStrategy(strategy)
    return ExperimentConfig(BINDING, params(**kw), strat, trials=trials, master_seed=seed)


# -- statistics ---------------------------------------------------------------


@given(st.integers(1, 5000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
@settings(max_examples=200)
def test_wilson_matches_scipy(kn):
    k, n = kn
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(ci.low, abs=1e-12)
    assert hi == pytest.approx(ci.high, abs=1e-12)
    assert lo <= k / n <= hi


def test_wilson_rejects_zero_trials():
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_helstrom_bound_for_equal_inputs():
    rho = DensityMatrix(np.eye(2) / 2)
    assert helstrom_bound(rho, rho) == pytest.approx(0.5, abs=1e-12)
    zero, one = DensityMatrix(np.diag([1.0, 0.0])), DensityMatrix(np.diag([0.0, 1.0]))
    assert helstrom_bound(zero, one) == pytest.approx(1.0, abs=1e-12)


def test_derive_seed_is_stable_and_path_sensitive():
    assert derive_seed(5, 6, 0) == derive_seed(5, 6, 0)
    assert len({derive_seed(5, 6, i) for i in range(100)}) == 100
    assert derive_seed(5, 6, 0) != derive_seed(6, 6, 0)


# -- binding ------------------------------------------------------------------


def test_honest_binding_is_a_fair_coin():
    r = run_binding_experiment(binding(trials=4000))
    assert abs(r.estimate - 0.5) <= 3 * math.sqrt(0.25 / 4000)
    assert r.scalar_metrics["reference"] == 0.5
    assert r.scalar_metrics["advantage"] == pytest.approx(r.estimate - 0.5)


def test_oracle_binding_always_wins():
    r = run_binding_experiment(binding("oracle", trials=500, m=2))
    assert r.successes == 500 and r.estimate == 1.0
    assert r.scalar_metrics["reference"] == 1.0


@pytest.mark.parametrize("m", [1, 2])
def test_random_substitution_matches_closed_form(m):
    r = run_binding_experiment(binding("random", trials=4000, m=m, seed=9))
    ref = 0.5 + 2.0 ** -(m + 1)
    assert r.scalar_metrics["reference"] == ref
    lo, hi = r.wilson_interval_95
    # 99.9% band so the check is not a coin flip at 95%
    assert abs(r.estimate - ref) <= 3.3 * math.sqrt(ref * (1 - ref) / 4000)
    assert lo <= r.estimate <= hi


@pytest.mark.parametrize("strategy", ["honest", "random", "oracle"])
def test_no_strategy_falls_below_the_free_floor(strategy):
    r = run_binding_experiment(binding(strategy, trials=2000, seed=4))
    assert r.estimate >= 0.5 - 3.3 * math.sqrt(0.25 / 2000)


def test_epr_binding_uses_attack_success():
    fam = UnitaryFamily.parse("rot:x:3")
    cfg = binding(AttackStrategy.epr_model(fam), trials=2000, alice=UnitaryFamily.pauli(), bob=fam)
    r = run_binding_experiment(cfg)
    assert r.scalar_metrics["attack_success"] >= 1 - 1e-9
    assert r.estimate == 1.0


def test_epr_binding_rejects_continuous_families():
    cfg = binding(AttackStrategy.epr_model(GRID), trials=10, alice=UnitaryFamily.haar())
    with pytest.raises(InvalidConfig):
        run_binding_experiment(cfg)


def test_binding_is_deterministic_and_worker_independent():
    cfg = binding("random", trials=600, m=2, seed=123)
    a = run_binding_experiment(cfg, workers=1)
    b = run_binding_experiment(cfg, workers=1)
    c = run_binding_experiment(cfg, workers=4)
    assert serialize_result(a) == serialize_result(b) == serialize_result(c)


def test_different_seeds_differ():
    a = run_binding_experiment(binding("random", trials=600, seed=1))
    b = run_binding_experiment(binding("random", trials=600, seed=2))
    assert a.successes != b.successes or a.to_dict() != b.to_dict()


# -- hiding -------------------------------------------------------------------


def test_z_grid_does_not_hide_computational_basis():
    r = estimate_hiding(params(alice=UnitaryFamily.parse("rot:z:16")), samples=500)
    assert r.scalar_metrics["trace_distance"] == pytest.approx(1.0, abs=1e-9)
    assert r.estimate == 1.0


def test_haar_alice_family_hides():
    r = estimate_hiding(params(alice=UnitaryFamily.haar()), samples=10_000)
    assert r.scalar_metrics["trace_distance"] <= 0.03
    assert r.scalar_metrics["bob_transforms_checked"] == GRID.size


def test_pauli_twirl_hides_exactly():
    r = estimate_hiding(params(alice=UnitaryFamily.pauli()), samples=200)
    assert r.scalar_metrics["trace_distance"] <= 1e-12
    assert r.scalar_metrics["helstrom_bound"] == pytest.approx(0.5)


@pytest.mark.parametrize("alice", ["rot:z:16", "rot:x:2", "rot:x,y:3", "pauli"])
def test_guessing_respects_helstrom_bound(alice):
    n = 4000
    r = estimate_hiding(params(alice=UnitaryFamily.parse(alice)), samples=n, master_seed=3)
    bound = r.scalar_metrics["helstrom_bound"]
    assert r.estimate <= bound + 3 * math.sqrt(0.25 / n)


def test_haar_bob_family_is_sampled():
    r = estimate_hiding(params(alice=UnitaryFamily.pauli(), bob=UnitaryFamily.haar()), samples=100)
    assert r.scalar_metrics["bob_transforms_checked"] == 64


# -- EPR demo ------------------------------------------------------------------


def test_epr_demo_correct_assumption():
    fam = UnitaryFamily.parse("rot:x,y,z:4")
    r = run_epr_demo(UnitaryFamily.pauli(), fam, fam, COMP, trials=1000)
    assert r.kind == EPR_DEMO
    assert r.scalar_metrics["hiding_td"] <= 1e-9
    assert r.scalar_metrics["residual"] <= 1e-6
    assert r.estimate == 1.0


def test_epr_demo_mismatch():
    r = run_epr_demo(UnitaryFamily.pauli(), UnitaryFamily.parse("rot:x:3"), UnitaryFamily.parse("rot:y:3"), COMP,
                     trials=4000)
    p = r.scalar_metrics["attack_success"]
    assert p < 0.5
    assert abs(r.estimate - p) <= 3.3 * math.sqrt(p * (1 - p) / 4000)


def test_epr_demo_requires_epr_strategy():
    with pytest.raises(InvalidConfig):
        ExperimentConfig(EPR_DEMO, params(), AttackStrategy("honest"))


# -- sweeps -------------------------------------------------------------------


def test_sweep_over_m_decreases_for_random_substitution():
    cfg = ExperimentConfig(SWEEP, params(), AttackStrategy("random"), trials=3000, master_seed=1,
                           sweep_axis=("m", (1, 2, 3, 4)), base_kind=BINDING)
    results = run_sweep(cfg)
    refs = [r.scalar_metrics["reference"] for r in results]
    assert refs == sorted(refs, reverse=True)
    assert [r.config.params.m for r in results] == [1, 2, 3, 4]
    assert results[0].estimate > results[-1].estimate


def test_single_point_sweep_equals_direct_run():
    cfg = ExperimentConfig(SWEEP, params(), AttackStrategy("random"), trials=400, master_seed=17,
                           sweep_axis=("m", (2,)), base_kind=BINDING)
    [point] = run_experiment(cfg)
    direct = run_binding_experiment(binding("random", trials=400, m=2, seed=derive_seed(17, 6, 0)))
    assert point.to_dict() == direct.to_dict()


def test_sweep_over_families_and_basis():
    cfg = ExperimentConfig(SWEEP, params(alice=UnitaryFamily.pauli()), trials=100, master_seed=0,
                           sweep_axis=("alice_family", ("rot:z:16", "pauli")), base_kind=HIDING)
    same = cfg.replace(sweep_axis=("alice_family", (UnitaryFamily.parse("rot:z:16"), UnitaryFamily.pauli())))
    assert same.sweep_axis == cfg.sweep_axis
    tds = [r.scalar_metrics["trace_distance"] for r in run_sweep(cfg)]
    assert tds[0] == pytest.approx(1.0) and tds[1] <= 1e-12
    cfg = cfg.replace(sweep_axis=("basis", ("computational", "hadamard")))
    assert len(run_sweep(cfg)) == 2


def test_sweep_is_deterministic():
    cfg = ExperimentConfig(SWEEP, params(), AttackStrategy("random"), trials=200, master_seed=5,
                           sweep_axis=("trials", (100, 200)), base_kind=BINDING)
    assert serialize_result(run_sweep(cfg), "csv") == serialize_result(run_sweep(cfg), "csv")


def test_sweep_config_validation():
    with pytest.raises(InvalidConfig):
        ExperimentConfig(SWEEP, params(), sweep_axis=("m", (1,)))
    with pytest.raises(InvalidConfig):
        ExperimentConfig(SWEEP, params(), sweep_axis=("colour", (1,)), base_kind=BINDING)
    with pytest.raises(InvalidConfig):
        ExperimentConfig(SWEEP, params(), sweep_axis=("m", ()), base_kind=BINDING)
    with pytest.raises(InvalidConfig):
        ExperimentConfig(BINDING, params(), sweep_axis=("m", (1,)))


# -- config and serialization -------------------------------------------------


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ExperimentConfig("poker", params())
    with pytest.raises(InvalidConfig):
        ExperimentConfig(BINDING, params(), trials=0)
    with pytest.raises(InvalidConfig):
        ExperimentConfig(BINDING, params(), master_seed=-1)
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({"kind": BINDING})


def test_config_round_trip_and_echo():
    cfg = binding(AttackStrategy.epr_model(UnitaryFamily.parse("rot:y:3")), trials=10, seed=99, m=3)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.echo() == canonical_json(cfg.to_dict())
    assert "\n" not in cfg.echo()


def test_load_config(tmp_path):
    cfg = binding("oracle", trials=7, seed=3)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "bad.json")
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "missing.json")


def test_structured_text_round_trip():
    r = run_binding_experiment(binding("random", trials=300))
    text = serialize_result(r)
    back = parse_result(text)
    assert isinstance(back, ExperimentResult)
    assert back.to_dict() == r.to_dict()
    assert back.config == r.config
    assert serialize_result(back) == text


def test_csv_layout_and_precision():
    r = run_epr_demo(UnitaryFamily.pauli(), UnitaryFamily.parse("rot:x:3"), UnitaryFamily.parse("rot:y:3"), COMP,
                     trials=321)
    rows = list(csv.reader(io.StringIO(serialize_result(r, "csv"))))
    assert rows[0] == ["kind", "strategy", "m", "trials", "estimate", "ci_lo", "ci_hi",
                       "attack_success", "hiding_td", "residual"]
    row = dict(zip(rows[0], rows[1]))
    assert row["kind"] == "epr-demo" and row["strategy"] == "epr-model" and row["trials"] == "321"
    assert float(row["attack_success"]) == r.scalar_metrics["attack_success"]
    assert float(row["estimate"]) == r.estimate


def test_unknown_format_rejected():
    r = run_binding_experiment(binding(trials=10))
    with pytest.raises(InvalidConfig):
        serialize_result(r, "xml")
