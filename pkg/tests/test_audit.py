import numpy as np
import pytest

from qsfrac.audit import (
    EULER,
    ONE_EDGE,
    ORACLE,
    AuditError,
    check_energy_balance,
    check_global_stability,
    check_irreversibility,
    check_structure,
    dual_certificate,
    stress_continuity_probe,
)
from qsfrac.broken import BrokenField, CrackSet
from qsfrac.corpus import build_config, strip_crackfree
from qsfrac.config import parse_config
from qsfrac.energy import TimeTable, Toughness, elastic_energy
from qsfrac.evolution import (
    BRUTE_FORCE,
    GREEDY,
    SearchStrategy,
    TimeGrid,
    run_evolution,
)
from qsfrac.minimize import minimize_elastic

from conftest import make_model, make_strip_mesh


@pytest.fixture(scope="module")
def crackfree_run():
    p = parse_config(strip_crackfree(64)).build_problem()
    rec = run_evolution(p.model, p.mesh, p.grid, p.initial_crack, p.strategy,
                        config_hash=p.config_hash)
    return p, rec


def doctor(record):
    return record.shallow_copy()


# ---------------------------------------------------------------------------
# irreversibility
# ---------------------------------------------------------------------------

def test_irreversibility_passes_on_monotone_record(strip_record):
    assert check_irreversibility(strip_record).verdict == "PASS"


def test_irreversibility_names_the_offending_knot(strip_problem, strip_record):
    bad = doctor(strip_record)
    j = bad.jump_knots()[0]
    bad.cracks[j + 2] = CrackSet.empty()  # an edge disappears two knots later
    res = check_irreversibility(bad)
    assert res.verdict == "FAIL"
    assert f"knot {j + 2}" in res.details


def test_irreversibility_single_knot_record(strip_problem, strip_record):
    solo = doctor(strip_record)
    solo.grid = TimeGrid(np.array([0.0]))
    solo.cracks = solo.cracks[:1]
    solo.fields = solo.fields[:1]
    solo.energies = solo.energies[:1]
    solo.powers = solo.powers[:1]
    assert check_irreversibility(solo).verdict == "PASS"


# ---------------------------------------------------------------------------
# energy balance
# ---------------------------------------------------------------------------

def test_balance_zero_loads_exact(corpus_runs):
    p, rec = corpus_runs["zero_load"]
    bal = check_energy_balance(rec, p.model, p.mesh)
    assert bal.gap == 0.0
    assert bal.result.verdict == "PASS"


def test_balance_detects_tampered_energies(strip_problem, strip_record):
    bad = doctor(strip_record)
    bad.energies[5] = dict(bad.energies[5], total=bad.energies[5]["total"] + 1e-6)
    bal = check_energy_balance(bad, strip_problem.model, strip_problem.mesh)
    assert bal.result.verdict == "FAIL"
    assert "knot 5" in bal.result.details


def test_balance_first_order_gap_halves_under_refinement():
    gaps = {}
    for knots in (64, 128):
        p = build_config("strip", knots).build_problem()
        rec = run_evolution(p.model, p.mesh, p.grid, p.initial_crack, p.strategy)
        excl = tuple(j - 1 for j in rec.jump_knots())
        gaps[knots] = check_energy_balance(rec, p.model, p.mesh,
                                           exclude_intervals=excl).gap
    ratio = gaps[64] / gaps[128]
    assert 1.6 <= ratio <= 2.4


def test_balance_crackfree_near_exact(crackfree_run):
    p, rec = crackfree_run
    bal = check_energy_balance(rec, p.model, p.mesh)
    assert bal.gap <= 1e-8 * (1.0 + abs(rec.total_energy(len(rec) - 1)))


def test_balance_exclusion_removes_the_nucleation_spike(strip_problem, strip_record):
    p, rec = strip_problem, strip_record
    full = check_energy_balance(rec, p.model, p.mesh)
    j = rec.jump_knots()[0]
    excl = check_energy_balance(rec, p.model, p.mesh, exclude_intervals=(j - 1,))
    assert excl.gap < full.gap
    assert np.argmax(np.abs(full.interval_mismatch)) == j - 1


# ---------------------------------------------------------------------------
# global stability
# ---------------------------------------------------------------------------

def test_oracle_stability_certifies_brute_force_records(strip_problem, strip_record):
    res = check_global_stability(strip_record, strip_problem.model, strip_problem.mesh,
                                 level=ORACLE)
    assert res.result.verdict == "PASS"
    e0 = abs(strip_record.total_energy(0))
    assert res.worst_margin >= -1e-9 * (1.0 + e0)


def test_euler_level_flags_suboptimal_fields(strip_problem, strip_record):
    bad = doctor(strip_record)
    u = bad.fields[7]
    vals = u.values.copy()
    vals[u.topology.free_dofs] += 1e-3
    bad.fields[7] = BrokenField(u.topology, vals)
    res = check_global_stability(bad, strip_problem.model, strip_problem.mesh, level=EULER)
    assert res.result.verdict == "FAIL"
    assert "knot 7" in res.result.details


def test_certification_hierarchy_on_cooperative_instance(corpus_runs):
    # greedy stalls where only the pair pays off: the single-edge necessary
    # condition holds but the exhaustive check exposes the missed extension
    p, _ = corpus_runs["pair"]
    greedy = run_evolution(p.model, p.mesh, p.grid, p.initial_crack,
                           SearchStrategy(GREEDY))
    one_edge = check_global_stability(greedy, p.model, p.mesh, level=ONE_EDGE)
    assert one_edge.level_passed
    assert one_edge.result.verdict == "INCONCLUSIVE"  # necessary conditions only
    oracle = check_global_stability(greedy, p.model, p.mesh, level=ORACLE)
    assert oracle.result.verdict == "FAIL"
    assert oracle.violations
    knot, edges, margin = oracle.violations[0]
    assert set(edges) == {4, 11}
    assert margin < 0


def test_certificate_ordering(corpus_runs, strip_problem, strip_record):
    # oracle PASS implies the weaker levels pass on the same record
    for name in ("strip", "pair", "surface_pull"):
        p, rec = corpus_runs[name]
        oracle = check_global_stability(rec, p.model, p.mesh, level=ORACLE)
        assert oracle.result.verdict == "PASS"
        assert check_global_stability(rec, p.model, p.mesh, level=ONE_EDGE).level_passed
        assert check_global_stability(rec, p.model, p.mesh, level=EULER).level_passed
    # and a record failing a weak level fails every stronger one
    bad = doctor(strip_record)
    u = bad.fields[3]
    vals = u.values.copy()
    vals[u.topology.free_dofs] += 5e-2
    bad.fields[3] = BrokenField(u.topology, vals)
    bad.energies[3] = _recomputed_row(strip_problem, bad, 3)
    for level in (EULER, ONE_EDGE, ORACLE):
        assert not check_global_stability(bad, strip_problem.model, strip_problem.mesh,
                                          level=level).level_passed


def _recomputed_row(problem, record, i):
    from qsfrac.energy import surface_energy

    el, parts = elastic_energy(problem.model, problem.mesh, float(record.times[i]),
                               record.fields[i])
    es = surface_energy(problem.model.toughness, problem.mesh, record.cracks[i])
    return {"W": parts["W"], "Es": es, "F": parts["F"], "G": parts["G"], "total": el + es}


def test_oracle_refuses_oversized_instances(strip_problem, strip_record):
    with pytest.raises(AuditError, match="limit"):
        check_global_stability(strip_record, strip_problem.model, strip_problem.mesh,
                               level=ORACLE, max_oracle_edges=0)


# ---------------------------------------------------------------------------
# structure identity
# ---------------------------------------------------------------------------

def test_structure_zero_load(corpus_runs):
    p, rec = corpus_runs["zero_load"]
    res = check_structure(rec, p.model.boundary)
    assert res.result.verdict == "PASS"
    assert all(len(s) == 0 for s in res.jump_sets)


def test_structure_nucleation_opens_at_the_jump_knot(strip_problem, strip_record):
    res = check_structure(strip_record, strip_problem.model.boundary)
    assert res.result.verdict == "PASS"
    j = strip_record.jump_knots()[0]
    assert res.jump_sets[j].edge_ids == (4,)
    assert all(len(s) == 0 for s in res.jump_sets[:j])


def test_structure_flags_never_opening_edges(strip_problem, strip_record):
    bad = doctor(strip_record)
    # claim the edge cracked two knots early, while the stored fields are
    # still continuous there: the set identity must fail at those knots
    j = bad.jump_knots()[0]
    bad.cracks[j - 2] = CrackSet.of([4])
    bad.cracks[j - 1] = CrackSet.of([4])
    res = check_structure(bad, strip_problem.model.boundary)
    assert res.result.verdict == "FAIL"
    assert res.never_opened[j - 2] == (4,)
    assert f"knot {j - 2}" in res.result.details


# ---------------------------------------------------------------------------
# duality certificates
# ---------------------------------------------------------------------------

def test_dual_certificate_zero_state():
    mesh = make_strip_mesh()
    model = make_model(mesh, psi=TimeTable.constant(0.0, mesh.n_vertices))
    u, _ = minimize_elastic(model, mesh, CrackSet.empty(), 0.5)
    cert = dual_certificate(model, mesh, CrackSet.empty(), 0.5, u)
    assert cert.annihilation_residual == 0.0
    assert cert.fenchel_gap == 0.0


def test_dual_certificate_at_solver_tolerance(strip_problem, strip_record):
    p, rec = strip_problem, strip_record
    for i in (0, 10, rec.jump_knots()[0], len(rec) - 1):
        cert = dual_certificate(p.model, p.mesh, rec.cracks[i], float(rec.times[i]),
                                rec.fields[i])
        assert cert.annihilation_residual <= 1e-8
        assert abs(cert.fenchel_gap) <= 1e-8 * (1.0 + abs(cert.primal_value))
        assert cert.post_residual <= 1e-12


def test_dual_certificate_quadratic_growth(strip_problem, strip_record):
    p, rec = strip_problem, strip_record
    i = len(rec) - 1
    u = rec.fields[i]
    rng = np.random.default_rng(31)
    v = np.zeros(u.topology.n_dofs)
    v[u.topology.free_dofs] = rng.normal(size=u.topology.n_free)
    v /= np.linalg.norm(v)
    deltas = np.logspace(-4, -2, 5)
    gaps, resids = [], []
    for d in deltas:
        cert = dual_certificate(p.model, p.mesh, rec.cracks[i], float(rec.times[i]),
                                BrokenField(u.topology, u.values + d * v))
        gaps.append(cert.fenchel_gap)
        resids.append(cert.annihilation_residual)
    slope_gap = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    slope_res = np.polyfit(np.log(deltas), np.log(resids), 1)[0]
    assert abs(slope_gap - 2.0) <= 0.1
    assert abs(slope_res - 1.0) <= 0.1


def test_dual_certificate_bounds_the_suboptimality(strip_problem, strip_record):
    # the projected certificate proves: elastic(w) >= elastic(u) - gap for all
    # admissible w; spot-check against random admissible fields
    p, rec = strip_problem, strip_record
    i = 20
    u = rec.fields[i]
    t = float(rec.times[i])
    vals = u.values.copy()
    rng = np.random.default_rng(32)
    vals[u.topology.free_dofs] += 1e-3 * rng.normal(size=u.topology.n_free)
    ud = BrokenField(u.topology, vals)
    cert = dual_certificate(p.model, p.mesh, rec.cracks[i], t, ud)
    e_d, _ = elastic_energy(p.model, p.mesh, t, ud)
    for _ in range(20):
        w_vals = u.values.copy()
        w_vals[u.topology.free_dofs] += rng.normal(size=u.topology.n_free)
        e_w, _ = elastic_energy(p.model, p.mesh, t, BrokenField(u.topology, w_vals))
        assert e_w >= e_d - cert.fenchel_gap - 1e-12 * (1 + abs(e_w))


def test_dual_certificate_newton_instance(corpus_runs):
    p, rec = corpus_runs["quartic"]
    i = len(rec) - 1
    cert = dual_certificate(p.model, p.mesh, rec.cracks[i], float(rec.times[i]),
                            rec.fields[i])
    assert cert.annihilation_residual <= 1e-8
    assert abs(cert.fenchel_gap) <= 1e-8 * (1.0 + abs(cert.primal_value))


# ---------------------------------------------------------------------------
# stress/deformation continuity probe
# ---------------------------------------------------------------------------

def test_probe_static_loads_all_zero():
    mesh = make_strip_mesh()
    model = make_model(mesh, psi=TimeTable.constant(0.0, mesh.n_vertices),
                       kappa=Toughness("isotropic", (1e9,)))
    rec = run_evolution(model, mesh, TimeGrid.uniform(1.0, 9), CrackSet.empty(),
                        SearchStrategy(BRUTE_FORCE))
    probe = stress_continuity_probe(rec, model, mesh, t_index=8, window=4)
    assert probe.verdict == "PASS"
    for row in probe.rows:
        for col in ("stress_dual", "gradient", "body", "trace"):
            assert row[col] == 0.0


def test_probe_linear_ramp_exactly_linear(crackfree_run):
    p, rec = crackfree_run
    probe = stress_continuity_probe(rec, p.model, p.mesh, t_index=50, window=5)
    assert probe.verdict == "PASS"
    for col in ("stress_dual", "gradient", "body"):
        d = [row[col] for row in probe.rows[:3]]
        assert abs(d[1] - 0.5 * (d[0] + d[2])) <= 1e-10


def test_probe_straddling_a_jump_is_inconclusive(strip_problem, strip_record):
    j = strip_record.jump_knots()[0]
    probe = stress_continuity_probe(strip_record, strip_problem.model,
                                    strip_problem.mesh, t_index=j + 2, window=5)
    assert probe.verdict == "INCONCLUSIVE"
    assert "hypothesis" in probe.result.details
