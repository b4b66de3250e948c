"""Auditing a recorded evolution, and what happens to a tampered one.

An evolution is acceptable when it satisfies three defining conditions:
cracks only grow (irreversibility), no admissible crack extension lowers the
total energy (global stability), and the energy increment matches the
integrated power of the external loads (energy balance).  On top of these,
the crack set must carry a structure identity: it is exactly the initial
crack united with every jump support seen so far, and each recorded field
must close a convex-duality certificate at its own crack set.

This script certifies a brute-force record on all five counts, then doctors
one knot and watches the audits catch it.
"""

from qsfrac.audit import (
    ORACLE,
    check_energy_balance,
    check_global_stability,
    check_irreversibility,
    check_structure,
    dual_certificate,
)
from qsfrac.broken import BrokenField
from qsfrac.corpus import build_config
from qsfrac.evolution import run_evolution

problem = build_config("surface_pull", 64).build_problem()
record = run_evolution(problem.model, problem.mesh, problem.grid,
                       problem.initial_crack, problem.strategy,
                       config_hash=problem.config_hash)
print(f"surface-pull instance: crack jumps at knots {record.jump_knots()}")

print("\n-- audits of the honest record --")
print("irreversibility :", check_irreversibility(record).verdict)
balance = check_energy_balance(record, problem.model, problem.mesh)
print(f"energy balance  : {balance.result.verdict}  (gap {balance.gap:.3e})")
stability = check_global_stability(record, problem.model, problem.mesh, level=ORACLE)
print(f"global stability: {stability.result.verdict}  "
      f"(worst margin {stability.worst_margin:+.3e}, exhaustive)")
structure = check_structure(record, problem.model.boundary)
print("structure       :", structure.result.verdict)

print("\n-- duality certificates per knot (every tenth) --")
print(f"{'knot':>4s} {'t':>8s} {'annihilation':>14s} {'fenchel gap':>14s}")
for i in range(0, len(record), 10):
    cert = dual_certificate(problem.model, problem.mesh, record.cracks[i],
                            float(record.times[i]), record.fields[i])
    print(f"{i:4d} {record.times[i]:8.4f} {cert.annihilation_residual:14.3e} "
          f"{cert.fenchel_gap:14.3e}")

# --- tamper with one field and re-audit --------------------------------------
print("\n-- the same audits on a tampered record --")
bad = record.shallow_copy()
u = bad.fields[12]
vals = u.values.copy()
vals[u.topology.free_dofs] += 1e-3
bad.fields[12] = BrokenField(u.topology, vals)

stab_bad = check_global_stability(bad, problem.model, problem.mesh, level="euler")
print(f"global stability: {stab_bad.result.verdict}  ({stab_bad.result.details})")
bal_bad = check_energy_balance(bad, problem.model, problem.mesh)
print(f"energy balance  : {bal_bad.result.verdict}  ({bal_bad.result.details})")
