"""One-sided crack envelopes around a nucleation event.

The crack history is a monotone step function of time, so it has one-sided
limits everywhere.  Replacing the state at each jump knot by the minimizer on
the limit-from-below crack yields the left-continuous envelope; the limit
from above yields the right-continuous one.  Both are again acceptable
histories (cracks still only grow, the structure identity still holds), and
away from jump knots nothing changes at all.  Per knot the three crack sets
nest: left envelope inside the original inside the right envelope.
"""

from qsfrac.audit import check_irreversibility, check_structure
from qsfrac.corpus import build_config
from qsfrac.evolution import left_envelope, right_envelope, run_evolution

problem = build_config("precracked", 64).build_problem()
record = run_evolution(problem.model, problem.mesh, problem.grid,
                       problem.initial_crack, problem.strategy,
                       config_hash=problem.config_hash)
jumps = record.jump_knots()
print(f"pre-cracked pair instance: initial crack {list(record.cracks[0])}, "
      f"jump knots C = {jumps}")

left = left_envelope(record, problem.model, problem.mesh)
right = right_envelope(record, problem.model, problem.mesh)

j = jumps[0]
print(f"\naround the jump knot {j} (t = {record.times[j]:.4f}):")
for i in range(j - 2, j + 3):
    print(f"  knot {i:3d}: left {str(list(left.cracks[i])):>10s}  "
          f"original {str(list(record.cracks[i])):>10s}  "
          f"right {str(list(right.cracks[i])):>10s}")

for name, env in (("left", left), ("right", right)):
    irr = check_irreversibility(env).verdict
    st = check_structure(env, problem.model.boundary).result.verdict
    moved = [i for i in range(len(record)) if env.cracks[i] != record.cracks[i]]
    print(f"\n{name} envelope: irreversibility {irr}, structure {st}; "
          f"knots replaced: {moved}")
    drift = max(
        abs(env.total_energy(i) - record.total_energy(i))
        for i in range(len(record)) if i not in moved
    )
    print(f"  energy drift away from replaced knots: {drift:.3e}")

sandwich = all(
    left.cracks[i].issubset(record.cracks[i]) and record.cracks[i].issubset(right.cracks[i])
    for i in range(len(record))
)
print(f"\nsandwich inclusion (left <= original <= right) at every knot: {sandwich}")
