"""Certifying the structural hypotheses of an energy model.

Every run rests on a list of growth and bound hypotheses: the bulk density is
sandwiched between multiples of |grad u|^p, the stress obeys a matching
(p-1)-power bound, the toughness is a norm squeezed between K1 |nu| and
K2 |nu|, and the load potentials are controlled by their dual norms with a
positive coercivity constant on the body term.  The validator evaluates both
sides of every inequality on deterministic plus seeded random samples and
reports the constants together with the worst margin seen.

The coercivity constant deserves its own demonstration: with zero confinement
a cracked-off piece of the body feels no restoring force, the constant
vanishes, and the validator flags the model as non-conforming (a fully pinned
problem still runs, so this is a warning, not an error).
"""

from qsfrac.corpus import build_config
from qsfrac.energy import BodyPotential, EnergyModel, validate_growth

# -- a standard corpus model ---------------------------------------------------
problem = build_config("aniso_l1", 16).build_problem()
report = validate_growth(problem.model, problem.mesh, samples=2000)
print("anisotropic strip model:")
print(report.summary())
print(f"\nall hypotheses certified: {report.passed}")

k1 = report["toughness_lower"].constants["K1"]
k2 = report["toughness_upper"].constants["K2"]
print(f"toughness norm bounds: K1 = {k1:.4g}, K2 = {k2:.4g} "
      "(weighted-l1 anisotropy: cheap vertical cracks, expensive horizontal ones)")

# -- the same mesh with the confinement switched off ----------------------------
m = problem.model
slack = EnergyModel(
    bulk=m.bulk, toughness=m.toughness,
    body=BodyPotential(m.body.table, lam=0.0, q=m.body.q),
    surface=m.surface, boundary=m.boundary,
)
slack_report = validate_growth(slack, problem.mesh, samples=500)
print("\nzero-confinement variant:")
for check in slack_report.checks:
    if not check.passed:
        print(f"  {check.name}: VIOLATED  ({check.note})")
print(f"model warnings: {slack.validate(problem.mesh)}")
