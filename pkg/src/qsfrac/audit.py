"""Audits of recorded evolutions: the defining conditions and certificates.

A recorded evolution is certified against the three defining conditions —
irreversibility (crack sets only grow), global stability (no crack extension
with a compatible field lowers the total energy), and energy balance (the
energy increment matches the integrated power of the external loadings) —
plus the structure identity (the crack equals the initial crack united with
all past jump supports) and two convex-duality certificates.

Stability is checked at three levels forming a hierarchy:

* ``euler``    stationarity of each recorded field at its own crack set,
* ``one_edge`` additionally no single-edge extension pays off,
* ``oracle``   additionally no extension whatsoever pays off (exhaustive
               enumeration, small instances only).

Each level includes the previous ones, so an oracle PASS implies the weaker
levels pass.  The euler and one-edge levels are necessary conditions only;
when they succeed the verdict is INCONCLUSIVE (with ``level_passed`` set),
while an exhaustive success is a genuine PASS.

All checks are read-only over immutable records; candidate evaluations are
independent and may run on worker threads with a deterministic reduction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from ._util import parallel_map
from .broken import BrokenField, CrackSet, jump_support, trace_on_surface_part
from .energy import (
    BoundaryProgram,
    EnergyModel,
    body_conjugate_density,
    body_value_and_gradient,
    bulk_conjugate_density,
    elastic_energy,
    lq_norm_tri,
    lr_norm_surface,
    stress,
    surface_energy,
    surface_value_and_gradient,
)
from .evolution import EvolutionRecord, net_power, tie_tolerance
from .mesh import Mesh, crackable_edges
from .minimize import ElasticSolver, assemble_forms, assemble_gradient, euler_residual

__all__ = [
    "AuditError",
    "CheckResult",
    "AuditReport",
    "check_irreversibility",
    "BalanceResult",
    "check_energy_balance",
    "StabilityResult",
    "check_global_stability",
    "StructureResult",
    "check_structure",
    "DualCertificate",
    "dual_certificate",
    "ProbeResult",
    "stress_continuity_probe",
    "EULER",
    "ONE_EDGE",
    "ORACLE",
]

EULER = "euler"
ONE_EDGE = "one_edge"
ORACLE = "oracle"
_LEVELS = (EULER, ONE_EDGE, ORACLE)

_RESIDUAL_TOL = 1e-8
_RECOMPUTE_RTOL = 1e-12


class AuditError(ValueError):
    """An audit could not run as requested (not a verdict)."""


@dataclass
class CheckResult:
    name: str
    verdict: str                  # PASS / FAIL / INCONCLUSIVE
    margins: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    details: str = ""

    @property
    def failed(self) -> bool:
        return self.verdict == "FAIL"


@dataclass
class AuditReport:
    results: list[CheckResult]

    def ok(self, inconclusive_ok: bool = True) -> bool:
        for r in self.results:
            if r.verdict == "FAIL":
                return False
            if r.verdict == "INCONCLUSIVE" and not inconclusive_ok:
                return False
        return True

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"[{r.verdict:12s}] {r.name}")
            for k, v in r.margins.items():
                lines.append(f"    {k} = {v:.6e}")
            for k, v in r.tolerances.items():
                lines.append(f"    tol {k} = {v:.3e}")
            if r.details:
                lines.append(f"    {r.details}")
        return "\n".join(lines)

    def to_payload(self) -> dict:
        return {
            "checks": [
                {
                    "name": r.name,
                    "verdict": r.verdict,
                    "margins": {k: float(v) for k, v in r.margins.items()},
                    "tolerances": {k: float(v) for k, v in r.tolerances.items()},
                    "details": r.details,
                }
                for r in self.results
            ],
        }


# ---------------------------------------------------------------------------
# irreversibility
# ---------------------------------------------------------------------------

def check_irreversibility(record: EvolutionRecord) -> CheckResult:
    """PASS iff the crack set at each knot contains the previous one exactly."""
    for i in range(1, len(record)):
        if not record.cracks[i - 1].issubset(record.cracks[i]):
            lost = sorted(record.cracks[i - 1].as_set() - record.cracks[i].as_set())
            return CheckResult(
                "irreversibility", "FAIL",
                details=f"knot {i}: edges {lost} left the crack set",
            )
    return CheckResult("irreversibility", "PASS")


# ---------------------------------------------------------------------------
# energy balance
# ---------------------------------------------------------------------------

@dataclass
class BalanceResult:
    gap: float
    interval_mismatch: np.ndarray   # |dE_i - trapezoid_i| per interval, signed
    deviations: np.ndarray          # cumulative deviation per knot
    excluded: tuple[int, ...]
    result: CheckResult


def check_energy_balance(record: EvolutionRecord, model: EnergyModel, mesh: Mesh,
                         exclude_intervals: tuple[int, ...] = (),
                         tol: float | None = None) -> BalanceResult:
    """Compare energy increments with the trapezoid rule on the power samples.

    The gap is the largest magnitude, over knots, of the accumulated
    difference between the stored total energy relative to the initial one
    and the integrated net power.  ``exclude_intervals`` removes individual
    interval contributions (e.g. the single interval where a crack jump makes
    the power samples one-sided).  Stored energy components are first
    recomputed from the fields; a mismatch beyond 1e-12 relative is a FAIL on
    its own (the record does not describe the model it claims to).
    """
    n = len(record)
    times = record.times
    # recomputation guard: the record must be consistent with the model
    for i in range(n):
        el, parts = elastic_energy(model, mesh, float(times[i]), record.fields[i])
        es = surface_energy(model.toughness, mesh, record.cracks[i])
        total = el + es
        stored = record.total_energy(i)
        if abs(total - stored) > _RECOMPUTE_RTOL * (1.0 + abs(total)):
            res = CheckResult(
                "energy_balance", "FAIL",
                margins={"recompute_mismatch": abs(total - stored)},
                tolerances={"recompute_rtol": _RECOMPUTE_RTOL},
                details=f"stored total energy at knot {i} does not match the model",
            )
            return BalanceResult(np.inf, np.zeros(max(n - 1, 0)), np.zeros(n), tuple(exclude_intervals), res)

    powers = np.asarray([net_power(p) for p in record.powers])
    totals = np.asarray([record.total_energy(i) for i in range(n)])
    dt = np.diff(times)
    trap = 0.5 * dt * (powers[:-1] + powers[1:])
    mismatch = np.diff(totals) - trap
    mask = np.ones(len(mismatch), dtype=bool)
    for i in exclude_intervals:
        if 0 <= i < len(mismatch):
            mask[i] = False
    deviations = np.concatenate([[0.0], np.cumsum(np.where(mask, mismatch, 0.0))])
    gap = float(np.max(np.abs(deviations))) if n else 0.0

    if tol is None:
        tol = 5e-3 * (1.0 + abs(totals[-1])) if n else 5e-3
    verdict = "PASS" if gap <= tol else "FAIL"
    res = CheckResult(
        "energy_balance", verdict,
        margins={"gap": gap, "worst_interval": float(np.max(np.abs(np.where(mask, mismatch, 0.0)))) if len(mismatch) else 0.0},
        tolerances={"gap": tol},
        details=f"{len(exclude_intervals)} interval(s) excluded" if exclude_intervals else "",
    )
    return BalanceResult(gap, mismatch, deviations, tuple(exclude_intervals), res)


# ---------------------------------------------------------------------------
# global stability
# ---------------------------------------------------------------------------

@dataclass
class StabilityResult:
    level: str
    level_passed: bool
    worst_margin: float
    worst_knot: int
    max_euler_residual: float
    violations: list[tuple[int, tuple, float]]   # (knot, crack edge ids, margin)
    result: CheckResult


def check_global_stability(record: EvolutionRecord, model: EnergyModel, mesh: Mesh,
                           level: str = ORACLE, residual_tol: float = _RESIDUAL_TOL,
                           max_oracle_edges: int = 12,
                           _solver: ElasticSolver | None = None) -> StabilityResult:
    """Check the minimality of every recorded state at its own time.

    The margin of a candidate extension is (candidate total energy) minus the
    recorded total; stability requires every margin to stay above
    -1e-9 * (1 + |E|).  See the module docstring for the level hierarchy and
    the PASS/INCONCLUSIVE semantics.
    """
    if level not in _LEVELS:
        raise AuditError(f"unknown stability level {level!r}; expected one of {_LEVELS}")
    solver = _solver or ElasticSolver(model, mesh)
    n = len(record)
    crackable = [int(e) for e in crackable_edges(mesh)]

    max_resid = 0.0
    worst_resid_knot = -1
    for i in range(n):
        r = euler_residual(model, mesh, record.cracks[i], float(record.times[i]), record.fields[i])
        if r > max_resid:
            max_resid, worst_resid_knot = r, i
    euler_ok = max_resid <= residual_tol

    violations: list[tuple[int, tuple, float]] = []
    worst_margin = np.inf
    worst_knot = -1

    if level in (ONE_EDGE, ORACLE):
        for i in range(n):
            t = float(record.times[i])
            base = record.cracks[i]
            e_rec = record.total_energy(i)
            tol_i = tie_tolerance(e_rec)
            cand_edges = [e for e in crackable if e not in base]
            if level == ORACLE:
                if len(cand_edges) > max_oracle_edges:
                    raise AuditError(
                        f"oracle stability over {len(cand_edges)} candidate edges exceeds "
                        f"the limit {max_oracle_edges}; use level one_edge or raise the limit"
                    )
                extensions = [base]
                for size in range(1, len(cand_edges) + 1):
                    extensions.extend(base.union(s) for s in itertools.combinations(cand_edges, size))
            else:
                extensions = [base] + [base.union((e,)) for e in cand_edges]

            def cand_total(crack: CrackSet, _t=t) -> float:
                _, rep = solver.solve(crack, _t)
                return rep.energy + surface_energy(model.toughness, mesh, crack)

            energies = parallel_map(cand_total, extensions)
            for crack, e_cand in zip(extensions, energies):
                margin = e_cand - e_rec
                if margin < worst_margin:
                    worst_margin, worst_knot = margin, i
                if margin < -tol_i:
                    violations.append((i, crack.edge_ids, float(margin)))

    level_passed = euler_ok and not violations
    if not level_passed:
        verdict = "FAIL"
    else:
        verdict = "PASS" if level == ORACLE else "INCONCLUSIVE"

    detail = ""
    if not euler_ok:
        detail = f"euler residual {max_resid:.3e} at knot {worst_resid_knot} exceeds {residual_tol:.1e}"
    elif violations:
        k, ids, m = violations[0]
        detail = f"knot {k}: extending to {list(ids)} lowers the energy by {-m:.3e}"
    elif verdict == "INCONCLUSIVE":
        detail = f"necessary conditions at level {level} passed; not an exhaustive certificate"

    res = CheckResult(
        f"global_stability[{level}]", verdict,
        margins={"worst_margin": float(worst_margin if worst_margin < np.inf else 0.0),
                 "max_euler_residual": max_resid},
        tolerances={"residual": residual_tol, "tie": tie_tolerance(record.total_energy(0)) if n else 0.0},
        details=detail,
    )
    return StabilityResult(
        level=level, level_passed=level_passed,
        worst_margin=float(worst_margin if worst_margin < np.inf else 0.0),
        worst_knot=worst_knot, max_euler_residual=max_resid,
        violations=violations, result=res,
    )


# ---------------------------------------------------------------------------
# structure of the crack set
# ---------------------------------------------------------------------------

@dataclass
class StructureResult:
    never_opened: dict[int, tuple]   # knot -> edges cracked but never jumped so far
    jump_sets: list[CrackSet]
    result: CheckResult


def check_structure(record: EvolutionRecord, boundary: BoundaryProgram,
                    tol: float | None = None) -> StructureResult:
    """Verify that each crack set equals the initial crack united with all
    past jump supports, as exact edge sets.

    Jumps outside the crack set are impossible by construction of the broken
    space and are asserted; the informative failure mode is an edge that was
    cracked but never opened.
    """
    if tol is None:
        tol = 1e-9 * (1.0 + boundary.max_abs())
    cum = record.cracks[0].as_set()
    never: dict[int, tuple] = {}
    jump_sets: list[CrackSet] = []
    for i in range(len(record)):
        psi = boundary.value(float(record.times[i]))
        s = jump_support(record.fields[i], psi, tol)
        jump_sets.append(s)
        assert s.issubset(record.cracks[i]), "jump outside the crack set"
        cum |= s.as_set()
        missing = record.cracks[i].as_set() - cum
        if missing:
            never[i] = tuple(sorted(missing))
    if never:
        first = min(never)
        res = CheckResult(
            "structure_identity", "FAIL",
            tolerances={"jump": tol},
            details=f"knot {first}: cracked edges {list(never[first])} never opened",
        )
    else:
        res = CheckResult("structure_identity", "PASS", tolerances={"jump": tol})
    return StructureResult(never, jump_sets, res)


# ---------------------------------------------------------------------------
# duality certificates
# ---------------------------------------------------------------------------

@dataclass
class DualCertificate:
    annihilation_residual: float   # dual norm of the raw stress triple on the variations
    fenchel_gap: float             # duality gap of the projected triple (>= 0)
    projection_norm: float         # size of the feasibility correction
    post_residual: float           # annihilation defect after projection (rounding only)
    primal_value: float


def dual_certificate(model: EnergyModel, mesh: Mesh, crack: CrackSet, t: float,
                     u: BrokenField) -> DualCertificate:
    """Certify minimality of ``u`` at fixed crack via the dual problem.

    The stress triple (bulk stress, minus body-force density, minus
    surface-force density) of an exact minimizer annihilates every admissible
    variation, and its pointwise convex conjugates close the duality gap.
    For an approximate minimizer the triple is first corrected by the
    minimum-norm shift that restores exact annihilation (a small SPD solve);
    the resulting gap bounds the primal suboptimality:

        elastic(w) >= elastic(u) - gap   for every admissible w.

    Both certificates vanish quadratically as the solver residual goes to
    zero.
    """
    if u.topology.crack != crack:
        raise ValueError("field was built on a different crack set")
    topo = u.topology
    free = topo.free_dofs
    area = mesh.tri_area
    tri = np.arange(mesh.n_triangles)

    grads = u.gradients()
    zbar = u.tri_means()
    sig1 = stress(model.bulk, tri, grads)
    _, f_dens = body_value_and_gradient(model.body, t, u)
    sig2 = -f_dens
    ids = mesh.surface_edges
    trace = trace_on_surface_part(u)
    _, g_dens = surface_value_and_gradient(model.surface, t, trace, mesh)
    sig3 = -g_dens

    rho = assemble_gradient(model, mesh, t, u)[free]
    residual = float(np.linalg.norm(rho))

    # minimum-norm correction of (sig1, sig2) restoring exact annihilation
    use_mass = model.body.lam > 0.0
    gram = assemble_forms(mesh, topo, area**2, area**2 if use_mass else 0.0)
    gram_ff = gram[free][:, free]
    if len(free):
        if gram_ff.shape[0] <= 200:
            y = scipy.linalg.solve(gram_ff.toarray(), -rho, assume_a="pos")
        else:
            y = scipy.sparse.linalg.spsolve(gram_ff.tocsc(), -rho)
    else:
        y = np.zeros(0)
    yfull = np.zeros(topo.n_dofs)
    yfull[free] = y
    yfield = BrokenField(topo, yfull)
    dsig1 = area[:, None] * yfield.gradients()
    dsig2 = area * yfield.tri_means() if use_mass else np.zeros(mesh.n_triangles)
    sig1_hat = sig1 + dsig1
    sig2_hat = sig2 + dsig2
    correction = float(np.sqrt(np.sum(dsig1**2) + np.sum(dsig2**2)))

    post = _pair_triple(mesh, topo, sig1_hat, sig2_hat, sig3)[free]
    post_residual = float(np.linalg.norm(post))

    primal, _ = elastic_energy(model, mesh, t, u)
    conj = float(np.sum(area * bulk_conjugate_density(model.bulk, tri, sig1_hat)))
    conj += float(np.sum(area * body_conjugate_density(model.body, t, sig2_hat)))
    if len(ids):
        # linear surface potential: the conjugate is the indicator of {sigma3 = -g}
        if np.max(np.abs(sig3 + g_dens)) > 0.0:
            conj = np.inf
    pairing = float(np.sum(area * np.einsum("tk,tk->t", sig1_hat, grads)))
    pairing += float(np.sum(area * sig2_hat * zbar))
    if len(ids):
        pairing += float(np.sum(mesh.edge_length[ids] * sig3 * trace))
    gap = primal + conj - pairing

    return DualCertificate(
        annihilation_residual=residual,
        fenchel_gap=float(gap),
        projection_norm=correction,
        post_residual=post_residual,
        primal_value=primal,
    )


def _pair_triple(mesh: Mesh, topo, sig1, sig2, sig3) -> np.ndarray:
    """Assemble v -> <sigma, (grad v, v, v)> as a DOF vector."""
    out = np.zeros(topo.n_dofs)
    per_corner = mesh.tri_area[:, None] * np.einsum("tk,tki->ti", sig1, mesh.grad_op)
    np.add.at(out, topo.corner_dof.ravel(), per_corner.ravel())
    np.add.at(out, topo.corner_dof.ravel(),
              np.repeat(mesh.tri_area * sig2 / 3.0, 3))
    ids = mesh.surface_edges
    if len(ids):
        from .minimize import _surface_corner_dofs

        sd = _surface_corner_dofs(mesh, topo)
        w = mesh.edge_length[ids] * sig3 / 2.0
        np.add.at(out, sd[:, 0], w)
        np.add.at(out, sd[:, 1], w)
    return out


# ---------------------------------------------------------------------------
# stress / deformation continuity probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeResult:
    verdict: str                 # PASS / FAIL / INCONCLUSIVE
    rows: list[dict]             # per window knot: s, gap, and the four distances
    fitted_rates: dict
    result: CheckResult


_PROBE_COLUMNS = ("stress_dual", "gradient", "body", "trace")


def stress_continuity_probe(record: EvolutionRecord, model: EnergyModel, mesh: Mesh,
                            t_index: int, window: int = 4,
                            atol: float = 1e-12) -> ProbeResult:
    """Left-continuity probe of stress and deformation at a knot.

    Requires the crack set to be constant over the ``window`` knots ending at
    ``t_index`` (otherwise INCONCLUSIVE: the one-sided limit hypothesis
    fails).  Reports, for each earlier knot s, the distances

        || stress(grad u(s)) - stress(grad u(t)) ||_{p'}    (dual exponent)
        || grad u(s) - grad u(t) ||_p
        || u(s) - u(t) ||_q
        || u(s) - u(t) ||_{r, surface part}

    and checks each column is dominated by C |t - s| with C fitted from the
    two knots nearest to t; this is the discrete counterpart of Lipschitz
    loads driving a continuously varying minimizer on a frozen crack.
    """
    n = len(record)
    if not 0 <= t_index < n:
        raise AuditError(f"knot index {t_index} out of range")
    lo = max(0, t_index - window)
    s_indices = list(range(lo, t_index))
    if len(s_indices) < 2:
        res = CheckResult("stress_continuity", "INCONCLUSIVE",
                          details="window has fewer than two earlier knots")
        return ProbeResult("INCONCLUSIVE", [], {}, res)

    base_crack = record.cracks[t_index]
    for s in s_indices:
        if record.cracks[s] != base_crack:
            res = CheckResult(
                "stress_continuity", "INCONCLUSIVE",
                details=(f"crack set changes inside the window (knot {s}); "
                         "the one-sided limit hypothesis fails"),
            )
            return ProbeResult("INCONCLUSIVE", [], {}, res)

    p, q, r = model.p, model.q, model.r
    pc = p / (p - 1.0)
    t = float(record.times[t_index])
    ut = record.fields[t_index]
    tri = np.arange(mesh.n_triangles)
    sig_t = stress(model.bulk, tri, ut.gradients())

    rows = []
    for s in s_indices:
        us = record.fields[s]
        dsig = stress(model.bulk, tri, us.gradients()) - sig_t
        dgrad = us.gradients() - ut.gradients()
        dvals = us.values - ut.values
        dfield = BrokenField(ut.topology, dvals)
        rows.append({
            "s": float(record.times[s]),
            "dt": t - float(record.times[s]),
            "stress_dual": float(np.sum(mesh.tri_area * np.linalg.norm(dsig, axis=1) ** pc) ** (1.0 / pc)),
            "gradient": float(np.sum(mesh.tri_area * np.linalg.norm(dgrad, axis=1) ** p) ** (1.0 / p)),
            "body": lq_norm_tri(mesh, dfield.tri_means(), q),
            "trace": lr_norm_surface(mesh, trace_on_surface_part(dfield), r),
        })

    # rate fitted from the two knots nearest to t
    nearest = sorted(rows, key=lambda row: row["dt"])[:2]
    rates = {c: max(row[c] / row["dt"] for row in nearest) for c in _PROBE_COLUMNS}
    ok = all(
        row[c] <= rates[c] * row["dt"] + atol
        for row in rows for c in _PROBE_COLUMNS
    )
    verdict = "PASS" if ok else "FAIL"
    res = CheckResult(
        "stress_continuity", verdict,
        margins={f"rate_{c}": rates[c] for c in _PROBE_COLUMNS},
        tolerances={"atol": atol},
        details=f"window knots {s_indices} against knot {t_index}",
    )
    return ProbeResult(verdict, rows, rates, res)
