"""Time-incremental global minimization and crack-envelope post-processing.

At every knot of the time grid the state jumps to a global minimizer of the
total energy among crack sets containing the previous one, each candidate
paired with its own elastic minimizer.  The search over candidate edge
subsets is exhaustive under the brute-force strategy (exact discrete
minimizer, deterministic tie-breaking) and move-limited under the greedy
strategies (stable under single-edge, optionally pair, additions).

Energy ties within 1e-9 * (1 + |E|) are broken toward fewer cracked edges,
then toward the lexicographically smallest edge-id set: a crack only appears
when it is strictly energetically convenient, and records are reproducible.

The produced record stores, per knot, the crack set, the field, all energy
components, and the five power terms whose time integral the energy-balance
audit compares against the energy increment.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ._util import parallel_map
from .broken import BrokenField, CrackSet
from .energy import (
    EnergyModel,
    body_rate,
    body_value_and_gradient,
    elastic_energy,
    stress,
    surface_energy,
    surface_rate,
    surface_value_and_gradient,
    trace_on_surface_part,
)
from .mesh import Mesh, crackable_edges, mesh_fingerprint
from .minimize import ElasticSolver

__all__ = [
    "TimeGrid",
    "SearchStrategy",
    "BRUTE_FORCE",
    "GREEDY",
    "GREEDY_WITH_PAIRS",
    "EvolutionRecord",
    "EvolutionError",
    "SearchLimitError",
    "InitialMinimality",
    "check_initial_minimality",
    "incremental_step",
    "run_evolution",
    "left_envelope",
    "right_envelope",
    "sample_power_terms",
    "tie_tolerance",
]

BRUTE_FORCE = "brute_force"
GREEDY = "greedy"
GREEDY_WITH_PAIRS = "greedy_pairs"
_KINDS = (BRUTE_FORCE, GREEDY, GREEDY_WITH_PAIRS)

RECORD_FORMAT_VERSION = 1


class EvolutionError(RuntimeError):
    """Raised when a run cannot start or aborts mid-way.

    When a step fails after some knots were completed, the partial record is
    attached as ``partial_record`` with ``complete=False``.
    """

    def __init__(self, message: str, partial_record: "EvolutionRecord | None" = None):
        super().__init__(message)
        self.partial_record = partial_record


class SearchLimitError(EvolutionError):
    """The configured candidate-edge cap refuses an exhaustive search."""


def tie_tolerance(energy: float) -> float:
    return 1e-9 * (1.0 + abs(energy))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knots starting at 0; the last knot is the horizon."""

    knots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        k = self.knots
        if len(k) < 1:
            raise ValueError("time grid needs at least one knot")
        if k[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(k) <= 0):
            raise ValueError("time grid knots must be strictly increasing")

    @classmethod
    def uniform(cls, horizon: float, n_knots: int) -> "TimeGrid":
        if n_knots < 2:
            raise ValueError("a uniform grid needs at least 2 knots")
        return cls(np.linspace(0.0, float(horizon), n_knots))

    @property
    def horizon(self) -> float:
        return float(self.knots[-1])

    def __len__(self) -> int:
        return len(self.knots)


@dataclass(frozen=True)
class SearchStrategy:
    """Crack-search strategy for the per-knot minimization."""

    kind: str = BRUTE_FORCE
    max_bruteforce_edges: int = 20

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {_KINDS}")

    @property
    def certification(self) -> str:
        return {
            BRUTE_FORCE: "exhaustive",
            GREEDY: "single-edge-stable",
            GREEDY_WITH_PAIRS: "pair-stable",
        }[self.kind]


# ---------------------------------------------------------------------------
# power samples and record rows
# ---------------------------------------------------------------------------

_POWER_KEYS = ("stress_power", "body_coupling", "body_rate", "surface_coupling", "surface_rate")
_ENERGY_KEYS = ("W", "Es", "F", "G", "total")


def sample_power_terms(model: EnergyModel, mesh: Mesh, t: float, u: BrokenField) -> dict:
    """The five power terms driving the energy balance, sampled at time t.

    Rates of the boundary program and of the loads take their left-interval
    values at knots.  The net external power is
    stress_power - body_coupling - body_rate - surface_coupling - surface_rate.
    """
    psi_dot = model.boundary.rate(t)
    grads_psi_dot = np.einsum("tki,ti->tk", mesh.grad_op, psi_dot[mesh.triangles])
    tri = np.arange(mesh.n_triangles)
    sig = stress(model.bulk, tri, u.gradients())
    p_stress = float(np.sum(mesh.tri_area * np.einsum("tk,tk->t", sig, grads_psi_dot)))

    _, dens = body_value_and_gradient(model.body, t, u)
    psi_dot_tri = psi_dot[mesh.triangles].mean(axis=1)
    p_body_coupling = float(np.sum(mesh.tri_area * dens * psi_dot_tri))
    p_body_rate = body_rate(model.body, t, u)

    ids = mesh.surface_edges
    if len(ids):
        trace = trace_on_surface_part(u)
        _, g_dens = surface_value_and_gradient(model.surface, t, trace, mesh)
        psi_dot_edge = psi_dot[mesh.edges[ids]].mean(axis=1)
        p_surf_coupling = float(np.sum(mesh.edge_length[ids] * g_dens * psi_dot_edge))
        p_surf_rate = surface_rate(model.surface, t, trace, mesh)
    else:
        p_surf_coupling = 0.0
        p_surf_rate = 0.0

    return {
        "stress_power": p_stress,
        "body_coupling": p_body_coupling,
        "body_rate": p_body_rate,
        "surface_coupling": p_surf_coupling,
        "surface_rate": p_surf_rate,
    }


def net_power(power: dict) -> float:
    return (power["stress_power"] - power["body_coupling"] - power["body_rate"]
            - power["surface_coupling"] - power["surface_rate"])


def _energy_row(model: EnergyModel, mesh: Mesh, t: float, u: BrokenField, crack: CrackSet) -> dict:
    el, parts = elastic_energy(model, mesh, t, u)
    es = surface_energy(model.toughness, mesh, crack)
    return {"W": parts["W"], "Es": es, "F": parts["F"], "G": parts["G"], "total": el + es}


# ---------------------------------------------------------------------------
# the evolution record
# ---------------------------------------------------------------------------

@dataclass
class EvolutionRecord:
    """Per-knot states, energy components and power samples of one run."""

    grid: TimeGrid
    cracks: list[CrackSet]
    fields: list[BrokenField]
    energies: list[dict]
    powers: list[dict]
    strategy: SearchStrategy
    certification: str
    config_hash: str = ""
    mesh_hash: str = ""
    complete: bool = True
    annotations: list[str] = field(default_factory=list)
    format_version: int = RECORD_FORMAT_VERSION

    @property
    def times(self) -> np.ndarray:
        return self.grid.knots

    def __len__(self) -> int:
        return len(self.cracks)

    def total_energy(self, i: int) -> float:
        return self.energies[i]["total"]

    def jump_knots(self) -> list[int]:
        """Knots where the crack set differs from the previous knot."""
        return [i for i in range(1, len(self)) if self.cracks[i] != self.cracks[i - 1]]

    def shallow_copy(self) -> "EvolutionRecord":
        return dataclasses.replace(
            self,
            cracks=list(self.cracks),
            fields=list(self.fields),
            energies=[dict(e) for e in self.energies],
            powers=[dict(p) for p in self.powers],
            annotations=list(self.annotations),
        )

    # -- serialization ----------------------------------------------------

    def to_payload(self) -> dict:
        knots = []
        for i in range(len(self)):
            knots.append({
                "t": float(self.times[i]),
                "crack": list(self.cracks[i].edge_ids),
                "dofs": self.fields[i].values.tolist(),
                "energy": {k: float(self.energies[i][k]) for k in _ENERGY_KEYS},
                "power": {k: float(self.powers[i][k]) for k in _POWER_KEYS},
            })
        return {
            "format_version": self.format_version,
            "config_hash": self.config_hash,
            "mesh_hash": self.mesh_hash,
            "strategy": {
                "kind": self.strategy.kind,
                "max_bruteforce_edges": self.strategy.max_bruteforce_edges,
                "certification": self.certification,
            },
            "grid": self.times.tolist(),
            "complete": self.complete,
            "annotations": list(self.annotations),
            "knots": knots,
        }

    def save(self, path) -> None:
        """Write the record; floats round-trip exactly through the JSON text."""
        with open(path, "w") as fh:
            json.dump(self.to_payload(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path, mesh: Mesh, model: EnergyModel,
             solver: ElasticSolver | None = None) -> "EvolutionRecord":
        """Rebuild a record against its mesh and model (topologies are derived)."""
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format_version") != RECORD_FORMAT_VERSION:
            raise ValueError(f"unsupported record format version {payload.get('format_version')!r}")
        solver = solver or ElasticSolver(model, mesh)
        grid = TimeGrid(np.asarray(payload["grid"], dtype=float))
        cracks, fields, energies, powers = [], [], [], []
        for i, row in enumerate(payload["knots"]):
            crack = CrackSet.of(row["crack"])
            topo = solver.topology(crack, grid.knots[i])
            values = np.asarray(row["dofs"], dtype=float)
            cracks.append(crack)
            fields.append(BrokenField(topo, values))
            energies.append({k: float(row["energy"][k]) for k in _ENERGY_KEYS})
            powers.append({k: float(row["power"][k]) for k in _POWER_KEYS})
        strat = payload["strategy"]
        return cls(
            grid=grid, cracks=cracks, fields=fields, energies=energies, powers=powers,
            strategy=SearchStrategy(strat["kind"], strat["max_bruteforce_edges"]),
            certification=strat["certification"],
            config_hash=payload["config_hash"], mesh_hash=payload["mesh_hash"],
            complete=payload["complete"], annotations=list(payload["annotations"]),
        )

    def write_csv(self, path) -> None:
        """Trace with one row per knot, full-precision scientific notation."""
        from ._util import sci17

        mesh = self.fields[0].topology.mesh
        lines = ["t,W,Es,F,G,E_total,crack_length,dof_count"]
        for i in range(len(self)):
            e = self.energies[i]
            row = [sci17(self.times[i])] + [sci17(e[k]) for k in ("W", "Es", "F", "G", "total")]
            row.append(sci17(self.cracks[i].total_length(mesh)))
            row.append(str(self.fields[i].topology.n_dofs))
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# the incremental search
# ---------------------------------------------------------------------------

class _Search:
    def __init__(self, model: EnergyModel, mesh: Mesh, strategy: SearchStrategy,
                 solver: ElasticSolver | None = None, tol: float = 1e-10):
        self.model = model
        self.mesh = mesh
        self.strategy = strategy
        self.solver = solver or ElasticSolver(model, mesh)
        self.tol = tol
        self.crackable = [int(e) for e in crackable_edges(mesh)]

    def total(self, crack: CrackSet, t: float) -> float:
        _, report = self.solver.solve(crack, t, self.tol)
        return report.energy + surface_energy(self.model.toughness, self.mesh, crack)

    def candidates(self, crack: CrackSet) -> list[int]:
        present = crack.as_set()
        return [e for e in self.crackable if e not in present]

    def best_superset(self, crack_prev: CrackSet, t: float) -> CrackSet:
        if self.strategy.kind == BRUTE_FORCE:
            return self._brute(crack_prev, t)
        return self._greedy(crack_prev, t, pairs=self.strategy.kind == GREEDY_WITH_PAIRS)

    def _brute(self, crack_prev: CrackSet, t: float) -> CrackSet:
        cand = self.candidates(crack_prev)
        if len(cand) > self.strategy.max_bruteforce_edges:
            raise SearchLimitError(
                f"brute force over {len(cand)} candidate edges exceeds the configured "
                f"limit {self.strategy.max_bruteforce_edges}; shrink the brittle region "
                "or use a greedy strategy"
            )
        subsets = [crack_prev]
        for size in range(1, len(cand) + 1):
            subsets.extend(crack_prev.union(s) for s in itertools.combinations(cand, size))
        energies = parallel_map(lambda c: self.total(c, t), subsets)
        e_min = min(energies)
        tol = tie_tolerance(e_min)
        # enumeration order is (size, lexicographic), which is the tie preference
        for crack, e in zip(subsets, energies):
            if e <= e_min + tol:
                return crack
        raise AssertionError("unreachable: minimum not found among candidates")

    def _greedy(self, crack_prev: CrackSet, t: float, pairs: bool) -> CrackSet:
        current = crack_prev
        e_cur = self.total(current, t)
        for _ in range(len(self.crackable) + 1):
            move = self._best_move(current, t, e_cur, 1)
            if move is None and pairs:
                move = self._best_move(current, t, e_cur, 2)
            if move is None:
                return current
            current, e_cur = move
        return current

    def _best_move(self, current: CrackSet, t: float, e_cur: float, size: int):
        cand = self.candidates(current)
        moves = [current.union(s) for s in itertools.combinations(cand, size)]
        if not moves:
            return None
        energies = parallel_map(lambda c: self.total(c, t), moves)
        best_i = int(np.argmin(energies))
        # first index wins ties: moves are already in lexicographic order
        for i, e in enumerate(energies):
            if e <= energies[best_i] + tie_tolerance(energies[best_i]):
                best_i = i
                break
        if energies[best_i] < e_cur - tie_tolerance(e_cur):
            return moves[best_i], energies[best_i]
        return None


@dataclass
class InitialMinimality:
    passed: bool
    margin: float
    witness_crack: CrackSet | None
    witness_energy: float | None
    exhaustive: bool


def check_initial_minimality(model: EnergyModel, mesh: Mesh, crack0: CrackSet,
                             u0: BrokenField, strategy: SearchStrategy,
                             t: float = 0.0, _solver: ElasticSolver | None = None) -> InitialMinimality:
    """Is (u0, crack0) minimal at the initial time among crack extensions?

    Brute force gives an exact verdict over every superset of the initial
    crack; greedy strategies certify only that no single-edge (or pair)
    extension improves, which is a necessary condition.
    """
    search = _Search(model, mesh, strategy, solver=_solver)
    el0, _ = elastic_energy(model, mesh, t, u0)
    e0 = el0 + surface_energy(model.toughness, mesh, crack0)
    tol = tie_tolerance(e0)

    if strategy.kind == BRUTE_FORCE:
        cand = search.candidates(crack0)
        if len(cand) > strategy.max_bruteforce_edges:
            raise SearchLimitError(
                f"brute force over {len(cand)} candidate edges exceeds the limit "
                f"{strategy.max_bruteforce_edges}"
            )
        subsets = [crack0]
        for size in range(1, len(cand) + 1):
            subsets.extend(crack0.union(s) for s in itertools.combinations(cand, size))
        energies = parallel_map(lambda c: search.total(c, t), subsets)
        exhaustive = True
    else:
        sizes = (1, 2) if strategy.kind == GREEDY_WITH_PAIRS else (1,)
        cand = search.candidates(crack0)
        subsets = [crack0]
        for size in sizes:
            subsets.extend(crack0.union(s) for s in itertools.combinations(cand, size))
        energies = parallel_map(lambda c: search.total(c, t), subsets)
        exhaustive = False

    margin = float(min(energies) - e0)
    worst = int(np.argmin(energies))
    passed = energies[worst] >= e0 - tol
    witness = None if passed else subsets[worst]
    return InitialMinimality(
        passed=passed, margin=margin,
        witness_crack=witness,
        witness_energy=None if passed else float(energies[worst]),
        exhaustive=exhaustive,
    )


def incremental_step(model: EnergyModel, mesh: Mesh, crack_prev: CrackSet, t: float,
                     strategy: SearchStrategy, _solver: ElasticSolver | None = None,
                     tol: float = 1e-10):
    """One knot of the incremental scheme: the minimizing (field, crack) with
    the crack containing ``crack_prev``."""
    search = _Search(model, mesh, strategy, solver=_solver, tol=tol)
    crack = search.best_superset(crack_prev, t)
    field, _ = search.solver.solve(crack, t, tol)
    return field, crack


def run_evolution(model: EnergyModel, mesh: Mesh, grid: TimeGrid, crack0: CrackSet,
                  strategy: SearchStrategy, *, solver_tol: float = 1e-10,
                  require_initial_minimality: bool = True,
                  config_hash: str = "") -> EvolutionRecord:
    """Run the incremental scheme over the grid from the initial crack.

    The initial state is the elastic minimizer on ``crack0`` at the first
    knot; it must be globally minimal there (checked with the declared
    strategy) unless ``require_initial_minimality=False``, in which case the
    record is annotated instead.  Subsequent knots apply the incremental
    step, which preserves crack inclusion by construction.
    """
    if grid.horizon > model.boundary.horizon + 1e-12:
        raise EvolutionError("time grid extends beyond the load tables")
    annotations = list(model.validate(mesh))
    solver = ElasticSolver(model, mesh)
    search = _Search(model, mesh, strategy, solver=solver, tol=solver_tol)

    t0 = float(grid.knots[0])
    u0, _ = solver.solve(crack0, t0, solver_tol)
    init = check_initial_minimality(model, mesh, crack0, u0, strategy, t=t0, _solver=solver)
    if not init.passed:
        msg = (f"initial state is not minimal: extending to {list(init.witness_crack or ())} "
               f"lowers the energy by {-init.margin:.3e}")
        if require_initial_minimality:
            raise EvolutionError(msg)
        annotations.append(f"override: {msg}")

    cracks = [crack0]
    fields = [u0]
    energies = [_energy_row(model, mesh, t0, u0, crack0)]
    powers = [sample_power_terms(model, mesh, t0, u0)]

    def partial() -> EvolutionRecord:
        return EvolutionRecord(
            grid=TimeGrid(grid.knots[: len(cracks)]), cracks=cracks, fields=fields,
            energies=energies, powers=powers, strategy=strategy,
            certification=strategy.certification, config_hash=config_hash,
            mesh_hash=mesh_fingerprint(mesh), complete=False, annotations=annotations,
        )

    for i in range(1, len(grid)):
        t = float(grid.knots[i])
        try:
            crack = search.best_superset(cracks[-1], t)
            u, _ = solver.solve(crack, t, solver_tol)
        except SearchLimitError as exc:
            raise SearchLimitError(str(exc), partial()) from exc
        except Exception as exc:  # solver failure: abort with partial record
            raise EvolutionError(f"step at knot {i} (t={t}) failed: {exc}", partial()) from exc
        assert cracks[-1].issubset(crack)
        cracks.append(crack)
        fields.append(u)
        energies.append(_energy_row(model, mesh, t, u, crack))
        powers.append(sample_power_terms(model, mesh, t, u))

    return EvolutionRecord(
        grid=grid, cracks=cracks, fields=fields, energies=energies, powers=powers,
        strategy=strategy, certification=strategy.certification,
        config_hash=config_hash, mesh_hash=mesh_fingerprint(mesh),
        complete=True, annotations=annotations,
    )


# ---------------------------------------------------------------------------
# crack envelopes
# ---------------------------------------------------------------------------

def _envelope(record: EvolutionRecord, model: EnergyModel, mesh: Mesh, side: str) -> EvolutionRecord:
    if not record.complete:
        raise EvolutionError("cannot take the envelope of an incomplete record")
    solver = ElasticSolver(model, mesh)
    out = record.shallow_copy()
    n = len(record)
    if side == "left":
        jumps = [i for i in range(1, n) if record.cracks[i] != record.cracks[i - 1]]
        replacement = {i: record.cracks[i - 1] for i in jumps}
    else:
        jumps = [i for i in range(n - 1) if record.cracks[i] != record.cracks[i + 1]]
        replacement = {i: record.cracks[i + 1] for i in jumps}
    for i in jumps:
        t = float(record.times[i])
        crack = replacement[i]
        u, _ = solver.solve(crack, t)
        out.cracks[i] = crack
        out.fields[i] = u
        out.energies[i] = _energy_row(model, mesh, t, u, crack)
        out.powers[i] = sample_power_terms(model, mesh, t, u)
    out.annotations.append(f"{side} envelope applied at knots {jumps}")
    return out


def left_envelope(record: EvolutionRecord, model: EnergyModel, mesh: Mesh) -> EvolutionRecord:
    """Replace each crack-jump knot by its one-sided limit from below.

    At a jump knot the crack becomes the previous knot's crack and the field
    is re-minimized there; all other knots are untouched, so total energies
    away from jumps are identical to the input record.
    """
    return _envelope(record, model, mesh, "left")


def right_envelope(record: EvolutionRecord, model: EnergyModel, mesh: Mesh) -> EvolutionRecord:
    """Replace each crack-jump knot by its one-sided limit from above."""
    return _envelope(record, model, mesh, "right")
