import numpy as np
import pytest

from qsfrac.broken import CrackSet
from qsfrac.corpus import CORPUS, build_config
from qsfrac.energy import (
    BodyPotential,
    BoundaryProgram,
    BulkLaw,
    EnergyModel,
    SurfacePotential,
    TimeTable,
    Toughness,
)
from qsfrac.evolution import run_evolution
from qsfrac.mesh import build_structured_mesh


def make_strip_mesh(ny=1, brittle=("rect", (1.0, 0.0, 1.0, 1.0)), labeling=None):
    """2-cell-wide strip [0,2]x[0,1] pulled apart through the x=1 column."""
    labeling = labeling or {"dirichlet": ("left", "right")}
    return build_structured_mesh(2, ny, 2.0, 1.0, labeling=labeling, brittle=brittle)


def make_model(mesh, *, p=2.0, q=2.0, r=2.0, mu=1.0, eps=0.0, lam=1e-3,
               kappa=Toughness("isotropic", (0.05,)), psi=None, f=None, g=None,
               horizon=1.0):
    """Programmatic model builder mirroring the config defaults."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    ns = len(mesh.surface_edges)
    if psi is None:
        psi = TimeTable.build(
            [(0.0, np.zeros(nv)), (horizon, 0.5 * mesh.vertices[:, 0])], nv)
    if f is None:
        f = TimeTable.constant(0.0, nt, horizon)
    if g is None:
        g = TimeTable.constant(0.0, ns, horizon)
    return EnergyModel(
        bulk=BulkLaw(p=p, mu=mu, epsilon=eps),
        toughness=kappa,
        body=BodyPotential(f, lam=lam, q=q),
        surface=SurfacePotential(g, r=r),
        boundary=BoundaryProgram(psi),
    )


@pytest.fixture(scope="session")
def strip_problem():
    return build_config("strip", 64).build_problem()


@pytest.fixture(scope="session")
def strip_record(strip_problem):
    p = strip_problem
    return run_evolution(p.model, p.mesh, p.grid, p.initial_crack, p.strategy,
                         config_hash=p.config_hash)


@pytest.fixture(scope="session")
def corpus_runs():
    """All corpus instances at 64 knots with their brute-force records."""
    out = {}
    for name in CORPUS:
        p = build_config(name, 64).build_problem()
        rec = run_evolution(p.model, p.mesh, p.grid, p.initial_crack, p.strategy,
                            config_hash=p.config_hash)
        out[name] = (p, rec)
    return out


@pytest.fixture()
def interface_crack():
    return CrackSet.of([4])  # the x=1 column edge of the ny=1 strip mesh
