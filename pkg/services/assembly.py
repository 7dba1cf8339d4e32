"""
Global model: DOF numbering, boundary conditions and loads, vectorized sparse
assembly and the linear-solve seam.

Global DOF of (node, axis) is node * d + axis. Element kernels are batched over
groups of elements with the same node count and over all submesh simplices;
batches are split into fixed chunks, mapped over a thread pool and reduced in
element order, so results do not depend on the number of workers.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from config import Config
from models.config_models import BoundaryConditionSpec, TimeFunctionSpec
from models.fem_models import (
    BoundarySet,
    MassScheme,
    Mesh,
    NewmarkParams,
    NewmarkState,
    StabilizationConfig,
    facet_key,
)
from services.geometry import subdivide_element
from services.mass import blended_element_mass
from services.material import NeoHookean
from services.projection import assemble_pi_nabla, gradient_operator, simplex_gradients
from services.stabilization import body_load_vector, hyperelastic_kernel
from utils.errors import BoundaryConditionError, FacetNotOnBoundary, PolyVemError, SingularSystem
from utils.logger import app_logger
from utils.worker_pool import map_chunks


def _with_element(eid: int, exc: PolyVemError) -> PolyVemError:
    """Same error type, message prefixed with the element id."""
    return type(exc)(f"element {eid}: {exc}")


@dataclass
class CellBatch:
    """Constant-gradient cells (elements or submesh simplices) sharing a DOF count."""
    owners: np.ndarray
    dofs: np.ndarray
    B: np.ndarray
    measures: np.ndarray

    def __len__(self) -> int:
        return self.owners.shape[0]


@dataclass
class DirichletRecord:
    dofs: np.ndarray
    values: np.ndarray
    time_function: TimeFunctionSpec


@dataclass
class LoadRecord:
    vector: np.ndarray
    time_function: TimeFunctionSpec


class DofMap:
    """Bijection (node, axis) <-> global DOF index."""

    def __init__(self, n_nodes: int, dimension: int):
        self.n_nodes = n_nodes
        self.dimension = dimension

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dimension

    def index(self, node: int, axis: int) -> int:
        return node * self.dimension + axis

    def node_axis(self, dof: int) -> Tuple[int, int]:
        return divmod(int(dof), self.dimension)

    def dofs(self, nodes: Sequence[int], mask: Optional[Sequence[bool]] = None) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        axes = np.arange(self.dimension) if mask is None else np.flatnonzero(mask)
        return (nodes[:, None] * self.dimension + axes[None, :]).ravel()


def _scatter_vector(dofs: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(dofs.ravel(), weights=values.ravel(), minlength=n)


def _scatter_matrix(dofs: np.ndarray, blocks: np.ndarray, n: int) -> sp.csr_matrix:
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


class GlobalSystem:
    """
    Discretized model of one mesh and material.

    Precomputes the element projections, the simplex submeshes, the batched
    gradient operators and the mass matrix; boundary conditions are attached
    with apply_boundary_conditions.
    """

    def __init__(self, mesh: Mesh, material: NeoHookean,
                 stabilization: StabilizationConfig = StabilizationConfig(),
                 mass_scheme: MassScheme = MassScheme.CENTROID,
                 scaled_monomials: bool = False,
                 workers: int = Config.WORKERS,
                 chunk_size: int = Config.CHUNK_SIZE):
        self.mesh = mesh
        self.material = material
        self.stabilization = stabilization
        self.mass_scheme = MassScheme(mass_scheme)
        self.workers = workers
        self.chunk_size = chunk_size
        self.dim = mesh.dimension
        self.dof_map = DofMap(mesh.n_nodes, self.dim)
        self.n_dofs = self.dof_map.n_dofs

        self.projections = []
        self.simplices = []
        for eid, element in enumerate(mesh.elements):
            try:
                self.projections.append(assemble_pi_nabla(element, mesh, scaled_monomials))
                self.simplices.append(subdivide_element(element, mesh))
            except PolyVemError as e:
                raise _with_element(eid, e) from e

        self.element_dofs = [self.dof_map.dofs(e.node_ids) for e in mesh.elements]
        self.groups = self._element_groups()
        self.simplex_batch = self._simplex_batch()
        self._mass: Optional[sp.csr_matrix] = None

        self.dirichlet: List[DirichletRecord] = []
        self.loads: List[LoadRecord] = []
        self.initial_velocity = np.zeros(self.n_dofs)
        self.constrained = np.zeros(0, dtype=np.int64)
        self.free = np.arange(self.n_dofs)
        self._boundary_keys = None
        self._boundary_edge_keys = None

    # ------------------------------------------------------------------
    # precomputation

    def _element_groups(self) -> List[CellBatch]:
        by_size: Dict[int, List[int]] = {}
        for eid, element in enumerate(self.mesh.elements):
            by_size.setdefault(element.n_nodes, []).append(eid)
        groups = []
        for size in sorted(by_size):
            ids = np.asarray(by_size[size], dtype=np.int64)
            groups.append(CellBatch(
                owners=ids,
                dofs=np.stack([self.element_dofs[e] for e in ids]),
                B=np.stack([self.projections[e].grad_map for e in ids]),
                measures=np.array([self.projections[e].measure for e in ids]),
            ))
        return groups

    def _simplex_batch(self) -> CellBatch:
        owners = np.concatenate([np.full(len(s), eid, dtype=np.int64) for eid, s in enumerate(self.simplices)])
        nodes = np.concatenate(self.simplices, axis=0)
        grads, measures = simplex_gradients(self.mesh.coordinates[nodes])
        dofs = (nodes[:, :, None] * self.dim + np.arange(self.dim)[None, None, :]).reshape(nodes.shape[0], -1)
        return CellBatch(owners, dofs, gradient_operator(grads), measures)

    @property
    def mass(self) -> sp.csr_matrix:
        """Global mass matrix (constant over time)."""
        if self._mass is None:
            beta_dyn = self.stabilization.beta_dyn

            def work(sl: slice):
                return [blended_element_mass(self.mesh.elements[e], self.mesh, self.material, self.mass_scheme,
                                             beta_dyn, self.projections[e], self.simplices[e]).M
                        for e in range(sl.start, sl.stop)]

            blocks = [M for chunk in map_chunks(work, self.mesh.n_elements, self.workers, self.chunk_size)
                      for M in chunk]
            rows, cols, data = [], [], []
            for dofs, M in zip(self.element_dofs, blocks):
                k = dofs.shape[0]
                rows.append(np.repeat(dofs, k))
                cols.append(np.tile(dofs, k))
                data.append(M.ravel())
            self._mass = sp.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n_dofs, self.n_dofs),
            ).tocsr()
        return self._mass

    # ------------------------------------------------------------------
    # internal forces

    def _evaluate(self, batch: CellBatch, u: np.ndarray):
        def work(sl: slice):
            return hyperelastic_kernel(batch.B[sl], batch.measures[sl], u[batch.dofs[sl]],
                                       self.material, batch.owners[sl])

        results = map_chunks(work, len(batch), self.workers, self.chunk_size)
        energy = np.concatenate([r[0] for r in results])
        R = np.concatenate([r[1] for r in results])
        K = np.concatenate([r[2] for r in results])
        return energy, R, K

    def internal_forces(self, u: np.ndarray) -> Tuple[float, np.ndarray, sp.csr_matrix]:
        """
        Blended strain energy, internal force vector and tangent at u.

        Raises:
            InvertedElement: det F <= 0 in an element or submesh simplex
        """
        beta = self.stabilization.beta_stat
        parts = []
        if beta < 1.0:
            parts.extend((1.0 - beta, g) for g in self.groups)
        if beta > 0.0:
            parts.append((beta, self.simplex_batch))
        energy = 0.0
        dofs_list, r_list, k_list = [], [], []
        for weight, batch in parts:
            e, R, K = self._evaluate(batch, u)
            energy += weight * float(e.sum())
            dofs_list.append(batch.dofs)
            r_list.append(weight * R)
            k_list.append(weight * K)
        R_glob = np.zeros(self.n_dofs)
        K_glob = sp.csr_matrix((self.n_dofs, self.n_dofs))
        for dofs, R, K in zip(dofs_list, r_list, k_list):
            R_glob += _scatter_vector(dofs, R, self.n_dofs)
            K_glob = K_glob + _scatter_matrix(dofs, K, self.n_dofs)
        return energy, R_glob, K_glob.tocsr()

    # ------------------------------------------------------------------
    # boundary conditions and loads

    def _target(self, name: str) -> BoundarySet:
        if name == "all":
            facets = tuple(tuple(f) for f in self.mesh.boundary_facets())
            return BoundarySet("all", tuple(range(self.mesh.n_nodes)), facets)
        try:
            return self.mesh.boundary_sets[name]
        except KeyError:
            available = ", ".join(sorted(self.mesh.boundary_sets)) or "none"
            raise BoundaryConditionError(f"unknown boundary set '{name}' (available: {available})")

    def _check_boundary_facet(self, facet: Tuple[int, ...]) -> None:
        if self._boundary_keys is None:
            boundary = self.mesh.boundary_facets()
            self._boundary_keys = {facet_key(f) for f in boundary}
            edges = set()
            if self.dim == 3:
                for f in boundary:
                    for k in range(len(f)):
                        edges.add(facet_key((f[k], f[(k + 1) % len(f)])))
            self._boundary_edge_keys = edges
        key = facet_key(facet)
        if self.dim == 3 and len(facet) == 2:
            if key not in self._boundary_edge_keys:
                raise FacetNotOnBoundary(f"line {facet} is not an edge of a boundary face")
        elif key not in self._boundary_keys:
            raise FacetNotOnBoundary(f"facet {facet} is not owned by exactly one element")

    def facet_weights(self, facets: Sequence[Tuple[int, ...]]) -> np.ndarray:
        """
        Nodal shares of the facet measures: L/2 per node on edges and lines,
        A/3 per node on the fan triangles of faces.

        Raises:
            FacetNotOnBoundary: facet is not on the mesh boundary
        """
        X = self.mesh.coordinates
        weights = np.zeros(self.mesh.n_nodes)
        for facet in facets:
            facet = tuple(int(v) for v in facet)
            self._check_boundary_facet(facet)
            if len(facet) == 2:
                length = np.linalg.norm(X[facet[1]] - X[facet[0]])
                weights[list(facet)] += 0.5 * length
                continue
            start = facet.index(min(facet))
            facet = facet[start:] + facet[:start]
            for k in range(1, len(facet) - 1):
                tri = [facet[0], facet[k], facet[k + 1]]
                area = 0.5 * np.linalg.norm(np.cross(X[tri[1]] - X[tri[0]], X[tri[2]] - X[tri[0]]))
                weights[tri] += area / 3.0
        return weights

    def traction_vector(self, facets, traction, mask=None) -> np.ndarray:
        """Consistent nodal forces of a constant traction on facets."""
        weights = self.facet_weights(facets)
        traction = np.asarray(traction, dtype=float)
        if mask is not None:
            traction = traction * np.asarray(mask, dtype=float)
        return (weights[:, None] * traction[None, :]).ravel()

    def body_force_vector(self, body_force) -> np.ndarray:
        """Consistent nodal forces of a constant body force on every element."""
        F = np.zeros(self.n_dofs)
        for dofs, projection in zip(self.element_dofs, self.projections):
            F[dofs] += body_load_vector(projection, body_force)
        return F

    def add_dirichlet(self, dofs, values, time_function: Optional[TimeFunctionSpec] = None) -> None:
        self.dirichlet.append(DirichletRecord(np.asarray(dofs, dtype=np.int64), np.asarray(values, dtype=float),
                                              time_function or TimeFunctionSpec()))
        self.constrained = np.unique(np.concatenate([r.dofs for r in self.dirichlet]))
        self.free = np.setdiff1d(np.arange(self.n_dofs), self.constrained)

    def add_load(self, vector, time_function: Optional[TimeFunctionSpec] = None) -> None:
        self.loads.append(LoadRecord(np.asarray(vector, dtype=float), time_function or TimeFunctionSpec()))

    def apply_boundary_conditions(self, specs: Sequence[BoundaryConditionSpec], load_factor: float = 1.0) -> None:
        """
        Resolve config boundary-condition records on the mesh.

        Raises:
            BoundaryConditionError: unknown set, or Dirichlet and traction on the same DOF
            FacetNotOnBoundary: traction facet not on the boundary
        """
        d = self.dim
        traction_dofs = []
        for spec in specs:
            mask = spec.components if spec.components is not None else [True] * d
            if spec.kind == "body_force":
                if spec.target != "all":
                    raise BoundaryConditionError("body_force applies to target 'all'")
                f = np.asarray(spec.value, dtype=float) * np.asarray(mask, dtype=float) * load_factor
                self.add_load(self.body_force_vector(f), spec.time_function)
                continue
            target = self._target(spec.target)
            if spec.kind == "dirichlet_fixed":
                dofs = self.dof_map.dofs(target.nodes, mask)
                self.add_dirichlet(dofs, np.zeros(dofs.shape[0]), spec.time_function)
            elif spec.kind == "dirichlet_prescribed":
                nodes = np.asarray(target.nodes, dtype=np.int64)
                if spec.affine is not None:
                    c = np.asarray(spec.affine.c, dtype=float)
                    A = np.asarray(spec.affine.A, dtype=float)
                    values = c[None, :] + self.mesh.coordinates[nodes] @ A.T
                else:
                    values = np.tile(np.asarray(spec.value, dtype=float), (nodes.shape[0], 1))
                axes = np.flatnonzero(mask)
                self.add_dirichlet(self.dof_map.dofs(nodes, mask), values[:, axes].ravel(), spec.time_function)
            elif spec.kind == "traction":
                if not target.facets:
                    raise BoundaryConditionError(f"boundary set '{spec.target}' has no facets for a traction")
                vector = self.traction_vector(target.facets, np.asarray(spec.value) * load_factor, mask)
                self.add_load(vector, spec.time_function)
                nodes = sorted({v for f in target.facets for v in f})
                traction_dofs.append(self.dof_map.dofs(nodes, mask))
            elif spec.kind == "initial_velocity":
                dofs = self.dof_map.dofs(target.nodes, mask)
                values = np.tile(np.asarray(spec.value, dtype=float), (len(target.nodes), 1))
                self.initial_velocity[dofs] = values[:, np.flatnonzero(mask)].ravel()
        if traction_dofs:
            clash = np.intersect1d(np.concatenate(traction_dofs), self.constrained)
            if clash.size:
                node, axis = self.dof_map.node_axis(clash[0])
                raise BoundaryConditionError(
                    f"Dirichlet and traction act on the same DOF (node {node}, axis {axis})")
        app_logger.debug(f"Boundary conditions: {self.constrained.size} constrained DOFs, {len(self.loads)} loads")

    def prescribed_values(self, t: float) -> np.ndarray:
        """Full-length vector with the Dirichlet values at time t on constrained DOFs."""
        values = np.zeros(self.n_dofs)
        for record in self.dirichlet:
            values[record.dofs] = record.values * record.time_function.value(t)
        return values

    def apply_dirichlet(self, u: np.ndarray, t: float) -> np.ndarray:
        """Copy of u with the prescribed values at time t."""
        u = u.copy()
        if self.constrained.size:
            u[self.constrained] = self.prescribed_values(t)[self.constrained]
        return u

    def external_forces(self, t: float) -> np.ndarray:
        """Sum of all nodal loads at time t."""
        F = np.zeros(self.n_dofs)
        for record in self.loads:
            F += record.vector * record.time_function.value(t)
        return F

    # ------------------------------------------------------------------
    # residual, tangent, reactions

    def residual_tangent(self, u: np.ndarray, t: float, state: Optional[NewmarkState] = None,
                         params: Optional[NewmarkParams] = None):
        """
        Full residual R = R_int(u) - F_ext(t) [+ M a(u)] and tangent
        K [+ M / (zeta dt^2)]; the inertial part is included when state and
        params are given.

        Returns:
            (R, K_eff, strain energy)
        """
        energy, R, K = self.internal_forces(u)
        R = R - self.external_forces(t)
        if state is not None and params is not None:
            a_next = newmark_acceleration(state, u, params)
            R = R + self.mass @ a_next
            K = K + params.mass_factor * self.mass
        return R, K.tocsr(), energy

    def reactions(self, u: np.ndarray, t: float, a: Optional[np.ndarray] = None) -> np.ndarray:
        """Support forces at the constrained DOFs (full-length vector, zero elsewhere)."""
        _, R_int, _ = self.internal_forces(u)
        total = R_int - self.external_forces(t)
        if a is not None:
            total = total + self.mass @ a
        reactions = np.zeros(self.n_dofs)
        reactions[self.constrained] = total[self.constrained]
        return reactions

    def equilibrium_error(self, u: np.ndarray, t: float, a: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-axis sum of reactions + external forces - inertial forces."""
        F = self.reactions(u, t, a) + self.external_forces(t)
        if a is not None:
            F = F - self.mass @ a
        return F.reshape(-1, self.dim).sum(axis=0)


def newmark_acceleration(state: NewmarkState, u_next: np.ndarray, params: NewmarkParams) -> np.ndarray:
    """a_{n+1} = (u_{n+1} - u_n)/(zeta dt^2) - v_n/(zeta dt) - (1/(2 zeta) - 1) a_n"""
    z, dt = params.zeta, params.dt
    return (u_next - state.u) / (z * dt * dt) - state.v / (z * dt) - (0.5 / z - 1.0) * state.a


def reduce_to_free(system: GlobalSystem, R: np.ndarray, K: sp.spmatrix) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Row/column elimination of the constrained DOFs."""
    free = system.free
    K = K.tocsr()
    return R[free], K[free][:, free].tocsr()


def assemble(system: GlobalSystem, state: Optional[NewmarkState], u_trial: np.ndarray, t: float,
             params: Optional[NewmarkParams] = None) -> Tuple[np.ndarray, sp.csr_matrix]:
    """
    Residual and effective tangent over the free DOFs.

    Args:
        system: global model
        state: converged state at t_n (None for a static evaluation)
        u_trial: displacement satisfying the Dirichlet values at t
        t: evaluation time
        params: Newmark parameters (None for a static evaluation)

    Returns:
        (R_free, K_eff_free)
    """
    R, K, _ = system.residual_tangent(u_trial, t, state, params)
    return reduce_to_free(system, R, K)


def null_space_count(K: sp.spmatrix, tol: float = Config.NULL_EIGEN_TOL) -> Optional[int]:
    """Number of eigenvalues with |lambda| < tol * max |lambda| (dense; None above the size limit)."""
    n = K.shape[0]
    if n == 0 or n > Config.NULLSPACE_DENSE_LIMIT:
        return None
    dense = K.toarray() if sp.issparse(K) else np.asarray(K)
    eig = np.linalg.eigvalsh(0.5 * (dense + dense.T))
    scale = np.max(np.abs(eig))
    if scale == 0.0:
        return n
    return int(np.sum(np.abs(eig) < tol * scale))


def linear_solve(K: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """
    Direct sparse solve K x = rhs.

    The system is scaled symmetrically by its diagonal before factorization,
    so the pivot test does not depend on the units of the DOFs.

    Raises:
        SingularSystem: exactly singular factor, scaled pivot ratio below
            1e-11 or residual above 1e-10 |rhs|; carries the near-null-space count
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if n == 0:
        return np.zeros(0)
    K = sp.csc_matrix(K)
    scale = np.sqrt(np.abs(K.diagonal()))
    scale[scale == 0.0] = 1.0
    S = sp.diags(1.0 / scale)
    K_scaled = sp.csc_matrix(S @ K @ S)
    try:
        lu = splu(K_scaled)
    except RuntimeError as e:
        raise SingularSystem(f"factorization failed: {e}", null_space_count(K_scaled)) from e
    pivots = np.abs(lu.U.diagonal())
    if pivots.max() == 0.0 or pivots.min() < Config.PIVOT_RATIO_TOL * pivots.max():
        raise SingularSystem(f"pivot ratio {pivots.min() / max(pivots.max(), 1e-300):.3e}",
                             null_space_count(K_scaled))
    x = lu.solve(rhs / scale) / scale
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return x
    residual = np.linalg.norm(K @ x - rhs)
    if not np.isfinite(residual) or residual > Config.SOLVE_RESIDUAL_TOL * rhs_norm:
        raise SingularSystem(f"solve residual {residual / rhs_norm:.3e} relative", null_space_count(K_scaled))
    return x
