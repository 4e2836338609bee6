"""Surfaces from their fundamental forms via the Cartan frame equations.

Conventions: the frame ``P`` stores one ambient vector per row (tangent
frame first, then normals).  With the connection matrix
``C[a, b](X) = <D_X e_a, e_b>`` the frame obeys ``dP = C P``; we store
``Omega = -C`` so the transport equation reads ``dP = -Omega P`` and the
surface follows from ``d iota = omega P`` with the row coframe ``omega``.
Integrability is ``curvature(Omega) = 0`` together with
``d omega + omega ^ Omega = 0``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import _kernels
from .cochains import Cochain, LieAlgebra, curvature, exterior_d, wedge
from .grid import Grid


class MetricError(ValueError):
    """The supplied metric is not symmetric positive definite."""


@dataclass(frozen=True)
class ImmersionData:
    """Fundamental forms sampled at the vertices of a 2-D box patch.

    ``metric``: (V, 2, 2); ``second_form``: (V, k, 2, 2), the coefficients
    ``<II(d_i, d_j), eta_alpha>``; ``normal_conn``: (V, 2, k, k), the
    coefficients ``<D_{d_j} eta_alpha, eta_beta>``.
    """

    grid: Grid
    metric: np.ndarray
    second_form: np.ndarray
    normal_conn: np.ndarray
    reference: np.ndarray | None = None

    def __post_init__(self):
        if self.grid.n != 2 or self.grid.periodic:
            raise ValueError("immersion patches are 2-D boxes")
        nv = self.grid.num_cells(0)
        if self.metric.shape != (nv, 2, 2):
            raise ValueError(f"metric must have shape {(nv, 2, 2)}")
        k = self.second_form.shape[1]
        if self.second_form.shape != (nv, k, 2, 2):
            raise ValueError("second fundamental form has the wrong shape")
        if self.normal_conn.shape != (nv, 2, k, k):
            raise ValueError("normal connection has the wrong shape")
        if not np.allclose(self.metric, np.swapaxes(self.metric, 1, 2), atol=1e-14):
            raise MetricError("metric is not symmetric")
        if np.min(np.linalg.eigvalsh(self.metric)) <= 0:
            raise MetricError("metric is not positive definite")
        if not np.allclose(self.second_form, np.swapaxes(self.second_form, 2, 3), atol=1e-12):
            raise ValueError("second fundamental form is not symmetric")

    @property
    def codim(self) -> int:
        return self.second_form.shape[1]

    @property
    def ambient(self) -> int:
        return 2 + self.codim


@dataclass(frozen=True)
class FrameData:
    """Orthonormal frame ``E`` (columns in coordinates) and coframe ``R = E^-1``."""

    frame: np.ndarray
    coframe: np.ndarray


def _vertex_grid(grid: Grid, arr: np.ndarray) -> np.ndarray:
    return arr.reshape(grid.vertex_counts() + arr.shape[1:])


def _gradient(grid: Grid, arr: np.ndarray) -> list[np.ndarray]:
    """Second-order differences of a vertex field along each axis."""
    field = _vertex_grid(grid, arr)
    return [
        np.gradient(field, grid.h, axis=a, edge_order=2).reshape(arr.shape)
        for a in range(grid.n)
    ]


def orthonormal_frame(metric: np.ndarray) -> FrameData:
    """Gram-Schmidt of the coordinate vectors in column order (upper Cholesky)."""
    try:
        lower = np.linalg.cholesky(metric)
    except np.linalg.LinAlgError as exc:
        raise MetricError("metric is not positive definite") from exc
    upper = np.swapaxes(lower, 1, 2)
    return FrameData(np.linalg.inv(upper), upper)


def christoffel(grid: Grid, metric: np.ndarray) -> np.ndarray:
    """``gamma[v, m, k, l]`` for the Levi-Civita connection of the metric."""
    dg = np.stack(_gradient(grid, metric), axis=1)  # (V, p, i, j): d_p g_ij
    lower = 0.5 * (
        np.einsum("vkpl->vpkl", dg) + np.einsum("vlpk->vpkl", dg) - dg
    )  # lower[v, p, k, l] = 1/2 (d_k g_pl + d_l g_pk - d_p g_kl)
    return np.einsum("vmp,vpkl->vmkl", np.linalg.inv(metric), lower)


def connection_matrices(data: ImmersionData) -> np.ndarray:
    """Per-vertex ``C[v, k, a, b] = <D_{d_k} e_a, e_b>`` (antisymmetric in a, b)."""
    g = data.grid
    fr = orthonormal_frame(data.metric)
    E = fr.frame
    gamma = christoffel(g, data.metric)
    dE = _gradient(g, E)
    nv, k = E.shape[0], data.codim
    N = 2 + k
    C = np.zeros((nv, 2, N, N))
    for d in range(2):
        # D_{d_d} e_i in coordinates: d_d E[:, i] + gamma[:, :, d, l] E[l, i]
        deriv = dE[d] + np.einsum("vml,vli->vmi", gamma[:, :, d, :], E)
        tt = np.einsum("vmi,vmp,vpj->vij", deriv, data.metric, E)
        C[:, d, :2, :2] = 0.5 * (tt - np.swapaxes(tt, 1, 2))
        tn = np.einsum("vli,val->via", E, data.second_form[:, :, :, d])
        C[:, d, :2, 2:] = tn
        C[:, d, 2:, :2] = -np.swapaxes(tn, 1, 2)
        nn = data.normal_conn[:, d]
        C[:, d, 2:, 2:] = 0.5 * (nn - np.swapaxes(nn, 1, 2))
    return C


def _edge_average(grid: Grid, per_vertex_dir: np.ndarray) -> np.ndarray:
    """Integrate per-vertex, per-direction values along edges (midpoint rule)."""
    vc = grid.vertex_counts()
    out = []
    for b in grid.blocks(1):
        a = b.axes[0]
        field = per_vertex_dir[:, a].reshape(vc + per_vertex_dir.shape[2:])
        lo = np.take(field, range(vc[a] - 1), axis=a)
        hi = np.take(field, range(1, vc[a]), axis=a)
        out.append((grid.h * 0.5 * (lo + hi)).reshape((b.size,) + per_vertex_dir.shape[2:]))
    return np.concatenate(out)


def assemble_cartan(data: ImmersionData) -> Cochain:
    """The so(2+k)-valued connection 1-cochain ``Omega = -C``."""
    C = connection_matrices(data)
    vals = -_edge_average(data.grid, C)
    vals = 0.5 * (vals - np.swapaxes(vals, 1, 2))
    return Cochain(data.grid, 1, vals, LieAlgebra("so", data.ambient))


def coframe_cochain(data: ImmersionData) -> Cochain:
    """Row-vector coframe ``omega`` (normal slots zero) as a 1-cochain."""
    R = orthonormal_frame(data.metric).coframe
    per = np.zeros((R.shape[0], 2, 1, data.ambient))
    for d in range(2):
        per[:, d, 0, :2] = R[:, :, d]
    return Cochain(data.grid, 1, _edge_average(data.grid, per))


def adapted_tangent_normal(data: ImmersionData) -> np.ndarray:
    """``Omega[alpha, i](e_j)`` per vertex, shape (V, k, 2, 2); equals the shape operator."""
    C = connection_matrices(data)
    E = orthonormal_frame(data.metric).frame
    # value on e_j = sum_d E[d, j] C[:, d]
    on_frame = np.einsum("vdj,vdab->vjab", E, C)
    return np.einsum("vjia->vaij", on_frame[:, :, :2, 2:])


@dataclass(frozen=True)
class ResidualReport:
    """Pointwise residuals (value / h^2 per face): RMS and maximum."""

    first_structure: float
    second_structure: float
    gauss: float
    codazzi: float
    ricci: float
    first_structure_max: float
    second_structure_max: float
    gauss_max: float
    codazzi_max: float
    ricci_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _pointwise(values: np.ndarray, h: float) -> np.ndarray:
    return np.sqrt(np.sum(values.reshape(values.shape[0], -1) ** 2, axis=1)) / h ** 2


def compatibility_residuals(data: ImmersionData, omega: Cochain | None = None) -> ResidualReport:
    """Residuals of the structure and Gauss-Codazzi-Ricci equations."""
    omega = assemble_cartan(data) if omega is None else omega
    h = data.grid.h
    F = curvature(omega).values
    co = coframe_cochain(data)
    first = (exterior_d(co) + wedge(co, omega)).values
    parts = {
        "first_structure": first,
        "second_structure": F,
        "gauss": F[:, :2, :2],
        "codazzi": F[:, :2, 2:],
        "ricci": F[:, 2:, 2:],
    }
    out = {}
    for name, vals in parts.items():
        pw = _pointwise(vals, h) if vals.size else np.zeros(1)
        out[name] = float(np.sqrt(np.mean(pw ** 2)))
        out[name + "_max"] = float(pw.max())
    return ResidualReport(**out)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class SpanningTree:
    order: np.ndarray  # BFS visiting order, order[0] is the root
    parent: np.ndarray  # parent vertex (root: -1)
    edge: np.ndarray  # edge index joining a vertex to its parent
    forward: np.ndarray  # True when the edge points parent -> vertex


def _edge_endpoints(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    d = grid.coboundary(0).tocoo()
    tail = np.zeros(d.shape[0], dtype=np.int64)
    head = np.zeros(d.shape[0], dtype=np.int64)
    tail[d.row[d.data < 0]] = d.col[d.data < 0]
    head[d.row[d.data > 0]] = d.col[d.data > 0]
    return tail, head


def spanning_tree(grid: Grid) -> SpanningTree:
    """Breadth-first tree from vertex 0; neighbours visited in edge-index order."""
    tail, head = _edge_endpoints(grid)
    nv = grid.num_cells(0)
    adj: list[list[tuple[int, int, bool]]] = [[] for _ in range(nv)]
    for e in range(tail.size):
        adj[tail[e]].append((e, int(head[e]), True))
        adj[head[e]].append((e, int(tail[e]), False))
    parent = np.full(nv, -1, dtype=np.int64)
    edge = np.full(nv, -1, dtype=np.int64)
    forward = np.zeros(nv, dtype=bool)
    seen = np.zeros(nv, dtype=bool)
    seen[0] = True
    order = [0]
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for e, v, fwd in sorted(adj[u]):
            if not seen[v]:
                seen[v] = True
                parent[v], edge[v], forward[v] = u, e, fwd
                order.append(v)
                queue.append(v)
    return SpanningTree(np.array(order), parent, edge, forward)


@dataclass(frozen=True)
class FrameField:
    frames: np.ndarray
    holonomy: float
    mismatch: float

    def orthogonality_defect(self) -> float:
        m = self.frames.shape[1]
        gram = np.einsum("vji,vjk->vik", self.frames, self.frames) - np.eye(m)
        return float(np.max(np.sqrt(np.sum(gram ** 2, axis=(1, 2)))))


def edge_transports(omega: Cochain) -> tuple[np.ndarray, np.ndarray]:
    """``exp(-Omega_e)`` (tail to head) and ``exp(Omega_e)`` (head to tail)."""
    fwd = _kernels.expm(-omega.values)
    bwd = _kernels.expm(omega.values)
    return fwd, bwd


def plaquette_loops(grid: Grid) -> np.ndarray:
    """Per face: indices into ``[forward, backward]`` transports around its boundary."""
    ne = grid.num_cells(1)
    b = grid.block(2, (0, 1))
    pos = np.indices(b.shape).reshape(2, -1)
    bottom = grid._index(1, (0,), pos)
    right = grid._index(1, (1,), pos + np.array([[1], [0]]))
    top = grid._index(1, (0,), pos + np.array([[0], [1]]))
    left = grid._index(1, (1,), pos)
    return np.stack([bottom, right, ne + top, ne + left], axis=1)


def integrate_pfaff(omega: Cochain, p0: np.ndarray | None = None) -> FrameField:
    """Transport ``p0`` along the spanning tree with ``P_head = exp(-Omega_e) P_tail``."""
    g = omega.grid
    m = omega.m
    p0 = np.eye(m) if p0 is None else np.asarray(p0, float)
    tree = spanning_tree(g)
    fwd, bwd = edge_transports(omega)
    steps = np.zeros((tree.order.size, m, m))
    steps[0] = np.eye(m)
    for t in range(1, tree.order.size):
        v = tree.order[t]
        e = tree.edge[v]
        steps[t] = fwd[e] if tree.forward[v] else bwd[e]
    frames = _kernels.tree_transport(tree.order, tree.parent, steps, p0)

    loops = plaquette_loops(g)
    hol = _kernels.loop_products(np.concatenate([fwd, bwd]), loops)
    logs = _kernels.log_near_identity(hol)
    holonomy = float(np.max(np.sqrt(np.sum(logs ** 2, axis=(1, 2))))) if logs.size else 0.0

    tail, head = _edge_endpoints(g)
    pred = np.einsum("eij,ejk->eik", fwd, frames[tail])
    mismatch = float(np.max(np.sqrt(np.sum((pred - frames[head]) ** 2, axis=(1, 2)))))
    return FrameField(frames, holonomy, mismatch)


@dataclass(frozen=True)
class Immersion:
    positions: np.ndarray
    isometry_defect: float
    aligned_error: float | None

    def to_dict(self) -> dict:
        return {"isometry_defect": self.isometry_defect, "aligned_error": self.aligned_error}


def _edge_increments(data: ImmersionData, frames: np.ndarray) -> np.ndarray:
    g = data.grid
    R = orthonormal_frame(data.metric).coframe
    tail, head = _edge_endpoints(g)
    axis = np.concatenate([np.full(b.size, b.axes[0]) for b in g.blocks(1)])
    rows_t = R[tail, :, axis]  # (E, 2): omega(d_axis) at the tail
    rows_h = R[head, :, axis]
    inc_t = np.einsum("ei,eij->ej", rows_t, frames[tail][:, :2, :])
    inc_h = np.einsum("ei,eij->ej", rows_h, frames[head][:, :2, :])
    return 0.5 * g.h * (inc_t + inc_h)


def kabsch_align(points: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Least-squares orthogonal alignment (reflections allowed) of ``points`` onto ``target``."""
    pc, tc = points.mean(axis=0), target.mean(axis=0)
    u, _, vt = np.linalg.svd((points - pc).T @ (target - tc))
    return (points - pc) @ (u @ vt) + tc


def integrate_immersion(
    data: ImmersionData, field: FrameField, mode: str = "tree"
) -> Immersion:
    """Recover vertex positions from ``d iota = omega P``.

    ``mode="tree"`` sums edge increments along the spanning tree;
    ``mode="lsq"`` fits all edge increments in least squares.
    """
    g = data.grid
    inc = _edge_increments(data, field.frames)
    tail, head = _edge_endpoints(g)
    nv = g.num_cells(0)
    if mode == "tree":
        tree = spanning_tree(g)
        pos = np.zeros((nv, data.ambient))
        for v in tree.order[1:]:
            e = tree.edge[v]
            step = inc[e] if tree.forward[v] else -inc[e]
            pos[v] = pos[tree.parent[v]] + step
    elif mode == "lsq":
        d = g.coboundary(0).astype(float).tocsc()[:, 1:]
        normal = (d.T @ d).tocsc()
        lu = spla.splu(normal)
        pos = np.vstack([np.zeros((1, data.ambient)), lu.solve(d.T @ inc)])
    else:
        raise ValueError(f"unknown integration mode {mode!r}")

    axis = np.concatenate([np.full(b.size, b.axes[0]) for b in g.blocks(1)])
    gmid = 0.5 * (data.metric[tail, axis, axis] + data.metric[head, axis, axis])
    chord = np.sum((pos[head] - pos[tail]) ** 2, axis=1)
    defect = float(np.max(np.abs(chord - g.h ** 2 * gmid)) / g.h ** 2)
    aligned = None
    if data.reference is not None:
        fit = kabsch_align(pos, data.reference)
        aligned = float(np.max(np.linalg.norm(fit - data.reference, axis=1)))
    return Immersion(pos, defect, aligned)


def reconstruct(data: ImmersionData, p0: np.ndarray | None = None, mode: str = "tree"):
    """Assemble, check, and integrate; returns (connection, residuals, frames, immersion)."""
    omega = assemble_cartan(data)
    res = compatibility_residuals(data, omega)
    frames = integrate_pfaff(omega, p0)
    return omega, res, frames, integrate_immersion(data, frames, mode)


# ---------------------------------------------------------------------------
# analytic patches


def _patch_grid(N: int, half_width: float) -> Grid:
    return Grid(2, (N, N), 2 * half_width / N, "box", (-half_width, -half_width))


def _vertex_xy(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    pts = grid.cell_centers(0)
    return pts[:, 0], pts[:, 1]


def flat_patch(N: int = 16, half_width: float = 0.5) -> ImmersionData:
    g = _patch_grid(N, half_width)
    nv = g.num_cells(0)
    x, y = _vertex_xy(g)
    ref = np.stack([x, y, np.zeros(nv)], axis=1)
    return ImmersionData(g, np.broadcast_to(np.eye(2), (nv, 2, 2)).copy(),
                         np.zeros((nv, 1, 2, 2)), np.zeros((nv, 2, 1, 1)), ref)


def sphere_patch(N: int = 64, radius: float = 1.0, half_width: float = 0.5,
                 second_form_scale: float = 1.0) -> ImmersionData:
    """Graph chart of the upper hemisphere; inward normal, so ``II = g / R``."""
    g = _patch_grid(N, half_width * radius)
    x, y = _vertex_xy(g)
    f = np.sqrt(radius ** 2 - x ** 2 - y ** 2)
    grad = np.stack([-x / f, -y / f], axis=1)
    metric = np.eye(2) + np.einsum("vi,vj->vij", grad, grad)
    second = (second_form_scale / radius) * metric[:, None]
    ref = np.stack([x, y, f], axis=1)
    return ImmersionData(g, metric, second, np.zeros((x.size, 2, 1, 1)), ref)


def cylinder_patch(N: int = 32, radius: float = 1.0, half_width: float = 0.5) -> ImmersionData:
    """Arclength chart of a cylinder: ``g = I`` and ``II = diag(1/R, 0)``."""
    g = _patch_grid(N, half_width)
    u, v = _vertex_xy(g)
    nv = u.size
    second = np.zeros((nv, 1, 2, 2))
    second[:, 0, 0, 0] = 1.0 / radius
    ref = np.stack([radius * np.sin(u / radius), v, radius - radius * np.cos(u / radius)], axis=1)
    return ImmersionData(g, np.broadcast_to(np.eye(2), (nv, 2, 2)).copy(), second,
                         np.zeros((nv, 2, 1, 1)), ref)


def clifford_patch(N: int = 32, radii=(1.0, 1.0), half_width: float = 0.5) -> ImmersionData:
    """Product of two circles in R^4 (codimension 2) with inward normals."""
    a, b = radii
    g = _patch_grid(N, half_width)
    x, y = _vertex_xy(g)
    nv = x.size
    second = np.zeros((nv, 2, 2, 2))
    second[:, 0, 0, 0] = 1.0 / a
    second[:, 1, 1, 1] = 1.0 / b
    ref = np.stack([a * np.cos(x / a), a * np.sin(x / a), b * np.cos(y / b), b * np.sin(y / b)],
                   axis=1)
    return ImmersionData(g, np.broadcast_to(np.eye(2), (nv, 2, 2)).copy(), second,
                         np.zeros((nv, 2, 2, 2)), ref)
