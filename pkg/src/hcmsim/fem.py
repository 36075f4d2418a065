"""Coupled piezoelectric finite-element assembly and condensation.

Trilinear 8-node hexahedra with 2x2x2 Gauss quadrature. Voigt order is
(11, 22, 33, 23, 13, 12). Global systems are assembled sparse (CSR);
element-matrix computation is vectorized over element blocks.

Electric potentials exist on piezo nodes only. ``apply_constraints``
removes fixed mechanical DOFs, grounds the inner wall, and folds every
electrode sector into one master potential DOF. ``condense_electric``
eliminates interior potentials exactly; because the eliminated block's
inverse is dense, the condensed stiffness is exposed as an operator backed
by sparse factorizations (with an explicit sparse matrix available for
small systems).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DielectricSingular,
    EmptyConstraintSet,
    MissingMaterial,
    SingularElement,
)
from .geometry import (
    Mesh,
    REGION_PZT,
    REGION_STATOR_METAL,
    TAG_FIXED_BASE,
    TAG_INNER_GND,
)
from .materials import (
    ElasticMaterial,
    PiezoMaterial,
    element_frame_vectors,
    rotate_piezo_tensors,
)

_GP = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)],
               dtype=float) / np.sqrt(3.0)
_NODE_XI = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)


def _shape_gradients(points: np.ndarray) -> np.ndarray:
    """dN/dxi at given reference points -> (n_pts, 8, 3)."""
    out = np.empty((len(points), 8, 3))
    for p, (xi, eta, zeta) in enumerate(points):
        for n, (a, b, c) in enumerate(_NODE_XI):
            out[p, n, 0] = 0.125 * a * (1 + b * eta) * (1 + c * zeta)
            out[p, n, 1] = 0.125 * (1 + a * xi) * b * (1 + c * zeta)
            out[p, n, 2] = 0.125 * (1 + a * xi) * (1 + b * eta) * c
    return out


def _shape_values(points: np.ndarray) -> np.ndarray:
    out = np.empty((len(points), 8))
    for p, (xi, eta, zeta) in enumerate(points):
        for n, (a, b, c) in enumerate(_NODE_XI):
            out[p, n] = 0.125 * (1 + a * xi) * (1 + b * eta) * (1 + c * zeta)
    return out


_DN_GP = _shape_gradients(_GP)
_N_GP = _shape_values(_GP)
_DN_CENTER = _shape_gradients(np.zeros((1, 3)))[0]


def hex_jacobian_determinants(node_coords: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """det(J) at each of the 8 Gauss points (unit weights) -> (n_e, 8)."""
    coords = node_coords[elements]  # (n_e, 8, 3)
    det = np.empty((len(elements), 8))
    for g in range(8):
        J = np.einsum("eni,nj->eij", coords, _DN_GP[g])
        det[:, g] = np.linalg.det(J)
    return det


def _grad_operators(coords: np.ndarray, dN: np.ndarray):
    """Per-element shape gradients in physical space for one ref point.

    Returns (dNdx (n_e, 8, 3), detJ (n_e,)).
    """
    J = np.einsum("eni,nj->eij", coords, dN)  # J_ij = dx_i/dxi_j
    detJ = np.linalg.det(J)
    invJ = np.linalg.inv(J)
    dNdx = np.einsum("nj,eji->eni", dN, invJ)
    return dNdx, detJ


def _strain_displacement(dNdx: np.ndarray) -> np.ndarray:
    """B matrices (n_e, 6, 24) for Voigt order (11,22,33,23,13,12)."""
    n_e = dNdx.shape[0]
    B = np.zeros((n_e, 6, 24))
    dx, dy, dz = dNdx[:, :, 0], dNdx[:, :, 1], dNdx[:, :, 2]
    cols = np.arange(8) * 3
    B[:, 0, cols] = dx
    B[:, 1, cols + 1] = dy
    B[:, 2, cols + 2] = dz
    B[:, 3, cols + 1] = dz
    B[:, 3, cols + 2] = dy
    B[:, 4, cols] = dz
    B[:, 4, cols + 2] = dx
    B[:, 5, cols] = dy
    B[:, 5, cols + 1] = dx
    return B


_DP_XI = np.array([[[-2.0, 0.0, 0.0]], [[0.0, -2.0, 0.0]], [[0.0, 0.0, -2.0]]])


def _enhanced_gradients(xi: np.ndarray, invJ0: np.ndarray, detJ0: np.ndarray,
                        detJ: np.ndarray) -> np.ndarray:
    """Incompatible-mode gradients dP_k/dx (n_e, 3, 3), Taylor-corrected with
    the centroid Jacobian so the patch test holds on distorted elements."""
    dP = np.zeros((3, 3))
    dP[0, 0] = -2.0 * xi[0]
    dP[1, 1] = -2.0 * xi[1]
    dP[2, 2] = -2.0 * xi[2]
    grad = np.einsum("kj,eji->eki", dP, invJ0)
    return grad * (detJ0 / detJ)[:, None, None]


def _mode_strain(grad: np.ndarray) -> np.ndarray:
    """Strain operator (n_e, 6, 3*n_modes) from per-mode gradients
    (n_e, n_modes, 3), same layout as the nodal B."""
    n_e, n_m = grad.shape[0], grad.shape[1]
    B = np.zeros((n_e, 6, 3 * n_m))
    dx, dy, dz = grad[:, :, 0], grad[:, :, 1], grad[:, :, 2]
    cols = np.arange(n_m) * 3
    B[:, 0, cols] = dx
    B[:, 1, cols + 1] = dy
    B[:, 2, cols + 2] = dz
    B[:, 3, cols + 1] = dz
    B[:, 3, cols + 2] = dy
    B[:, 4, cols] = dz
    B[:, 4, cols + 2] = dx
    B[:, 5, cols] = dy
    B[:, 5, cols + 1] = dx
    return B


def element_matrices(coords: np.ndarray, c: np.ndarray, density: np.ndarray,
                     e: np.ndarray | None = None, eps: np.ndarray | None = None,
                     element: str = "hex8i"):
    """Element K_uu, M (and K_uphi, K_phiphi for piezo) for a block.

    coords: (n_e, 8, 3); c: (n_e, 6, 6); density: (n_e,);
    e: (n_e, 3, 6) or None; eps: (n_e, 3, 3) or None.

    ``element``: "hex8i" (incompatible modes, default; thin-wall bending
    is otherwise severely locking), "hex8" (plain full integration) or
    "hex8r" (selective reduced shear integration).
    """
    if element not in ("hex8i", "hex8", "hex8r"):
        raise ValueError(f"unknown element type {element!r}")
    n_e = coords.shape[0]
    K = np.zeros((n_e, 24, 24))
    M = np.zeros((n_e, 24, 24))
    Kup = np.zeros((n_e, 24, 8)) if e is not None else None
    Kpp = np.zeros((n_e, 8, 8)) if eps is not None else None
    enhanced = element == "hex8i"
    Kca = np.zeros((n_e, 24, 9)) if enhanced else None
    Kaa = np.zeros((n_e, 9, 9)) if enhanced else None
    Kap = np.zeros((n_e, 9, 8)) if (enhanced and e is not None) else None

    B_center = None
    if element == "hex8r":
        dNdx_c, _ = _grad_operators(coords, _DN_CENTER)
        B_center = _strain_displacement(dNdx_c)
    invJ0 = detJ0 = None
    if enhanced:
        J0 = np.einsum("eni,nj->eij", coords, _DN_CENTER)
        detJ0 = np.linalg.det(J0)
        invJ0 = np.linalg.inv(J0)

    for g in range(8):
        dNdx, detJ = _grad_operators(coords, _DN_GP[g])
        if np.any(detJ <= 0.0):
            raise SingularElement(int(np.argmax(detJ <= 0.0)), f"detJ={detJ.min():.3e}")
        B = _strain_displacement(dNdx)
        if element == "hex8r":
            B = B.copy()
            B[:, 3:, :] = B_center[:, 3:, :]
        w = detJ  # unit Gauss weights
        K += np.einsum("eji,ejk,ekl,e->eil", B, c, B, w, optimize=True)
        N = _N_GP[g]
        NN = np.einsum("i,j->ij", N, N)
        Mg = np.zeros((24, 24))
        for comp in range(3):
            Mg[comp::3, comp::3] = NN
        M += (density * w)[:, None, None] * Mg
        if enhanced:
            Ba = _mode_strain(_enhanced_gradients(_GP[g], invJ0, detJ0, detJ))
            Kca += np.einsum("eji,ejk,ekl,e->eil", B, c, Ba, w, optimize=True)
            Kaa += np.einsum("eji,ejk,ekl,e->eil", Ba, c, Ba, w, optimize=True)
            if Kap is not None:
                Kap += np.einsum("eji,ekj,ekl,e->eil", Ba, e,
                                 dNdx.transpose(0, 2, 1), w, optimize=True)
        if e is not None:
            # electric "B": gradient of potential shape functions
            Kup += np.einsum("eji,ekj,ekl,e->eil", B, e, dNdx.transpose(0, 2, 1), w,
                             optimize=True)
        if eps is not None:
            Kpp += np.einsum("eij,ejk,elk,e->eil", dNdx, eps, dNdx, w, optimize=True)

    if enhanced:
        # static condensation of the nine internal modes
        Kaa_inv_Kac = np.linalg.solve(Kaa, Kca.transpose(0, 2, 1))
        K = K - Kca @ Kaa_inv_Kac
        if Kap is not None:
            Kaa_inv_Kap = np.linalg.solve(Kaa, Kap)
            Kup = Kup - Kca @ Kaa_inv_Kap
            Kpp = Kpp + Kap.transpose(0, 2, 1) @ Kaa_inv_Kap
    return K, M, Kup, Kpp


@dataclass
class DofMap:
    """Index bookkeeping for mechanical and electric unknowns."""

    n_nodes: int
    phi_nodes: np.ndarray  # node ids carrying a potential DOF, sorted
    free_mech: np.ndarray | None = None  # global mech dof ids kept (after BC)
    phi_interior_nodes: np.ndarray | None = None
    electrode_nodes: list | None = None  # list of node-id arrays, one per sector
    gnd_nodes: np.ndarray | None = None

    @property
    def n_mech(self) -> int:
        return 3 * self.n_nodes

    @property
    def n_phi(self) -> int:
        return len(self.phi_nodes)

    def mech_dofs_of(self, nodes: np.ndarray) -> np.ndarray:
        return (3 * np.asarray(nodes)[:, None] + np.arange(3)[None, :]).ravel()

    def expand_mech(self, reduced: np.ndarray) -> np.ndarray:
        """Reduced mech vector -> full (n_nodes, 3) array with fixed DOFs zero."""
        full = np.zeros(self.n_mech)
        full[self.free_mech if self.free_mech is not None else slice(None)] = reduced
        return full.reshape(self.n_nodes, 3)


@dataclass
class SystemMatrices:
    """Assembled global system, before or after constraint application."""

    M: sp.csr_matrix
    K_uu: sp.csr_matrix
    K_uphi: sp.csr_matrix
    K_phiphi: sp.csr_matrix
    dof_map: DofMap
    mesh: Mesh
    materials: dict
    constrained: bool = False
    n_interior_phi: int = 0
    n_electrodes: int = 0


def _material_arrays(mesh: Mesh, materials: dict):
    """Per-element constitutive arrays, with piezo tensors rotated so the
    poling axis points radially at each element centroid."""
    for region in np.unique(mesh.region_tag):
        if int(region) not in materials:
            raise MissingMaterial(f"no material assigned to region tag {int(region)}")
    n_e = mesh.n_elements
    c = np.zeros((n_e, 6, 6))
    rho = np.zeros(n_e)
    e = np.zeros((n_e, 3, 6))
    eps = np.zeros((n_e, 3, 3))

    metal = mesh.region_tag == REGION_STATOR_METAL
    if metal.any():
        mat = materials[REGION_STATOR_METAL]
        if not isinstance(mat, ElasticMaterial):
            raise MissingMaterial("metal region requires an ElasticMaterial")
        c[metal] = mat.stiffness_matrix()
        rho[metal] = mat.density

    pzt = mesh.region_tag == REGION_PZT
    if pzt.any():
        mat = materials[REGION_PZT]
        if not isinstance(mat, PiezoMaterial):
            raise MissingMaterial("PZT region requires a PiezoMaterial")
        centroids = mesh.element_centroids()[pzt]
        radial, axial = element_frame_vectors(centroids)
        tangential = np.cross(axial, radial)
        R = np.stack([tangential, axial, radial], axis=-1)  # columns = local axes
        idx = np.nonzero(pzt)[0]
        for count, ei in enumerate(idx):
            cg, eg, epsg = rotate_piezo_tensors(
                mat.elastic_stiffness_cE, mat.piezo_coupling_e,
                mat.permittivity_epsS, R[count])
            c[ei] = 0.5 * (cg + cg.T)
            e[ei] = eg
            eps[ei] = 0.5 * (epsg + epsg.T)
        rho[pzt] = mat.density
    return c, rho, e, eps, pzt


def assemble(mesh: Mesh, materials: dict, element: str = "hex8i",
             block_size: int = 8192) -> SystemMatrices:
    """Assemble global coupled matrices from the tagged mesh.

    `materials` maps region tags to material objects. Metal elements
    contribute only to K_uu and M. See :func:`element_matrices` for the
    element formulations.
    """
    c, rho, e, eps, pzt_mask = _material_arrays(mesh, materials)

    phi_nodes = np.unique(mesh.elements[pzt_mask]) if pzt_mask.any() else np.array([], dtype=np.int64)
    phi_index = np.full(mesh.n_nodes, -1, dtype=np.int64)
    phi_index[phi_nodes] = np.arange(len(phi_nodes))
    dof_map = DofMap(n_nodes=mesh.n_nodes, phi_nodes=phi_nodes)

    n_mech = dof_map.n_mech
    n_phi = dof_map.n_phi
    rows_k, cols_k, vals_k = [], [], []
    vals_m = []
    rows_c, cols_c, vals_c = [], [], []
    rows_p, cols_p, vals_p = [], [], []

    order = np.arange(mesh.n_elements)
    for start in range(0, mesh.n_elements, block_size):
        blk = order[start:start + block_size]
        conn = mesh.elements[blk]
        coords = mesh.node_coords[conn]
        is_pzt = pzt_mask[blk]
        try:
            K, M, Kup, Kpp = element_matrices(
                coords, c[blk], rho[blk],
                e[blk] if is_pzt.any() else None,
                eps[blk] if is_pzt.any() else None,
                element=element)
        except SingularElement as err:
            raise SingularElement(int(blk[err.element_id])) from None

        edof = (3 * conn[:, :, None] + np.arange(3)[None, None, :]).reshape(len(blk), 24)
        r = np.repeat(edof, 24, axis=1).ravel()
        s = np.tile(edof, (1, 24)).ravel()
        rows_k.append(r)
        cols_k.append(s)
        vals_k.append(K.ravel())
        vals_m.append(M.ravel())

        if is_pzt.any():
            pdof = phi_index[conn]  # (n_blk, 8)
            sel = is_pzt
            ec = edof[sel]
            pc = pdof[sel]
            rows_c.append(np.repeat(ec, 8, axis=1).ravel())
            cols_c.append(np.tile(pc, (1, 24)).ravel())
            vals_c.append(Kup[sel].ravel())
            rows_p.append(np.repeat(pc, 8, axis=1).ravel())
            cols_p.append(np.tile(pc, (1, 8)).ravel())
            vals_p.append(Kpp[sel].ravel())

    def build(rows, cols, vals, shape):
        if not rows:
            return sp.csr_matrix(shape)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=shape).tocsr()
        mat.sum_duplicates()
        return mat

    K_uu = build(rows_k, cols_k, vals_k, (n_mech, n_mech))
    M = build(rows_k, cols_k, vals_m, (n_mech, n_mech))
    K_uphi = build(rows_c, cols_c, vals_c, (n_mech, n_phi))
    K_phiphi = build(rows_p, cols_p, vals_p, (n_phi, n_phi))
    K_uu = 0.5 * (K_uu + K_uu.T)
    M = 0.5 * (M + M.T)
    K_phiphi = 0.5 * (K_phiphi + K_phiphi.T)
    return SystemMatrices(M=M.tocsr(), K_uu=K_uu.tocsr(), K_uphi=K_uphi.tocsr(),
                          K_phiphi=K_phiphi.tocsr(), dof_map=dof_map, mesh=mesh,
                          materials=materials)


def apply_constraints(sys: SystemMatrices, fix_base: bool | None = None) -> SystemMatrices:
    """Remove fixed mechanical DOFs, ground the inner wall, and reduce each
    electrode sector to one master potential DOF.

    Reduced potential ordering: interior DOFs first, then electrode masters
    in sector order.
    """
    mesh = sys.mesh
    dof_map = sys.dof_map
    if fix_base is None:
        fix_base = bool(mesh.meta.get("spec", {}).get("base_fixed", True)) if mesh.meta else True

    fixed_nodes = np.array([], dtype=np.int64)
    if fix_base:
        faces = mesh.surface_tags.get(TAG_FIXED_BASE)
        if faces is None or len(faces) == 0:
            raise EmptyConstraintSet("FIXED_BASE tag has no faces")
        fixed_nodes = np.unique(faces)
    keep = np.ones(dof_map.n_mech, dtype=bool)
    if len(fixed_nodes):
        keep[(3 * fixed_nodes[:, None] + np.arange(3)).ravel()] = False
    free_mech = np.nonzero(keep)[0].astype(np.int64)

    phi_index = np.full(mesh.n_nodes, -1, dtype=np.int64)
    phi_index[dof_map.phi_nodes] = np.arange(dof_map.n_phi)

    gnd_faces = mesh.surface_tags.get(TAG_INNER_GND)
    gnd_nodes = np.unique(gnd_faces) if gnd_faces is not None and len(gnd_faces) else np.array([], dtype=np.int64)

    electrode_tags = sorted(
        (t for t in mesh.surface_tags if t.startswith("ELECTRODE_")),
        key=lambda t: int(t.split("_")[1]))
    electrode_nodes_raw = [np.unique(mesh.surface_tags[t]) for t in electrode_tags]
    # nodes shared between neighbouring sectors model the etch line: free
    if electrode_nodes_raw:
        counts = np.zeros(mesh.n_nodes, dtype=np.int32)
        for nodes in electrode_nodes_raw:
            counts[nodes] += 1
        electrode_nodes = [nodes[counts[nodes] == 1] for nodes in electrode_nodes_raw]
    else:
        electrode_nodes = []

    n_phi = dof_map.n_phi
    n_el = len(electrode_nodes)
    kind = np.zeros(n_phi, dtype=np.int64)  # 0 interior, -1 gnd, k>0 electrode k
    if len(gnd_nodes):
        kind[phi_index[gnd_nodes]] = -1
    for k, nodes in enumerate(electrode_nodes, start=1):
        kind[phi_index[nodes]] = k

    interior = np.nonzero(kind == 0)[0]
    n_int = len(interior)
    rows = []
    cols = []
    for new, old in enumerate(interior):
        rows.append(old)
        cols.append(new)
    for k in range(1, n_el + 1):
        for old in np.nonzero(kind == k)[0]:
            rows.append(old)
            cols.append(n_int + k - 1)
    P = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                      shape=(n_phi, n_int + n_el)).tocsr()

    K_uu = sys.K_uu[free_mech][:, free_mech]
    M = sys.M[free_mech][:, free_mech]
    K_uphi = (sys.K_uphi[free_mech] @ P).tocsr()
    K_phiphi = (P.T @ sys.K_phiphi @ P).tocsr()

    new_map = replace(dof_map, free_mech=free_mech,
                      phi_interior_nodes=dof_map.phi_nodes[interior],
                      electrode_nodes=electrode_nodes, gnd_nodes=gnd_nodes)
    return SystemMatrices(M=M.tocsr(), K_uu=K_uu.tocsr(), K_uphi=K_uphi,
                          K_phiphi=K_phiphi, dof_map=new_map, mesh=mesh,
                          materials=sys.materials, constrained=True,
                          n_interior_phi=n_int, n_electrodes=n_el)


class CondensedSystem:
    """Effective mechanical system after exact interior-potential elimination.

    K* = K_uu + C_i A_ii^{-1} C_i^T (short-circuit stiffness); electrode
    voltages enter as equivalent forces F = electrode_load_map @ V. K* is
    exposed as a matvec/solve operator; `k_star_matrix()` materializes the
    sparse matrix for small systems.
    """

    def __init__(self, sys: SystemMatrices):
        if not sys.constrained:
            raise ValueError("apply_constraints must run before condensation")
        n_int = sys.n_interior_phi
        self.mesh = sys.mesh
        self.dof_map = sys.dof_map
        self.materials = sys.materials
        self.M = sys.M
        self.K_uu = sys.K_uu
        self.n_interior_phi = n_int
        self.n_electrodes = sys.n_electrodes
        self.C_i = sys.K_uphi[:, :n_int].tocsc()
        self.C_v = sys.K_uphi[:, n_int:].tocsc()
        self.A_ii = sys.K_phiphi[:n_int, :n_int].tocsc()
        self.A_iv = sys.K_phiphi[:n_int, n_int:].tocsc()
        self._n_u = sys.K_uu.shape[0]
        if n_int:
            try:
                self._A_lu = spla.splu(self.A_ii)
            except RuntimeError as err:
                raise DielectricSingular(str(err)) from None
            # balance the stiffness and dielectric blocks in augmented solves
            # (their natural magnitudes differ by ~19 decades)
            k_scale = np.abs(self.K_uu.diagonal()).max()
            a_scale = np.abs(self.A_ii.diagonal()).max()
            self._phi_scale = np.sqrt(k_scale / a_scale)
        else:
            self._A_lu = None
            self._phi_scale = 1.0
        self.electrode_load_map = self._build_load_map()

    @property
    def n_dof(self) -> int:
        return self._n_u

    def _build_load_map(self) -> np.ndarray:
        n_el = self.n_electrodes
        if n_el == 0:
            return np.zeros((self._n_u, 0))
        Cv = self.C_v.toarray()
        if self._A_lu is not None:
            phi_i = self._A_lu.solve(-self.A_iv.toarray())  # interior response to unit V
            return -(Cv + self.C_i @ phi_i)
        return -Cv

    def interior_potentials(self, u: np.ndarray, voltages: np.ndarray | None = None) -> np.ndarray:
        """Back-substituted interior potentials for a mechanical state."""
        if self._A_lu is None:
            return np.zeros(0)
        rhs = self.C_i.T @ u
        if voltages is not None and self.n_electrodes:
            rhs = rhs - self.A_iv @ voltages
        return self._A_lu.solve(rhs)

    def k_star_matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.K_uu @ x
        if self._A_lu is not None:
            y = y + self.C_i @ self._A_lu.solve(self.C_i.T @ x)
        return y

    def k_star_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self._n_u, self._n_u), matvec=self.k_star_matvec)

    def k_star_matrix(self, max_dof: int = 20000) -> sp.csr_matrix:
        """Explicit sparse K*; intended for small systems (tests, exports)."""
        if self._n_u > max_dof:
            raise ValueError(f"explicit K* refused for {self._n_u} DOFs (> {max_dof})")
        if self._A_lu is None:
            return self.K_uu.copy()
        S = self.C_i @ self._A_lu.solve(self.C_i.T.toarray())
        K = self.K_uu + sp.csr_matrix(S)
        return sp.csr_matrix(0.5 * (K + K.T))

    def _augmented(self, alpha_k: float, alpha_m: float) -> sp.csc_matrix:
        """Sparse block matrix whose u-Schur complement is
        alpha_k * K* + alpha_m * M (potentials scaled for conditioning)."""
        n_int = self.n_interior_phi
        top = alpha_k * self.K_uu + alpha_m * self.M
        if n_int == 0:
            return top.tocsc()
        s = self._phi_scale
        return sp.bmat([[top, (alpha_k * s) * self.C_i],
                        [(alpha_k * s) * self.C_i.T, (-alpha_k * s * s) * self.A_ii]],
                       format="csc")

    def shifted_factor(self, alpha_k: float, alpha_m: float, refine: int = 1):
        """Factorization solving (alpha_k K* + alpha_m M) x = b exactly via
        the sparse augmented system, with iterative refinement steps."""
        lu = spla.splu(self._augmented(alpha_k, alpha_m))
        n_u, n_int = self._n_u, self.n_interior_phi

        def raw(b: np.ndarray) -> np.ndarray:
            if n_int == 0:
                return lu.solve(b)
            rhs = np.zeros(n_u + n_int)
            rhs[:n_u] = b
            return lu.solve(rhs)[:n_u]

        def apply(x: np.ndarray) -> np.ndarray:
            return alpha_k * self.k_star_matvec(x) + alpha_m * (self.M @ x)

        def solve(b: np.ndarray) -> np.ndarray:
            x = raw(b)
            for _ in range(refine):
                x = x + raw(b - apply(x))
            return x

        return solve

    def expand_shape(self, reduced: np.ndarray) -> np.ndarray:
        """Reduced mechanical vector -> (n_nodes, 3) displacement field."""
        return self.dof_map.expand_mech(reduced)


def condense_electric(sys: SystemMatrices) -> CondensedSystem:
    """Exact static condensation of interior electric DOFs."""
    return CondensedSystem(sys)


def dump_matrix_market(sys: SystemMatrices, prefix: str) -> list:
    """Debug dump of the assembled blocks in Matrix Market format."""
    import scipy.io as sio

    written = []
    for name, mat in (("K_uu", sys.K_uu), ("M", sys.M),
                      ("K_uphi", sys.K_uphi), ("K_phiphi", sys.K_phiphi)):
        path = f"{prefix}_{name}.mtx"
        sio.mmwrite(path, mat.tocoo())
        written.append(path)
    return written


def total_energy(sys: SystemMatrices, u: np.ndarray, phi: np.ndarray) -> float:
    """Electric-enthalpy energy of a full (unconstrained) state."""
    return float(0.5 * u @ (sys.K_uu @ u) + u @ (sys.K_uphi @ phi)
                 - 0.5 * phi @ (sys.K_phiphi @ phi))
