"""Constitutive data for the piezoceramic and stator metals.

Voigt ordering is (11, 22, 33, 23, 13, 12) throughout; stress-charge form:

    sigma = cE : strain - e^T . E
    D     = e : strain + epsS . E

Piezoceramic tensors are stored in the local poling frame (poling along the
local 3-axis) and rotated per element so that poling points radially.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import FrameDegenerate

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class PiezoMaterial:
    """Fully coupled piezoelectric material (6mm crystal class).

    Attributes
    ----------
    elastic_stiffness_cE : (6, 6) array, Pa, at constant electric field.
    piezo_coupling_e : (3, 6) array, C/m^2, stress-charge form.
    permittivity_epsS : (3, 3) array, F/m, at constant strain.
    density : kg/m^3.
    poling_axis : unit vector of the poling direction in the frame the
        tensors are expressed in (local frame: +3 axis).
    source : citation string for provenance reporting.
    """

    elastic_stiffness_cE: np.ndarray
    piezo_coupling_e: np.ndarray
    permittivity_epsS: np.ndarray
    density: float
    poling_axis: np.ndarray
    source: str = ""

    def __post_init__(self):
        cE = np.asarray(self.elastic_stiffness_cE, dtype=float)
        e = np.asarray(self.piezo_coupling_e, dtype=float)
        epsS = np.asarray(self.permittivity_epsS, dtype=float)
        object.__setattr__(self, "elastic_stiffness_cE", cE)
        object.__setattr__(self, "piezo_coupling_e", e)
        object.__setattr__(self, "permittivity_epsS", epsS)
        object.__setattr__(self, "poling_axis", np.asarray(self.poling_axis, dtype=float))
        if cE.shape != (6, 6) or e.shape != (3, 6) or epsS.shape != (3, 3):
            raise ValueError("piezo tensor shapes must be (6,6), (3,6), (3,3)")
        for name, m in (("cE", cE), ("epsS", epsS)):
            if not np.allclose(m, m.T, rtol=1e-10, atol=0.0):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        if self.density <= 0.0:
            raise ValueError("density must be positive")


@dataclass(frozen=True)
class ElasticMaterial:
    """Isotropic elastic material for the stator metal."""

    youngs_modulus: float
    poissons_ratio: float
    density: float
    source: str = ""

    def __post_init__(self):
        if self.youngs_modulus <= 0.0:
            raise ValueError("E must be positive")
        if not 0.0 < self.poissons_ratio < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")
        if self.density <= 0.0:
            raise ValueError("density must be positive")

    def stiffness_matrix(self) -> np.ndarray:
        """6x6 isotropic stiffness in Voigt (11,22,33,23,13,12) order."""
        E, nu = self.youngs_modulus, self.poissons_ratio
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        c = np.zeros((6, 6))
        c[:3, :3] = lam
        c[np.diag_indices(3)] += 2.0 * mu
        c[3, 3] = c[4, 4] = c[5, 5] = mu
        return c


def pzt5h_default() -> PiezoMaterial:
    """Standard published PZT-5H constants, poled along the local 3-axis.

    Values are the widely used soft-PZT-5H dataset (stress-charge form,
    constant-strain permittivity); see the `source` field. Consistent with
    d15 = e15 / c44 = 741 pm/V and relative constant-stress permittivities
    of roughly 3130 (transverse) and 3400 (axial).
    """
    c11, c12, c13 = 12.72035e10, 8.02122e10, 8.46702e10
    c33, c44, c66 = 11.74346e10, 2.29885e10, 2.34742e10
    cE = np.array(
        [
            [c11, c12, c13, 0.0, 0.0, 0.0],
            [c12, c11, c13, 0.0, 0.0, 0.0],
            [c13, c13, c33, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, c44, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, c44, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, c66],
        ]
    )
    e15, e31, e33 = 17.03036, -6.62281, 23.24031
    e = np.array(
        [
            [0.0, 0.0, 0.0, 0.0, e15, 0.0],
            [0.0, 0.0, 0.0, e15, 0.0, 0.0],
            [e31, e31, e33, 0.0, 0.0, 0.0],
        ]
    )
    epsS = np.diag([1704.4, 1704.4, 1433.6]) * VACUUM_PERMITTIVITY
    return PiezoMaterial(
        elastic_stiffness_cE=cE,
        piezo_coupling_e=e,
        permittivity_epsS=epsS,
        density=7500.0,
        poling_axis=np.array([0.0, 0.0, 1.0]),
        source="PZT-5H, standard published dataset (IEEE-standard style constants "
        "as shipped with major FEM material libraries)",
    )


def c360_brass_default() -> ElasticMaterial:
    """C360 free-machining brass, typical handbook values."""
    return ElasticMaterial(
        youngs_modulus=97e9,
        poissons_ratio=0.31,
        density=8500.0,
        source="C36000 free-machining brass, typical handbook values "
        "(E 97 GPa, nu 0.31, rho 8500 kg/m^3)",
    )


def copper_default() -> ElasticMaterial:
    """Pure (annealed) copper, typical handbook values."""
    return ElasticMaterial(
        youngs_modulus=110e9,
        poissons_ratio=0.34,
        density=8960.0,
        source="annealed pure copper, typical handbook values "
        "(E 110 GPa, nu 0.34, rho 8960 kg/m^3)",
    )


def material_library() -> dict:
    """Named presets accepted by the run config `material` block."""
    return {
        "pzt5h": pzt5h_default(),
        "c360": c360_brass_default(),
        "copper": copper_default(),
    }


def _bond_stress_matrix(R: np.ndarray) -> np.ndarray:
    """Bond 6x6 stress transformation for rotation R (local -> global)."""
    # index pairs for Voigt slots (11,22,33,23,13,12)
    pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    M = np.empty((6, 6))
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            if b < 3:
                M[a, b] = R[i, k] * R[j, k]
            else:
                M[a, b] = R[i, k] * R[j, l] + R[i, l] * R[j, k]
    return M


def rotate_piezo_tensors(cE, e, epsS, R):
    """Rotate stress-charge-form tensors by R (columns = local axes in global).

    Engineering-strain Voigt convention: M_eps^{-1} = M_sigma^T, so
    cE' = M cE M^T, e' = R e M^T, epsS' = R epsS R^T.
    """
    M = _bond_stress_matrix(R)
    return M @ cE @ M.T, R @ e @ M.T, R @ epsS @ R.T


def rotate_to_element_frame(
    material: PiezoMaterial, radial_dir: np.ndarray, axial_dir: np.ndarray
) -> PiezoMaterial:
    """Express a locally poled material in the global frame of one element.

    The local frame is (tangential, axial, radial) with poling along the
    radial (local 3) axis. `radial_dir` and `axial_dir` must be orthonormal.
    """
    r = np.asarray(radial_dir, dtype=float)
    a = np.asarray(axial_dir, dtype=float)
    if (
        abs(np.linalg.norm(r) - 1.0) > 1e-10
        or abs(np.linalg.norm(a) - 1.0) > 1e-10
        or abs(np.dot(r, a)) > 1e-10
    ):
        raise FrameDegenerate("radial/axial directions must be orthonormal unit vectors")
    t = np.cross(a, r)
    R = np.column_stack([t, a, r])
    cE, e, epsS = rotate_piezo_tensors(
        material.elastic_stiffness_cE, material.piezo_coupling_e, material.permittivity_epsS, R
    )
    # symmetrize away rotation round-off so invariant checks stay exact
    cE = 0.5 * (cE + cE.T)
    epsS = 0.5 * (epsS + epsS.T)
    return replace(material, elastic_stiffness_cE=cE, piezo_coupling_e=e,
                   permittivity_epsS=epsS, poling_axis=r)


def element_frame_vectors(centroids: np.ndarray):
    """Radial and axial unit vectors at element centroids (z = axis)."""
    xy = centroids[:, :2]
    norm = np.linalg.norm(xy, axis=1, keepdims=True)
    if np.any(norm < 1e-14):
        raise FrameDegenerate("element centroid lies on the cylinder axis")
    radial = np.hstack([xy / norm, np.zeros((len(centroids), 1))])
    axial = np.zeros_like(radial)
    axial[:, 2] = 1.0
    return radial, axial


def rayleigh_from_modal_damping(omega: float, zeta: float = 0.01,
                                mass_fraction: float = 0.0):
    """Rayleigh (alpha, beta) giving damping ratio `zeta` at frequency `omega`.

    zeta(w) = alpha/(2w) + beta*w/2. One target frequency leaves the split
    free; `mass_fraction` picks how much of zeta comes from the mass term
    (default: pure stiffness damping, the usual choice for resonant drives).
    """
    if zeta < 0.0 or omega <= 0.0:
        raise ValueError("need omega > 0 and zeta >= 0")
    if not 0.0 <= mass_fraction <= 1.0:
        raise ValueError("mass_fraction must lie in [0, 1]")
    alpha = 2.0 * zeta * omega * mass_fraction
    beta = 2.0 * zeta * (1.0 - mass_fraction) / omega
    return alpha, beta


def materials_provenance(materials: dict) -> dict:
    """JSON-ready dump of the active material set for report provenance."""
    out = {}
    for region, mat in sorted(materials.items()):
        entry = {"density_kg_m3": mat.density, "source": mat.source}
        if isinstance(mat, ElasticMaterial):
            entry["youngs_modulus_Pa"] = mat.youngs_modulus
            entry["poissons_ratio"] = mat.poissons_ratio
        else:
            entry["elastic_stiffness_cE_Pa"] = np.asarray(mat.elastic_stiffness_cE).tolist()
            entry["piezo_coupling_e_C_m2"] = np.asarray(mat.piezo_coupling_e).tolist()
            entry["permittivity_epsS_F_m"] = np.asarray(mat.permittivity_epsS).tolist()
        out[region] = entry
    return out
