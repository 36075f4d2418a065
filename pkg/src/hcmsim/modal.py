"""Eigenanalysis near a target frequency and mode characterization.

Shift-invert Lanczos (ARPACK) on the condensed system; the shifted solves
run on the sparse augmented block system, so condensation stays exact at
any size. Modes are mass-normalized, classified by nodal diameter from the
circumferential Fourier content of the tooth-tip radial displacement, and
carry tip-displacement metrics used by the published-table comparisons.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import AmbiguousClassificationWarning, ShiftHitsEigenvalue, SolverNoConverge
from .fem import CondensedSystem
from .geometry import Mesh


@dataclass
class Mode:
    frequency_hz: float
    shape: np.ndarray  # reduced mechanical DOFs, mass-normalized
    nodal_diameter: int
    max_radial_tip_displacement: float
    axial_decay_profile: np.ndarray
    fourier_magnitudes: np.ndarray = field(default=None, repr=False)
    ambiguous: bool = False


@dataclass
class ModeSet:
    modes: list
    shift_target_hz: float

    def frequencies(self) -> np.ndarray:
        return np.array([m.frequency_hz for m in self.modes])

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)


def _ring_samples(mesh: Mesh):
    """Tooth-tip ring node ids and angles, ordered by theta (gaps allowed)."""
    ids = np.asarray(mesh.meta["tip_ring_nodes"])
    valid = ids >= 0
    ids = ids[valid]
    xy = mesh.node_coords[ids, :2]
    theta = np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2.0 * np.pi)
    order = np.argsort(theta)
    return ids[order], theta[order]


def _radial_tangential(displacements: np.ndarray, coords: np.ndarray):
    theta = np.arctan2(coords[:, 1], coords[:, 0])
    c, s = np.cos(theta), np.sin(theta)
    u_r = displacements[:, 0] * c + displacements[:, 1] * s
    u_t = -displacements[:, 0] * s + displacements[:, 1] * c
    return u_r, u_t


def circumferential_spectrum(u_r: np.ndarray, theta: np.ndarray, n_max: int | None = None):
    """Fourier magnitudes of a ring signal on a non-uniform grid.

    Trapezoidal projection onto cos/sin harmonics; robust to clustered
    sample points (notch edges). Returns magnitudes indexed 0..n_max.
    """
    n_pts = len(theta)
    if n_max is None:
        n_max = min(max(1, n_pts // 4), 16)
    n_max = min(n_max, max(1, n_pts // 2 - 1))
    # periodic trapezoid weights
    gaps = np.diff(np.r_[theta, theta[0] + 2.0 * np.pi])
    prev = np.r_[gaps[-1], gaps[:-1]]
    w = 0.5 * (gaps + prev)
    mags = np.empty(n_max + 1)
    mags[0] = abs(np.sum(w * u_r) / (2.0 * np.pi))
    for n in range(1, n_max + 1):
        a = np.sum(w * u_r * np.cos(n * theta)) / np.pi
        b = np.sum(w * u_r * np.sin(n * theta)) / np.pi
        mags[n] = np.hypot(a, b)
    return mags


def classify_nodal_diameter(shape_field: np.ndarray, mesh: Mesh,
                            n_max: int | None = None):
    """Dominant circumferential harmonic of tooth-tip radial displacement.

    Returns (nodal_diameter, magnitudes, ambiguous). Warns (not raises) when
    the top two magnitudes are within 10% of each other.
    """
    ids, theta = _ring_samples(mesh)
    if len(ids) == 0:
        raise ValueError("mesh has no tooth contact ring")
    u_r, _ = _radial_tangential(shape_field[ids], mesh.node_coords[ids])
    mags = circumferential_spectrum(u_r, theta, n_max)
    ranked = np.argsort(mags[1:])[::-1] + 1
    best = int(ranked[0])
    ambiguous = False
    runner = mags[ranked[1]] if len(ranked) > 1 else 0.0
    top = mags[best]
    if mags[0] >= top or (top > 0 and (top - max(runner, mags[0])) < 0.10 * top):
        ambiguous = True
        if mags[0] >= top:
            best = 0
        warnings.warn(
            f"nodal diameter classification ambiguous (best {best})",
            AmbiguousClassificationWarning, stacklevel=2)
    return best, mags, ambiguous


def _axial_profile(shape_field: np.ndarray, mesh: Mesh, theta_star_idx: int):
    """|u_r| along the inner wall column nearest the tip antinode, top->base."""
    grid = np.asarray(mesh.meta["inner_wall_grid"])  # (n_theta_lines, n_z_lines)
    col = grid[theta_star_idx]
    col = col[col >= 0]
    u_r, _ = _radial_tangential(shape_field[col], mesh.node_coords[col])
    z = mesh.node_coords[col, 2]
    order = np.argsort(z)[::-1]
    return np.abs(u_r[order]), z[order]


def solve_modes(csys: CondensedSystem, target_hz: float, count: int,
                seed: int = 0, residual_tol: float = 1e-8) -> ModeSet:
    """Eigenpairs nearest `target_hz` via shift-invert iteration.

    Deterministic for a fixed seed. Retries once with a 0.1% shift
    perturbation when the factorization lands on an eigenvalue.
    """
    if count < 1 or target_hz <= 0.0:
        raise ValueError("need count >= 1 and target_hz > 0")
    sigma = (2.0 * np.pi * target_hz) ** 2
    n = csys.n_dof
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)

    def attempt(shift):
        solve = csys.shifted_factor(1.0, -shift)
        opinv = spla.LinearOperator((n, n), matvec=solve)
        A = csys.k_star_operator()
        return spla.eigsh(A, k=min(count, n - 1), M=csys.M, sigma=shift,
                          OPinv=opinv, v0=v0, which="LM")

    try:
        vals, vecs = attempt(sigma)
    except RuntimeError as first_err:
        # singular shifted matrix: the shift hit an eigenvalue
        try:
            vals, vecs = attempt(sigma * 1.001)
        except RuntimeError:
            raise ShiftHitsEigenvalue(str(first_err)) from None
    except spla.ArpackNoConvergence as err:
        raise SolverNoConverge(
            "shift-invert iteration did not converge",
            diagnostics={"converged": len(err.eigenvalues), "requested": count}) from None

    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vals = np.maximum(vals, 0.0)

    modes = []
    for i in range(len(vals)):
        phi = vecs[:, i]
        mass = float(phi @ (csys.M @ phi))
        phi = phi / np.sqrt(mass)
        k_phi = csys.k_star_matvec(phi)
        resid = np.linalg.norm(k_phi - vals[i] * (csys.M @ phi)) / np.linalg.norm(k_phi)
        if resid > residual_tol:
            raise SolverNoConverge(
                f"eigen residual {resid:.2e} exceeds {residual_tol:.1e}",
                diagnostics={"mode_index": i, "residual": resid})
        # deterministic sign: largest-magnitude entry positive
        j = int(np.argmax(np.abs(phi)))
        if phi[j] < 0:
            phi = -phi
        field_u = csys.expand_shape(phi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AmbiguousClassificationWarning)
            nd, mags, ambiguous = classify_nodal_diameter(field_u, csys.mesh)
        ids, theta = _ring_samples(csys.mesh)
        u_r, _ = _radial_tangential(field_u[ids], csys.mesh.node_coords[ids])
        tip = float(np.max(np.abs(u_r)))
        theta_star = int(np.argmax(np.abs(u_r)))
        profile, _z = _axial_profile(field_u, csys.mesh, _theta_line_index(csys.mesh, theta[theta_star]))
        modes.append(Mode(frequency_hz=float(np.sqrt(vals[i]) / (2.0 * np.pi)),
                          shape=phi, nodal_diameter=nd,
                          max_radial_tip_displacement=tip,
                          axial_decay_profile=profile,
                          fourier_magnitudes=mags, ambiguous=ambiguous))
    return ModeSet(modes=modes, shift_target_hz=target_hz)


def _theta_line_index(mesh: Mesh, theta: float) -> int:
    lines = np.asarray(mesh.meta["theta_lines"])
    d = np.abs((lines - theta + np.pi) % (2.0 * np.pi) - np.pi)
    return int(np.argmin(d))


def tip_displacement_metrics(mode: Mode, excitation_scale: float = 1.0) -> dict:
    """Tip metrics under the documented scaling convention (mass-normalized
    shape times a dimensionless excitation scale)."""
    return {
        "max_radial": mode.max_radial_tip_displacement * excitation_scale,
        "axial_profile": mode.axial_decay_profile * excitation_scale,
    }


@dataclass
class ModeFamily:
    nodal_diameter: int
    frequency_hz: float
    members: list

    @property
    def max_radial_tip_displacement(self) -> float:
        return max(m.max_radial_tip_displacement for m in self.members)


def mode_families(modeset: ModeSet, rel_gap: float = 0.02) -> list:
    """Group near-degenerate pairs (same nodal diameter, close frequency)
    into families, ascending in frequency."""
    families: list[ModeFamily] = []
    for mode in sorted(modeset.modes, key=lambda m: m.frequency_hz):
        placed = False
        for fam in families:
            if (fam.nodal_diameter == mode.nodal_diameter
                    and abs(mode.frequency_hz - fam.frequency_hz)
                    <= rel_gap * fam.frequency_hz):
                fam.members.append(mode)
                fam.frequency_hz = float(np.mean([m.frequency_hz for m in fam.members]))
                placed = True
                break
        if not placed:
            families.append(ModeFamily(mode.nodal_diameter, mode.frequency_hz, [mode]))
    families.sort(key=lambda f: f.frequency_hz)
    return families


def family_by_nodal_diameter(families: list, nd: int) -> ModeFamily | None:
    """Lowest-frequency family with the requested nodal diameter."""
    for fam in families:
        if fam.nodal_diameter == nd:
            return fam
    return None


def displacement_calibration(families: list, reference_nd: int = 5,
                             reference_value: float = 45.7191e-6) -> float:
    """Single scale factor mapping the reference family's mass-normalized tip
    displacement onto the published value; all other families become
    predictions under the same factor."""
    fam = family_by_nodal_diameter(families, reference_nd)
    if fam is None:
        raise ValueError(f"no family with nodal diameter {reference_nd}")
    return reference_value / fam.max_radial_tip_displacement


def modes_to_table(families: list, calibration: float | None = None) -> list:
    """Rows (mode#, freq_hz, nodal_diameter, max_disp_m) mirroring the
    published mode-table layout (mode# = nodal diameter)."""
    rows = []
    for fam in families:
        disp = fam.max_radial_tip_displacement * (calibration or 1.0)
        rows.append({"mode": fam.nodal_diameter, "freq_hz": fam.frequency_hz,
                     "nodal_diameter": fam.nodal_diameter, "max_disp_m": disp})
    return rows
