"""Parametric stator geometry and structured hexahedral meshing.

The stator is modeled as three coaxial bands:

* a thin compliance tube at the base (reduced outer radius, bottom fixed),
* the main metal tube, with a piezoceramic tube bonded to its outer wall
  (perfect bond, shared nodes; the nominal epoxy gap is collapsed),
* a toothed crown: the top ``notch_depth`` of the metal wall carries
  ``tooth_count`` through-wall slots, leaving teeth whose inner faces
  contact the rotor. The tooth inner surface is tapered by ``taper_angle``.

Meshing is structured in cylindrical coordinates. The circumferential grid
is the union of all notch edges and all electrode sector boundaries, padded
by splitting the largest intervals until the line count is a multiple of
4 x n_sectors. Electrode sectors therefore have exactly equal outer-wall
area, and each notch is one element wide unless a sector boundary happens
to cross it (then exactly two).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace

import numpy as np

from .errors import GeometryInfeasible, MeshQualityFailure

INCH = 0.0254  # exact

REGION_STATOR_METAL = 0
REGION_PZT = 1

TAG_FIXED_BASE = "FIXED_BASE"
TAG_INNER_GND = "INNER_GND"
TAG_TOOTH_CONTACT = "TOOTH_CONTACT"


def electrode_tag(k: int) -> str:
    """Tag name of electrode sector k (1-based)."""
    return f"ELECTRODE_{k}"


@dataclass(frozen=True)
class StatorSpec:
    """Parametric stator dimensions (SI units, angles in degrees).

    ``tube_*`` fields describe the piezoceramic tube; ``stator_top_od`` is
    the nominal metal outer diameter at the top (bond side). The metal main
    wall thickness is not part of the published dimensions and is exposed
    as ``stator_wall_thickness`` with a default fixed by the eigenfrequency
    study on the reference design.
    """

    tube_outer_diameter: float = 1.00 * INCH
    tube_wall_thickness: float = 0.020 * INCH
    tube_height: float = 0.25 * INCH
    stator_top_od: float = 0.95 * INCH
    tooth_count: int = 22
    notch_width: float = 0.02 * INCH
    notch_depth: float = 0.10 * INCH
    taper_angle: float = 1.0
    compliance_layer_height: float = 0.08 * INCH
    compliance_layer_thickness: float = 0.03 * INCH
    base_fixed: bool = True
    stator_wall_thickness: float = 0.050 * INCH

    # Derived radii. The ceramic bonds to the metal outer wall with shared
    # nodes, so the metal outer radius is placed at the ceramic inner radius.
    @property
    def pzt_outer_radius(self) -> float:
        return 0.5 * self.tube_outer_diameter

    @property
    def metal_outer_radius(self) -> float:
        return 0.5 * self.tube_outer_diameter - self.tube_wall_thickness

    @property
    def metal_inner_radius(self) -> float:
        return self.metal_outer_radius - self.stator_wall_thickness

    @property
    def compliance_outer_radius(self) -> float:
        return self.metal_inner_radius + self.compliance_layer_thickness

    @property
    def total_height(self) -> float:
        return self.compliance_layer_height + self.tube_height

    @property
    def taper_rad(self) -> float:
        return np.deg2rad(self.taper_angle)

    def notch_angular_width(self) -> float:
        """Angular slot width, referenced to the inner (contact) radius."""
        return self.notch_width / self.metal_inner_radius

    def contact_radius(self) -> float:
        """Tooth-tip contact ring radius (inner surface at the top)."""
        return self.metal_inner_radius + self.notch_depth * np.tan(self.taper_rad)

    def validate(self) -> None:
        lengths = {
            "tube_outer_diameter": self.tube_outer_diameter,
            "tube_wall_thickness": self.tube_wall_thickness,
            "tube_height": self.tube_height,
            "stator_top_od": self.stator_top_od,
            "notch_width": self.notch_width,
            "notch_depth": self.notch_depth,
            "compliance_layer_height": self.compliance_layer_height,
            "compliance_layer_thickness": self.compliance_layer_thickness,
            "stator_wall_thickness": self.stator_wall_thickness,
        }
        for name, value in lengths.items():
            if not value > 0.0:
                raise GeometryInfeasible(f"{name} must be positive, got {value}")
        if self.tooth_count < 3:
            raise GeometryInfeasible("tooth_count must be at least 3")
        if not 0.0 <= self.taper_angle <= 5.0:
            raise GeometryInfeasible("taper_angle must lie in [0, 5] degrees")
        if self.stator_top_od >= self.tube_outer_diameter:
            raise GeometryInfeasible("stator_top_od must be smaller than the ceramic OD")
        if self.metal_inner_radius <= 0.0:
            raise GeometryInfeasible("metal wall thicker than the available radius")
        if self.compliance_layer_thickness > self.stator_wall_thickness:
            raise GeometryInfeasible("compliance layer thicker than the metal wall")
        if self.notch_depth >= self.tube_height:
            raise GeometryInfeasible("notch_depth must be smaller than tube_height")
        inner_circumference = 2.0 * np.pi * self.metal_inner_radius
        if self.notch_width * self.tooth_count >= inner_circumference:
            raise GeometryInfeasible(
                "teeth overlap: notch_width x tooth_count exceeds the inner circumference"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def default_stator_spec() -> StatorSpec:
    """Reference internal-drive stator dimensions converted to SI."""
    return StatorSpec()


@dataclass(frozen=True)
class Mesh:
    """Tagged structured hexahedral mesh.

    ``surface_tags`` maps tag names to (n_faces, 4) arrays of node ids
    (quads, outward ordering not guaranteed). ``meta`` carries derived grid
    info used by probes; it is not part of the exchange format.
    """

    node_coords: np.ndarray
    elements: np.ndarray
    region_tag: np.ndarray
    surface_tags: dict
    characteristic_size: float
    meta: dict | None = None

    def __post_init__(self):
        for arr in (self.node_coords, self.elements, self.region_tag):
            arr.setflags(write=False)
        for faces in self.surface_tags.values():
            faces.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_centroids(self) -> np.ndarray:
        return self.node_coords[self.elements].mean(axis=1)

    def element_volumes(self) -> np.ndarray:
        """Exact trilinear-hex volumes via 2x2x2 Gauss quadrature."""
        from .fem import hex_jacobian_determinants

        return hex_jacobian_determinants(self.node_coords, self.elements).sum(axis=1)

    def nodes_of(self, tag: str) -> np.ndarray:
        """Sorted unique node ids referenced by a surface tag."""
        return np.unique(self.surface_tags[tag])

    def electrode_count(self) -> int:
        return sum(1 for t in self.surface_tags if t.startswith("ELECTRODE_"))


def _circumferential_grid(spec: StatorSpec, n_sectors: int, refinement: int,
                          tooth_offset: float):
    """Theta grid: union of notch edges and sector boundaries, padded to a
    multiple of 4 x n_sectors lines by splitting the largest intervals."""
    two_pi = 2.0 * np.pi
    half = 0.5 * spec.notch_angular_width()
    centers = (np.arange(spec.tooth_count) + tooth_offset) * two_pi / spec.tooth_count
    notch_edges = np.concatenate([centers - half, centers + half]) % two_pi
    sector_edges = np.arange(n_sectors) * two_pi / n_sectors

    points = np.concatenate([notch_edges, sector_edges]) % two_pi
    points = np.sort(points)
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.diff(points) > 1e-12
    if len(points) > 1 and (two_pi - points[-1] + points[0]) <= 1e-12:
        keep[-1] = False
    points = points[keep]

    # intervals inside a notch must never be split further
    def in_notch(lo, hi):
        mid = 0.5 * (lo + hi)
        d = np.abs((mid - centers + np.pi) % two_pi - np.pi)
        return bool(np.any(d < half - 1e-12))

    block = 4 * n_sectors
    target = max(len(points), block * refinement)
    target = block * int(np.ceil(target / block))

    pts = list(points)
    while len(pts) < target:
        spans = np.diff(np.r_[pts, pts[0] + two_pi])
        order = np.argsort(-spans, kind="stable")
        for j in order:
            lo = pts[j]
            hi = lo + spans[j]
            if not in_notch(lo, hi):
                pts.insert(j + 1, 0.5 * (lo + hi) % two_pi)
                break
        else:
            raise GeometryInfeasible("cannot refine circumferential grid")
        pts.sort()
    thetas = np.asarray(pts)

    mids = (thetas + np.diff(np.r_[thetas, thetas[0] + two_pi]) / 2.0) % two_pi
    d = np.abs((mids[:, None] - centers[None, :] + np.pi) % two_pi - np.pi)
    notch_interval = (d < half - 1e-12).any(axis=1)
    return thetas, notch_interval


def _segment_lines(breaks, counts):
    """Concatenate linspace segments between consecutive breakpoints."""
    lines = [np.array([breaks[0]])]
    for lo, hi, n in zip(breaks[:-1], breaks[1:], counts):
        lines.append(np.linspace(lo, hi, n + 1)[1:])
    return np.concatenate(lines)


def _division_counts(refinement: int):
    r = refinement
    radial_inner = 1 if r == 1 else 2 if r < 4 else 3
    radial_outer_metal = 1 if r < 3 else 2 if r < 5 else 3
    radial_pzt = 1 if r == 1 else 2 if r < 5 else 3
    axial_compliance = max(1, r)
    axial_main = 2 + 2 * r
    axial_teeth = 1 + r
    return (radial_inner, radial_outer_metal, radial_pzt,
            axial_compliance, axial_main, axial_teeth)


def generate_mesh(spec: StatorSpec, refinement: int, n_sectors: int = 20,
                  tooth_offset: float = 0.5) -> Mesh:
    """Build the tagged structured mesh of the stator.

    Parameters
    ----------
    spec : StatorSpec
    refinement : int in [1, 6]; element counts grow monotonically with it.
    n_sectors : electrode sector count on the ceramic outer wall.
    tooth_offset : notch-pattern phase in tooth pitches (0.5 centers the
        first notch mid-pitch, keeping sector boundaries out of notches for
        tooth counts that share a divisor with the sector count).
    """
    spec.validate()
    if not 1 <= refinement <= 6:
        raise ValueError("refinement must lie in [1, 6]")
    if n_sectors < 4 or n_sectors % 4:
        raise GeometryInfeasible("n_sectors must be a positive multiple of 4")

    thetas, notch_interval = _circumferential_grid(spec, n_sectors, refinement, tooth_offset)
    n_c = len(thetas)

    n0, n1, n2, m0, m1, m2 = _division_counts(refinement)
    r_breaks = [spec.metal_inner_radius, spec.compliance_outer_radius,
                spec.metal_outer_radius, spec.pzt_outer_radius]
    r_lines = _segment_lines(r_breaks, [n0, n1, n2])
    z_teeth_lo = spec.compliance_layer_height + spec.tube_height - spec.notch_depth
    z_breaks = [0.0, spec.compliance_layer_height, z_teeth_lo, spec.total_height]
    z_lines = _segment_lines(z_breaks, [m0, m1, m2])

    n_r = len(r_lines) - 1  # radial intervals
    n_z = len(z_lines) - 1
    # radial interval zones: 0 = inner metal, 1 = outer metal, 2 = pzt
    r_zone = np.concatenate([np.zeros(n0, int), np.ones(n1, int), np.full(n2, 2)])
    z_zone = np.concatenate([np.zeros(m0, int), np.ones(m1, int), np.full(m2, 2)])

    # cell existence (ir, jc, iz)
    exists = np.zeros((n_r, n_c, n_z), dtype=bool)
    for ir in range(n_r):
        for iz in range(n_z):
            rz, zz = r_zone[ir], z_zone[iz]
            if rz == 2:
                exists[ir, :, iz] = zz >= 1
            elif rz == 1:
                if zz == 1:
                    exists[ir, :, iz] = True
                elif zz == 2:
                    exists[ir, :, iz] = ~notch_interval
            else:
                if zz <= 1:
                    exists[ir, :, iz] = True
                else:
                    exists[ir, :, iz] = ~notch_interval

    # lattice nodes: (radial line, theta line, z line) -> compact id
    n_rl, n_zl = len(r_lines), len(z_lines)
    node_used = np.zeros((n_rl, n_c, n_zl), dtype=bool)
    ir_idx, jc_idx, iz_idx = np.nonzero(exists)
    jp = (jc_idx + 1) % n_c
    for dr in (0, 1):
        for dz in (0, 1):
            node_used[ir_idx + dr, jc_idx, iz_idx + dz] = True
            node_used[ir_idx + dr, jp, iz_idx + dz] = True

    node_id = np.full((n_rl, n_c, n_zl), -1, dtype=np.int64)
    node_id[node_used] = np.arange(node_used.sum())

    rl, tl, zl = np.meshgrid(r_lines, thetas, z_lines, indexing="ij")
    # taper morph: tooth-band inner surface opens by tan(taper) toward the top
    dz_band = np.clip(zl - z_teeth_lo, 0.0, None)
    w = np.clip((spec.metal_outer_radius - rl) / spec.stator_wall_thickness, 0.0, 1.0)
    r_eff = rl + dz_band * np.tan(spec.taper_rad) * w
    coords = np.stack(
        [r_eff * np.cos(tl), r_eff * np.sin(tl), zl], axis=-1
    )[node_used]

    def nid(ir_line, jc, iz_line):
        return node_id[ir_line, jc % n_c, iz_line]

    elements = np.empty((len(ir_idx), 8), dtype=np.int64)
    elements[:, 0] = node_id[ir_idx, jc_idx, iz_idx]
    elements[:, 1] = node_id[ir_idx + 1, jc_idx, iz_idx]
    elements[:, 2] = node_id[ir_idx + 1, jp, iz_idx]
    elements[:, 3] = node_id[ir_idx, jp, iz_idx]
    elements[:, 4] = node_id[ir_idx, jc_idx, iz_idx + 1]
    elements[:, 5] = node_id[ir_idx + 1, jc_idx, iz_idx + 1]
    elements[:, 6] = node_id[ir_idx + 1, jp, iz_idx + 1]
    elements[:, 7] = node_id[ir_idx, jp, iz_idx + 1]
    region = np.where(r_zone[ir_idx] == 2, REGION_PZT, REGION_STATOR_METAL).astype(np.int8)

    surface_tags: dict[str, np.ndarray] = {}

    def face_quads(sel, corner_fn):
        out = np.empty((sel.sum(), 4), dtype=np.int64)
        for col, (dr, djz) in enumerate(corner_fn):
            out[:, col] = nid(ir_idx[sel] + dr[0], jc_idx[sel] + djz[0],
                              iz_idx[sel] + dr[1] * 0 + djz[1])
        return out

    # fixed base: bottom faces of the lowest axial layer (inner metal zone)
    sel = (iz_idx == 0) & (r_zone[ir_idx] == 0)
    surface_tags[TAG_FIXED_BASE] = np.stack(
        [nid(ir_idx[sel], jc_idx[sel], 0), nid(ir_idx[sel] + 1, jc_idx[sel], 0),
         nid(ir_idx[sel] + 1, jc_idx[sel] + 1, 0), nid(ir_idx[sel], jc_idx[sel] + 1, 0)],
        axis=1)

    # tooth contact: inner faces of the top tooth layer
    sel = (ir_idx == 0) & (iz_idx == n_z - 1) & exists[0, jc_idx, n_z - 1]
    surface_tags[TAG_TOOTH_CONTACT] = np.stack(
        [nid(0, jc_idx[sel], iz_idx[sel]), nid(0, jc_idx[sel] + 1, iz_idx[sel]),
         nid(0, jc_idx[sel] + 1, iz_idx[sel] + 1), nid(0, jc_idx[sel], iz_idx[sel] + 1)],
        axis=1)

    ir_pzt_in = n0 + n1  # radial line index of the bond interface
    sel = (ir_idx == ir_pzt_in) & (r_zone[ir_idx] == 2)
    surface_tags[TAG_INNER_GND] = np.stack(
        [nid(ir_pzt_in, jc_idx[sel], iz_idx[sel]), nid(ir_pzt_in, jc_idx[sel] + 1, iz_idx[sel]),
         nid(ir_pzt_in, jc_idx[sel] + 1, iz_idx[sel] + 1), nid(ir_pzt_in, jc_idx[sel], iz_idx[sel] + 1)],
        axis=1)

    ir_outer = n_r - 1
    sector_width = 2.0 * np.pi / n_sectors
    spans = np.diff(np.r_[thetas, thetas[0] + 2.0 * np.pi])
    mid_theta = (thetas + 0.5 * spans) % (2.0 * np.pi)
    face_sector = np.minimum((mid_theta / sector_width).astype(int), n_sectors - 1)
    outer_sel = ir_idx == ir_outer
    for k in range(n_sectors):
        sel = outer_sel & (face_sector[jc_idx] == k)
        surface_tags[electrode_tag(k + 1)] = np.stack(
            [nid(n_rl - 1, jc_idx[sel], iz_idx[sel]), nid(n_rl - 1, jc_idx[sel] + 1, iz_idx[sel]),
             nid(n_rl - 1, jc_idx[sel] + 1, iz_idx[sel] + 1), nid(n_rl - 1, jc_idx[sel], iz_idx[sel] + 1)],
            axis=1)

    # tooth-tip probe ring, ordered by theta
    ring_ids = node_id[0, :, n_zl - 1]
    meta = {
        "theta_lines": thetas,
        "radial_lines": r_lines,
        "z_lines": z_lines,
        "n_sectors": n_sectors,
        "notch_interval": notch_interval,
        "tip_ring_nodes": ring_ids,
        "inner_wall_grid": node_id[0, :, :].copy(),
        "spec": spec.to_dict(),
    }
    h = float(np.mean([np.diff(r_lines).mean(),
                       spec.metal_outer_radius * spans.mean(),
                       np.diff(z_lines).mean()]))

    mesh = Mesh(node_coords=coords, elements=elements, region_tag=region,
                surface_tags=surface_tags, characteristic_size=h, meta=meta)

    from .fem import hex_jacobian_determinants

    det = hex_jacobian_determinants(coords, elements)
    if det.min() <= 0.0:
        bad = int(np.argmin(det.min(axis=1)))
        raise MeshQualityFailure(f"non-positive Jacobian in element {bad}")
    return mesh


def analytic_solid_volume(spec: StatorSpec) -> float:
    """Closed-form solid volume of the parametric stator (metal + ceramic).

    Notches are angular sectors of width ``notch_angular_width`` through the
    metal wall; the taper shifts the inner surface linearly over the tooth
    band (matching the mesh morph in the continuum limit).
    """
    two_pi = 2.0 * np.pi
    ri, rc = spec.metal_inner_radius, spec.compliance_outer_radius
    ro, rp = spec.metal_outer_radius, spec.pzt_outer_radius
    d, t = spec.notch_depth, np.tan(spec.taper_rad)
    v_compliance = np.pi * (rc**2 - ri**2) * spec.compliance_layer_height
    v_main = np.pi * (ro**2 - ri**2) * (spec.tube_height - spec.notch_depth)
    # integral of (ro^2 - (ri + s t)^2) ds over the tooth band
    band_integral = ro**2 * d - (ri**2 * d + ri * t * d**2 + t**2 * d**3 / 3.0)
    open_fraction = (two_pi - spec.tooth_count * spec.notch_angular_width()) / two_pi
    v_teeth = np.pi * band_integral * open_fraction
    v_pzt = np.pi * (rp**2 - ro**2) * spec.tube_height
    return float(v_compliance + v_main + v_teeth + v_pzt)


def annular_ring_mesh(inner_radius: float, outer_radius: float, height: float,
                      n_circumferential: int, n_radial: int, n_axial: int) -> Mesh:
    """Plain annular tube mesh for benchmarks (all-metal, no tags but base).

    Used by the ring-theory and convergence studies; carries the same tag
    names so the solver path is identical.
    """
    if not 0.0 < inner_radius < outer_radius:
        raise GeometryInfeasible("need 0 < inner_radius < outer_radius")
    thetas = np.arange(n_circumferential) * 2.0 * np.pi / n_circumferential
    r_lines = np.linspace(inner_radius, outer_radius, n_radial + 1)
    z_lines = np.linspace(0.0, height, n_axial + 1)
    n_c = n_circumferential

    node_id = np.arange((n_radial + 1) * n_c * (n_axial + 1)).reshape(
        n_radial + 1, n_c, n_axial + 1)
    rl, tl, zl = np.meshgrid(r_lines, thetas, z_lines, indexing="ij")
    coords = np.stack([rl * np.cos(tl), rl * np.sin(tl), zl], axis=-1).reshape(-1, 3)

    cells = []
    for ir in range(n_radial):
        for jc in range(n_c):
            jn = (jc + 1) % n_c
            for iz in range(n_axial):
                cells.append([node_id[ir, jc, iz], node_id[ir + 1, jc, iz],
                              node_id[ir + 1, jn, iz], node_id[ir, jn, iz],
                              node_id[ir, jc, iz + 1], node_id[ir + 1, jc, iz + 1],
                              node_id[ir + 1, jn, iz + 1], node_id[ir, jn, iz + 1]])
    elements = np.asarray(cells, dtype=np.int64)
    region = np.zeros(len(elements), dtype=np.int8)

    base = np.stack([node_id[:-1, :, 0].ravel(), node_id[1:, :, 0].ravel(),
                     np.roll(node_id[1:, :, 0], -1, axis=1).ravel(),
                     np.roll(node_id[:-1, :, 0], -1, axis=1).ravel()], axis=1)
    tip = np.stack([node_id[0, :, :-1].ravel(), np.roll(node_id[0, :, :-1], -1, axis=0).ravel(),
                    np.roll(node_id[0, :, 1:], -1, axis=0).ravel(), node_id[0, :, 1:].ravel()],
                   axis=1)
    tags = {TAG_FIXED_BASE: base, TAG_TOOTH_CONTACT: tip}
    meta = {"theta_lines": thetas, "radial_lines": r_lines, "z_lines": z_lines,
            "tip_ring_nodes": node_id[0, :, n_axial], "n_sectors": 0,
            "inner_wall_grid": node_id[0, :, :].copy()}
    h = float(np.mean([np.diff(r_lines).mean(), inner_radius * 2 * np.pi / n_c,
                       np.diff(z_lines).mean()]))
    return Mesh(coords, elements, region, tags, h, meta)


def with_overrides(spec: StatorSpec, **kwargs) -> StatorSpec:
    """Copy of the spec with selected fields replaced."""
    return replace(spec, **kwargs)
