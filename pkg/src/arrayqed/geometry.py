"""Square lattices with two embedded impurities, plus positional disorder.

Lengths are in units of the lattice transition wavelength, rates in units of
the lattice decay rate.
"""

import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError

COINCIDENCE_TOL = 1e-9
MAX_RESAMPLE = 100


def _unit_polarization(pol):
    d = np.asarray(pol, dtype=np.complex128).reshape(3)
    norm = np.sqrt(np.vdot(d, d).real)
    if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
        raise GeometryError(f"polarization must have unit norm, got |d| = {norm:.12g}")
    return d


@dataclass(frozen=True)
class LatticeSpec:
    nx: int = 10
    ny: int = 10
    spacing: float = 0.3
    separation: float = 0.6
    polarization: tuple = (0.0, 0.0, 1.0)
    delta_LI: float = 0.0
    gamma_L: float = 1.0
    gamma_1: float = 0.01
    gamma_2: float = 0.01

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise GeometryError(f"nx, ny must be positive integers, got {self.nx}, {self.ny}")
        if not self.spacing > 0:
            raise GeometryError(f"lattice spacing must be positive, got {self.spacing}")
        if self.spacing >= 1.0:
            warnings.warn(f"lattice spacing a = {self.spacing} is not subwavelength (a < 1)",
                          stacklevel=3)
        if not (self.gamma_1 > 0 and self.gamma_2 > 0 and self.gamma_L > 0):
            raise GeometryError("decay rates must be positive")
        _unit_polarization(self.polarization)
        self.site_ratio

    @property
    def site_ratio(self):
        """Impurity separation in lattice sites, d / a (validated integer)."""
        ratio = self.separation / self.spacing
        m = int(round(ratio))
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
            raise GeometryError(f"d/a = {ratio!r} is not a positive integer")
        return m

    @property
    def R(self):
        return self.gamma_1 / self.gamma_2

    def with_ratio(self, R):
        """Same geometric-mean impurity rate, gamma_1 / gamma_2 = R."""
        g = math.sqrt(self.gamma_1 * self.gamma_2)
        return replace(self, gamma_1=g * math.sqrt(R), gamma_2=g / math.sqrt(R))

    def with_spacing(self, a):
        """Rescale a and d together (fixed d/a)."""
        return replace(self, spacing=a, separation=self.site_ratio * a)


@dataclass(frozen=True, eq=False)
class Geometry:
    lattice_positions: np.ndarray
    impurity_positions: np.ndarray
    polarization: np.ndarray
    spacing: float
    delta_LI: float = 0.0
    gamma_L: float = 1.0
    gamma_1: float = 0.01
    gamma_2: float = 0.01
    shape: tuple = (0, 0)
    lattice_sites: np.ndarray = field(default=None, repr=False)
    impurity_sites: np.ndarray = field(default=None, repr=False)
    sigma_pos: float = 0.0

    @property
    def n_lattice(self):
        return self.lattice_positions.shape[0]

    @property
    def positions(self):
        """All atoms, lattice first then impurity 1, impurity 2."""
        return np.vstack([self.lattice_positions, self.impurity_positions])

    @property
    def rates(self):
        return np.concatenate([np.full(self.n_lattice, self.gamma_L),
                               [self.gamma_1, self.gamma_2]])

    @property
    def disordered(self):
        return self.sigma_pos > 0

    def min_distance(self):
        pos = self.positions
        if pos.shape[0] < 2:
            return math.inf
        dists, _ = cKDTree(pos).query(pos, k=2)
        return float(dists[:, 1].min())

    def to_table(self):
        """``kind,x,y,z`` text table, 17 significant digits."""
        out = io.StringIO()
        out.write("kind,x,y,z\n")
        rows = [("lattice", p) for p in self.lattice_positions]
        rows += [("impurity1", self.impurity_positions[0]), ("impurity2", self.impurity_positions[1])]
        for kind, p in rows:
            out.write(kind + "," + ",".join(format(float(v), ".17g") for v in p) + "\n")
        return out.getvalue()


def read_geometry_table(text):
    """Parse a ``kind,x,y,z`` table into (lattice_positions, impurity_positions)."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if lines[0].strip() != "kind,x,y,z":
        raise GeometryError("geometry table header must be 'kind,x,y,z'")
    latt, imp = [], {}
    for ln in lines[1:]:
        kind, *xyz = ln.split(",")
        vec = [float(v) for v in xyz]
        if kind == "lattice":
            latt.append(vec)
        elif kind in ("impurity1", "impurity2"):
            imp[kind] = vec
        else:
            raise GeometryError(f"unknown atom kind {kind!r}")
    return np.array(latt, dtype=float).reshape(-1, 3), np.array([imp["impurity1"], imp["impurity2"]])


def build_lattice(spec):
    """Lay out the ``nx`` x ``ny`` grid and place the impurity pair.

    The impurities replace the two lattice sites nearest the grid centre that
    are ``d/a`` sites apart along x (along y when the grid has too few
    columns).  Coordinates are shifted so the impurity midpoint is the origin.
    """
    m = spec.site_ratio
    nx, ny = spec.nx, spec.ny
    if m <= nx - 1:
        axis = 0
    elif m <= ny - 1:
        axis = 1
    else:
        raise GeometryError(f"impurity separation d = {spec.separation} exceeds the lattice extent")

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    sites = np.stack([ii.ravel(), jj.ravel()], axis=1)
    if axis == 0:
        i0, j0 = (nx - 1 - m) // 2, (ny - 1) // 2
        imp_sites = np.array([[i0, j0], [i0 + m, j0]])
    else:
        i0, j0 = (nx - 1) // 2, (ny - 1 - m) // 2
        imp_sites = np.array([[i0, j0], [i0, j0 + m]])

    centre = 0.5 * (imp_sites[0] + imp_sites[1])
    xy = (sites - centre) * spec.spacing
    pos = np.column_stack([xy, np.zeros(len(xy))])
    imp_idx = [int(s[0] * ny + s[1]) for s in imp_sites]
    keep = np.setdiff1d(np.arange(nx * ny), imp_idx)

    geom = Geometry(
        lattice_positions=pos[keep],
        impurity_positions=pos[imp_idx],
        polarization=_unit_polarization(spec.polarization),
        spacing=spec.spacing,
        delta_LI=spec.delta_LI,
        gamma_L=spec.gamma_L,
        gamma_1=spec.gamma_1,
        gamma_2=spec.gamma_2,
        shape=(nx, ny),
        lattice_sites=sites[keep],
        impurity_sites=imp_sites,
    )
    if geom.min_distance() <= 0:
        raise GeometryError("coincident atom positions")
    return geom


def apply_disorder(geom, sigma_pos, seed):
    """Displace every lattice atom by an in-plane Gaussian (std ``sigma_pos``).

    Impurities stay pinned.  Draws that bring an atom within 1e-9 of another
    are redrawn (bounded retries).
    """
    if sigma_pos < 0:
        raise GeometryError(f"sigma_pos must be non-negative, got {sigma_pos}")
    if sigma_pos == 0:
        return geom
    rng = np.random.default_rng(seed)
    base = geom.lattice_positions
    disp = rng.normal(0.0, sigma_pos, size=(base.shape[0], 2))
    latt = base.copy()
    latt[:, :2] += disp
    for _ in range(MAX_RESAMPLE):
        allpos = np.vstack([latt, geom.impurity_positions])
        pairs = cKDTree(allpos).query_pairs(COINCIDENCE_TOL, output_type="ndarray")
        bad = sorted({int(k) for k in pairs.ravel() if k < latt.shape[0]})
        if not bad:
            break
        latt[bad, :2] = base[bad, :2] + rng.normal(0.0, sigma_pos, size=(len(bad), 2))
    else:
        raise GeometryError("could not resolve coincident positions after disorder")
    return replace(geom, lattice_positions=latt, sigma_pos=float(sigma_pos))
