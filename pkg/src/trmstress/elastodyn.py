"""Plane-strain linear elastodynamics on the pixel grid.

One bilinear quadrilateral per pixel with pixel-wise constant Lame
parameters and density, consistent mass, Newmark average-acceleration time
stepping and prescribed (Dirichlet) boundary displacements.

Units inside the solver are the consistent set mm / tonne / s / N / MPa.
Public inputs use GPa for moduli and kg/m^3 for density and are converted
on entry.

Grid convention: array index ``[h, w]`` is the pixel whose centre sits at
``x = (w + 1/2) dx``, ``y = (h + 1/2) dx``; row 0 is the bottom edge
(``y = 0``), column 0 the left edge (``x = 0``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_finite_array, check_scalar
from .exceptions import ConfigurationError, RejectedInputError, SolverError

logger = logging.getLogger(__name__)

GPA_TO_MPA = 1.0e3
KGM3_TO_TMM3 = 1.0e-12

# default phase constants; densities are configuration defaults
PHASE1 = dict(E=20.6, nu=0.2, rho=2400.0)
PHASE2 = dict(E=206.0, nu=0.4, rho=7800.0)

STRESS_COMPONENTS = ("sxx", "syy", "sxy")
DISPLACEMENT_COMPONENTS = ("ux", "uy")


def lame_from_engineering(E, nu):
    """Lame parameters (lambda, mu) from Young's modulus and Poisson's ratio.

    Works elementwise on arrays; units of the result follow ``E``.
    """
    E = np.asarray(E, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu >= 0.5):
        raise RejectedInputError("Poisson's ratio >= 0.5 (incompressible) has no finite lambda")
    if np.any(E <= 0) or np.any(nu <= -1.0):
        raise RejectedInputError("need E > 0 and nu > -1")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    if lam.ndim == 0:
        return float(lam), float(mu)
    return lam, mu


@dataclass
class MaterialField:
    """Pixel-wise E [GPa], nu [-], rho [kg/m^3] with derived lambda, mu [GPa]."""

    E: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    grid_spacing: float
    lam: np.ndarray = field(init=False, repr=False)
    mu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.E = check_finite_array(self.E, "E", ndim=2)
        self.nu = check_finite_array(self.nu, "nu", ndim=2)
        self.rho = check_finite_array(self.rho, "rho", ndim=2)
        if not (self.E.shape == self.nu.shape == self.rho.shape):
            raise RejectedInputError("E, nu and rho must share one grid")
        if np.any(self.E <= 0) or np.any(self.rho <= 0):
            raise RejectedInputError("E and rho must be positive")
        if np.any(self.nu <= 0) or np.any(self.nu >= 0.5):
            raise RejectedInputError("nu must lie in (0, 0.5)")
        check_scalar(self.grid_spacing, "grid_spacing", min_val=0, include_min=False)
        self.lam, self.mu = lame_from_engineering(self.E, self.nu)

    @property
    def shape(self):
        return self.E.shape

    @property
    def length(self) -> float:
        return self.grid_spacing * max(self.shape)

    @classmethod
    def from_phase_map(cls, phase_map, grid_spacing: float, phase1: dict | None = None,
                       phase2: dict | None = None) -> "MaterialField":
        """Map phase labels (1 = phase-1, 0 = phase-2) onto material constants."""
        p1 = {**PHASE1, **(phase1 or {})}
        p2 = {**PHASE2, **(phase2 or {})}
        is1 = np.asarray(phase_map).astype(bool)
        pick = lambda key: np.where(is1, p1[key], p2[key]).astype(float)  # noqa: E731
        return cls(pick("E"), pick("nu"), pick("rho"), grid_spacing)

    @classmethod
    def homogeneous(cls, shape, grid_spacing: float, E: float, nu: float, rho: float) -> "MaterialField":
        return cls(np.full(shape, E, float), np.full(shape, nu, float), np.full(shape, rho, float),
                   grid_spacing)

    def p_wave_speed(self) -> np.ndarray:
        """sqrt((lambda + 2 mu) / rho) per pixel, in mm/s."""
        return np.sqrt((self.lam + 2 * self.mu) * GPA_TO_MPA / (self.rho * KGM3_TO_TMM3))

    def upsample(self, factor: int) -> "MaterialField":
        """Nearest-neighbour refinement of the pixel grid (same physical domain)."""
        rep = lambda a: np.repeat(np.repeat(a, factor, 0), factor, 1)  # noqa: E731
        return MaterialField(rep(self.E), rep(self.nu), rep(self.rho), self.grid_spacing / factor)


@dataclass
class LoadSchedule:
    """Prescribed displacement on one edge: ``u(s, t) = profile(s, t) * magnitude(t)``.

    ``profile`` has shape [n_steps, n_edge] sampled at ``edge_coords`` in
    [0, 1] along the loaded edge; ``magnitude`` is in mm, sampled at
    ``t_i = i * dt`` seconds.
    """

    profile: np.ndarray
    magnitude: np.ndarray
    dt: float
    loaded_edge: str = "right"
    edge_coords: np.ndarray = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.loaded_edge != "right":
            raise ConfigurationError(f"only the right edge can carry the load, got {self.loaded_edge!r}")
        self.magnitude = check_finite_array(self.magnitude, "magnitude", ndim=1)
        self.profile = check_finite_array(self.profile, "profile", ndim=2)
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ConfigurationError("dt must be positive")
        if self.magnitude.size < 2:
            raise ConfigurationError("n_steps must be >= 2")
        if self.profile.shape[0] != self.magnitude.size:
            raise ConfigurationError("profile and magnitude disagree on n_steps")
        if self.edge_coords is None:
            self.edge_coords = np.linspace(0.0, 1.0, self.profile.shape[1])

    @property
    def n_steps(self) -> int:
        return self.magnitude.size

    @property
    def duration(self) -> float:
        return (self.n_steps - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt

    def magnitude_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.magnitude)

    def profile_at(self, s, t: float) -> np.ndarray:
        """Normalized edge shape at edge coordinates ``s`` in [0, 1]."""
        i = int(np.clip(round(t / self.dt), 0, self.n_steps - 1))
        return np.interp(s, self.edge_coords, self.profile[i])

    def displacement(self, s, t) -> np.ndarray:
        """Prescribed displacement at edge coordinates ``s`` and times ``t`` (broadcast)."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.all(self.profile == self.profile[0]):
            return np.interp(s, self.edge_coords, self.profile[0]) * self.magnitude_at(t)
        s_b, t_b = np.broadcast_arrays(s, t)
        out = np.empty(s_b.shape)
        for idx in np.ndindex(s_b.shape):
            out[idx] = self.profile_at(s_b[idx], t_b[idx]) * self.magnitude_at(t_b[idx])
        return out

    def max_abs_displacement(self) -> float:
        return float(np.max(np.abs(self.profile) * np.abs(self.magnitude)[:, None]))


@dataclass
class LoadFamily:
    """Ranges for the default load family (raised-cosine bump times ramped sine).

    Every ``*_range`` is a closed interval sampled uniformly; give equal ends
    to fix a parameter.
    """

    amplitude_range: tuple = (0.5e-3, 2.0e-3)      # mm
    frequency_range: tuple = (2.0e5, 5.0e5)        # Hz
    span_range: tuple = (0.4, 1.0)                 # fraction of edge length
    center_range: tuple = (0.3, 0.7)               # fraction of edge length
    duration: float = 4.0e-6                        # s
    n_steps: int = 401
    n_edge: int = 257


def _raised_cosine(s, center, span):
    half = span / 2.0
    out = np.where(np.abs(s - center) < half, 0.5 * (1.0 + np.cos(np.pi * (s - center) / half)), 0.0)
    return out


def build_load_schedule(family: LoadFamily | None = None, seed: int | None = 0) -> LoadSchedule:
    """Draw one schedule from ``family``; identical seeds give identical schedules."""
    fam = family or LoadFamily()
    if not fam.duration > 0:
        raise ConfigurationError("duration must be positive")
    if fam.n_steps < 2:
        raise ConfigurationError("n_steps must be >= 2")
    dt = fam.duration / (fam.n_steps - 1)
    rng = np.random.default_rng(seed)
    amp = float(rng.uniform(*fam.amplitude_range))
    freq = float(rng.uniform(*fam.frequency_range))
    span = float(rng.uniform(*fam.span_range))
    center = float(rng.uniform(*fam.center_range))
    if freq <= 0 or span <= 0:
        raise ConfigurationError("frequency and span must be positive")

    s = np.linspace(0.0, 1.0, fam.n_edge)
    shape = _raised_cosine(s, center, span)
    shape = shape / np.max(np.abs(shape))
    t = np.arange(fam.n_steps) * dt
    ramp = np.minimum(1.0, t * 2.0 * freq)  # linear over the first half period
    magnitude = amp * np.sin(2.0 * np.pi * freq * t) * ramp
    profile = np.tile(shape, (fam.n_steps, 1))
    params = dict(amplitude=amp, frequency=freq, span=span, center=center)
    return LoadSchedule(profile, magnitude, dt, "right", s, params)


def constant_schedule(magnitude: Sequence[float] | np.ndarray, dt: float, n_edge: int = 257,
                      shape: np.ndarray | None = None) -> LoadSchedule:
    """Schedule with a given magnitude history and a uniform (or given) edge shape."""
    magnitude = np.asarray(magnitude, dtype=float)
    prof = np.ones(n_edge) if shape is None else np.asarray(shape, dtype=float)
    return LoadSchedule(np.tile(prof, (magnitude.size, 1)), magnitude, dt, "right",
                        np.linspace(0.0, 1.0, prof.size))


# --------------------------------------------------------------------------
# Boundary conditions


@dataclass
class DirichletBC:
    """Constrained degrees of freedom and their prescribed history.

    ``values(t)`` returns the displacement [mm] for every entry of ``dofs``.
    """

    dofs: np.ndarray
    values: Callable[[float], np.ndarray]


def node_index(H: int, W: int):
    """Node ids laid out [H+1, W+1]; node (r, c) sits at x = c dx, y = r dx."""
    return np.arange((H + 1) * (W + 1)).reshape(H + 1, W + 1)


def boundary_from_schedule(shape, load: LoadSchedule) -> DirichletBC:
    """u_x = 0 on the left edge, u_y = 0 on the bottom edge, u_x prescribed on the right edge."""
    H, W = shape
    nodes = node_index(H, W)
    left = nodes[:, 0]
    bottom = nodes[0, :]
    right = nodes[:, W]
    s_right = np.arange(H + 1) / H
    dofs = np.concatenate([2 * left, 2 * bottom + 1, 2 * right])
    n_fixed = left.size + bottom.size

    if np.all(load.profile == load.profile[0]):
        shape_right = np.interp(s_right, load.edge_coords, load.profile[0])

        def values(t):
            out = np.zeros(dofs.size)
            out[n_fixed:] = shape_right * load.magnitude_at(t)
            return out
    else:
        def values(t):
            out = np.zeros(dofs.size)
            out[n_fixed:] = load.profile_at(s_right, t) * load.magnitude_at(t)
            return out

    return DirichletBC(dofs, values)


def _rigid_body_rank(shape, dofs, grid_spacing) -> int:
    H, W = shape
    r, c = np.divmod(np.arange((H + 1) * (W + 1)), W + 1)
    x, y = c * grid_spacing, r * grid_spacing
    modes = np.zeros((2 * x.size, 3))
    modes[0::2, 0] = 1.0
    modes[1::2, 1] = 1.0
    modes[0::2, 2] = -y
    modes[1::2, 2] = x
    return int(np.linalg.matrix_rank(modes[np.unique(dofs)]))


# --------------------------------------------------------------------------
# Element matrices and assembly

_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)
_NODE_XI = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def _shape_grads(xi, eta):
    """dN/dxi, dN/deta for the four bilinear shape functions, [2, 4]."""
    return 0.25 * np.array([_NODE_XI[:, 0] * (1 + _NODE_XI[:, 1] * eta),
                            _NODE_XI[:, 1] * (1 + _NODE_XI[:, 0] * xi)])


def _shape_values(xi, eta):
    return 0.25 * (1 + _NODE_XI[:, 0] * xi) * (1 + _NODE_XI[:, 1] * eta)


def _b_matrix(xi, eta, h):
    """Strain-displacement matrix (engineering shear) for a square element of side h."""
    g = _shape_grads(xi, eta) * (2.0 / h)
    B = np.zeros((3, 8))
    B[0, 0::2] = g[0]
    B[1, 1::2] = g[1]
    B[2, 0::2] = g[1]
    B[2, 1::2] = g[0]
    return B


def _reference_matrices():
    """Unit-lambda and unit-mu stiffness, and unit-density mass, for a unit square."""
    D_lam = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    D_mu = np.array([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    K_lam = np.zeros((8, 8))
    K_mu = np.zeros((8, 8))
    M = np.zeros((8, 8))
    w = 0.25  # Jacobian determinant (h/2)^2 with h = 1
    for xi in _GAUSS:
        for eta in _GAUSS:
            B = _b_matrix(xi, eta, 1.0)
            K_lam += B.T @ D_lam @ B * w
            K_mu += B.T @ D_mu @ B * w
            N = _shape_values(xi, eta)
            Nm = np.zeros((2, 8))
            Nm[0, 0::2] = N
            Nm[1, 1::2] = N
            M += Nm.T @ Nm * w
    return K_lam, K_mu, M


_K_LAM, _K_MU, _M_UNIT = _reference_matrices()


def element_dofs(H: int, W: int) -> np.ndarray:
    """[H*W, 8] global dofs per element, counter-clockwise from the lower-left node."""
    nodes = node_index(H, W)
    n = np.stack([nodes[:-1, :-1], nodes[:-1, 1:], nodes[1:, 1:], nodes[1:, :-1]], axis=-1).reshape(-1, 4)
    d = np.empty((n.shape[0], 8), dtype=np.int64)
    d[:, 0::2] = 2 * n
    d[:, 1::2] = 2 * n + 1
    return d


def assemble(material: MaterialField):
    """Global stiffness [N/mm] and consistent mass [t] as CSR matrices."""
    H, W = material.shape
    h = material.grid_spacing
    edofs = element_dofs(H, W)
    lam = material.lam.ravel() * GPA_TO_MPA
    mu = material.mu.ravel() * GPA_TO_MPA
    rho = material.rho.ravel() * KGM3_TO_TMM3
    rows = np.repeat(edofs, 8, axis=1).ravel()
    cols = np.tile(edofs, (1, 8)).ravel()
    kvals = (lam[:, None] * _K_LAM.ravel()[None] + mu[:, None] * _K_MU.ravel()[None]).ravel()
    mvals = (rho[:, None] * h * h * _M_UNIT.ravel()[None]).ravel()
    n = 2 * (H + 1) * (W + 1)
    K = sp.coo_matrix((kvals, (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((mvals, (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def element_center_stress(material: MaterialField, u: np.ndarray) -> np.ndarray:
    """Stresses [MPa] at element centres for nodal displacement(s).

    ``u`` is [..., ndof]; returns [..., 3, H, W] ordered (sxx, syy, sxy).
    """
    H, W = material.shape
    B0 = _b_matrix(0.0, 0.0, material.grid_spacing)
    edofs = element_dofs(H, W)
    ue = u[..., edofs]                                  # [..., E, 8]
    eps = np.einsum("ij,...ej->...ei", B0, ue)          # [..., E, 3]
    lam = material.lam.ravel() * GPA_TO_MPA
    mu = material.mu.ravel() * GPA_TO_MPA
    sxx = (lam + 2 * mu) * eps[..., 0] + lam * eps[..., 1]
    syy = lam * eps[..., 0] + (lam + 2 * mu) * eps[..., 1]
    sxy = mu * eps[..., 2]
    out = np.stack([sxx, syy, sxy], axis=-2)
    return out.reshape(*out.shape[:-1], H, W)


def nodal_to_pixel(u_nodes: np.ndarray) -> np.ndarray:
    """Bilinear value at pixel centres from [..., H+1, W+1] nodal values."""
    return 0.25 * (u_nodes[..., :-1, :-1] + u_nodes[..., :-1, 1:] + u_nodes[..., 1:, :-1]
                   + u_nodes[..., 1:, 1:])


# --------------------------------------------------------------------------
# Solution containers


@dataclass
class StressVideo:
    component: str
    values: np.ndarray      # [T, H, W] MPa
    dt: float               # s between frames
    grid_spacing: float     # mm

    def __post_init__(self):
        if self.component not in STRESS_COMPONENTS:
            raise RejectedInputError(f"unknown stress component {self.component!r}")
        self.values = check_finite_array(self.values, "stress video", ndim=3)


@dataclass
class DisplacementVideo:
    component: str
    values: np.ndarray      # [T, H, W] mm
    dt: float
    grid_spacing: float

    def __post_init__(self):
        if self.component not in DISPLACEMENT_COMPONENTS:
            raise RejectedInputError(f"unknown displacement component {self.component!r}")
        self.values = check_finite_array(self.values, "displacement video", ndim=3)


@dataclass
class ElastodynamicSolution:
    """Frame-sampled solution; frames sit at ``times`` (seconds)."""

    times: np.ndarray
    ux: DisplacementVideo
    uy: DisplacementVideo
    sxx: StressVideo
    syy: StressVideo
    sxy: StressVideo
    nodal_u: np.ndarray            # [T, H+1, W+1, 2]
    energy: np.ndarray | None = None
    internal_dt: float | None = None

    @property
    def stress(self) -> dict:
        return {"sxx": self.sxx, "syy": self.syy, "sxy": self.sxy}

    @property
    def displacement(self) -> dict:
        return {"ux": self.ux, "uy": self.uy}


def frame_times(duration: float, n_frames: int) -> np.ndarray:
    """Output frame instants (k + 1) * duration / n_frames, k = 0..n_frames-1."""
    return (np.arange(n_frames) + 1.0) * duration / n_frames


def _factorize(A):
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    return lu


def _check_solve(A, x, b, what):
    res = np.linalg.norm(A @ x - b)
    scale = max(np.linalg.norm(b), 1e-300)
    if not np.all(np.isfinite(x)) or res > 1e-6 * scale + 1e-300:
        raise SolverError(f"{what}: linear solve did not converge (relative residual {res / scale:.3e})")


def solve_static(material: MaterialField, bc: DirichletBC, t: float = 0.0) -> np.ndarray:
    """Static equilibrium under the boundary values at time ``t``; returns nodal u [ndof]."""
    K, _ = assemble(material)
    n = K.shape[0]
    if _rigid_body_rank(material.shape, bc.dofs, material.grid_spacing) < 3:
        raise SolverError("singular stiffness: constraints do not remove all rigid-body modes")
    free = np.setdiff1d(np.arange(n), bc.dofs)
    u = np.zeros(n)
    u[bc.dofs] = bc.values(t)
    Kff = K[free][:, free]
    rhs = -(K[free][:, bc.dofs] @ u[bc.dofs])
    lu = _factorize(Kff)
    u[free] = lu.solve(rhs)
    _check_solve(Kff, u[free], rhs, "static solve")
    return u


def solve_elastodynamics(material: MaterialField, load: LoadSchedule | None = None,
                         n_frames: int = 24, *, bc: DirichletBC | None = None,
                         duration: float | None = None, cfl: float = 1.0,
                         beta: float = 0.25, gamma: float = 0.5,
                         track_energy: bool = False) -> ElastodynamicSolution:
    """Integrate M a + K u = 0 with prescribed boundary displacements.

    The internal step is the largest one that keeps the CFL number with
    respect to the fastest P-wave at or below ``cfl`` while dividing the
    frame interval evenly. The body starts at rest and undeformed.
    """
    if bc is None:
        if load is None:
            raise ConfigurationError("need a load schedule or explicit boundary conditions")
        bc = boundary_from_schedule(material.shape, load)
    if duration is None:
        if load is None:
            raise ConfigurationError("duration is required with explicit boundary conditions")
        duration = load.duration
    check_scalar(n_frames, "n_frames", min_val=1, integer=True)
    check_scalar(duration, "duration", min_val=0, include_min=False)
    if _rigid_body_rank(material.shape, bc.dofs, material.grid_spacing) < 3:
        raise SolverError("singular stiffness: constraints do not remove all rigid-body modes")

    H, W = material.shape
    h = material.grid_spacing
    K, M = assemble(material)
    n = K.shape[0]
    if np.unique(bc.dofs).size != bc.dofs.size:
        # duplicated dofs keep their last listed value
        _, first_rev = np.unique(bc.dofs[::-1], return_index=True)
        keep = np.sort(bc.dofs.size - 1 - first_rev)
        raw_values = bc.values
        bc = DirichletBC(bc.dofs[keep], lambda t, _k=keep, _f=raw_values: _f(t)[_k])
    cdofs = bc.dofs
    free = np.setdiff1d(np.arange(n), cdofs)

    frame_dt = duration / n_frames
    dt_cfl = cfl * h / float(material.p_wave_speed().max())
    n_sub = max(1, math.ceil(frame_dt / dt_cfl - 1e-9))
    dt = frame_dt / n_sub
    n_total = n_sub * n_frames
    logger.debug("elastodynamics: %d x %d grid, dt = %.3e s, %d steps", H, W, dt, n_total)

    c0 = 1.0 / (beta * dt * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0
    Keff = (K + c0 * M).tocsr()
    Kff = Keff[free][:, free]
    Kfc = Keff[free][:, cdofs]
    Mf = M[free]
    lu = _factorize(Kff)

    u = np.zeros(n)
    v = np.zeros(n)
    a = np.zeros(n)
    u[cdofs] = bc.values(0.0)
    if np.any(u[cdofs] != 0):
        logger.warning("non-zero boundary displacement at t = 0; starting from that state")

    times = frame_times(duration, n_frames)
    frames = np.empty((n_frames, n))
    energy = np.empty(n_total + 1) if track_energy else None
    if track_energy:
        energy[0] = 0.5 * (u @ (K @ u) + v @ (M @ v))

    for step in range(1, n_total + 1):
        # frame steps use the reported frame time so boundary values match it bit for bit
        t = times[step // n_sub - 1] if step % n_sub == 0 else step * dt
        u_new = np.empty(n)
        u_new[cdofs] = bc.values(t)
        pred = c0 * u + c2 * v + c3 * a
        rhs = Mf @ pred - Kfc @ u_new[cdofs]
        u_new[free] = lu.solve(rhs)
        a_new = c0 * (u_new - u) - c2 * v - c3 * a
        v = v + dt * ((1.0 - gamma) * a + gamma * a_new)
        a = a_new
        u = u_new
        if step == 1:
            _check_solve(Kff, u[free], rhs, "Newmark step")
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite displacement at step {step}")
        if step % n_sub == 0:
            frames[step // n_sub - 1] = u
        if track_energy:
            energy[step] = 0.5 * (u @ (K @ u) + v @ (M @ v))

    stress = element_center_stress(material, frames)          # [T, 3, H, W]
    nodal = frames.reshape(n_frames, H + 1, W + 1, 2)
    pix = nodal_to_pixel(np.moveaxis(nodal, -1, 0))           # [2, T, H, W]
    return ElastodynamicSolution(
        times=times,
        ux=DisplacementVideo("ux", pix[0], frame_dt, h),
        uy=DisplacementVideo("uy", pix[1], frame_dt, h),
        sxx=StressVideo("sxx", stress[:, 0], frame_dt, h),
        syy=StressVideo("syy", stress[:, 1], frame_dt, h),
        sxy=StressVideo("sxy", stress[:, 2], frame_dt, h),
        nodal_u=nodal,
        energy=energy,
        internal_dt=dt,
    )
