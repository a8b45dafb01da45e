"""Point-cloud registration by EM on a Gaussian mixture with uniform noise.

The reference peaks Y act as mixture centroids; the target peaks X are the
data. A weighted uniform-noise component absorbs outliers and missing peaks.
Three transform families are supported:

* ``hybrid``   - scale + translation on one axis, kernel-weighted smooth
                 displacement field on the other (the default: similarity on
                 axis 1, field on axis 2);
* ``rigid``    - scale + translation on axis 1, pure translation on axis 2;
* ``nonrigid`` - kernel displacement fields on both axes (two weight vectors
                 sharing one kernel matrix).

EM runs on internally standardized clouds: the kernel width and smoothness
defaults (beta = 2, lambda = 2) are calibrated for unit-scale point sets, and
raw retention units (tens of minutes by a few seconds) would let the
displacement field lock partial matchings into local minima. Per axis, the
standardization is chosen so it folds back exactly into the declared
transform family: per-cloud moments on the similarity axis (they fold into
s and t), pooled moments on field axes (they fold into the weights), pooled
scale with per-cloud centers on a pure-translation axis. All returned
parameters are in raw retention units; the kernel therefore measures
distances between standardized coordinates, both inside G and for
out-of-sample queries.

The M-step closed forms are stationary points of the penalized complete-data
objective; the test suite validates them against finite differences and
independent numeric minimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    NumericalUnderflowError,
    SingularSystemError,
    ValidationError,
)
from .peaks import PeakSet

MODES = ("hybrid", "rigid", "nonrigid")
KERNEL_FORMS = ("as-printed", "squared")

#: Relative factors for auto-derived numerical guards, applied to the squared
#: bounding-box diagonal of the joint (standardized) cloud.
SIGMA_FLOOR_FACTOR = 1e-8
SIGMA_TOL_FACTOR = 1e-10
RIDGE_FACTOR = 1e-12
_ABS_SIGMA_FLOOR = 1e-12  # keeps coincident single-point clouds usable


@dataclass(frozen=True)
class RegistrationConfig:
    """EM settings.

    w : uniform-noise weight in [0, 1).
    beta : kernel width (> 0), in standardized coordinate units.
    lam : smoothness weight for the displacement field (>= 0).
    mode : one of {"hybrid", "rigid", "nonrigid"}.
    kernel : "as-printed" = exp(-d / (2 beta)); "squared" = exp(-d^2 / (2 beta^2)).
    sigma_tol / sigma_floor : absolute thresholds on sigma^2 (standardized
        frame); None derives them from the cloud extent at registration time.
    swap_axes : hybrid/rigid only; puts the scale+translation on axis 2 and
        the displacement field on axis 1.
    """

    w: float = 0.3
    beta: float = 2.0
    lam: float = 2.0
    mode: str = "hybrid"
    kernel: str = "as-printed"
    max_iter: int = 150
    sigma_tol: float | None = None
    sigma_floor: float | None = None
    swap_axes: bool = False

    def __post_init__(self):
        if not 0.0 <= self.w < 1.0:
            raise ValidationError("w must lie in [0, 1)")
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if self.lam < 0:
            raise ValidationError("lam must be non-negative")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.kernel not in KERNEL_FORMS:
            raise ValidationError(f"kernel must be one of {KERNEL_FORMS}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be a positive integer")
        for name in ("sigma_tol", "sigma_floor"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive when given")


@dataclass(frozen=True)
class GaussianKernelBasis:
    """Kernel matrix over the reference peaks, reusable for arbitrary points.

    ``offsets``/``scales`` standardize coordinates before the distance is
    taken; the defaults leave coordinates untouched, so a basis built by
    :func:`build_kernel` evaluates the kernel on raw coordinates.
    """

    basis_points: np.ndarray  # (M, 2), raw coordinates
    beta: float
    form: str
    G: np.ndarray  # (M, M), symmetric, unit diagonal
    offsets: tuple[float, float] = (0.0, 0.0)
    scales: tuple[float, float] = (1.0, 1.0)

    def standardize(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - np.asarray(self.offsets)) / np.asarray(
            self.scales
        )

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Cross kernel matrix K[i, m] = k(pts_i, basis_m)."""
        return _kernel_matrix(
            self.standardize(pts),
            self.standardize(self.basis_points),
            self.beta,
            self.form,
        )


def _kernel_matrix(a: np.ndarray, b: np.ndarray, beta: float, form: str) -> np.ndarray:
    d = cdist(a, b)
    if form == "as-printed":
        return np.exp(-d / (2.0 * beta))
    return np.exp(-(d**2) / (2.0 * beta**2))


def build_kernel(
    y: PeakSet | np.ndarray,
    beta: float,
    form: str = "as-printed",
    offsets: tuple[float, float] = (0.0, 0.0),
    scales: tuple[float, float] = (1.0, 1.0),
) -> GaussianKernelBasis:
    """Build the kernel basis over the reference cloud.

    With the default offsets/scales, G[i, j] = exp(-||Y_i - Y_j|| / (2 beta))
    on raw coordinates ("as-printed" form) or the squared-distance Gaussian
    variant ("squared").
    """
    pts = y.points if isinstance(y, PeakSet) else np.asarray(y, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValidationError("basis points must be an M x 2 array, M >= 1")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("basis points must be finite")
    if not beta > 0:
        raise ValidationError("beta must be positive")
    if form not in KERNEL_FORMS:
        raise ValidationError(f"kernel form must be one of {KERNEL_FORMS}")
    basis = GaussianKernelBasis(
        pts.copy(), float(beta), form, np.empty(0), tuple(offsets), tuple(scales)
    )
    g = _kernel_matrix(
        basis.standardize(pts), basis.standardize(pts), float(beta), form
    )
    return replace(basis, G=g)


@dataclass(frozen=True)
class HybridTransform:
    """Estimated transform mapping reference coordinates onto target ones.

    ``rigid_axis`` is the coordinate column carrying scale ``s`` and
    translation ``t`` (hybrid/rigid modes). ``t2`` is the rigid mode's
    translation on the other axis. ``w1``/``w2`` are kernel weights for the
    axis-1 / axis-2 displacement field when that axis is non-rigid; the
    displacement they produce is in raw retention units.
    """

    mode: str = "hybrid"
    rigid_axis: int = 0
    s: float = 1.0
    t: float = 0.0
    t2: float = 0.0
    w1: np.ndarray | None = None
    w2: np.ndarray | None = None
    basis: GaussianKernelBasis | None = None

    def weights_for_axis(self, axis: int) -> np.ndarray | None:
        return self.w1 if axis == 0 else self.w2

    def apply(self, pts: np.ndarray, kernel: np.ndarray | None = None) -> np.ndarray:
        """Transform (K, 2) points; ``kernel`` may pass a precomputed cross
        kernel matrix against the basis (e.g. G itself for pts == basis)."""
        pts = np.asarray(pts, dtype=float)
        out = pts.astype(float).copy()
        if self.mode in ("hybrid", "rigid"):
            ra = self.rigid_axis
            out[:, ra] = self.s * pts[:, ra] + self.t
            if self.mode == "rigid":
                out[:, 1 - ra] = pts[:, 1 - ra] + self.t2
                return out
        k = kernel
        for axis in (0, 1):
            w = self.weights_for_axis(axis)
            if w is None:
                continue
            if k is None:
                k = self.basis.evaluate(pts)
            out[:, axis] += k @ w
        return out


@dataclass(frozen=True)
class CorrespondencePosterior:
    """Soft correspondences P (M x N) plus the per-target noise mass."""

    P: np.ndarray
    noise_mass: np.ndarray

    def column_sums(self) -> np.ndarray:
        return self.P.sum(axis=0) + self.noise_mass


@dataclass(frozen=True)
class AxisStandardization:
    """Per-axis affine frames used inside the EM loop.

    x_offset/x_scale standardize the target cloud, y_offset/y_scale the
    reference cloud; both are chosen so the estimate folds back exactly into
    the declared transform family.
    """

    x_offset: tuple[float, float]
    x_scale: tuple[float, float]
    y_offset: tuple[float, float]
    y_scale: tuple[float, float]

    def forward_x(self, pts: np.ndarray) -> np.ndarray:
        return (pts - np.asarray(self.x_offset)) / np.asarray(self.x_scale)

    def forward_y(self, pts: np.ndarray) -> np.ndarray:
        return (pts - np.asarray(self.y_offset)) / np.asarray(self.y_scale)


@dataclass(frozen=True)
class RegistrationResult:
    transform: HybridTransform
    posterior: CorrespondencePosterior
    sigma2_trajectory: np.ndarray
    objective_trajectory: np.ndarray
    iterations: int
    converged: bool
    config: RegistrationConfig = field(repr=False, default=None)
    standardization: AxisStandardization | None = field(repr=False, default=None)


def _cloud_points(p) -> np.ndarray:
    pts = p.points if isinstance(p, PeakSet) else np.asarray(p, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValidationError("point cloud must be an N x 2 array, N >= 1")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("point cloud must be finite")
    return pts


def _joint_scale2(x: np.ndarray, y: np.ndarray) -> float:
    """Squared bounding-box diagonal of the joint cloud."""
    both = np.vstack([x, y])
    span = both.max(axis=0) - both.min(axis=0)
    return float(span @ span)


def initialize(x, y, config: RegistrationConfig) -> tuple[HybridTransform, float]:
    """Identity transform and the mean squared pairwise distance over 2D."""
    x = _cloud_points(x)
    y = _cloud_points(y)
    basis = None
    if config.mode in ("hybrid", "nonrigid"):
        basis = build_kernel(y, config.beta, config.kernel)
    m = y.shape[0]
    rigid_axis = 1 if config.swap_axes else 0
    zeros = np.zeros(m)
    if config.mode == "hybrid":
        w1, w2 = (zeros.copy(), None) if rigid_axis == 1 else (None, zeros.copy())
    elif config.mode == "nonrigid":
        w1, w2 = zeros.copy(), zeros.copy()
    else:
        w1 = w2 = None
    transform = HybridTransform(
        mode=config.mode, rigid_axis=rigid_axis, w1=w1, w2=w2, basis=basis
    )
    sq = cdist(x, y, "sqeuclidean")
    sigma2 = float(sq.sum() / (2.0 * x.shape[0] * y.shape[0]))
    floor = resolve_sigma_floor(config, _joint_scale2(x, y))
    return transform, max(sigma2, floor)


def resolve_sigma_floor(config: RegistrationConfig, scale2: float) -> float:
    if config.sigma_floor is not None:
        return config.sigma_floor
    return max(SIGMA_FLOOR_FACTOR * scale2, _ABS_SIGMA_FLOOR)


def resolve_sigma_tol(config: RegistrationConfig, scale2: float) -> float:
    if config.sigma_tol is not None:
        return config.sigma_tol
    return max(SIGMA_TOL_FACTOR * scale2, _ABS_SIGMA_FLOOR)


def _noise_constant(sigma2: float, w: float, m: int, n: int) -> float:
    """The E-step denominator constant that makes the uniform component the
    complement of the mixture: (w / (1 - w)) * (M / N) * 2 pi sigma^2."""
    if w == 0.0:
        return 0.0
    return (w / (1.0 - w)) * (m / n) * 2.0 * math.pi * sigma2


def e_step(
    x, y, transform: HybridTransform, sigma2: float, w: float
) -> CorrespondencePosterior:
    """Posterior responsibilities of every (reference, target) pair."""
    x = _cloud_points(x)
    y = _cloud_points(y)
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive in the E-step")
    if not 0.0 <= w < 1.0:
        raise ValidationError("w must lie in [0, 1)")
    ty = transform.apply(y, kernel=_basis_kernel(transform))
    if not np.all(np.isfinite(ty)):
        raise ValidationError("transform produced non-finite coordinates")
    sq = cdist(ty, x, "sqeuclidean")  # (M, N)
    q = np.exp(-sq / (2.0 * sigma2))
    c = _noise_constant(sigma2, w, y.shape[0], x.shape[0])
    denom = q.sum(axis=0) + c
    if (denom == 0).any():
        raise NumericalUnderflowError(
            "all responsibilities underflowed for some target point; "
            "use w > 0 to provide a noise floor"
        )
    p = q / denom
    noise = c / denom if c > 0 else np.zeros_like(denom)
    return CorrespondencePosterior(p, noise)


def _basis_kernel(transform: HybridTransform) -> np.ndarray | None:
    """The precomputed G matrix doubles as the cross kernel at basis points."""
    return transform.basis.G if transform.basis is not None else None


def m_step_axis1(x, y, p: np.ndarray, axis: int = 0) -> tuple[float, float]:
    """P-weighted least-squares similarity fit on one coordinate axis.

    Minimizes sum_mn P_mn (x_n - s y_m - t)^2. Degenerate geometry (no
    variance left in the reference coordinate under P) falls back to s = 1
    with a pure mean shift.
    """
    x = _cloud_points(x)[:, axis]
    y = _cloud_points(y)[:, axis]
    p = np.asarray(p, dtype=float)
    np_total = p.sum()
    if not np_total > 0:
        raise ValidationError("total responsibility must be positive")
    col = p.sum(axis=0)  # weight per target point
    row = p.sum(axis=1)  # weight per reference point
    mx = float(col @ x) / np_total
    my = float(row @ y) / np_total
    yc = y - my
    var = float(row @ (yc * yc)) / np_total
    m2 = float(row @ (y * y)) / np_total
    if var <= 1e-12 * max(m2, 1e-300):
        return 1.0, mx - my
    cov = float(yc @ p @ (x - mx)) / np_total
    s = cov / var
    t = mx - s * my
    return float(s), float(t)


def m_step_translation(x, y, p: np.ndarray, axis: int) -> float:
    """P-weighted pure translation on one axis (rigid mode's second axis)."""
    x = _cloud_points(x)[:, axis]
    y = _cloud_points(y)[:, axis]
    p = np.asarray(p, dtype=float)
    np_total = p.sum()
    if not np_total > 0:
        raise ValidationError("total responsibility must be positive")
    return float(p.sum(axis=0) @ x - p.sum(axis=1) @ y) / np_total


def m_step_axis2(
    x,
    y,
    p: np.ndarray,
    basis: GaussianKernelBasis,
    lam: float,
    sigma2: float,
    axis: int = 1,
) -> np.ndarray:
    """Solve (d(P1) G + lam sigma^2 I) W = P x - d(P1) y on one axis.

    This is the stationarity condition of the penalized complete-data
    objective in W. A ridge guard retries once before reporting failure.
    """
    x = _cloud_points(x)[:, axis]
    y = _cloud_points(y)[:, axis]
    p = np.asarray(p, dtype=float)
    rhs = p @ x - p.sum(axis=1) * y
    a = p.sum(axis=1)[:, None] * basis.G + lam * sigma2 * np.eye(len(y))
    return _guarded_solve(a, rhs)


def _guarded_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        sol = np.linalg.solve(a, rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    ridge = RIDGE_FACTOR * max(float(np.abs(a).max()), 1.0)
    try:
        sol = np.linalg.solve(a + ridge * np.eye(a.shape[0]), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"displacement system singular even with ridge {ridge:g}"
        ) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("displacement solve produced non-finite weights")
    return sol


def update_sigma(
    x,
    y,
    transform: HybridTransform,
    p: np.ndarray,
    sigma_floor: float = _ABS_SIGMA_FLOOR,
) -> float:
    """sigma^2 = sum_mn P_mn ||x_n - T(y_m)||^2 / (2 sum_mn P_mn), clamped."""
    x = _cloud_points(x)
    y = _cloud_points(y)
    p = np.asarray(p, dtype=float)
    np_total = p.sum()
    if not np_total > 0:
        raise ValidationError("total responsibility must be positive")
    ty = transform.apply(y, kernel=_basis_kernel(transform))
    sq = cdist(ty, x, "sqeuclidean")
    sigma2 = float((p * sq).sum() / (2.0 * np_total))
    return max(sigma2, sigma_floor)


def objective(
    x,
    y,
    transform: HybridTransform,
    sigma2: float,
    w: float,
    lam: float,
) -> float:
    """Penalized negative log-likelihood: data term plus smoothness penalty."""
    x = _cloud_points(x)
    y = _cloud_points(y)
    n, m = x.shape[0], y.shape[0]
    ty = transform.apply(y, kernel=_basis_kernel(transform))
    sq = cdist(ty, x, "sqeuclidean")
    q = np.exp(-sq / (2.0 * sigma2))
    px = w / n + (1.0 - w) / (2.0 * math.pi * sigma2 * m) * q.sum(axis=0)
    if (px <= 0).any():
        raise NumericalUnderflowError(
            "likelihood underflowed to zero; use w > 0 to provide a noise floor"
        )
    e1 = -float(np.log(px).sum())
    penalty = 0.0
    if transform.basis is not None:
        g = transform.basis.G
        for axis in (0, 1):
            wvec = transform.weights_for_axis(axis)
            if wvec is not None:
                penalty += 0.5 * lam * float(wvec @ g @ wvec)
    return e1 + penalty


def _safe_std(v: np.ndarray) -> float:
    s = float(v.std())
    return s if s > 0 else 1.0


def _standardization(
    x: np.ndarray, y: np.ndarray, config: RegistrationConfig
) -> AxisStandardization:
    """Pick per-axis frames that fold back exactly into the transform family."""
    ra = 1 if config.swap_axes else 0
    na = 1 - ra
    x_off = [0.0, 0.0]
    x_sc = [1.0, 1.0]
    y_off = [0.0, 0.0]
    y_sc = [1.0, 1.0]
    if config.mode in ("hybrid", "rigid"):
        # Similarity axis: full per-cloud moments (fold into s and t).
        x_off[ra] = float(x[:, ra].mean())
        x_sc[ra] = _safe_std(x[:, ra])
        y_off[ra] = float(y[:, ra].mean())
        y_sc[ra] = _safe_std(y[:, ra])
        pooled_sc = _safe_std(np.concatenate([x[:, na], y[:, na]]))
        if config.mode == "rigid":
            # Translation axis: per-cloud centers, shared scale.
            x_off[na] = float(x[:, na].mean())
            y_off[na] = float(y[:, na].mean())
        else:
            # Field axis: fully shared frame (fold into the weights).
            pooled_off = float(np.concatenate([x[:, na], y[:, na]]).mean())
            x_off[na] = y_off[na] = pooled_off
        x_sc[na] = y_sc[na] = pooled_sc
    else:  # nonrigid: shared frame on both axes
        for axis in (0, 1):
            vals = np.concatenate([x[:, axis], y[:, axis]])
            off = float(vals.mean())
            sc = _safe_std(vals)
            x_off[axis] = y_off[axis] = off
            x_sc[axis] = y_sc[axis] = sc
    return AxisStandardization(
        tuple(x_off), tuple(x_sc), tuple(y_off), tuple(y_sc)
    )


def _fold_back(
    internal: HybridTransform,
    std: AxisStandardization,
    y_raw: np.ndarray,
    config: RegistrationConfig,
) -> HybridTransform:
    """Express the standardized-frame estimate in raw retention units."""
    ra = internal.rigid_axis
    na = 1 - ra
    s_raw = internal.s
    t_raw = internal.t
    t2_raw = internal.t2
    if internal.mode in ("hybrid", "rigid"):
        s_raw = internal.s * std.x_scale[ra] / std.y_scale[ra]
        t_raw = (
            std.x_offset[ra] + std.x_scale[ra] * internal.t - s_raw * std.y_offset[ra]
        )
        if internal.mode == "rigid":
            t2_raw = (
                std.x_offset[na]
                - std.y_offset[na]
                + std.x_scale[na] * internal.t2
            )
    basis = None
    w1 = w2 = None
    if internal.basis is not None:
        basis = build_kernel(
            y_raw,
            config.beta,
            config.kernel,
            offsets=std.y_offset,
            scales=std.y_scale,
        )
        # Displacement in raw units: x_scale matches y_scale on field axes.
        if internal.w1 is not None:
            w1 = std.x_scale[0] * internal.w1
        if internal.w2 is not None:
            w2 = std.x_scale[1] * internal.w2
    return HybridTransform(
        mode=internal.mode,
        rigid_axis=ra,
        s=float(s_raw),
        t=float(t_raw),
        t2=float(t2_raw),
        w1=w1,
        w2=w2,
        basis=basis,
    )


def register(
    x,
    y,
    config: RegistrationConfig | None = None,
    iteration_hook=None,
) -> RegistrationResult:
    """Run EM until the sigma^2 change drops below tolerance or max_iter.

    ``iteration_hook(iteration, posterior, transform, sigma2_used, sigma2_new,
    objective_value)`` is invoked after every completed iteration with the
    standardized-frame state; ``sigma2_used`` is the value the E- and M-steps
    of that iteration saw. The returned transform is in raw units; the
    posterior, sigma^2 and objective trajectories are standardized-frame
    quantities.
    """
    config = config or RegistrationConfig()
    x_raw = _cloud_points(x)
    y_raw = _cloud_points(y)
    if config.mode in ("hybrid", "nonrigid") and y_raw.shape[0] < 2:
        raise ValidationError(f"{config.mode} mode needs at least 2 reference points")

    std = _standardization(x_raw, y_raw, config)
    xs = std.forward_x(x_raw)
    ys = std.forward_y(y_raw)
    scale2 = _joint_scale2(xs, ys)
    sigma_floor = resolve_sigma_floor(config, scale2)
    sigma_tol = resolve_sigma_tol(config, scale2)

    transform, sigma2 = initialize(xs, ys, config)
    ra = transform.rigid_axis
    na = 1 - ra
    sigma2_traj = [sigma2]
    obj_traj = [objective(xs, ys, transform, sigma2, config.w, config.lam)]
    posterior = None
    converged = False
    iterations = 0

    for it in range(1, config.max_iter + 1):
        iterations = it
        posterior = e_step(xs, ys, transform, sigma2, config.w)
        p = posterior.P

        if config.mode in ("hybrid", "rigid"):
            s, t = m_step_axis1(xs, ys, p, axis=ra)
            transform = replace(transform, s=s, t=t)
        if config.mode == "rigid":
            transform = replace(transform, t2=m_step_translation(xs, ys, p, axis=na))
        elif config.mode == "hybrid":
            wvec = m_step_axis2(xs, ys, p, transform.basis, config.lam, sigma2, axis=na)
            transform = replace(transform, **{("w1" if na == 0 else "w2"): wvec})
        else:  # nonrigid: same system matrix, one solve per axis
            w1 = m_step_axis2(xs, ys, p, transform.basis, config.lam, sigma2, axis=0)
            w2 = m_step_axis2(xs, ys, p, transform.basis, config.lam, sigma2, axis=1)
            transform = replace(transform, w1=w1, w2=w2)

        sigma2_new = update_sigma(xs, ys, transform, p, sigma_floor)
        obj = objective(xs, ys, transform, sigma2_new, config.w, config.lam)
        sigma2_traj.append(sigma2_new)
        obj_traj.append(obj)
        if iteration_hook is not None:
            iteration_hook(it, posterior, transform, sigma2, sigma2_new, obj)
        delta = abs(sigma2_new - sigma2)
        sigma2 = sigma2_new
        if delta < sigma_tol:
            converged = True
            break

    # Final posterior coherent with the returned transform.
    posterior = e_step(xs, ys, transform, sigma2, config.w)
    return RegistrationResult(
        transform=_fold_back(transform, std, y_raw, config),
        posterior=posterior,
        sigma2_trajectory=np.asarray(sigma2_traj),
        objective_trajectory=np.asarray(obj_traj),
        iterations=iterations,
        converged=converged,
        config=config,
        standardization=std,
    )


TRANSFORM_FORMAT = "chromalign-transform/1"


def transform_to_dict(transform: HybridTransform) -> dict:
    """Self-contained description: applying it never re-runs the EM."""
    d = {
        "format": TRANSFORM_FORMAT,
        "mode": transform.mode,
        "rigid_axis": transform.rigid_axis,
        "s": transform.s,
        "t": transform.t,
        "t2": transform.t2,
        "w1": None if transform.w1 is None else list(map(float, transform.w1)),
        "w2": None if transform.w2 is None else list(map(float, transform.w2)),
        "basis": None,
    }
    if transform.basis is not None:
        b = transform.basis
        d["basis"] = {
            "points": [[float(u), float(v)] for u, v in b.basis_points],
            "beta": b.beta,
            "form": b.form,
            "offsets": list(b.offsets),
            "scales": list(b.scales),
        }
    return d


def transform_from_dict(d: dict) -> HybridTransform:
    if d.get("format") != TRANSFORM_FORMAT:
        raise ValidationError(f"unsupported transform document: {d.get('format')!r}")
    basis = None
    if d.get("basis") is not None:
        b = d["basis"]
        basis = build_kernel(
            np.asarray(b["points"], dtype=float),
            b["beta"],
            b["form"],
            offsets=tuple(b["offsets"]),
            scales=tuple(b["scales"]),
        )
    def vec(key):
        return None if d.get(key) is None else np.asarray(d[key], dtype=float)

    return HybridTransform(
        mode=d["mode"],
        rigid_axis=int(d["rigid_axis"]),
        s=float(d["s"]),
        t=float(d["t"]),
        t2=float(d["t2"]),
        w1=vec("w1"),
        w2=vec("w2"),
        basis=basis,
    )


def scan_noise_weight(x, y, config: RegistrationConfig | None = None, values=None):
    """Run the registration once per noise weight and report the outcomes.

    Returns a list of records {w, objective, converged, iterations, s, t}
    over ten regularly spaced values in [0, 0.9] by default. No automatic
    selection is attempted; the table is meant for inspection.
    """
    config = config or RegistrationConfig()
    if values is None:
        values = np.linspace(0.0, 0.9, 10)
    records = []
    for wval in values:
        cfg = replace(config, w=float(wval))
        rec = {"w": float(wval)}
        try:
            res = register(x, y, cfg)
            rec.update(
                objective=float(res.objective_trajectory[-1]),
                converged=res.converged,
                iterations=res.iterations,
                s=res.transform.s,
                t=res.transform.t,
            )
        except NumericalUnderflowError as exc:
            rec.update(objective=math.inf, converged=False, error=str(exc))
        records.append(rec)
    return records
