"""
Edge-guided disparity refinement.

Minimizes, over a disparity image x,

    ||W1 (c - A x)+||^2 + ||W2 Gu x||^2 + ||W2 Gv x||^2 + mu ||x - x0||^2

where Gu, Gv are forward differences, A = diag(du) Gu + diag(dv) Gv is the
derivative along the predicted uphill direction, W1 weights contour pixels
by their probability, W2 = 1 - contour probability, and (.)+ is the
positive part. The positive part is what remains of the slack-constrained
form once the optimal slack is substituted; the result is convex and
piecewise quadratic, solved with semismooth Newton steps, conjugate
gradients and a backtracking line search, coarse to fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg

from edgefuse.utils.errors import InputError, ShapeError
from edgefuse.utils.formats import atomic_write_text
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

ARMIJO = 1e-4
MAX_BACKTRACKS = 40
DECREMENT_TOL = 1e-12


class CMode(Enum):
    """Where the minimum directional change comes from."""

    PER_PIXEL = "per-pixel"
    CONSTANT = "constant"


@dataclass(frozen=True)
class RefineConfig:
    """
    Refinement knobs (`refine.*` in a run config).

    Attributes:
        mu: Weight of the data term at full resolution
        levels: Pyramid levels
        max_iter: Newton iterations per level
        cg_rtol: Relative tolerance of the inner conjugate-gradient solves
        grad_tol: Stop once the gradient norm falls below this fraction of its initial value
        window: Distance in pixels the directional change is integrated over
        smooth_sigma: Gaussian smoothing of x0 before measuring the change
        min_contour: Contour probability below which a pixel carries no directional constraint
        c_mode: Per-pixel or constant minimum change
        c_value: Minimum change at full resolution in constant mode
        mu_level_scale: mu is multiplied by this once per coarser level; 4 keeps the
            data term balanced against the gradient terms, since every coarser
            level halves disparity values while gradients per pixel stay the same
    """

    mu: float = 0.05
    levels: int = 3
    max_iter: int = 15
    cg_rtol: float = 1e-8
    grad_tol: float = 1e-10
    window: float = 5.0
    smooth_sigma: float = 1.0
    min_contour: float = 0.1
    c_mode: CMode = CMode.PER_PIXEL
    c_value: float = 1.0
    mu_level_scale: float = 4.0

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.levels < 1 or self.max_iter < 1:
            raise ValueError("levels and max_iter must be >= 1")
        if self.window <= 0 or self.smooth_sigma < 0:
            raise ValueError("window must be > 0 and smooth_sigma >= 0")
        if self.c_value < 0:
            raise ValueError("c_value must be >= 0")
        if self.mu_level_scale <= 0:
            raise ValueError("mu_level_scale must be > 0")


def build_gradient_operators(width: int, height: int) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """
    Forward-difference operators on a row-major flattened image.

    The last column (for Gu) and last row (for Gv) get zero rows.

    Raises:
        ShapeError: If the image has fewer than two pixels
    """
    if width < 1 or height < 1 or width * height < 2:
        raise ShapeError(f"gradient operators need at least two pixels, got {width}x{height}")

    def forward_difference(n: int) -> sparse.csr_matrix:
        if n == 1:
            return sparse.csr_matrix((1, 1))
        main = -np.ones(n)
        main[-1] = 0.0
        return sparse.diags([main, np.ones(n - 1)], [0, 1], shape=(n, n), format="csr")

    gu = sparse.kron(sparse.identity(height, format="csr"), forward_difference(width), format="csr")
    gv = sparse.kron(forward_difference(height), sparse.identity(width, format="csr"), format="csr")
    return gu, gv


@dataclass(frozen=True, eq=False)
class RefinementProblem:
    """
    One refinement problem on a (height, width) grid; vectors are flattened row-major.

    Attributes:
        x0: Initial disparity
        contour: Contour probability
        du: Column component of the uphill direction
        dv: Row component of the uphill direction
        c: Minimum directional change, >= 0
        mu: Data-term weight, > 0
        width: Grid width
        height: Grid height
        min_contour: Contour probability below which the directional term is off
    """

    x0: np.ndarray
    contour: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    c: np.ndarray
    mu: float
    width: int
    height: int
    min_contour: float = 0.1
    gu: sparse.csr_matrix = field(init=False, repr=False)
    gv: sparse.csr_matrix = field(init=False, repr=False)
    directional: sparse.csr_matrix = field(init=False, repr=False)
    w1: np.ndarray = field(init=False, repr=False)
    w2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.width * self.height
        for name in ("x0", "contour", "du", "dv", "c"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if arr.size != n:
                raise ShapeError(f"{name} has {arr.size} entries, grid {self.width}x{self.height} needs {n}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"{name} holds non-finite values")
            object.__setattr__(self, name, arr)
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if np.any(self.c < 0):
            raise ValueError("c must be >= 0")

        gu, gv = build_gradient_operators(self.width, self.height)
        object.__setattr__(self, "gu", gu)
        object.__setattr__(self, "gv", gv)
        object.__setattr__(self, "directional", (sparse.diags(self.du) @ gu + sparse.diags(self.dv) @ gv).tocsr())
        object.__setattr__(self, "w1", np.where(self.contour >= self.min_contour, self.contour, 0.0))
        object.__setattr__(self, "w2", 1.0 - self.contour)

    @classmethod
    def from_images(
        cls,
        x0: np.ndarray,
        contour: np.ndarray,
        du: np.ndarray,
        dv: np.ndarray,
        c: np.ndarray | float,
        mu: float,
        min_contour: float = 0.1,
    ) -> RefinementProblem:
        height, width = np.asarray(x0).shape[:2]
        c_arr = np.broadcast_to(np.asarray(c, dtype=np.float64), (height, width))
        return cls(x0, contour, du, dv, c_arr, mu, width, height, min_contour)

    def shortfall(self, x: np.ndarray) -> np.ndarray:
        """How far the directional change falls short of c, clipped at zero."""
        return np.maximum(self.c - self.directional @ x, 0.0)

    def objective(self, x: np.ndarray) -> float:
        hinge = self.w1 * self.shortfall(x)
        su = self.w2 * (self.gu @ x)
        sv = self.w2 * (self.gv @ x)
        dx = x - self.x0
        return float(hinge @ hinge + su @ su + sv @ sv + self.mu * (dx @ dx))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        w2sq = self.w2 * self.w2
        return 2.0 * (
            -(self.directional.T @ (self.w1 * self.w1 * self.shortfall(x)))
            + self.gu.T @ (w2sq * (self.gu @ x))
            + self.gv.T @ (w2sq * (self.gv @ x))
            + self.mu * (x - self.x0)
        )

    def hessian(self, x: np.ndarray) -> sparse.csr_matrix:
        """Generalized Hessian with the hinge active where the shortfall is positive."""
        active = (self.shortfall(x) > 0).astype(np.float64)
        a = self.directional
        w2sq = sparse.diags(self.w2 * self.w2)
        h = (
            a.T @ sparse.diags(self.w1 * self.w1 * active) @ a
            + self.gu.T @ w2sq @ self.gu
            + self.gv.T @ w2sq @ self.gv
            + self.mu * sparse.identity(x.size)
        )
        return (2.0 * h).tocsr()


class StopReason(Enum):
    """Why the solver returned."""

    TOLERANCE = "tolerance"
    STALLED = "stalled"
    BUDGET = "budget"


@dataclass
class RefineResult:
    """Solution of one problem plus its objective trace."""

    x: np.ndarray
    objectives: list[float]
    iterations: int
    stop_reason: StopReason

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.TOLERANCE


def refine(
    problem: RefinementProblem,
    start: np.ndarray | None = None,
    max_iter: int = 15,
    cg_rtol: float = 1e-8,
    grad_tol: float = 1e-10,
) -> RefineResult:
    """
    Minimize the refinement objective.

    Each iteration solves the generalized Newton system with conjugate
    gradients and backtracks until the Armijo condition holds, so the
    objective never increases. A zero initial gradient returns the start
    unchanged, as does a Newton step whose predicted decrease is below the
    objective's floating-point resolution.

    Args:
        problem: The problem
        start: Initial iterate; defaults to x0
        max_iter: Newton iteration budget
        cg_rtol: Inner solve tolerance
        grad_tol: Relative gradient-norm stopping tolerance

    Returns:
        RefineResult: Best iterate; `stop_reason` tells a tolerance stop from
        a stalled line search or an exhausted budget
    """
    x = problem.x0.copy() if start is None else np.asarray(start, dtype=np.float64).ravel().copy()
    f = problem.objective(x)
    objectives = [f]
    g = problem.gradient(x)
    g0 = float(np.linalg.norm(g))
    if g0 == 0.0:
        return RefineResult(x=x, objectives=objectives, iterations=0, stop_reason=StopReason.TOLERANCE)

    for iteration in range(1, max_iter + 1):
        step, _ = cg(problem.hessian(x), -g, rtol=cg_rtol, maxiter=10 * x.size)
        slope = float(g @ step)
        if slope >= 0:
            # CG returned a non-descent direction; fall back to steepest descent
            step = -g
            slope = -float(g @ g)
        if -slope <= DECREMENT_TOL * max(abs(f), 1.0):
            return RefineResult(x=x, objectives=objectives, iterations=iteration - 1, stop_reason=StopReason.TOLERANCE)

        alpha = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = x + alpha * step
            f_new = problem.objective(candidate)
            if f_new <= f + ARMIJO * alpha * slope:
                break
            alpha *= 0.5
        else:
            logger.debug("Line search stalled at iteration %d", iteration)
            return RefineResult(x=x, objectives=objectives, iterations=iteration, stop_reason=StopReason.STALLED)

        x, f = candidate, f_new
        objectives.append(f)
        g = problem.gradient(x)
        if np.linalg.norm(g) <= grad_tol * g0:
            return RefineResult(x=x, objectives=objectives, iterations=iteration, stop_reason=StopReason.TOLERANCE)

    return RefineResult(x=x, objectives=objectives, iterations=max_iter, stop_reason=StopReason.BUDGET)


def choose_c(x0: np.ndarray, du: np.ndarray, dv: np.ndarray, window: float = 5.0, sigma: float = 1.0) -> np.ndarray:
    """
    Minimum directional change per pixel.

    The Gaussian-smoothed x0 is sampled bilinearly half a window ahead of
    and behind each pixel along (du, dv); the difference, clamped at zero,
    is the change integrated over the window.
    """
    x = np.asarray(x0, dtype=np.float64)
    smooth = ndimage.gaussian_filter(x, sigma, mode="nearest") if sigma > 0 else x
    rows, cols = np.mgrid[0 : x.shape[0], 0 : x.shape[1]].astype(np.float64)
    half = 0.5 * window

    def sample(r: np.ndarray, c: np.ndarray) -> np.ndarray:
        return ndimage.map_coordinates(smooth, [r, c], order=1, mode="nearest")

    ahead = sample(rows + half * dv, cols + half * du)
    behind = sample(rows - half * dv, cols - half * du)
    return np.maximum(ahead - behind, 0.0)


# --- Pyramid ---


def _pad_even(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    return np.pad(arr, ((0, h % 2), (0, w % 2)), mode="edge")


def _blocks(arr: np.ndarray) -> np.ndarray:
    padded = _pad_even(arr)
    h, w = padded.shape
    return padded.reshape(h // 2, 2, w // 2, 2)


def downsample_level(
    x0: np.ndarray, contour: np.ndarray, du: np.ndarray, dv: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Halve a level: disparity by 2x2 mean divided by two, contours by 2x2
    maximum, directions by 2x2 mean renormalized to unit length.
    """
    x = _blocks(x0).mean(axis=(1, 3)) / 2.0
    p = _blocks(contour).max(axis=(1, 3))
    u = _blocks(du).mean(axis=(1, 3))
    v = _blocks(dv).mean(axis=(1, 3))
    norm = np.hypot(u, v)
    safe = np.where(norm > 1e-12, norm, 1.0)
    u = np.where(norm > 1e-12, u / safe, 0.0)
    v = np.where(norm > 1e-12, v / safe, 0.0)
    return x, p, u, v


def upsample_level(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor upsample by two, cropped to `shape`, values doubled."""
    up = np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)
    return 2.0 * up[: shape[0], : shape[1]]


@dataclass(frozen=True)
class LevelReport:
    level: int
    width: int
    height: int
    mu: float
    iterations: int
    objective_start: float
    objective_end: float
    stop_reason: StopReason

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.TOLERANCE


@dataclass
class MultiscaleResult:
    x: np.ndarray
    levels: list[LevelReport]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.levels)


def multiscale_refine(
    x0: np.ndarray,
    contour: np.ndarray,
    du: np.ndarray,
    dv: np.ndarray,
    config: RefineConfig | None = None,
) -> MultiscaleResult:
    """
    Refine coarse to fine over a factor-2 pyramid.

    Each level solves its own problem (its downsampled x0, contours and
    directions) starting from the upsampled solution of the coarser level.
    Levels whose grid would drop below 2x2 are skipped.

    Args:
        x0: (H, W) initial disparity
        contour: (H, W) contour probability
        du: (H, W) column direction component
        dv: (H, W) row direction component
        config: Solver knobs

    Returns:
        MultiscaleResult: (H, W) refined disparity and per-level reports
    """
    cfg = config or RefineConfig()
    base = np.asarray(x0, dtype=np.float64)
    if base.ndim != 2:
        raise ShapeError(f"x0 must be 2-D, got shape {base.shape}")
    for name, arr in (("contour", contour), ("du", du), ("dv", dv)):
        if np.asarray(arr).shape != base.shape:
            raise ShapeError(f"{name} shape {np.asarray(arr).shape} differs from x0 {base.shape}")

    pyramid = [(base, np.asarray(contour, np.float64), np.asarray(du, np.float64), np.asarray(dv, np.float64))]
    while len(pyramid) < cfg.levels:
        h, w = pyramid[-1][0].shape
        if (h + 1) // 2 < 2 or (w + 1) // 2 < 2:
            break
        pyramid.append(downsample_level(*pyramid[-1]))

    reports: list[LevelReport] = []
    solution: np.ndarray | None = None
    for level in range(len(pyramid) - 1, -1, -1):
        lx0, lp, lu, lv = pyramid[level]
        if cfg.c_mode is CMode.CONSTANT:
            c: np.ndarray | float = cfg.c_value / 2.0**level
        else:
            c = choose_c(lx0, lu, lv, cfg.window, cfg.smooth_sigma)
        mu = cfg.mu * cfg.mu_level_scale**level
        problem = RefinementProblem.from_images(lx0, lp, lu, lv, c, mu, cfg.min_contour)
        start = None if solution is None else upsample_level(solution, lx0.shape).ravel()
        result = refine(problem, start, cfg.max_iter, cfg.cg_rtol, cfg.grad_tol)
        solution = result.x.reshape(lx0.shape)

        report = LevelReport(
            level=level,
            width=lx0.shape[1],
            height=lx0.shape[0],
            mu=mu,
            iterations=result.iterations,
            objective_start=result.objectives[0],
            objective_end=result.objectives[-1],
            stop_reason=result.stop_reason,
        )
        reports.append(report)
        logger.info(
            "Level %d (%dx%d): objective %.6g -> %.6g in %d iterations",
            level,
            report.width,
            report.height,
            report.objective_start,
            report.objective_end,
            report.iterations,
        )
        if not result.converged:
            logger.warning("Level %d stopped early (%s); keeping best iterate", level, result.stop_reason.value)

    assert solution is not None
    return MultiscaleResult(x=solution, levels=reports)


def format_report(result: MultiscaleResult) -> str:
    lines = ["level width height mu iterations objective_start objective_end converged stop"]
    for r in result.levels:
        lines.append(
            f"{r.level} {r.width} {r.height} {r.mu:.6g} {r.iterations} "
            f"{r.objective_start:.9g} {r.objective_end:.9g} {'yes' if r.converged else 'no'} {r.stop_reason.value}"
        )
    return "\n".join(lines) + "\n"


def write_report(path: str | Path, result: MultiscaleResult) -> Path:
    return atomic_write_text(path, format_report(result))
