"""Absolute pose from 2D-3D correspondences.

Contains the minimal three-point solver (quartic in a distance ratio, followed
by rigid alignment), a RANSAC loop with an adaptive iteration bound, and a
Levenberg-Marquardt refinement of the reprojection error over all inliers.

Pose convention throughout: ``Pose.rotation`` is the world-from-camera
rotation and ``Pose.trans`` the camera centre, so a world point maps to the
camera frame as ``R.T @ (p - t)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DataError, DegenerateGeometryError,
                     InsufficientMatchesError, ShapeError)
from .geometry import CameraIntrinsics, Pose, matrix_to_quat, rodrigues, skew


def reproject(points_w: np.ndarray, pose: Pose,
              intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of world points.

    Returns (pixels (n, 2), in_front (n,) bool). Pixels for points at or
    behind the camera plane are NaN.
    """
    points_w = np.asarray(points_w, dtype=np.float64)
    if points_w.ndim != 2 or points_w.shape[1] != 3:
        raise ShapeError(f"points must be (n, 3), got {points_w.shape}")
    p_c = pose.world_to_camera(points_w)
    z = p_c[:, 2]
    in_front = z > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * p_c[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * p_c[:, 1] / z + intrinsics.cy
    uv = np.stack([u, v], axis=1)
    uv[~in_front] = np.nan
    return uv, in_front


def _bearing_vectors(pixels: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Unit rays in the camera frame through the given pixels."""
    x = (pixels[:, 0] - intrinsics.cx) / intrinsics.fx
    y = (pixels[:, 1] - intrinsics.cy) / intrinsics.fy
    rays = np.stack([x, y, np.ones_like(x)], axis=1)
    return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def _align_camera_to_world(p_cam: np.ndarray, p_world: np.ndarray) -> Pose:
    """Rigid transform taking camera-frame points onto world points (Kabsch)."""
    c_cam = p_cam.mean(axis=0)
    c_world = p_world.mean(axis=0)
    h = (p_cam - c_cam).T @ (p_world - c_world)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = c_world - r @ c_cam
    return Pose(quat=matrix_to_quat(r), trans=t)


def _polish_root(coeffs: np.ndarray, x: float, steps: int = 4) -> float:
    """A few Newton iterations on a real polynomial root."""
    deriv = np.polyder(coeffs)
    for _ in range(steps):
        f = np.polyval(coeffs, x)
        g = np.polyval(deriv, x)
        if g == 0.0:
            break
        x = x - f / g
    return x


def _polish_lengths(lengths: np.ndarray, cosines: np.ndarray,
                    sides: np.ndarray, steps: int = 3) -> np.ndarray:
    """Newton-polish ray lengths on the three law-of-cosines equations."""
    s1, s2, s3 = lengths
    ca, cb, cg = cosines
    a, b, c = sides
    for _ in range(steps):
        f = np.array([s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a * a,
                      s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - b * b,
                      s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c * c])
        jac = np.array([[0.0, 2.0 * s2 - 2.0 * s3 * ca, 2.0 * s3 - 2.0 * s2 * ca],
                        [2.0 * s1 - 2.0 * s3 * cb, 0.0, 2.0 * s3 - 2.0 * s1 * cb],
                        [2.0 * s1 - 2.0 * s2 * cg, 2.0 * s2 - 2.0 * s1 * cg, 0.0]])
        try:
            delta = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        s1, s2, s3 = s1 + delta[0], s2 + delta[1], s3 + delta[2]
        if np.linalg.norm(delta) < 1e-14 * max(s1, s2, s3, 1.0):
            break
    return np.array([s1, s2, s3])


def p3p_solve(points_w: np.ndarray, pixels: np.ndarray,
              intrinsics: CameraIntrinsics) -> list[Pose]:
    """All physically valid camera poses consistent with three correspondences.

    Solves the two-ratio law-of-cosines system: with s_i the unknown ray
    lengths, u = s2/s1 and v = s3/s1, eliminating u yields a quartic in v.
    Each admissible root gives ray lengths, camera-frame points, and a rigid
    alignment to the world points. Returns up to four poses.
    """
    points_w = np.asarray(points_w, dtype=np.float64)
    pixels = np.asarray(pixels, dtype=np.float64)
    if points_w.shape != (3, 3) or pixels.shape != (3, 2):
        raise ShapeError("p3p_solve needs exactly three 2D-3D correspondences")

    side_a = np.linalg.norm(points_w[1] - points_w[2])
    side_b = np.linalg.norm(points_w[0] - points_w[2])
    side_c = np.linalg.norm(points_w[0] - points_w[1])
    scale = max(side_a, side_b, side_c)
    if scale == 0.0:
        raise DegenerateGeometryError("coincident world points")
    area = np.linalg.norm(np.cross(points_w[1] - points_w[0],
                                   points_w[2] - points_w[0]))
    if area < 1e-10 * scale * scale:
        raise DegenerateGeometryError("collinear world points")

    rays = _bearing_vectors(pixels, intrinsics)
    ca = float(rays[1] @ rays[2])
    cb = float(rays[0] @ rays[2])
    cg = float(rays[0] @ rays[1])
    if min(1.0 - abs(ca), 1.0 - abs(cb), 1.0 - abs(cg)) < 1e-12:
        raise DegenerateGeometryError("parallel bearing vectors")

    big_a = (side_a / side_b) ** 2
    big_c = (side_c / side_b) ** 2

    a4 = (big_a - big_c - 1.0) ** 2 - 4.0 * big_c * ca * ca
    a3 = -4.0 * (big_a * big_a * cb - 2.0 * big_a * big_c * cb
                 - big_a * ca * cg - big_a * cb + big_c * big_c * cb
                 - 2.0 * big_c * ca * ca * cb - big_c * ca * cg
                 + big_c * cb + ca * cg)
    a2 = 2.0 * (2.0 * big_a * big_a * cb * cb + big_a * big_a
                - 4.0 * big_a * big_c * cb * cb - 2.0 * big_a * big_c
                - 4.0 * big_a * ca * cb * cg - 2.0 * big_a * cg * cg
                + 2.0 * big_c * big_c * cb * cb + big_c * big_c
                - 2.0 * big_c * ca * ca - 4.0 * big_c * ca * cb * cg
                + 2.0 * ca * ca + 2.0 * cg * cg - 1.0)
    a1 = -4.0 * (big_a * big_a * cb - 2.0 * big_a * big_c * cb
                 - big_a * ca * cg - 2.0 * big_a * cb * cg * cg
                 + big_a * cb + big_c * big_c * cb - big_c * ca * cg
                 - big_c * cb + ca * cg)
    a0 = (big_a - big_c + 1.0) ** 2 - 4.0 * big_a * cg * cg

    coeffs = np.array([a4, a3, a2, a1, a0])
    if not np.all(np.isfinite(coeffs)) or np.max(np.abs(coeffs)) == 0.0:
        raise DegenerateGeometryError("ill-conditioned three-point geometry")
    roots = np.roots(coeffs)

    poses = []
    for root in roots:
        if abs(root.imag) > 1e-6 * max(1.0, abs(root.real)):
            continue
        v = _polish_root(coeffs, float(root.real))
        if v <= 0.0:
            continue
        denom_s1 = 1.0 + v * v - 2.0 * v * cb
        if denom_s1 <= 0.0:
            continue
        # u from the second law-of-cosines equation, a quadratic with unit
        # leading coefficient; the root is chosen by the first equation's
        # residual. (The linear elimination u = f(v)/g(v) degenerates to 0/0
        # for symmetric geometries, so it is not used.)
        disc = cg * cg - (1.0 - big_c * denom_s1)
        if disc < 0.0:
            if disc < -1e-9:
                continue
            disc = 0.0
        u_opts = [cg + math.sqrt(disc), cg - math.sqrt(disc)]
        u = min(u_opts, key=lambda cand: abs(
            cand * cand + v * v - 2.0 * cand * v * ca - big_a * denom_s1))
        if u <= 0.0:
            continue
        s1 = side_b / math.sqrt(denom_s1)
        lengths = _polish_lengths(np.array([s1, u * s1, v * s1]),
                                  np.array([ca, cb, cg]),
                                  np.array([side_a, side_b, side_c]))
        if np.any(lengths <= 0.0):
            continue
        p_cam = rays * lengths[:, None]
        pose = _align_camera_to_world(p_cam, points_w)
        if np.all(pose.world_to_camera(points_w)[:, 2] > 0.0):
            poses.append(pose)
    return poses


@dataclass(frozen=True)
class RansacConfig:
    """Settings for the robust pose loop."""

    threshold_px: float = 12.0
    max_iterations: int = 10_000
    confidence: float = 0.9999
    min_matches: int = 12
    seed: int = 0

    def validate(self):
        if not (0.0 < self.confidence < 1.0):
            raise DataError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.threshold_px <= 0:
            raise DataError(f"threshold_px must be positive, got {self.threshold_px}")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be at least 1")
        if self.min_matches < 3:
            raise DataError("min_matches must be at least 3")


@dataclass(frozen=True)
class RansacResult:
    """Outcome of the robust pose estimation."""

    pose: Pose
    inlier_mask: np.ndarray  # (n,) bool over the input correspondences
    num_iterations: int
    success: bool

    @property
    def num_inliers(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))


def _inlier_mask(points_w, pixels, pose, intrinsics, threshold):
    uv, in_front = reproject(points_w, pose, intrinsics)
    err = np.linalg.norm(uv - pixels, axis=1)
    return in_front & (err <= threshold)


def ransac_pnp(points_w: np.ndarray, pixels: np.ndarray,
               intrinsics: CameraIntrinsics,
               config: RansacConfig = RansacConfig()) -> RansacResult:
    """Robust absolute pose from noisy 2D-3D correspondences.

    Repeatedly solves the minimal problem on random triples, scores
    hypotheses by the number of reprojection inliers (ties keep the earlier
    hypothesis), and stops once the adaptive bound
    log(1-confidence)/log(1-w^3) on the needed iterations is met. The best
    hypothesis is refined on its inliers and the mask recomputed. Fails
    (success=False) when the refined pose supports fewer inliers than
    ``min_matches``.
    """
    config.validate()
    points_w = np.asarray(points_w, dtype=np.float64)
    pixels = np.asarray(pixels, dtype=np.float64)
    if points_w.ndim != 2 or points_w.shape[1] != 3:
        raise ShapeError(f"points must be (n, 3), got {points_w.shape}")
    if pixels.shape != (points_w.shape[0], 2):
        raise ShapeError("pixels must be (n, 2) matching the points")
    n = points_w.shape[0]
    if n < config.min_matches:
        raise InsufficientMatchesError(
            f"need at least {config.min_matches} correspondences, got {n}")

    rng = np.random.default_rng(config.seed)
    best_mask = np.zeros(n, dtype=bool)
    best_pose = Pose.identity()
    best_count = 0
    bound = config.max_iterations
    iteration = 0
    while iteration < min(bound, config.max_iterations):
        iteration += 1
        sample = rng.choice(n, size=3, replace=False)
        try:
            candidates = p3p_solve(points_w[sample], pixels[sample], intrinsics)
        except DegenerateGeometryError:
            continue
        for pose in candidates:
            mask = _inlier_mask(points_w, pixels, pose, intrinsics,
                                config.threshold_px)
            count = int(np.count_nonzero(mask))
            if count > best_count:
                best_count = count
                best_mask = mask
                best_pose = pose
                w = count / n
                if w >= 1.0:
                    bound = iteration
                else:
                    denom = math.log1p(-(w ** 3))
                    if denom < 0.0:
                        bound = min(
                            config.max_iterations,
                            math.ceil(math.log(1.0 - config.confidence) / denom))

    if best_count < 4:
        return RansacResult(pose=best_pose, inlier_mask=best_mask,
                            num_iterations=iteration,
                            success=best_count >= config.min_matches)

    refined, _ = refine_pose(points_w[best_mask], pixels[best_mask],
                             intrinsics, best_pose)
    final_mask = _inlier_mask(points_w, pixels, refined, intrinsics,
                              config.threshold_px)
    if int(np.count_nonzero(final_mask)) < best_count:
        refined, final_mask = best_pose, best_mask
    success = int(np.count_nonzero(final_mask)) >= config.min_matches
    return RansacResult(pose=refined, inlier_mask=final_mask,
                        num_iterations=iteration, success=success)


def _reprojection_residuals(points_w, pixels, pose, intrinsics):
    """Residual vector (2n,) and Jacobian (2n, 6) wrt [rotation, centre]."""
    r_wc = pose.rotation
    p_c = pose.world_to_camera(points_w)
    z = p_c[:, 2]
    u = intrinsics.fx * p_c[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * p_c[:, 1] / z + intrinsics.cy
    res = np.stack([u, v], axis=1) - pixels

    n = points_w.shape[0]
    jac = np.zeros((n, 2, 6))
    inv_z = 1.0 / z
    # d(uv)/d(p_c)
    duv = np.zeros((n, 2, 3))
    duv[:, 0, 0] = intrinsics.fx * inv_z
    duv[:, 0, 2] = -intrinsics.fx * p_c[:, 0] * inv_z * inv_z
    duv[:, 1, 1] = intrinsics.fy * inv_z
    duv[:, 1, 2] = -intrinsics.fy * p_c[:, 1] * inv_z * inv_z
    # rotation perturbed on the right: p_c(w) = exp(-skew(w)) p_c, so
    # d(p_c)/dw = skew(p_c); centre: d(p_c)/dt = -R^T
    dpc_dw = np.stack([skew(pc) for pc in p_c])
    jac[:, :, :3] = duv @ dpc_dw
    jac[:, :, 3:] = duv @ (-r_wc.T)
    return res.reshape(-1), jac.reshape(-1, 6)


def refine_pose(points_w: np.ndarray, pixels: np.ndarray,
                intrinsics: CameraIntrinsics, initial: Pose,
                max_iterations: int = 50, tol: float = 1e-10) -> tuple[Pose, bool]:
    """Levenberg-Marquardt minimisation of the total squared reprojection error.

    Steps that would increase the cost are rejected (the damping factor is
    raised instead), so the returned pose is never worse than the initial
    one. Returns (pose, converged).
    """
    points_w = np.asarray(points_w, dtype=np.float64)
    pixels = np.asarray(pixels, dtype=np.float64)
    if points_w.shape[0] < 4:
        raise InsufficientMatchesError("refinement needs at least 4 points")

    pose = initial
    res, jac = _reprojection_residuals(points_w, pixels, pose, intrinsics)
    cost = float(res @ res)
    lam = 1e-3
    converged = False
    for _ in range(max_iterations):
        jtj = jac.T @ jac
        jtr = jac.T @ res
        step_ok = False
        for _ in range(20):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                delta = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            small = np.linalg.norm(delta) < tol
            new_rot = pose.rotation @ rodrigues(delta[:3])
            candidate = Pose(quat=matrix_to_quat(new_rot),
                             trans=pose.trans + delta[3:])
            new_res, new_jac = _reprojection_residuals(points_w, pixels,
                                                       candidate, intrinsics)
            new_cost = float(new_res @ new_res)
            if np.isfinite(new_cost) and new_cost <= cost:
                pose, res, jac, cost = candidate, new_res, new_jac, new_cost
                lam = max(lam * 0.1, 1e-12)
                step_ok = True
                converged = converged or small
                break
            if small:
                # the proposed update is below resolution and still cannot
                # improve the cost: this is a numerical minimum
                converged = True
                break
            lam *= 10.0
        if converged or not step_ok:
            break
    return pose, converged
