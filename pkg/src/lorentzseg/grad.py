"""Analytic gradients, the exponential-map Jacobian, and a
finite-difference oracle.

Derivations fix curvature c = 1 and differentiate with respect to the
spatial coordinates of the MOVING point, treating its time component as
dependent through x0 = sqrt(1 + ||x'||^2) (so these are total derivatives
along the manifold).  In every two-point function below, ``x`` is the
moving point and ``y`` is the fixed anchor:

  * distance d(x, y) = acosh(Lu), Lu = x0*y0 - x'.y':

        dd/dx_j = -(y_j - (y0/x0) x_j) / sqrt(Lu^2 - 1)

  * exterior angle at the anchor, ext(y, x) = acos(A) with
    A = (x0 + y0*L)/(||y'|| sqrt(L^2-1)), L = <x, y>_L:

        dext/dx_j = 1/sqrt(1-A^2) * 1/(||y'|| sqrt(L^2-1)) *
                    [ -x_j/x0 + (y0 + x0 L)/(L^2 - 1) * (y_j - y0 x_j/x0) ]

  * the sign of the cosine between those two gradients equals
    sign((-x0*L) - y0); Euclidean counterparts (distance to the anchor
    and the angle at the anchor between its origin ray and the offset)
    are exactly orthogonal.

The training stack assembles backprop by chain rule from these closed
forms and the exponential-map Jacobian; no autodiff framework is
involved.  ``finite_difference_gradient`` is the independent oracle used
to cross-check every formula.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OracleError, UsageError
from .lorentz import LorentzPoint, sinh_ratio

FD_STEP = 1e-6  # balances truncation against round-off at 64-bit

_REPORT_FORMAT = "lorentzseg/gradient-report/v1"


def _require_unit_curvature(*points: LorentzPoint):
    for p in points:
        if p.curvature.c != 1.0:
            raise UsageError("analytic gradients are derived at curvature c = 1")


def grad_lorentz_distance(x: LorentzPoint, y: LorentzPoint) -> np.ndarray:
    """Gradient of d(x, y) w.r.t. x's spatial coordinates at c = 1."""
    _require_unit_curvature(x, y)
    lu = x.time * y.time - float(np.dot(x.spatial, y.spatial))
    if abs(lu) <= 1.0 + 1e-12:
        raise DomainError(f"coincident points: |x0 y0 - x'.y'| = {abs(lu)} <= 1")
    return -(y.spatial - (y.time / x.time) * x.spatial) / math.sqrt(lu * lu - 1.0)


def grad_exterior_angle(x: LorentzPoint, y: LorentzPoint) -> np.ndarray:
    """Gradient of the exterior angle at pivot y, ext(y, x), w.r.t. the
    moving point x's spatial coordinates at c = 1."""
    _require_unit_curvature(x, y)
    L = -x.time * y.time + float(np.dot(x.spatial, y.spatial))
    if L * L <= 1.0 + 1e-12:
        raise DomainError("degenerate pair: (L)^2 <= 1")
    ny = y.spatial_norm
    if ny == 0.0:
        raise UsageError("anchor at the origin has no exterior angle")
    denom = ny * math.sqrt(L * L - 1.0)
    A = (x.time + y.time * L) / denom
    if abs(A) >= 1.0 - 1e-9:
        raise DomainError(f"near-degenerate angle: |acos argument| = {abs(A)}")
    inner_term = (
        -x.spatial / x.time
        + ((y.time + x.time * L) / (L * L - 1.0))
        * (y.spatial - y.time * x.spatial / x.time)
    )
    return inner_term / (math.sqrt(1.0 - A * A) * denom)


def grad_exterior_angle_anchor(x: LorentzPoint, y: LorentzPoint) -> np.ndarray:
    """Gradient of ext(y, x) w.r.t. the ANCHOR y's spatial coordinates.

    Companion of grad_exterior_angle for heads whose anchors are
    themselves learned (mask queries); obtained by the same quotient-rule
    route and verified against finite differences."""
    _require_unit_curvature(x, y)
    L = -x.time * y.time + float(np.dot(x.spatial, y.spatial))
    if L * L <= 1.0 + 1e-12:
        raise DomainError("degenerate pair: (L)^2 <= 1")
    ny = y.spatial_norm
    if ny == 0.0:
        raise UsageError("anchor at the origin has no exterior angle")
    D = math.sqrt(L * L - 1.0)
    N = x.time + y.time * L
    A = N / (ny * D)
    if abs(A) >= 1.0 - 1e-9:
        raise DomainError(f"near-degenerate angle: |acos argument| = {abs(A)}")
    dL = x.spatial - x.time * y.spatial / y.time
    dN = L * y.spatial / y.time + y.time * dL
    d_nyD = (y.spatial / ny) * D + ny * (L / D) * dL
    dA = (dN - A * d_nyD) / (ny * D)
    return -dA / math.sqrt(1.0 - A * A)


def grad_sign_predictor(x: LorentzPoint, y: LorentzPoint) -> int:
    """sign((-x0 <x,y>_L) - y0): the predicted sign of the cosine between
    the distance gradient and the exterior-angle gradient at x."""
    _require_unit_curvature(x, y)
    L = -x.time * y.time + float(np.dot(x.spatial, y.spatial))
    s = (-x.time * L) - y.time
    return (s > 0) - (s < 0)


def exp_map_jacobian(v: np.ndarray) -> np.ndarray:
    """Jacobian of the origin exponential lift at c = 1, shape (n+1, n).

    Row 0 is dx0/dv_l = (v_l/r) sinh r; the spatial block is
    delta_jl sinh(r)/r + (v_j v_l / r^2)(cosh r - sinh(r)/r), whose
    diagonal coefficient is strictly positive for every v.  At v = 0 the
    spatial block is the identity and the time row vanishes.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    n = v.size
    r = float(np.linalg.norm(v))
    jac = np.zeros((n + 1, n))
    if r == 0.0:
        jac[1:, :] = np.eye(n)
        return jac
    sr = sinh_ratio(r)
    if r < 1e-4:
        cross = 1.0 / 3.0 + r * r / 30.0  # (cosh r - sinh r / r)/r^2
    else:
        cross = (math.cosh(r) - sr) / (r * r)
    jac[0, :] = v * sr
    jac[1:, :] = sr * np.eye(n) + cross * np.outer(v, v)
    return jac


def grad_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(x.y)/dx = y."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape != y.shape:
        raise UsageError("dimension mismatch")
    return y.copy()


def grad_euclidean_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d||x - y||/dx = (x - y)/||x - y||."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    diff = x - y
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise DomainError("distance gradient undefined at coincident points")
    return diff / norm


def grad_cosine_similarity(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d cos(x,y)/dx = (y ||x||^2 - (x.y) x) / (||y|| ||x||^3)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise DomainError("cosine gradient undefined for zero-norm input")
    return (y * nx * nx - float(np.dot(x, y)) * x) / (ny * nx**3)


def euclidean_exterior_angle(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean analogue of the cone angle: the angle at the anchor y
    between its origin ray and the offset x - y."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    v = x - y
    nv, ny = float(np.linalg.norm(v)), float(np.linalg.norm(y))
    if nv == 0.0 or ny == 0.0:
        raise DomainError("euclidean exterior angle undefined")
    return math.acos(min(1.0, max(-1.0, float(np.dot(y, v)) / (ny * nv))))


def grad_euclidean_exterior_angle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the Euclidean exterior angle w.r.t. x.

    Because the angle only depends on the direction of x - y, the result
    is exactly orthogonal to x - y, hence to the distance gradient.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    v = x - y
    nv, ny = float(np.linalg.norm(v)), float(np.linalg.norm(y))
    if nv == 0.0 or ny == 0.0:
        raise DomainError("euclidean exterior angle undefined")
    A = float(np.dot(y, v)) / (ny * nv)
    if abs(A) >= 1.0 - 1e-12:
        raise DomainError("collinear configuration: angle gradient undefined")
    gc = (y * nv * nv - float(np.dot(y, v)) * v) / (ny * nv**3)
    return -gc / math.sqrt(1.0 - A * A)


def finite_difference_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences (f(x + h e) - f(x - h e)) / 2h per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        hi, lo = f(x + step), f(x - step)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise OracleError(f"non-finite evaluation near coordinate {i}")
        out.flat[i] = (hi - lo) / (2.0 * h)
    return out


def _rel_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = max(1.0, float(np.linalg.norm(analytic)))
    return float(np.linalg.norm(analytic - fd)) / scale


@dataclass
class GradientReport:
    """Outcome of the sampled gradient verification protocol."""

    sample_count: int
    seed: int
    fd_step: float
    max_rel_error: float
    sign_agreement_rate: float
    euclid_orthogonality_violations: int
    samples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": _REPORT_FORMAT,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "fd_step": self.fd_step,
            "max_rel_error": self.max_rel_error,
            "sign_agreement_rate": self.sign_agreement_rate,
            "euclid_orthogonality_violations": self.euclid_orthogonality_violations,
            "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _sample_pair(rng, dim):
    """Draw a pair clear of derivational degeneracies (coincidence,
    collinearity, tiny anchors)."""
    while True:
        xs = rng.normal(size=dim) * rng.uniform(0.3, 1.2)
        ys = rng.normal(size=dim) * rng.uniform(0.3, 1.2)
        nx, ny = np.linalg.norm(xs), np.linalg.norm(ys)
        if min(nx, ny) < 0.05:
            continue
        x = LorentzPoint(math.sqrt(1.0 + nx * nx), xs)
        y = LorentzPoint(math.sqrt(1.0 + ny * ny), ys)
        L = -x.time * y.time + float(np.dot(xs, ys))
        if L * L - 1.0 < 1e-3:
            continue
        A = (x.time + y.time * L) / (ny * math.sqrt(L * L - 1.0))
        if abs(A) > 1.0 - 1e-3:
            continue
        cos_e = abs(np.dot(xs / nx, ys / ny))
        if cos_e > 1.0 - 1e-3:  # euclid collinear
            continue
        return x, y


def gradient_interaction_report(
    sample_count: int, seed: int, dim: int = 3, keep_samples: bool = True,
    inject_error: bool = False,
) -> GradientReport:
    """Sample point pairs and verify every closed form against the FD
    oracle, the gradient-sign law, and Euclidean orthogonality.

    ``inject_error`` is a self-test hook that negates one analytic
    gradient so failure paths can be exercised end to end.
    """
    if sample_count <= 0:
        raise UsageError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    agree = 0
    gated = 0
    violations = 0
    samples = []
    for idx in range(sample_count):
        x, y = _sample_pair(rng, dim)
        gd = grad_lorentz_distance(x, y)
        ga = grad_exterior_angle(x, y)
        if inject_error and idx == 0:
            gd = -gd
        fd_d = finite_difference_gradient(
            lambda s: math.acosh(max(1.0, math.sqrt(1.0 + s @ s) * y.time - s @ y.spatial)),
            x.spatial,
        )
        fd_a = finite_difference_gradient(
            lambda s: _ext_from_spatial(s, y), x.spatial
        )
        err = max(_rel_error(gd, fd_d), _rel_error(ga, fd_a))

        cos = float(np.dot(gd, ga) / (np.linalg.norm(gd) * np.linalg.norm(ga)))
        pred = grad_sign_predictor(x, y)
        if abs(cos) > 1e-8:
            gated += 1
            if (cos > 0) - (cos < 0) == pred:
                agree += 1

        ge_d = grad_euclidean_distance(x.spatial, y.spatial)
        ge_a = grad_euclidean_exterior_angle(x.spatial, y.spatial)
        err = max(
            err,
            _rel_error(ge_d, finite_difference_gradient(
                lambda s: float(np.linalg.norm(s - y.spatial)), x.spatial)),
            _rel_error(ge_a, finite_difference_gradient(
                lambda s: euclidean_exterior_angle(s, y.spatial), x.spatial)),
        )
        cos_e = float(np.dot(ge_d, ge_a) / (np.linalg.norm(ge_d) * np.linalg.norm(ge_a)))
        if abs(cos_e) >= 1e-8:
            violations += 1

        max_rel = max(max_rel, err)
        if keep_samples:
            samples.append({
                "x_spatial": [float(v) for v in x.spatial],
                "y_spatial": [float(v) for v in y.spatial],
                "grad_distance": [float(v) for v in gd],
                "grad_ext_angle": [float(v) for v in ga],
                "fd_distance": [float(v) for v in fd_d],
                "fd_ext_angle": [float(v) for v in fd_a],
                "cosine": cos,
                "euclid_cosine": cos_e,
                "predicted_sign": pred,
                "rel_error": err,
            })
    rate = agree / gated if gated else 1.0
    return GradientReport(
        sample_count=sample_count,
        seed=seed,
        fd_step=FD_STEP,
        max_rel_error=max_rel,
        sign_agreement_rate=rate,
        euclid_orthogonality_violations=violations,
        samples=samples,
    )


def _ext_from_spatial(s: np.ndarray, y: LorentzPoint) -> float:
    x0 = math.sqrt(1.0 + float(s @ s))
    L = -x0 * y.time + float(s @ y.spatial)
    den = y.spatial_norm * math.sqrt(max(L * L - 1.0, 1e-300))
    return math.acos(min(1.0, max(-1.0, (x0 + y.time * L) / den)))


# --------------------------------------------------------------------------
# array layer used by the trainers
# --------------------------------------------------------------------------


def batched_grad_distance_wrt_point(
    pt_spatial, pt_time, an_spatial, an_time, inner, floor=1e-12
):
    """Vectorized dd/d(point spatial) against one anchor per row.

    pt_* are (N, d)/(N,); an_* are (N, d)/(N,) already gathered per row;
    ``inner`` is <point, anchor>_L per row.  Degenerate rows are floored
    rather than raised.
    """
    lu = -inner
    den = np.sqrt(np.maximum(lu * lu - 1.0, floor))
    return -(an_spatial - (an_time / pt_time)[:, None] * pt_spatial) / den[:, None]


def batched_grad_ext_wrt_point(
    pt_spatial, pt_time, an_spatial, an_time, inner, an_norms, floor=1e-12
):
    """Vectorized dext(anchor, point)/d(point spatial), one anchor per row."""
    L = inner
    L2m1 = np.maximum(L * L - 1.0, floor)
    A = (pt_time + an_time * L) / (an_norms * np.sqrt(L2m1))
    sin_term = np.sqrt(np.maximum(1.0 - A * A, floor))
    coef = 1.0 / (sin_term * an_norms * np.sqrt(L2m1))
    bracket = (
        -pt_spatial / pt_time[:, None]
        + ((an_time + pt_time * L) / L2m1)[:, None]
        * (an_spatial - (an_time / pt_time)[:, None] * pt_spatial)
    )
    return coef[:, None] * bracket


def batched_grad_ext_wrt_anchor(
    pt_spatial, pt_time, an_spatial, an_time, inner, an_norms, floor=1e-12
):
    """Vectorized dext(anchor, point)/d(anchor spatial), one anchor per row."""
    L = inner
    L2m1 = np.maximum(L * L - 1.0, floor)
    D = np.sqrt(L2m1)
    N = pt_time + an_time * L
    A = N / (an_norms * D)
    sin_term = np.sqrt(np.maximum(1.0 - A * A, floor))
    dL = pt_spatial - (pt_time / an_time)[:, None] * an_spatial
    dN = (L / an_time)[:, None] * an_spatial + an_time[:, None] * dL
    d_nD = (an_spatial / an_norms[:, None]) * D[:, None] + (an_norms * L / D)[:, None] * dL
    dA = (dN - A[:, None] * d_nD) / (an_norms * D)[:, None]
    return -dA / sin_term[:, None]


def grad_distance_cross(psp, pt, asp, at, inner, floor=1e-12):
    """All-pairs dd/d(point spatial): points (P, d) x anchors (A, d) ->
    (P, A, d), from precomputed inner products (P, A)."""
    lu = -inner
    den = np.sqrt(np.maximum(lu * lu - 1.0, floor))
    term = asp[None, :, :] - (at[None, :] / pt[:, None])[..., None] * psp[:, None, :]
    return -term / den[..., None]


def grad_distance_cross_anchor(psp, pt, asp, at, inner, floor=1e-12):
    """All-pairs dd/d(anchor spatial) by the symmetry of the distance."""
    lu = -inner
    den = np.sqrt(np.maximum(lu * lu - 1.0, floor))
    term = psp[:, None, :] - (pt[:, None] / at[None, :])[..., None] * asp[None, :, :]
    return -term / den[..., None]


def grad_ext_cross_point(psp, pt, asp, at, inner, anorms, floor=1e-12):
    """All-pairs dext(anchor, point)/d(point spatial) -> (P, A, d)."""
    L = inner
    L2m1 = np.maximum(L * L - 1.0, floor)
    A = (pt[:, None] + at[None, :] * L) / (anorms[None, :] * np.sqrt(L2m1))
    sin_term = np.sqrt(np.maximum(1.0 - A * A, floor))
    coef = 1.0 / (sin_term * anorms[None, :] * np.sqrt(L2m1))
    bracket = (
        -(psp / pt[:, None])[:, None, :]
        + ((at[None, :] + pt[:, None] * L) / L2m1)[..., None]
        * (asp[None, :, :] - (at[None, :] / pt[:, None])[..., None] * psp[:, None, :])
    )
    return coef[..., None] * bracket


def grad_ext_cross_anchor(psp, pt, asp, at, inner, anorms, floor=1e-12):
    """All-pairs dext(anchor, point)/d(anchor spatial) -> (P, A, d)."""
    L = inner
    L2m1 = np.maximum(L * L - 1.0, floor)
    D = np.sqrt(L2m1)
    N = pt[:, None] + at[None, :] * L
    A = N / (anorms[None, :] * D)
    sin_term = np.sqrt(np.maximum(1.0 - A * A, floor))
    dL = psp[:, None, :] - (pt[:, None] / at[None, :])[..., None] * asp[None, :, :]
    dN = (L / at[None, :])[..., None] * asp[None, :, :] + at[None, :, None] * dL
    d_nD = (asp / anorms[:, None])[None, :, :] * D[..., None] + (
        anorms[None, :] * L / D
    )[..., None] * dL
    dA = (dN - A[..., None] * d_nD) / (anorms[None, :] * D)[..., None]
    return -dA / sin_term[..., None]


def exp_lift_backward(v: np.ndarray, g_spatial: np.ndarray) -> np.ndarray:
    """Chain a spatial-coordinate gradient back through the origin lift.

    ``v`` (..., d) are raw tangent vectors (pre-clamp), ``g_spatial`` the
    total derivative of the loss w.r.t. the lifted spatial coordinates
    (time dependence already folded in).  Rows beyond the magnitude clamp
    chain through the rescaling map as well.
    """
    v = np.asarray(v, dtype=np.float64)
    r_raw = np.sqrt(np.einsum("...i,...i->...", v, v))
    from .lorentz import MAX_TANGENT_NORM  # local import avoids cycle at module load

    clamped = r_raw > MAX_TANGENT_NORM
    scale = np.where(clamped, MAX_TANGENT_NORM / np.maximum(r_raw, 1e-300), 1.0)
    v_used = v * scale[..., None]
    r = np.minimum(r_raw, MAX_TANGENT_NORM)
    small = r < 1e-4
    r_big = np.maximum(r, 1e-4)  # generic branch evaluated safely, then discarded where small
    sr = np.where(small, 1.0 + r * r / 6.0, np.sinh(r_big) / r_big)
    cross = np.where(
        small,
        1.0 / 3.0 + r * r / 30.0,
        (np.cosh(r_big) - np.sinh(r_big) / r_big) / (r_big * r_big),
    )
    vg = np.einsum("...i,...i->...", v_used, g_spatial)
    g_v = sr[..., None] * g_spatial + cross[..., None] * vg[..., None] * v_used
    if np.any(clamped):
        # derivative of s*v/||v||: (s/||v||)(I - vv^T/||v||^2)
        radial = np.einsum("...i,...i->...", v, g_v) / np.maximum(r_raw * r_raw, 1e-300)
        g_v = np.where(
            clamped[..., None],
            scale[..., None] * (g_v - radial[..., None] * v),
            g_v,
        )
    return g_v
