"""Penalty catalog: values, derivative selections, duals, updates, prox.

Supported kinds and their scalar values (``w`` is the composite-objective
multiplier ``weight``, default 1):

  l1                    w * |x|
  ridge                 (w/2) * x^2
  double-pareto         w * gamma * log(1 + |x|/a)
  mcp                   w * [gamma*|x| - x^2/(2a)  if |x| < a*gamma,
                             a*gamma^2/2           otherwise]
  limited-translation   w * min(1, x^2/2)
  psi-specified         inf_{lam>=0} { (x-lam)^2/2 + lam/(2*(1+lam)) }
                        (defined only through its location envelope;
                        value-only, no derivative/dual/prox)

Every function is vectorized over ``x``/``u`` and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import duality
from .duality import GridSpec, conjugate_numeric
from .errors import CapabilityError, ValidationError

__all__ = [
    "PenaltySpec",
    "PENALTY_KINDS",
    "penalty_value",
    "penalty_deriv",
    "penalty_dual",
    "lambda_hat",
    "prox",
    "scale_dual",
    "location_dual",
    "psi_specified_dual",
]

PENALTY_KINDS = (
    "l1",
    "ridge",
    "double-pareto",
    "mcp",
    "limited-translation",
    "psi-specified",
)

# Cap for the scale-family update at x = 0 when the analytic limit diverges.
LAMBDA_CAP = 1e8


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family tag with hyperparameters.

    ``gamma`` and ``a`` parameterize the concave kinds (double-pareto,
    mcp); ``weight`` is the multiplier applied in composite objectives
    and is the sole strength parameter of l1/ridge.
    """

    kind: str
    gamma: float = 1.0
    a: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValidationError(f"unknown penalty kind {self.kind!r}")
        if self.kind in ("double-pareto", "mcp"):
            # gamma == 0 is allowed as the degenerate no-penalty case.
            if self.gamma < 0 or not self.a > 0:
                raise ValidationError(f"{self.kind} requires gamma >= 0 and a > 0")
        if self.weight < 0:
            raise ValidationError("weight must be nonnegative")

    def to_config(self) -> dict:
        """Flat key-value form: kind, gamma, a, weight."""
        return {k: v for k, v in asdict(self).items()}

    @classmethod
    def from_config(cls, config: dict) -> "PenaltySpec":
        known = {"kind", "gamma", "a", "weight"}
        extra = set(config) - known
        if extra:
            raise ValidationError(f"unknown penalty config keys {sorted(extra)}")
        return cls(**config)


def _strength(p: PenaltySpec) -> float:
    """Effective concave strength w*gamma for double-pareto/mcp."""
    return p.weight * p.gamma


def penalty_value(p: PenaltySpec, x):
    """phi(|x|); for psi-specified, the grid-refined envelope infimum."""
    x_arr = np.abs(np.asarray(x, dtype=float))
    if p.kind == "l1":
        out = p.weight * x_arr
    elif p.kind == "ridge":
        out = 0.5 * p.weight * x_arr**2
    elif p.kind == "double-pareto":
        out = _strength(p) * np.log1p(x_arr / p.a)
    elif p.kind == "mcp":
        g, a = p.gamma, p.a
        out = p.weight * np.where(
            x_arr < a * g, g * x_arr - x_arr**2 / (2.0 * a), 0.5 * a * g**2
        )
    elif p.kind == "limited-translation":
        out = p.weight * np.minimum(1.0, 0.5 * x_arr**2)
    else:  # psi-specified
        x_signed = np.asarray(x, dtype=float)
        hi = max(4.0, float(np.max(x_arr)) + 4.0)
        flat = np.atleast_1d(x_signed).ravel()
        lo_b = np.zeros(flat.shape)
        hi_b = np.full(flat.shape, hi)

        def values_at(lam):
            return 0.5 * (flat[:, None] - lam) ** 2 + psi_specified_dual(lam)

        vals, _, _ = duality._refined_min(values_at, lo_b, hi_b, 401, 3)
        out = vals.reshape(np.asarray(x_signed).shape)
    if np.ndim(out) == 0:
        return float(out)
    return out


def penalty_deriv(p: PenaltySpec, x):
    """A superdifferential selection of d/dx phi(|x|).

    At x = 0 this is the right derivative at 0+ (the selection that keeps
    the majorizer tightest at the origin and the update finite).
    """
    if p.kind == "psi-specified":
        raise CapabilityError("psi-specified penalty has no derivative selection")
    x_arr = np.asarray(x, dtype=float)
    ax = np.abs(x_arr)
    # sign selection: sgn(x) with the 0+ branch at the origin
    sgn = np.where(x_arr < 0, -1.0, 1.0)
    if p.kind == "l1":
        out = p.weight * sgn
    elif p.kind == "ridge":
        out = p.weight * x_arr
    elif p.kind == "double-pareto":
        out = sgn * _strength(p) / (p.a + ax)
    elif p.kind == "mcp":
        out = sgn * p.weight * np.maximum(p.gamma - ax / p.a, 0.0)
    else:  # limited-translation
        out = p.weight * np.where(ax < np.sqrt(2.0), x_arr, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def penalty_dual(p: PenaltySpec, lam, grid: GridSpec | None = None):
    """Concave dual ``phi*(lam) = inf_{x>=0} {lam*x - phi(x)}``.

    Closed forms for l1, double-pareto and mcp; other kinds fall back to
    the numeric conjugate on ``grid``.  The dual is -inf for lam < 0
    (rejected here as a domain error) and, for l1, on ``[0, weight)`` --
    the envelope infimum is attained at the effective-domain edge
    lam = weight.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise ValidationError("penalty dual domain is lam >= 0")
    if p.kind == "l1":
        out = np.where(lam_arr >= p.weight, 0.0, -np.inf)
    elif p.kind == "double-pareto":
        G = _strength(p)
        if G == 0.0:
            out = np.zeros_like(lam_arr)
        else:
            edge = G / p.a
            with np.errstate(divide="ignore"):
                body = G * np.log(lam_arr) - lam_arr * p.a + (
                    G - G * np.log(G) + G * np.log(p.a)
                )
            out = np.where(lam_arr >= edge, 0.0, body)
    elif p.kind == "mcp":
        ge = _strength(p)            # effective gamma
        ae = p.a / p.weight if p.weight > 0 else p.a
        if ge == 0.0:
            out = np.zeros_like(lam_arr)
        else:
            out = np.where(lam_arr <= ge, -0.5 * ae * (lam_arr - ge) ** 2, 0.0)
    elif p.kind == "psi-specified":
        raise CapabilityError("psi-specified penalty has no exponential dual")
    else:
        if grid is None:
            grid = GridSpec(0.0, 50.0)
        out = np.asarray(conjugate_numeric(lambda t: penalty_value(p, t),
                                           lam_arr, grid, sense="concave"))
    if out.ndim == 0:
        return float(out)
    return out


_FAMILY_COMPAT = {
    # families under which each kind's envelope representation is valid
    "l1": ("exponential", "gaussian-scale"),
    "ridge": ("gaussian-scale", "gaussian-location"),
    "double-pareto": ("exponential", "gaussian-scale"),
    "mcp": ("exponential", "gaussian-scale"),
    "limited-translation": ("gaussian-scale", "gaussian-location"),
}


def lambda_hat(p: PenaltySpec, x, family) -> float:
    """Envelope-optimal auxiliary value for a compatible family.

    exponential: phi'(|x|); gaussian-scale: phi'(x)/x with its limit at 0
    (capped when the limit diverges); gaussian-location: x - phi'(x).
    """
    tag = family.tag if hasattr(family, "tag") else str(family)
    if p.kind == "psi-specified" or tag not in _FAMILY_COMPAT.get(p.kind, ()):
        raise CapabilityError(f"kind {p.kind!r} has no {tag!r} envelope")
    if tag == "gaussian-location" and p.kind == "ridge" and p.weight > 1:
        raise CapabilityError("ridge location envelope needs weight <= 1")
    x_arr = np.asarray(x, dtype=float)
    if tag == "exponential":
        out = np.abs(penalty_deriv(p, np.abs(x_arr)))
    elif tag == "gaussian-scale":
        ax = np.abs(x_arr)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(penalty_deriv(p, ax)) / ax
        if p.kind == "ridge":
            limit = p.weight
        elif p.kind == "limited-translation":
            limit = p.weight
        else:  # l1, double-pareto, mcp diverge at 0
            limit = LAMBDA_CAP
        out = np.minimum(np.where(ax == 0, limit, ratio), LAMBDA_CAP)
    else:  # gaussian-location
        out = x_arr - penalty_deriv(p, x_arr)
    if out.ndim == 0:
        return float(out)
    return out


def _pick_candidates(cands, objs):
    """Smallest objective wins; near-ties go to the larger magnitude."""
    objs = np.where(np.isfinite(objs), objs, np.inf)
    best = np.min(objs, axis=0)
    tie = objs <= best + 1e-12 * np.maximum(1.0, np.abs(best))
    mag = np.where(tie, np.abs(cands), -np.inf)
    idx = np.argmax(mag, axis=0)
    return np.take_along_axis(cands, idx[None, :], axis=0)[0]


def prox(p: PenaltySpec, u, s):
    """Global minimizer of ``(s/2)(x - u)^2 + phi(x)``.

    Exact closed forms throughout; for the nonconvex kinds the minimizer
    is selected among the stationary points and 0 by objective value
    (larger magnitude on ties, which keeps the concave kinds nearly
    unbiased at the threshold).
    """
    if not np.all(np.asarray(s) > 0):
        raise ValidationError("prox requires s > 0")
    if p.kind == "psi-specified":
        raise CapabilityError("psi-specified penalty has no prox")
    u_arr = np.asarray(u, dtype=float)
    scalar = u_arr.ndim == 0
    u_flat = np.atleast_1d(u_arr).ravel()
    s = float(s)
    au = np.abs(u_flat)
    sgn = np.sign(u_flat)

    if p.kind == "l1":
        out = sgn * np.maximum(au - p.weight / s, 0.0)
    elif p.kind == "ridge":
        out = s * u_flat / (s + p.weight)
    elif p.kind == "double-pareto":
        G = _strength(p)
        if G == 0.0:
            out = u_flat.copy()
        else:
            disc = (au + p.a) ** 2 - 4.0 * G / s
            root = 0.5 * ((au - p.a) + np.sqrt(np.maximum(disc, 0.0)))
            root = np.where((disc >= 0.0) & (root > 0.0), root, 0.0)
            cands = np.vstack([np.zeros_like(au), root])
            objs = 0.5 * s * (cands - au) ** 2 + G * np.log1p(cands / p.a)
            out = sgn * _pick_candidates(cands, objs)
    elif p.kind == "mcp":
        ge = _strength(p)
        if ge == 0.0:
            out = u_flat.copy()
        else:
            ae = p.a / p.weight
            knee = ae * ge
            denom = s - 1.0 / ae
            with np.errstate(divide="ignore", invalid="ignore"):
                inner = (s * au - ge) / denom
            inner = np.where(np.isfinite(inner), inner, 0.0)
            inner = np.clip(inner, 0.0, knee)
            outer = np.where(au >= knee, au, knee)
            cands = np.vstack([np.zeros_like(au), inner,
                               np.full_like(au, knee), outer])
            pv = np.where(cands < knee, ge * cands - cands**2 / (2.0 * ae),
                          0.5 * ae * ge**2)
            objs = 0.5 * s * (cands - au) ** 2 + pv
            out = sgn * _pick_candidates(cands, objs)
    else:  # limited-translation
        w = p.weight
        r2 = np.sqrt(2.0)
        inner = np.clip(s * au / (s + w), 0.0, r2)
        outer = np.maximum(au, r2)
        cands = np.vstack([inner, np.full_like(au, r2), outer])
        objs = 0.5 * s * (cands - au) ** 2 + w * np.minimum(1.0, 0.5 * cands**2)
        out = sgn * _pick_candidates(cands, objs)

    if scalar:
        return float(out[0])
    return out.reshape(u_arr.shape)


def scale_dual(p: PenaltySpec, z_hi: float = 200.0):
    """Concave dual of theta(z) = phi(sqrt(2z)) for the scale envelope.

    Closed forms for ridge, l1 and limited-translation; the concave kinds
    fall back to the numeric conjugate with a lam-dependent bracket.
    """
    if p.kind == "psi-specified":
        raise CapabilityError("psi-specified penalty has no scale dual")
    if p.kind == "ridge":
        w = p.weight

        def dual(lam):
            lam = np.asarray(lam, dtype=float)
            return np.where(lam >= w, 0.0, -np.inf)
        return dual
    if p.kind == "l1":
        w = p.weight

        def dual(lam):
            lam = np.asarray(lam, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(lam > 0, -w**2 / (2.0 * lam), -np.inf)
        return dual
    if p.kind == "limited-translation":
        w = p.weight

        def dual(lam):
            lam = np.asarray(lam, dtype=float)
            return np.minimum(0.0, lam - w)
        return dual

    def theta(z):
        return penalty_value(p, np.sqrt(2.0 * np.maximum(z, 0.0)))

    def dual(lam):
        lam = np.asarray(lam, dtype=float)
        hi = np.maximum(z_hi, np.minimum(_strength(p) ** 2 / (2.0 * lam**2 + 1e-300), 1e10))
        return duality.conjugate_numeric_rowwise(
            theta, lam, np.zeros_like(lam).ravel(), hi.ravel(), count=161, rounds=3,
            sense="concave").reshape(lam.shape)

    return dual


def location_dual(p: PenaltySpec):
    """Half-quadratic dual psi(lam) = sup_x {-(x-lam)^2/2 + phi(x)}."""
    if p.kind == "ridge":
        if not p.weight < 1:
            raise CapabilityError("ridge location dual needs weight < 1")
        w = p.weight

        def dual(lam):
            lam = np.asarray(lam, dtype=float)
            return 0.5 * (w / (1.0 - w)) * lam**2
        return dual
    if p.kind == "limited-translation" and p.weight == 1.0:
        def dual(lam):
            lam = np.asarray(lam, dtype=float)
            al = np.abs(lam)
            return np.where(al <= np.sqrt(2.0), np.sqrt(2.0) * al - 0.5 * lam**2, 1.0)
        return dual
    if p.kind == "psi-specified":
        return psi_specified_dual
    if p.kind == "limited-translation":
        w = p.weight

        def dual(lam):
            # sup_x {-(x-lam)^2/2 + w*min(1, x^2/2)}, numeric for w != 1
            lam = np.asarray(lam, dtype=float)
            flat = lam.ravel()

            def values_at(t):
                return 0.5 * (t - flat[:, None]) ** 2 - w * np.minimum(1.0, 0.5 * t**2)

            vals, _, _ = duality._refined_min(
                values_at, flat - 6.0, flat + 6.0, 161, 3)
            return -vals.reshape(lam.shape)
        return dual
    raise CapabilityError(f"kind {p.kind!r} has no location envelope")


def psi_specified_dual(lam):
    """The directly specified dual lam/(2*(1+lam)) on lam >= 0, +inf below."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = lam / (2.0 * (1.0 + lam))
    out = np.where(lam >= 0, val, np.inf)
    if out.ndim == 0:
        return float(out)
    return out
