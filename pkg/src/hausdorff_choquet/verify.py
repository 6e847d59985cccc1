"""Bracket-consistent checks of the capacitary Poincare-Sobolev inequalities.

An inequality ``A <= c B`` is judged from brackets ``[A_lo, A_hi]`` and
``[B_lo, B_hi]``:

* violation    when ``A_lo > cap * B_hi`` (certified: no honest bracket pair allows it),
* consistent   when ``A_hi <= cap * B_lo``,
* inconclusive otherwise.

The empirical constant recorded with each report is ``A_hi / B_lo``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .choquet import CHOQUET_OPTIONS, DEFAULT_LEVELS, choquet_integral, make_ladder
from .content import ContentOptions, content_bracket
from .errors import ValidationError
from .grid import ScalarField, closed_superlevel, fd_gradient, lebesgue_integral, superlevel
from .testbed import CantorSpec, TentSpec, cantor_capacitary, cantor_set, tent2d, truncate

THEOREMS = ("ps", "spw", "limit", "ko", "superlevel")

# Calibrated on the testbed (bump, tent, truncated bump, bump sums) at 64 and
# 128 cells per side.  Largest observed constants: ps 1.14, spw 0.23,
# limit 1.48, ko 0.14, superlevel 0.31; each cap leaves a factor >= 3.
DEFAULT_CAPS = {"ps": 5.0, "spw": 1.0, "limit": 5.0, "ko": 1.0, "superlevel": 1.0}
PS_MAX_FRACTION = 0.95


@dataclass(frozen=True)
class InequalityParams:
    theorem: str
    n: int
    delta: float
    p: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        validate_params(self)

    @property
    def content_dim(self) -> float:
        """Dimension of the content on the left-hand side."""
        t, n, d, p, k = self.theorem, self.n, self.delta, self.p, self.kappa
        if t == "ps":
            return d - k * p
        if t in ("spw", "ko", "superlevel"):
            return n - k
        if t == "limit":
            return d - k * d / n
        return d

    @property
    def lhs_power(self) -> float:
        """Power of |u| integrated on the left-hand side."""
        t, n, d, p, k = self.theorem, self.n, self.delta, self.p, self.kappa
        if t == "ps":
            return p * (d - k * p) / (d - p)
        if t == "spw":
            return (n - k) / (n - 1)
        if t == "limit":
            return (d - k * d / n) / (n - 1)
        return 1.0

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem,
            "n": self.n,
            "delta": self.delta,
            "p": self.p,
            "kappa": self.kappa,
            "content_dim": self.content_dim,
            "lhs_power": self.lhs_power,
        }


def limit_window(n: int, kappa: float) -> tuple[float, float]:
    return (n - 1) / (1 - kappa / n), float(n)


def validate_params(pr: InequalityParams) -> None:
    t, n, d, p, k = pr.theorem, pr.n, pr.delta, pr.p, pr.kappa
    if t not in THEOREMS + ("tent-sharpness", "cantor-blowup"):
        raise ValidationError(f"unknown theorem {t!r}; choose one of {', '.join(THEOREMS)}")
    if n not in (1, 2, 3):
        raise ValidationError(f"dimension n = {n} outside {{1, 2, 3}}")
    if not (0 < d <= n):
        raise ValidationError(f"delta = {d} outside (0, n] with n = {n}")
    if t == "ps":
        if not (0 <= k < 1):
            raise ValidationError(f"kappa = {k} outside [0, 1)")
        if not (d / n < p < d):
            raise ValidationError(f"p = {p} outside (delta/n, delta) = ({d / n}, {d})")
        if p > PS_MAX_FRACTION * d:
            raise ValidationError(
                f"p = {p} exceeds {PS_MAX_FRACTION} * delta = {PS_MAX_FRACTION * d}; the left exponent blows up as p -> delta"
            )
        if d - k * p < 0.1:
            raise ValidationError(f"content dimension delta - kappa p = {d - k * p} is below 0.1")
    if t in ("spw", "limit", "ko", "superlevel"):
        if not (0 <= k <= 1):
            raise ValidationError(f"kappa = {k} outside [0, 1]")
        if n < 2:
            raise ValidationError("this inequality needs n >= 2")
    if t == "limit":
        lo, hi = limit_window(n, k)
        if not (lo - 1e-12 <= d <= hi):
            raise ValidationError(
                f"delta = {d} outside the window (n-1)/(1-kappa/n) <= delta <= n, i.e. [{lo:.6g}, {hi:g}]"
            )


@dataclass
class InequalityReport:
    params: InequalityParams
    lhs: tuple[float, float]
    rhs: tuple[float, float]
    cap: float | None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> tuple[float, float]:
        return _div(self.lhs[0], self.rhs[1]), _div(self.lhs[1], self.rhs[0])

    @property
    def constant(self) -> float:
        return _div(self.lhs[1], self.rhs[0])

    @property
    def verdict(self) -> str:
        return verdict(self.lhs, self.rhs, self.cap)

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
            "ratio": list(self.ratio),
            "cap": self.cap,
            "verdict": self.verdict,
            "constant": self.constant,
            "extra": self.extra,
        }


def _div(a: float, b: float) -> float:
    if a == 0:
        return 0.0
    return math.inf if b == 0 else a / b


def verdict(lhs, rhs, cap) -> str:
    if cap is None:
        return "unchecked"
    if lhs[0] > cap * rhs[1]:
        return "violation"
    if lhs[1] <= cap * rhs[0]:
        return "consistent"
    return "inconclusive"


@dataclass(frozen=True)
class VerifyConfig:
    m: int = DEFAULT_LEVELS
    options: ContentOptions = CHOQUET_OPTIONS
    caps: tuple[tuple[str, float], ...] = tuple(DEFAULT_CAPS.items())

    def cap(self, theorem: str) -> float:
        return dict(self.caps)[theorem]

    def to_json(self) -> dict:
        return {"m": self.m, "options": self.options.to_json(), "caps": dict(self.caps)}


def _gradient(f: ScalarField) -> ScalarField:
    return (f if f.gradient is not None else fd_gradient(f)).gradient_field()


def _choquet_norm(f: ScalarField, dim: float, power: float, cfg: VerifyConfig, sides="both"):
    """Bracket of ``(int f^power dH^dim)^(1/power)``."""
    cb = choquet_integral(f, dim, cfg.m, alpha=power, options=cfg.options, sides=sides)
    lo, hi = cb.power(1 / power)
    return (lo, hi), cb


def _grad_lebesgue(f: ScalarField) -> float:
    g = _gradient(f)
    return lebesgue_integral(g)


# ---------------------------------------------------------------------------
# the five inequalities


def verify_ps(f: ScalarField, params: InequalityParams, cfg: VerifyConfig = VerifyConfig()) -> InequalityReport:
    """LHS ``(int |u|^q dH^{delta - kappa p})^{1/q}``, RHS ``(int |grad u|^p dH^delta)^{1/p}``."""
    if params.theorem != "ps":
        raise ValidationError("verify_ps needs params for theorem 'ps'")
    if params.n != f.grid.n:
        raise ValidationError("params.n does not match the field's grid")
    lhs, _ = _choquet_norm(f, params.content_dim, params.lhs_power, cfg)
    rhs, _ = _choquet_norm(_gradient(f), params.delta, params.p, cfg)
    return InequalityReport(params, lhs, rhs, cfg.cap("ps"))


def verify_spw(f: ScalarField, kappa: float, cfg: VerifyConfig = VerifyConfig()) -> InequalityReport:
    """LHS ``(int |u|^{(n-k)/(n-1)} dH^{n-k})^{(n-1)/(n-k)}``, RHS ``int |grad u| dx``."""
    n = f.grid.n
    params = InequalityParams("spw", n, float(n), 1.0, kappa)
    lhs, _ = _choquet_norm(f, params.content_dim, params.lhs_power, cfg)
    g = _grad_lebesgue(f)
    extra = {}
    if kappa == 0:
        # classical L^{n/(n-1)} norm against the same gradient integral
        q = n / (n - 1)
        lq = (np.sum(f.values**q) * f.grid.cell_volume) ** (1 / q)
        extra["classical_lhs"] = float(lq)
        extra["classical_ratio"] = _div(float(lq), g)
    return InequalityReport(params, lhs, (g, g), cfg.cap("spw"), extra)


def verify_limit(
    f: ScalarField, delta: float, kappa: float, cfg: VerifyConfig = VerifyConfig()
) -> InequalityReport:
    """LHS with content dimension ``delta - kappa delta / n``; RHS ``(int |grad u|^{delta/n} dH^delta)^{n/delta}``."""
    n = f.grid.n
    params = InequalityParams("limit", n, delta, delta / n, kappa)
    lhs, _ = _choquet_norm(f, params.content_dim, params.lhs_power, cfg)
    rhs, _ = _choquet_norm(_gradient(f), delta, delta / n, cfg)
    return InequalityReport(params, lhs, rhs, cfg.cap("limit"))


def verify_ko_lemma(
    f: ScalarField, a: float, b: float, kappa: float, cfg: VerifyConfig = VerifyConfig()
) -> InequalityReport:
    """``(b - a) H^{n-k}({u >= b})^{(n-1)/(n-k)} <= c int_{a<u<b} |grad u| dx``."""
    n = f.grid.n
    params = InequalityParams("ko", n, float(n), 1.0, kappa)
    top = f.max()
    if not (0 <= a < b < top):
        raise ValidationError(f"need 0 <= a < b < max u = {top}, got a={a}, b={b}")
    E = closed_superlevel(f, b)
    cb = content_bracket(E, params.content_dim, cfg.options)
    e = (n - 1) / (n - kappa)
    lhs = ((b - a) * cb.lower**e, (b - a) * cb.upper**e)
    psi = truncate(f, a, b)
    rhs = lebesgue_integral(psi.gradient_field())
    extra = {"content": [cb.lower, cb.upper], "truncated_max": psi.max()}
    return InequalityReport(params, lhs, (rhs, rhs), cfg.cap("ko"), extra)


def verify_superlevel(f: ScalarField, kappa: float, cfg: VerifyConfig = VerifyConfig()) -> InequalityReport:
    """``||u||_inf <= c int |grad u(x)| / H^{n-k}({u >= u(x)})^{(n-1)/(n-k)} dx``.

    The content of ``{u >= u(x)}`` is bracketed through the ladder: for
    ``t_{i-1} < u(x) <= t_i`` it lies between the lower content of
    ``{u >= t_i}`` and the upper content of ``{u > t_{i-1}}``.  Lower contents
    give the upper end of the right-hand side and vice versa.
    """
    n = f.grid.n
    params = InequalityParams("superlevel", n, float(n), 1.0, kappa)
    top = f.max()
    if top <= 0:
        raise ValidationError("superlevel inequality needs ||u||_inf > 0")
    dim = params.content_dim
    e = (n - 1) / (n - kappa)
    grad = f if f.gradient is not None else fd_gradient(f)
    ladder = make_ladder(f.values, cfg.m)
    t = np.asarray(ladder.levels)
    lo_c, up_c = [], []
    for i in range(1, t.size):
        up_c.append(content_bracket(superlevel(f, t[i - 1]), dim, cfg.options, sides="upper").upper)
        lo_c.append(content_bracket(closed_superlevel(f, t[i]), dim, cfg.options, sides="lower").lower)
    up_c = np.minimum.accumulate(up_c)
    lo_c = np.maximum.accumulate(lo_c[::-1])[::-1]
    # interval of each support cell: t_{i-1} < v <= t_i
    which = np.searchsorted(t, grad.values, side="left") - 1
    which = np.clip(which, 0, t.size - 2)
    gvals = grad.gradient
    vol = f.grid.cell_volume
    nz = gvals > 0
    positive = bool(np.all(lo_c > 0))
    with np.errstate(divide="ignore"):
        rhs_hi = float(np.sum(gvals[nz] / lo_c[which[nz]] ** e) * vol) if positive else math.inf
        rhs_lo = float(np.sum(gvals[nz] / up_c[which[nz]] ** e) * vol)
    below_max = grad.values < top
    extra = {
        "positivity": bool(np.all(lo_c[which[below_max]] > 0)) if below_max.any() else True,
        "ladder": list(ladder.levels),
        "content_lower": lo_c.tolist(),
        "content_upper": up_c.tolist(),
    }
    return InequalityReport(params, (top, top), (rhs_lo, rhs_hi), cfg.cap("superlevel"), extra)


def radial_superlevel_rhs(n: int, R: float = 1.0) -> float:
    """Closed-form right side for the cone ``1 - |x|/R``.

    ``{u >= u(x)}`` is the ball of radius ``|x|``, whose content in any
    dimension d <= n is ``|x|^d``, so the integrand is ``|x|^{-(n-1)} / R``
    for every kappa and the integral is the sphere area ``n v_n``.
    """
    from .grid import unit_ball_volume

    if R <= 0:
        raise ValidationError("bump radius must be positive")
    return n * unit_ball_volume(n)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepReport:
    name: str
    abscissa: list[float]
    points: list[InequalityReport]
    slope: float
    halfwidth: float
    expected_slope: float | None = None
    extra: dict = field(default_factory=dict)

    def ratio_lower(self) -> list[float]:
        return [p.ratio[0] for p in self.points]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "abscissa": self.abscissa,
            "slope": self.slope,
            "halfwidth": self.halfwidth,
            "expected_slope": self.expected_slope,
            "points": [p.to_json() for p in self.points],
            "extra": self.extra,
        }

    CSV_COLUMNS = ("abscissa", "lhs_lower", "lhs_upper", "rhs_lower", "rhs_upper", "ratio_lower", "ratio_upper")

    def csv_rows(self) -> list[tuple]:
        return [
            (x, p.lhs[0], p.lhs[1], p.rhs[0], p.rhs[1], p.ratio[0], p.ratio[1])
            for x, p in zip(self.abscissa, self.points)
        ]


def fit_slope(x, y, confidence: float = 0.95) -> tuple[float, float]:
    """Least-squares slope of log y against log x and its t-interval half-width."""
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if x.size < 3:
        raise ValidationError("slope fit needs at least 3 points")
    res = stats.linregress(x, y)
    tq = stats.t.ppf(0.5 + confidence / 2, x.size - 2)
    return float(res.slope), float(tq * res.stderr)


def _check_monotone(xs, decreasing: bool, what: str):
    d = np.diff(np.asarray(xs, float))
    if np.any(d >= 0 if decreasing else d <= 0):
        raise ValidationError(f"{what} must be strictly {'decreasing' if decreasing else 'increasing'}")


def tent_point(kappa: float, alpha: float, r: float, resolution: int, cfg: VerifyConfig) -> InequalityReport:
    """One tent sweep point; pure, so sweeps can farm points out to workers."""
    params = InequalityParams("tent-sharpness", 2, 2 - kappa, alpha, kappa)
    u = tent2d(TentSpec(r, resolution))
    lhs, _ = _choquet_norm(u, 2 - kappa, alpha, cfg)
    g = _grad_lebesgue(u)
    return InequalityReport(params, lhs, (g, g), None, {"r": r, "resolution": resolution})


def sharpness_tent(
    kappa: float,
    alpha: float,
    r_list=(0.25, 0.125, 0.0625),
    resolution: int = 8,
    cfg: VerifyConfig = VerifyConfig(),
    mapper=map,
) -> SweepReport:
    """LHS ``(int u_r^alpha dH^{2-kappa})^{1/alpha}`` against ``int |grad u_r|`` over r.

    The fitted slope of log LHS against log r should be ``(2-kappa)/alpha - 1``.
    ``mapper`` evaluates the points (``map`` or an executor's ``map``); the
    result keeps the order of ``r_list`` either way.
    """
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if not (0 <= kappa <= 1):
        raise ValidationError(f"kappa = {kappa} outside [0, 1]")
    rs = [float(r) for r in r_list]
    if len(rs) < 3:
        raise ValidationError("tent sweep needs at least 3 radii")
    _check_monotone(rs, True, "r_list")
    res = resolution if isinstance(resolution, (list, tuple)) else [resolution] * len(rs)
    for r, q in zip(rs, res):
        TentSpec(r, q)  # validate every point before any work starts
    n_pts = len(rs)
    pts = list(mapper(tent_point, [kappa] * n_pts, [alpha] * n_pts, rs, res, [cfg] * n_pts))
    slope, hw = fit_slope(rs, [p.lhs[0] for p in pts])
    return SweepReport("tent", rs, pts, slope, hw, (2 - kappa) / alpha - 1)


def cantor_point(
    delta: float, p: float, k: int, cells_per_side: int, collar_fraction: float, m: int, lp_max_cells: int
) -> InequalityReport:
    """One Cantor level: lower bracket of the LHS norm, exact gradient integral, set content floor."""
    params = InequalityParams("cantor-blowup", 2, delta, p, 0.0)
    spec = CantorSpec(k, collar_fraction=collar_fraction, cells_per_side=cells_per_side)
    opts = ContentOptions(exact="never", lp_max_cells=lp_max_cells, lp_anchor=spec.side)
    cfg = VerifyConfig(m=m, options=opts)
    phi = cantor_capacitary(spec)
    lhs, _ = _choquet_norm(phi, delta, p, cfg, sides="lower")
    g = lebesgue_integral(phi.gradient_field())
    floor = content_bracket(cantor_set(spec), delta, opts, sides="lower").lower
    return InequalityReport(params, (lhs[0], math.inf), (g, g), None, {"k": k, "content_lower": floor, "side": spec.side})


def cantor_blowup(
    delta: float = 0.8,
    p: float = 1.0,
    k_list=(1, 2, 3, 4),
    cells_per_side: int = 2,
    collar_fraction: float = 0.5,
    m: int = DEFAULT_LEVELS,
    lp_max_cells: int = 4500,
    mapper=map,
) -> SweepReport:
    """Ratio ``(int phi_k^p dH^delta)^{1/p} / int |grad phi_k|`` along Cantor levels.

    The packing LP is anchored at the level-k side length so that every
    level is bracketed with the same family geometry relative to its squares.
    Only the lower end of the left side is computed (the upper end is
    reported as infinite), since the sweep is about the ratio blowing up.
    """
    n = 2
    if not (0.1 < delta < n - 1):
        raise ValidationError(f"delta = {delta} must lie in (0.1, n - 1) = (0.1, {n - 1})")
    if p <= 0:
        raise ValidationError("p must be positive")
    ks = [int(k) for k in k_list]
    if len(ks) < 3:
        raise ValidationError("Cantor sweep needs at least 3 levels")
    _check_monotone(ks, False, "k_list")
    for k in ks:
        CantorSpec(k, collar_fraction=collar_fraction, cells_per_side=cells_per_side)
    L = len(ks)
    pts = list(
        mapper(
            cantor_point,
            [delta] * L,
            [p] * L,
            ks,
            [cells_per_side] * L,
            [collar_fraction] * L,
            [m] * L,
            [lp_max_cells] * L,
        )
    )
    slope, hw = fit_slope(ks, [pt.ratio[0] for pt in pts])
    extra = {"content_floor": [pt.extra["content_lower"] for pt in pts], "gradient": [pt.rhs[0] for pt in pts]}
    return SweepReport("cantor", [float(k) for k in ks], pts, slope, hw, None, extra)
