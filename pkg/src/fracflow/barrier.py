"""The auxiliary fields b_eps / c_eps / a_eps, the cutoff mu, the corrector
field, the explicit barrier v_eps, and the numerical check of the strict
subsolution inequality J[v] <= -sigma/2 under the forced shrinking-circle
motion."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import PchipInterpolator, RectBivariateSpline

from .errors import ConfigError
from .fracops import FracConstants, FracOrder, kernel_weights, marginal_kernel, spectral_multiplier
from .geometry import SignedDistanceField, quintic_smoothstep
from .grids import Profile1D, ScalarField
from .wells import DoubleWell


@dataclass(frozen=True)
class BarrierConfig:
    """Parameter ledger of the barrier construction.

    delta defaults to the concrete rate eps^0.4, which satisfies both
    smallness clauses delta -> 0 and eps/delta^2 -> 0."""

    epsilon: float
    sigma: float
    rho: float
    r_trunc: float
    box: float
    npoints: int
    alpha: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        delta = self.epsilon ** 0.4 if self.delta is None else self.delta
        object.__setattr__(self, "delta", float(delta))
        violations = []
        if not (0.0 < self.delta < 1.0):
            violations.append(f"delta = {self.delta} outside (0, 1)")
        if not (0.0 < self.sigma < 1.0):
            violations.append(f"sigma = {self.sigma} outside (0, 1)")
        if not (self.sigma_tilde < self.rho / 2.0):
            violations.append(
                f"sigma_tilde = {self.sigma_tilde:.4f} must be < rho/2 = {self.rho / 2:.4f}")
        if self.epsilon < 4.0 * self.box / self.npoints:
            violations.append(f"epsilon = {self.epsilon} under 4 cells")
        if self.r_trunc > self.box / 4.0 + 1e-12:
            violations.append(f"r_trunc = {self.r_trunc} exceeds box/4")
        if violations:
            raise ConfigError(violations)

    @property
    def sigma_tilde(self) -> float:
        return self.sigma / self.alpha


@dataclass
class AuxFields:
    b_eps: ScalarField
    c_eps: ScalarField
    mu: ScalarField

    @property
    def a_eps(self) -> ScalarField:
        return self.b_eps.like(self.b_eps.data + self.c_eps.data)


class ProfileTables:
    """Fast interpolants of phi, phi_dot and psi_tilde over the argument range
    any barrier field can produce ( |d - sigma_tilde| <= 2 rho + sigma_tilde )."""

    def __init__(self, phi: Profile1D, psi_tilde: Profile1D, dphi: np.ndarray):
        self.phi = PchipInterpolator(phi.xi, phi.values, extrapolate=True)
        self.phi_dot = PchipInterpolator(phi.xi, dphi, extrapolate=True)
        self.psi = PchipInterpolator(psi_tilde.xi, psi_tilde.values, extrapolate=True)
        self._phi_prof = phi

    def phi_at(self, xi):
        out = self.phi(xi)
        lo = xi < self._phi_prof.xi[0]
        hi = xi > self._phi_prof.xi[-1]
        if np.any(lo):
            out[lo] = self._phi_prof.left_tail(xi[lo])
        if np.any(hi):
            out[hi] = self._phi_prof.right_tail(xi[hi])
        return out


@functools.lru_cache(maxsize=4)
def _kernel_image_rfft(npoints: int, box: float, s: float, r_trunc: float):
    """rfft2 of the truncated kernel-weight lattice placed on the grid, plus
    the total mass (for the -u(x) term)."""
    w = kernel_weights(box / npoints, FracOrder(s, 2), r_trunc)
    img = np.zeros((npoints, npoints))
    np.add.at(img, (np.mod(w.offsets[:, 0], npoints), np.mod(w.offsets[:, 1], npoints)),
              w.weights)
    return np.fft.rfft2(img), float(w.weights.sum())


def _truncated_conv(field: np.ndarray, box: float, s: float, r_trunc: float):
    """sum_z w(z) (u(x+z) - u(x)) over |z| < r_trunc, periodic, via FFT."""
    ker, mass = _kernel_image_rfft(field.shape[0], box, s, r_trunc)
    conv = np.fft.irfft2(np.fft.rfft2(field) * ker, s=field.shape)
    return conv - mass * field


@functools.lru_cache(maxsize=8)
def _marginal_table(npoints_t: int, r_trunc: float, s: float):
    """Graded t-nodes and weights against the marginal kernel K(t), paired in
    +-t, for the directional term of b_eps."""
    order = FracOrder(s, 2)
    panels = np.geomspace(r_trunc * 1e-7, r_trunc, 28)
    nodes, wts = np.polynomial.legendre.leggauss(12)
    t_all, w_all = [], []
    for a, b in zip(panels[:-1], panels[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        t = mid + half * nodes
        t_all.append(t)
        w_all.append(half * wts * marginal_kernel(t, r_trunc, order))
    return np.concatenate(t_all), np.concatenate(w_all)


def directional_term_table(tables: ProfileTables, cfg: BarrierConfig, s: float,
                           d_range: tuple, n_d: int = 420, n_g: int = 9):
    """G(dval, gmag) = int_{|z|<R} [phi((dval + g.z)/eps) - phi(dval/eps)] k dz
    reduced through the marginal kernel, tabulated for spline evaluation."""
    t, wt = _marginal_table(12, cfg.r_trunc, s)
    dgrid = np.linspace(d_range[0], d_range[1], n_d)
    ggrid = np.linspace(0.0, 1.02, n_g)
    eps = cfg.epsilon
    G = np.empty((n_d, n_g))
    for gi, g in enumerate(ggrid):
        args_p = (dgrid[:, None] + g * t[None, :]) / eps
        args_m = (dgrid[:, None] - g * t[None, :]) / eps
        base = tables.phi_at(dgrid / eps)
        vals = tables.phi_at(args_p.ravel()).reshape(args_p.shape) \
            + tables.phi_at(args_m.ravel()).reshape(args_m.shape) \
            - 2.0 * base[:, None]
        G[:, gi] = vals @ wt
    return RectBivariateSpline(dgrid, ggrid, G, kx=3, ky=1)


def compute_b_eps(sdf: SignedDistanceField, tables: ProfileTables,
                  cfg: BarrierConfig, s: float, shift: float,
                  g_spline=None) -> ScalarField:
    """b_eps[d - shift](x): truncated kernel integral of
    phi(d(x+z)/eps) - phi((d(x) + grad d(x).z)/eps), the nonlocal probe of how
    far d bends away from its tangent plane."""
    d = sdf.field.data - shift
    eps = cfg.epsilon
    P = tables.phi_at((d / eps).ravel()).reshape(d.shape)
    term1 = _truncated_conv(P, cfg.box, s, cfg.r_trunc)
    gx, gy = sdf.gradient()
    gmag = np.hypot(gx, gy)
    if g_spline is None:
        pad = 0.05 * sdf.rho
        g_spline = directional_term_table(
            tables, cfg, s, (float(d.min()) - pad, float(d.max()) + pad))
    T2 = g_spline(d.ravel(), np.clip(gmag, 0.0, 1.02).ravel(), grid=False).reshape(d.shape)
    return sdf.field.like(term1 - T2)


def compute_c_eps(sdf: SignedDistanceField, tables: ProfileTables,
                  well: DoubleWell, cfg: BarrierConfig, s: float,
                  shift: float) -> ScalarField:
    """c_eps[d - shift](x) = eps^(-2s) [ (|grad d|^2 + eps^(2+2s/(1-2s)))^s - 1 ]
    W'(phi((d - shift)/eps)): the compensator for |grad d| != 1 away from the
    band (and for the regularizing epsilon-power on it)."""
    d = sdf.field.data - shift
    eps = cfg.epsilon
    gx, gy = sdf.gradient()
    g2 = gx * gx + gy * gy
    reg = eps ** (2.0 + 2.0 * s / (1.0 - 2.0 * s))
    pref = eps ** (-2.0 * s) * ((g2 + reg) ** s - 1.0)
    wprime = well.dw(tables.phi_at((d / eps).ravel()).reshape(d.shape))
    return sdf.field.like(pref * wprime)


def build_mu(sdf: SignedDistanceField, cfg: BarrierConfig, s: float,
             shift: float) -> ScalarField:
    """The cutoff mu: sigma on {|d| <= delta}, sigma/delta^(2s) on
    {|d| >= 2 delta}, quintic-smoothstep monotone in between."""
    d = np.abs(sdf.field.data - shift)
    lo = cfg.sigma
    hi = cfg.sigma / cfg.delta ** (2.0 * s)
    out = lo + (hi - lo) * quintic_smoothstep((d - cfg.delta) / cfg.delta)
    return sdf.field.like(out)


def aux_fields(sdf: SignedDistanceField, tables: ProfileTables,
               well: DoubleWell, cfg: BarrierConfig, s: float,
               g_spline=None) -> AuxFields:
    shift = cfg.sigma_tilde
    return AuxFields(
        b_eps=compute_b_eps(sdf, tables, cfg, s, shift, g_spline),
        c_eps=compute_c_eps(sdf, tables, well, cfg, s, shift),
        mu=build_mu(sdf, cfg, s, shift),
    )


def assemble_barrier(sdf: SignedDistanceField, tables: ProfileTables,
                     well: DoubleWell, cfg: BarrierConfig, s: float,
                     g_spline=None):
    """v = phi(xi) + eps^(2s) psi_tilde(xi) (mu - a_eps) + (eps^(2s)/alpha)(a_eps - mu),
    xi = (d - sigma_tilde)/eps. Returns (v field, AuxFields)."""
    shift = cfg.sigma_tilde
    eps = cfg.epsilon
    aux = aux_fields(sdf, tables, well, cfg, s, g_spline)
    xi = (sdf.field.data - shift) / eps
    phi = tables.phi_at(xi.ravel()).reshape(xi.shape)
    psi = tables.psi(xi)
    a = aux.a_eps.data
    mu = aux.mu.data
    v = phi + eps ** (2.0 * s) * psi * (mu - a) + eps ** (2.0 * s) / cfg.alpha * (a - mu)
    return sdf.field.like(v), aux


@dataclass
class ResidualReport:
    """Statistics of J[v] = eps d_t v - I_n^s v + eps^(-2s) W'(v)."""

    frac_negative: float
    frac_negative_band: float
    max_band: float
    max_all: float
    percentiles: dict
    audit_sup_band: float
    forcing_margin: float
    n_band: int
    meta: dict = dc_field(default_factory=dict)


def subsolution_residual(d_of_t, t0: float, dt_time: float,
                         tables: ProfileTables, well: DoubleWell,
                         cfg: BarrierConfig, order: FracOrder,
                         constants: FracConstants, c0: float,
                         band_width: float | None = None) -> ResidualReport:
    """Evaluate J[v] on the whole grid at time t0 (time derivative by centered
    differences of the assembled barrier at t0 +- dt_time) plus the grouped
    cancellation audit J ~ phi_dot (d_t d - c0 a_eps + c0 mu) - mu at band
    points."""
    s = order.s
    eps = cfg.epsilon
    sdf0 = d_of_t(t0)
    pad = 0.05 * sdf0.rho
    dsh = sdf0.field.data - cfg.sigma_tilde
    lo = float(dsh.min()) - pad - 2.0 * abs(dt_time)
    hi = float(dsh.max()) + pad + 2.0 * abs(dt_time)
    g_spline = directional_term_table(tables, cfg, s, (lo, hi))

    v0, aux0 = assemble_barrier(sdf0, tables, well, cfg, s, g_spline)
    vm, _ = assemble_barrier(d_of_t(t0 - dt_time), tables, well, cfg, s, g_spline)
    vp, _ = assemble_barrier(d_of_t(t0 + dt_time), tables, well, cfg, s, g_spline)

    dv_dt = (vp.data - vm.data) / (2.0 * dt_time)
    del vm, vp
    mult = spectral_multiplier(v0, order, constants)
    Iv = np.fft.irfftn(-mult * np.fft.rfftn(v0.data), s=v0.data.shape)
    J = eps * dv_dt - Iv + eps ** (-2.0 * s) * well.dw(v0.data)
    if np.any(~np.isfinite(J)):
        raise FloatingPointError("non-finite values in the barrier residual")

    band_width = cfg.delta if band_width is None else band_width
    band = np.abs(dsh) < band_width
    frac_neg = float(np.mean(J < 0.0))
    frac_neg_band = float(np.mean(J[band] < 0.0)) if band.any() else 1.0
    max_band = float(J[band].max()) if band.any() else float("nan")

    # grouped-cancellation audit at band points
    d_t_d = (d_of_t(t0 + dt_time).field.data - d_of_t(t0 - dt_time).field.data) \
        / (2.0 * dt_time)
    xi = dsh / eps
    phid = tables.phi_dot(xi)  # phi_dot in the xi variable
    a = aux0.a_eps.data
    mu = aux0.mu.data
    grouped = phid * (d_t_d - c0 * a + c0 * mu) - mu
    audit = float(np.max(np.abs((J - grouped)[band]))) if band.any() else float("nan")

    # forcing precondition d_t d <= c0 kappa - c0 sigma, probed through a_eps
    # (a_eps ~ kappa at band points by the consistency lemma)
    margin = float(np.max((d_t_d - c0 * a + c0 * cfg.sigma)[band])) if band.any() else float("nan")

    pct = {p: float(np.percentile(J, p)) for p in (1, 5, 25, 50, 75, 95, 99)}
    return ResidualReport(
        frac_negative=frac_neg,
        frac_negative_band=frac_neg_band,
        max_band=max_band,
        max_all=float(J.max()),
        percentiles=pct,
        audit_sup_band=audit,
        forcing_margin=margin,
        n_band=int(band.sum()),
        meta={"J_mean": float(J.mean()), "epsilon": eps, "delta": cfg.delta,
              "sigma": cfg.sigma},
    )


def forced_circle_motion(center, r0: float, speed: float, box: float,
                         npoints: int, rho: float):
    """d(t, .) = extended SDF of the circle with radius r0 - speed * t."""
    from .geometry import signed_distance_circle

    def d_of_t(t: float) -> SignedDistanceField:
        return signed_distance_circle(center, r0 - speed * t, box, npoints, rho)

    return d_of_t


def forcing_speed(c0: float, omega: float, sigma: float, r_min: float, s: float,
                  margin: float = 1.0) -> float:
    """C = 4^(2s) c0 omega / r_min^(2s) + (1 + margin) c0 sigma: large enough
    that d_t d <= c0 kappa - c0 sigma holds along the whole run."""
    return 4.0 ** (2.0 * s) * c0 * omega / r_min ** (2.0 * s) \
        + (1.0 + margin) * c0 * sigma
