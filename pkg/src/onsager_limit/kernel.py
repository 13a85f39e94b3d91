"""Gaussian interaction kernel, FFT convolution on lattices and the
Fourier multipliers A_eps = (I - g_eps *) / eps and its vector square root T_eps.

Fourier convention: u_hat(xi) = int u(x) exp(-2 pi i x.xi) dx, so the kernel
g(x) = (a/pi)^(d/2) exp(-a|x|^2) has symbol exp(-pi^2 |xi|^2 / a) and the
gradient has symbol 2 pi i xi.
"""
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import gammaincc

from ._workers import worker_count
from .errors import PaddingError

__all__ = [
    "KernelSpec",
    "FourierLattice",
    "ResolutionWarning",
    "mu_of",
    "mu_quadrature",
    "assumption_check",
    "grad_ghat_at_zero",
    "default_pad",
    "convolve",
    "convolve_region",
    "A_eps",
    "T_eps",
    "apply_T_component",
    "spectral_gradient",
    "lipschitz_check",
    "commutator_diag",
    "smoothing_diagnostics",
    "l2_norm",
]

TAIL_TOL = 1e-16
PAD_ERROR_TOL = 1e-14


class ResolutionWarning(UserWarning):
    """The lattice does not resolve the scaled kernel well."""


@dataclass(frozen=True)
class KernelSpec:
    d: int = 2
    a: float = np.pi / 2

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not 0.0 < self.a < np.pi:
            raise ValueError(f"Gaussian shape a must lie in (0, pi), got {self.a}")

    @property
    def mu(self):
        """Second moment int |x|^2 g dx = d / (2a)."""
        return self.d / (2.0 * self.a)

    @property
    def c0(self):
        return np.pi**2 / self.a

    @property
    def limit_const(self):
        """c* with T_eps -> -i c* grad as eps -> 0; equals sqrt(mu / (2d))."""
        return np.sqrt(self.mu / (2.0 * self.d))

    def g(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return (self.a / np.pi) ** (self.d / 2.0) * np.exp(-self.a * r2)

    def g_eps(self, x, eps):
        x = np.asarray(x, dtype=float)
        return eps ** (-self.d / 2.0) * self.g(x / np.sqrt(eps))

    def ghat(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-np.pi**2 * np.sum(xi * xi, axis=-1) / self.a)

    def one_minus_ghat_r2(self, r2, eps=1.0):
        """1 - ghat(sqrt(eps) xi) given |xi|^2, accurate for small arguments."""
        return -np.expm1(-np.pi**2 * eps * r2 / self.a)

    def tail_mass(self, radius, eps=1.0):
        """Mass of g_eps outside the ball of the given radius."""
        return float(gammaincc(self.d / 2.0, self.a * radius**2 / eps))

    def truncation_radius(self, eps=1.0, tol=TAIL_TOL):
        """Smallest radius with tail_mass <= tol (bisection on the closed form)."""
        lo, hi = 0.0, np.sqrt(eps / self.a)
        while self.tail_mass(hi, eps) > tol:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.tail_mass(mid, eps) > tol:
                lo = mid
            else:
                hi = mid
        return hi


def mu_of(spec):
    return spec.mu


def mu_quadrature(spec, eps=1.0, h=None, extent=None):
    """Lattice midpoint quadrature of int |x|^2 g_eps(x) dx."""
    s = np.sqrt(eps / spec.a)
    h = 0.1 * s if h is None else h
    extent = 10.0 * s if extent is None else extent
    n = int(np.ceil(extent / h))
    ax = (np.arange(-n, n) + 0.5) * h
    grids = np.meshgrid(*([ax] * spec.d), indexing="ij")
    x = np.stack(grids, axis=-1)
    r2 = np.sum(x * x, axis=-1)
    return float(np.sum(r2 * spec.g_eps(x, eps)) * h**spec.d)


def assumption_check(spec, xi_max=8.0, n=161):
    """Check 0 <= ghat <= 1 and c0 |xi|^2 ghat^2 <= 1 - ghat on [-xi_max, xi_max]^d.

    Returns a dict with the extreme values and the worst margin of the
    inequality (negative means violated).
    """
    ax = np.linspace(-xi_max, xi_max, n)
    grids = np.meshgrid(*([ax] * spec.d), indexing="ij")
    r2 = sum(g * g for g in grids)
    gh = np.exp(-np.pi**2 * r2 / spec.a)
    lhs = spec.c0 * r2 * gh**2
    rhs = spec.one_minus_ghat_r2(r2)
    return {
        "ghat_min": float(gh.min()),
        "ghat_max": float(gh.max()),
        "margin_min": float(np.min(rhs - lhs)),
        "nodes": int(gh.size),
        "ok": bool(gh.min() >= 0.0 and gh.max() <= 1.0 and np.all(lhs <= rhs)),
    }


def grad_ghat_at_zero(spec, step=1e-5):
    """Central-difference gradient of ghat at the origin."""
    out = np.zeros(spec.d)
    for k in range(spec.d):
        e = np.zeros(spec.d)
        e[k] = step
        out[k] = (spec.ghat(e) - spec.ghat(-e)) / (2.0 * step)
    return out


def default_pad(spec, eps, h):
    """Number of zero-padding nodes covering the truncation radius."""
    return int(np.ceil(spec.truncation_radius(eps) / h)) + 1


def _odd(n):
    return n if n % 2 == 1 else n + 1


class FourierLattice:
    """Zero-padded FFT lattice for a block of nodes with spacing h.

    ``pad=0`` means periodic: the block itself is the FFT domain. Otherwise the
    block is embedded with ``pad`` zero nodes per side and the padded length
    is made odd so every real odd symbol is exactly representable.
    """

    def __init__(self, shape, h, pad=0):
        self.shape = tuple(int(n) for n in shape)
        self.h = float(h)
        self.pad = int(pad)
        if self.pad > 0:
            self.padded = tuple(_odd(n + 2 * self.pad) for n in self.shape)
        else:
            self.padded = self.shape
        self.d = len(self.shape)

    @property
    def axes(self):
        return tuple(range(self.d))

    def freqs(self):
        return _freq_grids(self.padded, self.h)

    def embed(self, u):
        if self.pad == 0:
            return u
        out = np.zeros(self.padded + u.shape[self.d:], dtype=u.dtype)
        out[self._inner()] = u
        return out

    def crop(self, U):
        if self.pad == 0:
            return U
        return U[self._inner()]

    def _inner(self):
        return tuple(slice(self.pad, self.pad + n) for n in self.shape)


@lru_cache(maxsize=64)
def _freq_grids(padded, h):
    out = []
    d = len(padded)
    for k, L in enumerate(padded):
        f = sfft.fftfreq(L, d=h)
        shape = [1] * d
        shape[k] = L
        f = f.reshape(shape)
        f.setflags(write=False)
        out.append(f)
    return tuple(out)


@lru_cache(maxsize=64)
def _symbol(kind, padded, h, d, a, eps):
    spec = KernelSpec(d, a)
    xi = _freq_grids(padded, h)
    r2 = sum(x * x for x in xi)
    if kind == "g":
        s = np.exp(-np.pi**2 * eps * r2 / a)
    elif kind == "A":
        s = spec.one_minus_ghat_r2(r2, eps) / eps
    elif kind == "Tscale":
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.sqrt(spec.one_minus_ghat_r2(r2, eps) / (eps * r2))
        s[r2 == 0] = 0.0
    else:
        raise ValueError(kind)
    s = np.asarray(s, dtype=float)
    s.setflags(write=False)
    return s


def _check_field(u, spec):
    u = np.asarray(u)
    if u.ndim < spec.d:
        raise ValueError(f"field has {u.ndim} axes, kernel dimension is {spec.d}")
    return u


def _check_pad(spec, eps, h, pad):
    if pad is None:
        return default_pad(spec, eps, h)
    pad = int(pad)
    if pad > 0 and spec.tail_mass(pad * h, eps) > PAD_ERROR_TOL:
        raise PaddingError(
            f"padding of {pad} nodes (radius {pad * h:.4g}) leaves kernel tail mass "
            f"{spec.tail_mass(pad * h, eps):.3e} > {PAD_ERROR_TOL:g}"
        )
    return pad


def _resolution_check(spec, eps, h):
    # ghat at the Nyquist frequency of the lattice
    nyq = 0.5 / h
    val = np.exp(-np.pi**2 * eps * nyq**2 / spec.a)
    if val > 1e-6:
        warnings.warn(
            f"kernel symbol at the lattice Nyquist frequency is {val:.2e}; "
            f"sqrt(eps)={np.sqrt(eps):.3g} is under-resolved by h={h:.3g}",
            ResolutionWarning,
            stacklevel=3,
        )


def _apply(u, symbol, fl, real_symbol_even):
    """Multiply the spectrum of each component of u by ``symbol``."""
    axes = fl.axes
    U = fl.embed(u)
    extra = U.ndim - fl.d
    sym = symbol.reshape(symbol.shape + (1,) * extra)
    workers = worker_count()
    if real_symbol_even and np.isrealobj(U):
        # rfft over the last spatial axis
        half = fl.padded[-1] // 2 + 1
        sym_r = sym[(slice(None),) * (fl.d - 1) + (slice(0, half),)]
        spec_u = sfft.rfftn(U, axes=axes, workers=workers)
        out = sfft.irfftn(spec_u * sym_r, s=fl.padded, axes=axes, workers=workers)
    else:
        spec_u = sfft.fftn(U, axes=axes, workers=workers)
        out = sfft.ifftn(spec_u * sym, axes=axes, workers=workers)
    return fl.crop(out)


def convolve(u, spec, eps, h, pad=None):
    """u * g_eps over R^d for u supported on the given block of nodes.

    Leading ``spec.d`` axes of u are spatial, trailing axes are components.
    ``pad=None`` chooses the padding from the kernel tail; ``pad=0`` treats
    the block as periodic.
    """
    u = _check_field(u, spec)
    pad = _check_pad(spec, eps, h, pad)
    _resolution_check(spec, eps, h)
    fl = FourierLattice(u.shape[: spec.d], h, pad)
    sym = _symbol("g", fl.padded, fl.h, spec.d, spec.a, float(eps))
    return _apply(u, sym, fl, True)


def convolve_region(u, spec, eps, h, mask, pad=None):
    """u *_Omega g_eps = (u 1_Omega) * g_eps."""
    u = _check_field(u, spec)
    mask = np.asarray(mask, dtype=bool)
    um = u * mask.reshape(mask.shape + (1,) * (u.ndim - spec.d))
    return convolve(um, spec, eps, h, pad)


def A_eps(u, spec, eps, h, pad=None):
    """(u - u * g_eps) / eps via its nonnegative symbol (1 - ghat(sqrt(eps) xi)) / eps."""
    u = _check_field(u, spec)
    pad = _check_pad(spec, eps, h, pad)
    fl = FourierLattice(u.shape[: spec.d], h, pad)
    sym = _symbol("A", fl.padded, fl.h, spec.d, spec.a, float(eps))
    return _apply(u, sym, fl, True)


def apply_T_component(u, k, spec, eps, h, pad=None):
    """k-th component of T_eps: symbol xi_k sqrt((1 - ghat(sqrt(eps) xi)) / (eps |xi|^2))."""
    u = _check_field(u, spec)
    pad = _check_pad(spec, eps, h, pad)
    fl = FourierLattice(u.shape[: spec.d], h, pad)
    scale = _symbol("Tscale", fl.padded, fl.h, spec.d, spec.a, float(eps))
    sym = fl.freqs()[k] * scale
    return _apply(u.astype(complex), sym, fl, False)


def T_eps(u, spec, eps, h, pad=None):
    """Vector operator T_eps; returns a complex array with a leading axis of length d."""
    return np.stack([apply_T_component(u, k, spec, eps, h, pad) for k in range(spec.d)])


def spectral_gradient(u, spec, h, pad=0):
    """Gradient by the multiplier 2 pi i xi (periodic by default)."""
    u = _check_field(u, spec)
    fl = FourierLattice(u.shape[: spec.d], h, pad)
    xi = fl.freqs()
    out = []
    for k in range(spec.d):
        sym = 2j * np.pi * np.broadcast_to(xi[k], fl.padded)
        out.append(_apply(u.astype(complex), sym, fl, False))
    return np.stack(out)


def l2_norm(u, h, d):
    """Lattice L2 norm (midpoint rule, Hermitian for complex data)."""
    u = np.asarray(u)
    return float(np.sqrt(np.sum(np.abs(u) ** 2) * h**d))


def lipschitz_check(spec, xi_samples):
    """Largest finite-difference slope of h(xi) = xi sqrt((1 - ghat) / |xi|^2)
    between lattice-adjacent samples.

    ``xi_samples`` is a 1D array of sample coordinates used along every axis.
    """
    ax = np.sort(np.asarray(xi_samples, dtype=float))
    grids = np.meshgrid(*([ax] * spec.d), indexing="ij")
    r2 = sum(g * g for g in grids)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.sqrt(spec.one_minus_ghat_r2(r2) / r2)
    scale[r2 == 0] = 0.0
    hval = np.stack([g * scale for g in grids], axis=-1)
    slope = 0.0
    for k in range(spec.d):
        dv = np.diff(hval, axis=k)
        dx = np.diff(grids[k], axis=k)
        s = np.linalg.norm(dv, axis=-1) / dx
        slope = max(slope, float(np.max(s)))
    return slope


def h_symbol(spec, xi):
    """The vector symbol h(xi) of T_1 at points xi (shape (..., d))."""
    xi = np.asarray(xi, dtype=float)
    r2 = np.sum(xi * xi, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.sqrt(spec.one_minus_ghat_r2(r2) / r2)
    scale = np.where(r2 == 0, 0.0, scale)
    return xi * scale[..., None]


def commutator_diag(phi, u, spec, eps, h, pad=0, grad_phi=None):
    """Norm ratio ||[T_eps, phi] u|| / ||u|| and the distance of [T_eps, phi] u
    to its limit -i c* (grad phi) u."""
    phi = np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    if grad_phi is None:
        grad_phi = spectral_gradient(phi, spec, h, pad=0).real
    Tphi_u = T_eps(phi * u, spec, eps, h, pad)
    phi_Tu = phi[None] * T_eps(u, spec, eps, h, pad)
    comm = Tphi_u - phi_Tu
    nu = l2_norm(u, h, spec.d)
    ratio = l2_norm(comm, h, spec.d) / nu if nu > 0 else 0.0
    limit = comm + 1j * spec.limit_const * grad_phi * u[None]
    return ratio, l2_norm(limit, h, spec.d)


def smoothing_diagnostics(u, spec, eps, h, pad=None):
    """(1/eps) ||u * g_eps - u||^2 and ||grad(u * g_eps)||^2 over the padded block."""
    u = np.asarray(u, dtype=float)
    pad = _check_pad(spec, eps, h, pad)
    U = FourierLattice(u.shape[: spec.d], h, pad).embed(u)
    ug = convolve(U, spec, eps, h, pad=0)
    first = l2_norm(ug - U, h, spec.d) ** 2 / eps
    second = l2_norm(spectral_gradient(ug, spec, h, pad=0), h, spec.d) ** 2
    return first, second
