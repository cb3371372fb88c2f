"""
Fundamental solutions and special functions.

Covers the Laplace and Helmholtz free-space kernels in two and three
dimensions, their gradients, the low-frequency expansion constant tau,
the remainder kernels of the expansion of the Helmholtz kernel around
the Laplace kernel, and spherical Bessel utilities including
cancellation-safe product forms needed on the sphere at very small
wavenumbers.

Conventions: the Laplace fundamental solution is (1/2pi) ln|x| in 2D and
-1/(4pi|x|) in 3D; the outgoing Helmholtz fundamental solution is
-(i/4) H0(k|x|) in 2D and -exp(ik|x|)/(4pi|x|) in 3D.
"""

import numpy as np
from scipy import special

__all__ = [
    "EULER_GAMMA",
    "gamma_laplace",
    "hankel_first_kind",
    "gamma_helmholtz",
    "grad_gamma_laplace",
    "grad_gamma_helmholtz",
    "tau",
    "tau_kc",
    "remainder_kernel",
    "remainder_kernel_radial",
    "compute_kc",
    "spherical_bessel",
    "sph_jh_product",
    "sph_jh_product_deriv",
    "sph_j_ratio",
    "sph_j_ratio_deriv",
    "sph_jh_cross",
]

EULER_GAMMA = 0.5772156649015328606

# remainder kernels are validated on 0 < omega <= OMEGA_MAX
OMEGA_MAX = 0.5

# below this |z| the spherical Bessel products switch to power series
_SPH_SERIES_CUT = 0.5


def _radii(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}")
    return np.sqrt(np.sum(x * x, axis=-1))


def gamma_laplace(x, d):
    """Laplace fundamental solution at points x, shape (..., d)."""
    r = _radii(x, d)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at x = 0")
    if d == 2:
        return np.log(r) / (2.0 * np.pi)
    if d == 3:
        return -1.0 / (4.0 * np.pi * r)
    raise ValueError("d must be 2 or 3")


def grad_gamma_laplace(x, d):
    """Gradient of the Laplace fundamental solution, shape (..., d)."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)[..., None]
    if np.any(r2 == 0):
        raise ValueError("gradient is singular at x = 0")
    if d == 2:
        return x / (2.0 * np.pi * r2)
    if d == 3:
        return x / (4.0 * np.pi * r2 ** 1.5)
    raise ValueError("d must be 2 or 3")


def hankel_first_kind(n, z):
    """Hankel function of the first kind H_n(z), n in {0, 1}, complex z != 0."""
    if n not in (0, 1):
        raise ValueError("order must be 0 or 1")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("Hankel function is singular at z = 0")
    return special.hankel1(n, z)


def gamma_helmholtz(x, k, d):
    """Outgoing Helmholtz fundamental solution at wavenumber k != 0."""
    if k == 0:
        raise ValueError("k must be nonzero; use gamma_laplace for the static kernel")
    r = _radii(x, d)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at x = 0")
    if d == 2:
        return -0.25j * special.hankel1(0, k * r)
    if d == 3:
        return -np.exp(1j * k * r) / (4.0 * np.pi * r)
    raise ValueError("d must be 2 or 3")


def grad_gamma_helmholtz(x, k, d):
    """Gradient of the Helmholtz fundamental solution, shape (..., d)."""
    if k == 0:
        raise ValueError("k must be nonzero")
    x = np.asarray(x, dtype=float)
    r = _radii(x, d)
    if np.any(r == 0):
        raise ValueError("gradient is singular at x = 0")
    rhat = x / r[..., None]
    if d == 2:
        radial = 0.25j * k * special.hankel1(1, k * r)
    elif d == 3:
        radial = np.exp(1j * k * r) * (1.0 - 1j * k * r) / (4.0 * np.pi * r * r)
    else:
        raise ValueError("d must be 2 or 3")
    return radial[..., None] * rhat


def tau(omega):
    """Constant term of the low-frequency expansion of the 2D Helmholtz kernel."""
    omega = float(omega)
    if omega <= 0:
        raise ValueError("omega must be positive")
    return (np.log(omega) + EULER_GAMMA - np.log(2.0)) / (2.0 * np.pi) - 0.25j


def tau_kc(kc):
    """Same constant with a complex wavenumber; principal-branch logarithm."""
    kc = complex(kc)
    if kc == 0:
        raise ValueError("kc must be nonzero")
    return (np.log(kc) + EULER_GAMMA - np.log(2.0)) / (2.0 * np.pi) - 0.25j


def compute_kc(omega, eps_c, delta):
    """
    Interior wavenumber of the lossy inclusion:

        k_c = -i (omega / sqrt(|eps_c|)) (1 - i delta / (2 eps_c)).

    Requires eps_c < 0, delta > 0, omega > 0. The result always lies in
    the fourth quadrant (Re > 0, Im < 0) on that parameter region.
    """
    if eps_c >= 0:
        raise ValueError("eps_c must be negative")
    if delta <= 0 or omega <= 0:
        raise ValueError("delta and omega must be positive")
    return -1j * (omega / np.sqrt(abs(eps_c))) * (1.0 - 1j * delta / (2.0 * eps_c))


def _harmonic_numbers(m_max):
    h = np.zeros(m_max + 1)
    h[1:] = np.cumsum(1.0 / np.arange(1, m_max + 1))
    return h


def remainder_kernel(x, omega, d):
    """
    Remainder kernel of the low-frequency expansion of the Helmholtz
    fundamental solution:

        d=2:  K2(x) = [Gamma^w(x) - Gamma(x) - tau(w)] / (w^2 ln w)
        d=3:  K3(x) = [Gamma^w(x) - Gamma(x)] / w

    Both are evaluated by power series where the direct difference would
    cancel catastrophically. K3 is bounded at x = 0 with value -i/(4 pi).
    """
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    return remainder_kernel_radial(r, omega, d)


def remainder_kernel_radial(r, omega, d):
    """Same remainder kernel as a function of the distance r = |x|."""
    omega = float(omega)
    if not 0 < omega <= OMEGA_MAX:
        raise ValueError(f"omega must lie in (0, {OMEGA_MAX}]")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    if d == 3:
        return -1j / (4.0 * np.pi) * _expm1_over_z(1j * omega * r)
    if d != 2:
        raise ValueError("d must be 2 or 3")
    if np.any(r == 0):
        raise ValueError("2D remainder kernel is singular at x = 0")
    scalar = np.ndim(r) == 0
    z = np.atleast_1d(omega * r)
    small = z < _SPH_SERIES_CUT
    vals = np.empty(z.shape, dtype=complex)
    # series: sum_{m>=1} (-1)^m (z/2)^{2m}/(m!)^2 [ (ln(z/2)+gamma-h_m)/(2pi) - i/4 ]
    if np.any(small):
        zs = z[small]
        logterm = np.log(zs / 2.0) + EULER_GAMMA
        acc = np.zeros(zs.shape, dtype=complex)
        coeff = np.ones(zs.shape)
        h = 0.0
        for m in range(1, 40):
            coeff = coeff * (-((zs / 2.0) ** 2)) / (m * m)
            h += 1.0 / m
            term = coeff * ((logterm - h) / (2.0 * np.pi) - 0.25j)
            acc += term
            if np.max(np.abs(term)) < 1e-18 * max(np.max(np.abs(acc)), 1e-30):
                break
        vals[small] = acc
    if np.any(~small):
        zl = z[~small]
        vals[~small] = (
            -0.25j * special.hankel1(0, zl)
            - np.log(zl / omega) / (2.0 * np.pi)
            - tau(omega)
        )
    vals = vals / (omega * omega * np.log(omega))
    return complex(vals[0]) if scalar else vals.reshape(np.shape(r))


def _expm1_over_z(z):
    """(exp(z) - 1)/z via the series sum_{m>=0} z^m/(m+1)!, value 1 at z = 0."""
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape, dtype=complex)
    big = np.abs(z) >= 0.25
    if np.any(big):
        out[big] = (np.exp(z[big]) - 1.0) / z[big]
    small = ~big & (z != 0)
    if np.any(small):
        zs = z[small]
        acc = np.zeros(zs.shape, dtype=complex)
        power = np.ones(zs.shape, dtype=complex)
        fact = 1.0
        for m in range(25):
            fact = fact * (m + 1)
            contrib = power / fact
            acc = acc + contrib
            power = power * zs
            if np.max(np.abs(contrib)) < 1e-20:
                break
        out[small] = acc
    return out if out.shape else complex(out)


def spherical_bessel(n, z):
    """
    Spherical Bessel and outgoing spherical Hankel values (j_n(z), h_n(z)).

    Accurate for |z| <= 20 and n <= 40; h_n grows like (2n-1)!!/z^{n+1}
    for small |z|, so callers in that regime should use the product
    forms below instead of raw values.
    """
    if n < 0:
        raise ValueError("order must be nonnegative")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("spherical Hankel function is singular at z = 0")
    jn = special.spherical_jn(n, z)
    yn = special.spherical_yn(n, z)
    return jn, jn + 1j * yn


def _sph_series(n, z, with_deriv=False):
    """
    Regular series factors A, B of the small-argument representations

        j_n(z) =  z^n / (2n+1)!! * A(z),
        y_n(z) = -(2n-1)!! / z^{n+1} * B(z),

    with A, B -> 1 as z -> 0. Returns (A, B) or (A, B, A', B').
    """
    z = np.asarray(z, dtype=complex)
    z2 = -0.5 * z * z
    A = np.ones(z.shape, dtype=complex)
    B = np.ones(z.shape, dtype=complex)
    dA = np.zeros(z.shape, dtype=complex)
    dB = np.zeros(z.shape, dtype=complex)
    ca = np.ones(z.shape, dtype=complex)
    cb = np.ones(z.shape, dtype=complex)
    for m in range(1, 60):
        ca = ca * z2 / (m * (2 * n + 2 * m + 1))
        cb = cb * z2 / (m * (2 * m - 2 * n - 1))
        A = A + ca
        B = B + cb
        if with_deriv:
            # d/dz of a term c_m z^{2m} is 2m c_m z^{2m-1}
            with np.errstate(divide="ignore", invalid="ignore"):
                dA = dA + 2 * m * ca / z
                dB = dB + 2 * m * cb / z
        if max(np.max(np.abs(ca)), np.max(np.abs(cb))) < 1e-20:
            break
    if with_deriv:
        return A, B, dA, dB
    return A, B


def _dfact(n):
    """Double factorial (2n+1)!! as float."""
    return float(np.prod(np.arange(2 * n + 1, 0, -2))) if n >= 0 else 1.0


def sph_jh_product(n, z):
    """
    j_n(z) h_n(z), stable down to |z| -> 0 (where it behaves like
    -i / ((2n+1) z) and raw h_n overflows).
    """
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _SPH_SERIES_CUT
    out = np.empty(z.shape, dtype=complex)
    if np.any(small):
        zs = z[small]
        A, B = _sph_series(n, zs)
        jy = -A * B / ((2 * n + 1) * zs)
        jj = (zs ** n / _dfact(n)) ** 2 * A * A
        out[small] = jj + 1j * jy
    if np.any(~small):
        zl = z[~small]
        jn = special.spherical_jn(n, zl)
        out[~small] = jn * (jn + 1j * special.spherical_yn(n, zl))
    return out if out.shape else complex(out)


def sph_jh_product_deriv(n, z):
    """d/dz of j_n(z) h_n(z), stable down to |z| -> 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _SPH_SERIES_CUT
    out = np.empty(z.shape, dtype=complex)
    if np.any(small):
        zs = z[small]
        A, B, dA, dB = _sph_series(n, zs, with_deriv=True)
        c = 1.0 / (2 * n + 1)
        # (j y)' from j y = -A B / ((2n+1) z)
        jy_d = -c * (dA * B + A * dB) / zs + c * A * B / (zs * zs)
        # (j^2)' = 2 j j'
        jfac = zs ** n / _dfact(n)
        j = jfac * A
        jp = jfac * (n * A / zs + dA)
        out[small] = 2.0 * j * jp + 1j * jy_d
    if np.any(~small):
        zl = z[~small]
        jn = special.spherical_jn(n, zl)
        yn = special.spherical_yn(n, zl)
        jnp = special.spherical_jn(n, zl, derivative=True)
        ynp = special.spherical_yn(n, zl, derivative=True)
        out[~small] = jnp * (jn + 1j * yn) + jn * (jnp + 1j * ynp)
    return out if out.shape else complex(out)


def sph_j_ratio(n, z_num, z_den):
    """
    j_n(z_num) / j_n(z_den), stable when both arguments are small
    (the (z_num/z_den)^n prefactor is formed directly).
    """
    z_num = np.asarray(z_num, dtype=complex)
    z_den = complex(z_den)
    if abs(z_den) < _SPH_SERIES_CUT:
        A_num, _ = _sph_series(n, z_num)
        A_den, _ = _sph_series(n, z_den)
        return (z_num / z_den) ** n * A_num / A_den
    jd = special.spherical_jn(n, np.asarray(z_den, dtype=complex))
    return special.spherical_jn(n, z_num) / jd


def sph_j_ratio_deriv(n, z_num, z_den):
    """
    j_n'(z_num) / j_n(z_den), stable when both arguments are small.

    From j_n(z) = z^n / (2n+1)!! * A(z) the derivative is
    z^{n-1} (n A + z A') / (2n+1)!!, so the double factorials cancel
    against the denominator and only the (z_num/z_den)^n size ratio
    survives. z_num may not contain 0 when n = 0 (A'(0) is formed as
    a 0/0 limit the series code does not take).
    """
    z_num = np.asarray(z_num, dtype=complex)
    z_den = complex(z_den)
    if abs(z_den) < _SPH_SERIES_CUT:
        A_num, _, dA_num, _ = _sph_series(n, z_num, with_deriv=True)
        A_den, _ = _sph_series(n, z_den)
        if n == 0:
            num = dA_num
        else:
            num = n * z_num ** (n - 1) * A_num + z_num ** n * dA_num
        return num / (z_den ** n * A_den)
    jd = special.spherical_jn(n, np.asarray(z_den, dtype=complex))
    return special.spherical_jn(n, z_num, derivative=True) / jd


def sph_jh_cross(n, z1, z2):
    """
    j_n(z1) h_n'(z2), stable for small arguments.

    Uses j_n h_n' = ((j_n h_n)' + i/z^2) / 2 (Wronskian
    j_n h_n' - j_n' h_n = i/z^2) at z2, then rescales by the ratio
    j_n(z1)/j_n(z2); every factor stays O(1) even when raw h_n'
    would overflow.
    """
    z2 = complex(z2)
    jhp = 0.5 * (sph_jh_product_deriv(n, z2) + 1j / (z2 * z2))
    return sph_j_ratio(n, z1, z2) * jhp
