"""
Discrete layer potentials on smooth boundaries.

2D curves use a Nystrom discretization with product quadrature for the
periodic logarithmic singularity: every kernel is split as

    K(t, s) = M1(t, s) ln(4 sin^2((t - s)/2)) + M2(t, s)

with M1, M2 smooth, and the log factor is integrated exactly against
trigonometric polynomials by the circulant weight matrix of
`log_weight_matrix`. On analytic curves the resulting matrices converge
spectrally.

The sphere needs no quadrature: all four operators are diagonal in the
spherical-harmonic basis, and `sphere_operators` returns those diagonals
(with cancellation-safe Bessel products at small wavenumber).
`sphere_diagonal_by_quadrature` provides an independent surface-quadrature
route to the same numbers for validation.

Operator conventions: the single layer is S[phi](x) = int Gamma(x-y)
phi(y) dsigma(y); the adjoint NP operator K* has kernel d/dnu_x
Gamma(x-y), principal value on the boundary, smooth on C^2 curves with
diagonal limit kappa(t)/(4 pi) in the parameter frame. One-sided normal
derivatives of S[phi] are (+1/2 I + K*)phi outside and (-1/2 I + K*)phi
inside.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import NodeSet
from .specfun import (
    EULER_GAMMA,
    OMEGA_MAX,
    gamma_helmholtz,
    gamma_laplace,
    grad_gamma_helmholtz,
    grad_gamma_laplace,
    remainder_kernel_radial,
    sph_jh_product,
    sph_jh_product_deriv,
    tau,
)

__all__ = [
    "BoundaryOperator",
    "log_weight_matrix",
    "assemble_S",
    "assemble_Kstar",
    "assemble_S_omega",
    "assemble_Kstar_omega",
    "assemble_R_Q",
    "eval_potential",
    "sphere_operators",
    "sphere_quadrature",
    "real_sph_harm",
    "sphere_diagonal_by_quadrature",
    "sphere_degree_index",
]

# largest wavenumber-diameter product the node counts used here resolve
_MAX_K_DIAM = 5.0


@dataclass(frozen=True)
class BoundaryOperator:
    """
    Dense discrete boundary operator.

    matrix acts on vectors of nodal density values (2D) or on flattened
    spherical-harmonic coefficients (sphere). kind names the operator,
    wavenumber is 0 for static kernels. Matrices are frozen after
    assembly and safe to share across threads.
    """

    matrix: np.ndarray
    kind: str
    wavenumber: complex = 0.0
    nodes: NodeSet = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.matrix.shape[0]

    def apply(self, density):
        """Apply to a density vector; validates length and finiteness."""
        density = np.asarray(density)
        if density.shape != (self.n,):
            raise ValueError(f"density must have shape ({self.n},)")
        if not np.all(np.isfinite(density)):
            raise ValueError("density must be finite")
        return self.matrix @ density


def log_weight_matrix(n):
    """
    Circulant quadrature matrix R with

        sum_j R[i, j] f(t_j)  ~  int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds,

    exact for trigonometric polynomials of degree < n/2. Requires even n.
    """
    if n % 2 != 0 or n < 4:
        raise ValueError("n must be even and >= 4")
    j = np.arange(n)
    dt = 2.0 * np.pi * j / n
    m = np.arange(1, n // 2)
    rvec = -(4.0 * np.pi / n) * (np.cos(np.outer(dt, m)) / m).sum(axis=1)
    rvec -= (4.0 * np.pi / n**2) * np.cos(n * dt / 2.0)
    idx = (j[:, None] - j[None, :]) % n
    return rvec[idx]


def _pairwise(nodes):
    """Distance matrix, displacement tensor, and the log factor ln(4 sin^2)."""
    x = nodes.points
    dx = x[:, None, :] - x[None, :, :]
    r = np.sqrt(np.sum(dx * dx, axis=-1))
    t = nodes.t
    s2 = 4.0 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    np.fill_diagonal(s2, 1.0)
    logsin = np.log(s2)
    np.fill_diagonal(logsin, 0.0)
    return r, dx, logsin


def _require_2d(nodes):
    if not isinstance(nodes, NodeSet):
        raise TypeError("expected a 2D NodeSet")
    return nodes


def _check_wavenumber(nodes, k):
    k = complex(k)
    if k == 0:
        raise ValueError("k must be nonzero; use the static assemblers")
    lo = nodes.points.min(axis=0)
    hi = nodes.points.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    if abs(k) * diam > _MAX_K_DIAM:
        raise ValueError(
            f"|k| diam = {abs(k) * diam:.3g} exceeds {_MAX_K_DIAM}; "
            "the node count cannot resolve this wavenumber"
        )
    return k


def assemble_S(nodes):
    """Static single-layer matrix, log-singular product quadrature."""
    nodes = _require_2d(nodes)
    n = nodes.n
    r, _, logsin = _pairwise(nodes)
    jac = nodes.jacobians
    m1 = np.broadcast_to(jac / (4.0 * np.pi), (n, n)).copy()
    np.fill_diagonal(r, 1.0)
    m2 = (np.log(r * r) - logsin) * jac / (4.0 * np.pi)
    np.fill_diagonal(m2, np.log(jac) * jac / (2.0 * np.pi))
    mat = log_weight_matrix(n) * m1 + (2.0 * np.pi / n) * m2
    return BoundaryOperator(mat, kind="S", wavenumber=0.0, nodes=nodes)


def assemble_Kstar(nodes):
    """
    Static adjoint-NP matrix. The kernel is smooth on C^2 curves, so the
    plain trapezoid rule applies; the diagonal is the continuous-extension
    value kappa |x'| / (4 pi). Row sums of the transpose vanish against
    the weights: int (-1/2 I + K*)[phi] dsigma = 0.
    """
    nodes = _require_2d(nodes)
    n = nodes.n
    r, dx, _ = _pairwise(nodes)
    np.fill_diagonal(r, 1.0)
    nu_dot = np.einsum("id,ijd->ij", nodes.normals, dx)
    kern = nu_dot / (2.0 * np.pi * r * r) * nodes.jacobians
    np.fill_diagonal(kern, nodes.curvatures * nodes.jacobians / (4.0 * np.pi))
    mat = (2.0 * np.pi / n) * kern
    return BoundaryOperator(mat, kind="Kstar", wavenumber=0.0, nodes=nodes)


def assemble_S_omega(nodes, k):
    """
    Helmholtz single-layer matrix at (possibly complex) wavenumber k.

    Splitting: the log coefficient is (1/4pi) J0(k r) |x'(s)|; the smooth
    part is recovered by subtraction with the analytic diagonal limit
    [-i/4 + (1/2pi)(gamma + ln(k |x'(t)|/2))] |x'(t)|.
    """
    nodes = _require_2d(nodes)
    k = _check_wavenumber(nodes, k)
    n = nodes.n
    r, _, logsin = _pairwise(nodes)
    jac = nodes.jacobians
    np.fill_diagonal(r, 1.0)
    m1 = special.jv(0, k * r) * jac / (4.0 * np.pi)
    np.fill_diagonal(m1, jac / (4.0 * np.pi))
    gam = -0.25j * special.hankel1(0, k * r)
    m2 = gam * jac - m1 * logsin
    diag = (-0.25j + (EULER_GAMMA + np.log(k * jac / 2.0)) / (2.0 * np.pi)) * jac
    np.fill_diagonal(m2, diag)
    mat = log_weight_matrix(n) * m1 + (2.0 * np.pi / n) * m2
    return BoundaryOperator(mat, kind="S_omega", wavenumber=k, nodes=nodes)


def assemble_Kstar_omega(nodes, k):
    """
    Helmholtz adjoint-NP matrix at wavenumber k.

    Kernel (ik/4) H1(k r) (nu(t).(x(t)-x(s)))/r |x'(s)|; log coefficient
    -(k/4pi) J1(k r) (nu.dx/r) |x'(s)|, vanishing on the diagonal, where
    the smooth part has the static limit kappa |x'| / (4 pi).
    """
    nodes = _require_2d(nodes)
    k = _check_wavenumber(nodes, k)
    n = nodes.n
    r, dx, logsin = _pairwise(nodes)
    jac = nodes.jacobians
    np.fill_diagonal(r, 1.0)
    nu_dot = np.einsum("id,ijd->ij", nodes.normals, dx)
    c = nu_dot / r
    m1 = -(k / (4.0 * np.pi)) * special.jv(1, k * r) * c * jac
    np.fill_diagonal(m1, 0.0)
    kern = 0.25j * k * special.hankel1(1, k * r) * c * jac
    m2 = kern - m1 * logsin
    np.fill_diagonal(m2, nodes.curvatures * jac / (4.0 * np.pi))
    mat = log_weight_matrix(n) * m1 + (2.0 * np.pi / n) * m2
    return BoundaryOperator(mat, kind="Kstar_omega", wavenumber=k, nodes=nodes)


def _j0m1(z):
    """J0(z) - 1, series-protected against cancellation for small |z|."""
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    out = np.empty(z.shape, dtype=z.dtype)
    big = np.abs(z) >= 0.5
    if np.any(big):
        out[big] = special.jv(0, z[big]) - 1.0
    if np.any(~big):
        zs = z[~big]
        acc = np.zeros(zs.shape, dtype=zs.dtype)
        coeff = np.ones(zs.shape, dtype=zs.dtype)
        for m in range(1, 20):
            coeff = coeff * (-((zs / 2.0) ** 2)) / (m * m)
            acc = acc + coeff
            if np.max(np.abs(coeff)) < 1e-20:
                break
        out[~big] = acc
    return out


def assemble_R_Q(nodes, omega, d=2):
    """
    Remainder operators of the low-frequency expansions

        S^w  = S  + tau(w) <., 1>   + w^2 ln w * R2   (d = 2)
        S^w  = S  + w * R3                            (d = 3 sphere)
        K^w* = K* + w^2 ln w * Q2                     (d = 2)
        K^w* = K* + w^2 * Q3                          (d = 3 sphere)

    R2 is assembled independently from the series remainder kernel with
    its own log splitting, so the d=2 closure above is a genuine
    two-route identity. Q2 is the operator difference quotient. For
    d = 3 pass nodes = (L, R) and diagonal operators are returned.
    """
    omega = float(omega)
    if not 0 < omega <= OMEGA_MAX:
        raise ValueError(f"omega must lie in (0, {OMEGA_MAX}]")
    if d == 3:
        L, radius = nodes
        s0, k0, sw, kw = sphere_operators(L, radius, omega)
        r3 = (sw.matrix - s0.matrix) / omega
        q3 = (kw.matrix - k0.matrix) / omega**2
        return (
            BoundaryOperator(r3, kind="R3", wavenumber=omega),
            BoundaryOperator(q3, kind="Q3", wavenumber=omega),
        )
    if d != 2:
        raise ValueError("d must be 2 or 3")
    nodes = _require_2d(nodes)
    n = nodes.n
    scale = omega * omega * np.log(omega)
    r, _, logsin = _pairwise(nodes)
    jac = nodes.jacobians
    # R2: log coefficient (1/4pi)(J0(w r) - 1)|x'|/scale vanishes on the
    # diagonal, and so does the smooth part (the expansion is exact there)
    np.fill_diagonal(r, 1.0)
    m1 = _j0m1(omega * r) * jac / (4.0 * np.pi) / scale
    np.fill_diagonal(m1, 0.0)
    k2 = remainder_kernel_radial(r, omega, 2)
    m2 = k2 * jac - m1 * logsin
    np.fill_diagonal(m2, 0.0)
    r2 = log_weight_matrix(n) * m1 + (2.0 * np.pi / n) * m2
    q2 = (
        assemble_Kstar_omega(nodes, omega).matrix - assemble_Kstar(nodes).matrix
    ) / scale
    return (
        BoundaryOperator(r2, kind="R2", wavenumber=omega, nodes=nodes),
        BoundaryOperator(q2, kind="Q2", wavenumber=omega, nodes=nodes),
    )


def eval_potential(nodes, density, k, points, want_gradient=False):
    """
    Single-layer potential S^k[phi] (and optionally its gradient) at
    points off the boundary, by direct quadrature.

    Accuracy degrades near the boundary; points closer than twice the
    node spacing are rejected.
    """
    nodes = _require_2d(nodes)
    density = np.asarray(density)
    if density.shape != (nodes.n,):
        raise ValueError(f"density must have shape ({nodes.n},)")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 2:
        raise ValueError("points must have shape (m, 2)")
    dx = points[:, None, :] - nodes.points[None, :, :]
    dist = np.sqrt(np.sum(dx * dx, axis=-1))
    buffer = 2.0 * nodes.spacing
    if np.any(dist.min(axis=1) < buffer):
        raise ValueError(
            f"evaluation point within {buffer:.3g} of the boundary; "
            "near-boundary evaluation is unsupported"
        )
    wphi = nodes.weights * density
    if k == 0:
        kernel = gamma_laplace(dx, 2)
    else:
        kernel = gamma_helmholtz(dx, k, 2)
    values = kernel @ wphi
    if not want_gradient:
        return values
    if k == 0:
        gk = grad_gamma_laplace(dx, 2)
    else:
        gk = grad_gamma_helmholtz(dx, k, 2)
    grads = np.einsum("mjd,j->md", gk, wphi)
    return values, grads


# ---------------------------------------------------------------- sphere


def sphere_degree_index(L):
    """Degree n of each flattened (n, m) spherical-harmonic slot."""
    return np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)


def sphere_operators(L, R, k=0.0):
    """
    Diagonal operators on the radius-R sphere over real spherical
    harmonics flattened as (n, m), m = -n..n, n = 0..L:

        S    -> -R/(2n+1)
        K*   ->  1/(2(2n+1))
        S^k  -> -i k R^2 j_n(kR) h_n(kR)
        K^k* -> -(i k^2 R^2 / 2) (j_n h_n)'(kR)

    Returns (S, K*) for k = 0 and (S, K*, S^k, K^k*) otherwise. The
    Bessel products are series-evaluated for |k|R < 0.5 where the raw
    h_n overflow.
    """
    if L < 4:
        raise ValueError("truncation degree L must be >= 4")
    if R <= 0:
        raise ValueError("R must be positive")
    k = complex(k)
    if abs(k) * R > 10.0:
        raise ValueError("|k| R must be <= 10")
    deg = sphere_degree_index(L)
    s_diag = -R / (2.0 * deg + 1.0)
    kstar_diag = 1.0 / (2.0 * (2.0 * deg + 1.0))
    s_op = BoundaryOperator(np.diag(s_diag), kind="S", wavenumber=0.0)
    kstar_op = BoundaryOperator(np.diag(kstar_diag), kind="Kstar", wavenumber=0.0)
    if k == 0:
        return s_op, kstar_op
    z = k * R
    jh = np.array([sph_jh_product(n, z) for n in range(L + 1)])
    jhp = np.array([sph_jh_product_deriv(n, z) for n in range(L + 1)])
    sk_diag = -1j * k * R * R * jh[deg]
    kk_diag = -0.5j * k * k * R * R * jhp[deg]
    sk_op = BoundaryOperator(np.diag(sk_diag), kind="S_omega", wavenumber=k)
    kk_op = BoundaryOperator(np.diag(kk_diag), kind="Kstar_omega", wavenumber=k)
    return s_op, kstar_op, sk_op, kk_op


def sphere_quadrature(n_theta, n_phi, radius=1.0):
    """
    Product Gauss-Legendre x uniform-azimuth surface quadrature on the
    radius-R sphere. Exact for spherical polynomials of degree
    < min(2 n_theta, n_phi). Returns (points, weights).
    """
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - u * u)
    pts = np.empty((n_theta * n_phi, 3))
    pts[:, 0] = np.outer(st, np.cos(phi)).ravel()
    pts[:, 1] = np.outer(st, np.sin(phi)).ravel()
    pts[:, 2] = np.outer(u, np.ones(n_phi)).ravel()
    w = np.outer(wu, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    return radius * pts, radius * radius * w


def real_sph_harm(n, m, points):
    """
    Real spherical harmonic Y_nm at cartesian points (any radius;
    directions are used). Orthonormal over the unit sphere: Y_n0 uses
    P_n(cos theta), m > 0 pairs with cos(m phi), m < 0 with sin(|m| phi),
    Condon-Shortley phase as in scipy's lpmv.
    """
    if abs(m) > n:
        raise ValueError("|m| must be <= n")
    points = np.asarray(points, dtype=float)
    r = np.sqrt(np.sum(points * points, axis=-1))
    if np.any(r == 0):
        raise ValueError("points must be nonzero")
    ct = points[..., 2] / r
    am = abs(m)
    norm = np.sqrt(
        (2.0 * n + 1.0)
        / (4.0 * np.pi)
        * special.gamma(n - am + 1.0)
        / special.gamma(n + am + 1.0)
    )
    leg = special.lpmv(am, n, ct)
    if m == 0:
        return norm * leg
    phi = np.arctan2(points[..., 1], points[..., 0])
    trig = np.cos(am * phi) if m > 0 else np.sin(am * phi)
    return np.sqrt(2.0) * norm * leg * trig


def sphere_diagonal_by_quadrature(
    n, m, R, k=0.0, which="S", x0=None, n_theta=80, n_phi=32
):
    """
    Independent surface-quadrature estimate of a sphere diagonal.

    Evaluates S^k[Y_nm] or K^k*[Y_nm] at a boundary point x0 by direct
    integration in polar coordinates centered on x0, where the kernel
    singularity cancels against the area element: with distance
    rho = 2 R sin(theta'/2) the integrand becomes smooth, so the product
    rule converges spectrally. Returns the estimate of the diagonal,
    quad_value / Y_nm(x0).
    """
    if which not in ("S", "Kstar"):
        raise ValueError("which must be 'S' or 'Kstar'")
    k = complex(k)
    if x0 is None:
        x0 = np.array([0.6, 0.25, 0.76])
    zax = np.asarray(x0, dtype=float)
    zax = zax / np.linalg.norm(zax)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(zax @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = helper - (helper @ zax) * zax
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(zax, e1)
    # Gauss-Legendre in theta' on [0, pi], trapezoid in phi'
    xi, wxi = np.polynomial.legendre.leggauss(n_theta)
    th = 0.5 * np.pi * (xi + 1.0)
    wth = 0.5 * np.pi * wxi
    ph = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wph = 2.0 * np.pi / n_phi
    ct, st = np.cos(th), np.sin(th)
    y = R * (
        ct[:, None, None] * zax[None, None, :]
        + st[:, None, None]
        * (
            np.cos(ph)[None, :, None] * e1[None, None, :]
            + np.sin(ph)[None, :, None] * e2[None, None, :]
        )
    )
    yvals = real_sph_harm(n, m, y)
    rho = 2.0 * R * np.sin(th / 2.0)
    phase = np.exp(1j * k * rho) if k != 0 else np.ones(th.shape)
    if which == "S":
        # Gamma^k(rho) R^2 sin(theta') collapses to -(R/4pi) cos(theta'/2) e^{ik rho}
        fth = -(R / (4.0 * np.pi)) * np.cos(th / 2.0) * phase
    else:
        # normal-derivative kernel collapses to (1/8pi)(1 - ik rho) cos(theta'/2) e^{ik rho}
        fth = (1.0 / (8.0 * np.pi)) * (1.0 - 1j * k * rho) * np.cos(th / 2.0) * phase
    quad = np.sum((wth * fth)[:, None] * yvals) * wph
    y0 = real_sph_harm(n, m, zax[None, :])[0]
    if abs(y0) < 1e-12:
        raise ValueError("Y_nm vanishes at x0; choose another point")
    return quad / y0
