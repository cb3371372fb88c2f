"""
Spectral decomposition of the adjoint NP operator.

K* is self-adjoint in the inner product <phi, psi> = -<phi, S~ psi>,
where S~ coincides with the single layer S on mean-zero densities and is
adjusted on the equilibrium direction phi_0 (the density whose
single-layer potential is constant on the boundary, eigendensity at
lambda_0 = 1/2). The discrete Gram matrix built here is positive
definite for every curve: on mean-zero densities it is the quadrature
realization of -<phi, S psi>, which is positive there, and the
equilibrium direction is normalized to unit length and kept orthogonal
to the rest. This sidesteps the classical 2D capacity defect (the raw
form flips sign on phi_0 when the interior value c_0 of S[phi_0] is
positive) while agreeing with the raw form whenever that form is
definite.

Normalization bookkeeping: phi_0 is stored with |c_0 m_0| = 1 and
m_0 = int phi_0 dsigma > 0, where c_0 here is the interior constant of
S[phi_0] for the stored scaling (field c0_h). The reported c0 rescales
phi_0 to unit mean, making it comparable with the classical value of
S[1] (R ln R on a radius-R circle, -R on a radius-R sphere). When the
reported c0 vanishes (within threshold) the stored scaling is m_0 = 1
and the S~ patch sends phi_0 to the constant function m_0.

Everything is dimension-uniform: the sphere realization is diagonal over
spherical-harmonic coefficients and produces the same NPSpectrum record,
so coefficient transforms and the transmission solvers are shared.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .geometry import NodeSet
from .layer_ops import BoundaryOperator, sphere_degree_index

__all__ = [
    "GramOperator",
    "NPSpectrum",
    "build_gram",
    "np_eigendecomposition",
    "sphere_spectrum",
    "coeffs_hat",
    "coeffs_check",
]

# cluster width for grouping equal |lambda| when tie-breaking
_TIE_TOL = 1e-8


@dataclass(frozen=True)
class GramOperator:
    """
    Positive-definite Gram matrix of the H* inner product, together with
    the equilibrium data the eigendecomposition and the closed-form
    solvers need. c0 is the reported (unit-mean) interior constant, c0_h
    the one for the stored phi0, ctilde0 the S~ image constant.
    """

    matrix: np.ndarray
    phi0: np.ndarray
    m0: float
    c0: float
    c0_h: float
    ctilde0: float
    patched: bool
    s_matrix: np.ndarray
    nodes: NodeSet


@dataclass(frozen=True)
class NPSpectrum:
    """
    H*-orthonormal eigendecomposition of the adjoint NP operator.

    densities holds eigendensities as columns (nodal values in 2D,
    orthonormal-surface-harmonic coefficients on the sphere), ordered
    lambda_0 = 1/2 first, then decreasing |lambda|, ties ascending by
    signed value. wdiag are the diagonal surface quadrature weights and
    one_vec the representation of the constant function 1, so
    int phi dsigma = (wdiag * one_vec) @ phi in both realizations.
    stilde_traces holds S~[phi_n] as columns. degrees tags each slot
    with its harmonic degree on the sphere (None in 2D).
    """

    lambdas: np.ndarray
    densities: np.ndarray
    gram: np.ndarray
    wdiag: np.ndarray
    one_vec: np.ndarray
    m0: float
    c0: float
    c0_h: float
    ctilde0: float
    patched: bool
    stilde_traces: np.ndarray
    dim: int
    nodes: NodeSet = None
    degrees: np.ndarray = None
    radius: float = None

    @property
    def n(self):
        return self.lambdas.size

    @property
    def phi0(self):
        return self.densities[:, 0]

    def integrate(self, values):
        """int values dsigma in this realization."""
        return (self.wdiag * self.one_vec) @ values


def build_gram(S, nodes):
    """
    Build the H* Gram matrix from an assembled single-layer operator.

    Finds the equilibrium density by the bordered solve
    [S, -1; w^T, 0][phi0; c] = [0; 1], reports c0 (unit-mean scaling),
    decides the patch, rescales phi0 to |c0_h m0| = 1 (or m0 = 1 when
    patched), and assembles

        G = P^T M P + q q^T,   M = -(W S + S^T W)/2,
        q = w / m0,            P = I - phi0 q^T,

    which is symmetric positive definite, restricts to -W S on mean-zero
    densities, and gives phi0 unit norm. Returns (G, c0, patched).
    """
    if not isinstance(nodes, NodeSet):
        raise TypeError("expected a 2D NodeSet")
    sm = S.matrix if isinstance(S, BoundaryOperator) else np.asarray(S)
    n = nodes.n
    if sm.shape != (n, n):
        raise ValueError("operator and node set sizes disagree")
    w = nodes.weights
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = sm.real
    bordered[:n, n] = -1.0
    bordered[n, :n] = w
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    try:
        sol = np.linalg.solve(bordered, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("equilibrium solve failed; boundary degenerate") from exc
    phi0_raw, c_raw = sol[:n], sol[n]
    resid = np.max(np.abs(sm.real @ phi0_raw - c_raw))
    if resid > 1e-8 * (1.0 + abs(c_raw)):
        raise RuntimeError(f"equilibrium residual {resid:.2e}; quadrature too coarse")
    perimeter = nodes.perimeter
    c0 = c_raw * perimeter
    patched = abs(c0) < 1e-8 * (1.0 + perimeter)
    if patched:
        phi0 = phi0_raw
        m0 = 1.0
        c0_h = 0.0
        ctilde0 = m0
    else:
        scale = np.sqrt(abs(c_raw))
        phi0 = phi0_raw / scale
        m0 = 1.0 / scale
        c0_h = c_raw / scale
        ctilde0 = c0_h
    q = w / m0
    m = -(w[:, None] * sm.real + sm.real.T * w[None, :]) / 2.0
    proj = np.eye(n) - np.outer(phi0, q)
    g = proj.T @ m @ proj + np.outer(q, q)
    g = (g + g.T) / 2.0
    try:
        linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        smallest = linalg.eigvalsh(g)[0]
        raise RuntimeError(
            f"Gram matrix not positive definite (smallest eigenvalue {smallest:.3e})"
        ) from exc
    gram = GramOperator(
        matrix=g,
        phi0=phi0,
        m0=m0,
        c0=c0,
        c0_h=c0_h,
        ctilde0=ctilde0,
        patched=patched,
        s_matrix=sm,
        nodes=nodes,
    )
    return gram, c0, patched


def _orient_columns(v):
    """Flip column signs so the first significant entry is positive."""
    for j in range(v.shape[1]):
        col = v[:, j]
        big = np.abs(col) > 1e-12 * np.max(np.abs(col))
        lead = col[np.argmax(big)]
        if lead.real < 0:
            v[:, j] = -col
    return v


def _order_by_magnitude(lam):
    """Indices sorted by decreasing |lambda|, clusters by ascending value."""
    idx = np.argsort(-np.abs(lam), kind="stable")
    out = []
    i = 0
    while i < idx.size:
        j = i
        while (
            j + 1 < idx.size
            and abs(abs(lam[idx[j + 1]]) - abs(lam[idx[i]]))
            <= _TIE_TOL * (1.0 + abs(lam[idx[i]]))
        ):
            j += 1
        cluster = sorted(idx[i : j + 1], key=lambda k: lam[k])
        out.extend(cluster)
        i = j + 1
    return np.array(out, dtype=int)


def np_eigendecomposition(Kstar, G):
    """
    Solve the G-symmetric eigenproblem for K* and package the spectrum.

    K* is self-adjoint in the G inner product, so G K* is symmetric up
    to quadrature error; an asymmetry beyond 1e-6 relative signals a
    broken symmetrization and raises. Eigenvectors come out
    G-orthonormal; the lambda_0 slot is replaced by the equilibrium
    density stored in G so the spectral solvers see exactly the
    normalization build_gram fixed.
    """
    km = Kstar.matrix if isinstance(Kstar, BoundaryOperator) else np.asarray(Kstar)
    km = km.real
    g = G.matrix
    gk = g @ km
    asym = np.linalg.norm(gk - gk.T) / max(np.linalg.norm(gk), 1e-300)
    if asym > 1e-6:
        raise RuntimeError(
            f"G K* asymmetry {asym:.2e}; K* is not self-adjoint in this Gram"
        )
    lam, vec = linalg.eigh((gk + gk.T) / 2.0, g)
    i0 = int(np.argmax(lam))
    rest = np.delete(np.arange(lam.size), i0)
    order = np.concatenate(([i0], rest[_order_by_magnitude(lam[rest])]))
    lam = lam[order]
    vec = vec[:, order]
    vec[:, 0] = G.phi0
    vec = _orient_columns(vec)
    nodes = G.nodes
    stilde = G.s_matrix.real @ vec
    stilde[:, 0] = G.ctilde0
    return NPSpectrum(
        lambdas=lam,
        densities=vec,
        gram=g,
        wdiag=nodes.weights,
        one_vec=np.ones(nodes.n),
        m0=G.m0,
        c0=G.c0,
        c0_h=G.c0_h,
        ctilde0=G.ctilde0,
        patched=G.patched,
        stilde_traces=stilde,
        dim=2,
        nodes=nodes,
    )


def sphere_spectrum(L, R):
    """
    Exact NP spectrum on the radius-R sphere, diagonal over real
    spherical harmonics: lambda_n = 1/(2(2n+1)) with multiplicity 2n+1.

    Coefficients refer to the basis Yhat_nm = Y_nm / R, orthonormal in
    L^2 of the surface; the H*-orthonormal eigendensities are
    beta_n Yhat_nm with beta_n = sqrt((2n+1)/R).
    """
    if L < 4:
        raise ValueError("truncation degree L must be >= 4")
    if R <= 0:
        raise ValueError("R must be positive")
    deg = sphere_degree_index(L)
    nslots = deg.size
    lam = 1.0 / (2.0 * (2.0 * deg + 1.0))
    beta = np.sqrt((2.0 * deg + 1.0) / R)
    densities = np.diag(beta)
    gram = np.diag(R / (2.0 * deg + 1.0))
    one_vec = np.zeros(nslots)
    one_vec[0] = R * np.sqrt(4.0 * np.pi)
    m0 = np.sqrt(4.0 * np.pi * R)
    c0_h = -1.0 / m0
    stilde = np.diag(-np.sqrt(R / (2.0 * deg + 1.0)))
    return NPSpectrum(
        lambdas=lam,
        densities=densities,
        gram=gram,
        wdiag=np.ones(nslots),
        one_vec=one_vec,
        m0=m0,
        c0=-R,
        c0_h=c0_h,
        ctilde0=c0_h,
        patched=False,
        stilde_traces=stilde,
        dim=3,
        degrees=deg,
        radius=R,
    )


def coeffs_hat(phi, spectrum):
    """
    H* coefficients phi_hat(n) = <phi, phi_n>_{H*} of a density.

    The basis is G-orthonormal, so this is Phi^T G phi; Parseval
    sum |phi_hat|^2 = |phi|_{H*}^2 holds to roundoff.
    """
    phi = np.asarray(phi)
    if phi.shape != (spectrum.n,):
        raise ValueError(f"density must have shape ({spectrum.n},)")
    return spectrum.densities.T @ (spectrum.gram @ phi)


def coeffs_check(f, spectrum, tol=1e-6):
    """
    Expansion coefficients f_check(n) of a boundary trace over the
    S~ image basis: f = sum_n f_check(n) S~[phi_n].

    Uses the duality -<phi_m, S phi_n>_{L^2 dsigma} = delta_mn on
    mean-zero modes: f_check(n >= 1) = -<phi_n, f>, and the constant
    sector f_check(0) = <phi_0, f> / (m_0 ctilde_0). Raises if the
    reconstruction misses f by more than tol (f outside the image
    space or quadrature too coarse).
    """
    f = np.asarray(f)
    if f.shape != (spectrum.n,):
        raise ValueError(f"trace must have shape ({spectrum.n},)")
    wf = spectrum.wdiag * f
    fcheck = -(spectrum.densities.T @ wf)
    kappa = (spectrum.phi0 @ wf) / spectrum.m0
    fcheck[0] = kappa / spectrum.ctilde0
    recon = spectrum.stilde_traces @ fcheck
    resid = np.linalg.norm(recon - f)
    if resid > tol * max(np.linalg.norm(f), 1e-300):
        raise RuntimeError(f"S~ expansion residual {resid:.2e} exceeds tolerance")
    return fcheck
