"""Peripheral spectrum of the discretized operator.

Everything here is dense linear algebra on the operator matrix A:
``A @ f`` evolves grid functions, ``nu @ A`` evolves grid measures, and the
pairing ``<nu, f> = sum_i nu_i f_i`` makes the two actions exactly adjoint.

The headline object is :class:`SpectralData`: the spectral radius ``lam``,
the number ``m`` of eigenvalues of modulus ``lam`` (always ``lam`` times the
m-th roots of unity for an irreducible nonnegative matrix), and the
biorthonormalized left/right peripheral eigenpairs.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DefectiveMatrix,
    EscapeNode,
    NonConvergent,
    NoSpectralGapWithinTol,
    PeriodMismatch,
    Reducible,
    TolTooLoose,
)
from .kernels import check_h2_reachability
from .measures import variation_norm

PERIPHERAL_TOL_DEFAULT = 1e-6
GAP_FLOOR_DEFAULT = 1e-4
ANGLE_SNAP_TOL = 1e-3
DENSE_SIZE_LIMIT = 2000


@dataclass(frozen=True)
class SpectralData:
    """Peripheral eigenstructure of a discretized kernel.

    ``right_eigs[j]`` and ``left_eigs[j]`` satisfy (up to the recorded
    residuals) ``A f_j = lam w^j f_j`` and ``mu_j A = lam w^j mu_j`` with
    ``w = exp(2 pi i / m)``, normalized so that mu_0 is a probability vector,
    ``<mu_j, f_k> = delta_jk``, and f_j has a real positive value at the
    first non-escape node.  Pairs j and m - j are complex conjugates.
    """

    lam: float
    period_m: int
    eigenvalues: np.ndarray        # snapped peripheral eigenvalues, j = 0..m-1
    raw_eigenvalues: np.ndarray    # as returned by the dense solve
    right_eigs: np.ndarray         # shape (m, n) complex
    left_eigs: np.ndarray          # shape (m, n) complex
    subdominant_radius: float
    residuals_right: np.ndarray
    residuals_left: np.ndarray
    peripheral_tol: float
    gap_floor: float
    graph_period: int
    op: object                     # the DiscreteOperator this was computed from

    @property
    def f0(self):
        return self.right_eigs[0].real

    @property
    def mu0(self):
        return self.left_eigs[0].real

    def to_json_dict(self):
        """JSON document with complex numbers as [re, im] pairs."""
        c2 = lambda z: [float(z.real), float(z.imag)]
        return {
            "lambda": self.lam,
            "m": self.period_m,
            "subdominant_radius": self.subdominant_radius,
            "eigvals": [c2(z) for z in self.eigenvalues],
            "f": [[c2(z) for z in row] for row in self.right_eigs],
            "mu": [[c2(z) for z in row] for row in self.left_eigs],
            "residuals": {
                "right_sup": [float(r) for r in self.residuals_right],
                "left_tv": [float(r) for r in self.residuals_left],
            },
        }


def _dense_eig(matrix):
    if matrix.shape[0] > DENSE_SIZE_LIMIT:
        raise NoSpectralGapWithinTol(
            f"dense eigensolve limited to {DENSE_SIZE_LIMIT} nodes, got {matrix.shape[0]}")
    ev, vr = np.linalg.eig(matrix)
    evl, vl = np.linalg.eig(matrix.T)
    return ev, vr, evl, vl


def _nonnegative_real(vec, tol):
    """Sign-fix an eigenvector that should live in the nonnegative cone."""
    v = vec.real.copy()
    pivot = np.argmax(np.abs(v))
    if v[pivot] < 0:
        v = -v
    if v.min() < -tol * max(v.max(), 1e-300):
        return None
    return np.maximum(v, 0.0)


def power_lambda_estimate(op, n=200, period=None):
    """Power-iteration estimate of the spectral radius from survivor masses.

    Returns ``(ratio_estimate, root_estimate)``: the period-aware one-step
    ratio ``(||A^(n+m) 1|| / ||A^n 1||)^(1/m)`` which converges geometrically,
    and the n-th-root form ``||A^n 1||^(1/n)`` whose error decays only like
    |log C| / n and is reported for reference.
    """
    m = period or 1
    v = np.ones(op.size)
    logscale = 0.0
    for _ in range(n):
        v = op.matrix @ v
        s = np.abs(v).max()
        if s == 0:
            raise NonConvergent("survivor mass vanished during power iteration")
        logscale += math.log(s)
        v = v / s
    root = math.exp(logscale / n)
    w = v.copy()
    extra = 0.0
    for _ in range(m):
        w = op.matrix @ w
        s = np.abs(w).max()
        extra += math.log(s)
        w = w / s
    ratio = math.exp(extra / m)
    return ratio, root


def spectral_radius(op, reach=None):
    """Spectral radius with its nonnegative right eigenfunction and eigenmeasure.

    Returns ``(lam, f0, mu0)`` with f0 >= 0 scaled to sup-norm one and mu0 a
    probability vector; both are checked to be fixed points of A / lam and of
    its adjoint with sup/variation residual below 1e-10, and the dense value
    is cross-checked against power iteration.
    """
    reach = reach or check_h2_reachability(op)
    if not reach.strongly_connected:
        raise Reducible(f"{reach.n_components} communicating classes")
    ev, vr, evl, vl = _dense_eig(op.matrix)
    lam = float(np.abs(ev).max())
    if lam <= 0:
        raise NoSpectralGapWithinTol("spectral radius is zero")

    # Perron pair: the (essentially) real eigenvalue at the peripheral modulus
    cand = [k for k in range(len(ev))
            if abs(ev[k]) >= lam * (1 - PERIPHERAL_TOL_DEFAULT) and abs(ev[k].imag) <= lam * 1e-8
            and ev[k].real > 0]
    f0 = mu0 = None
    for k in cand:
        f0 = _nonnegative_real(vr[:, k], tol=1e-8)
        if f0 is None:
            continue
        kl = int(np.argmin(np.abs(evl - ev[k])))
        mu0 = _nonnegative_real(vl[:, kl], tol=1e-8)
        if mu0 is not None:
            break
    if f0 is None or mu0 is None:
        raise NoSpectralGapWithinTol("no nonnegative eigenpair at the spectral radius")

    f0 = f0 / f0.max()
    mu0 = mu0 / mu0.sum()
    res_f = np.abs(op.matrix @ f0 - lam * f0).max()
    res_mu = variation_norm(mu0 @ op.matrix - lam * mu0)
    if res_f > 1e-10 * max(f0.max(), 1.0) or res_mu > 1e-10:
        raise NonConvergent(f"eigen residuals too large: {res_f:.2e}, {res_mu:.2e}")

    ratio, _ = power_lambda_estimate(op, n=200, period=reach.graph_period or 1)
    if abs(ratio - lam) > 1e-6:
        raise NonConvergent(
            f"power iteration gives {ratio!r}, dense eigensolve {lam!r}")
    return lam, f0, mu0


def peripheral_spectrum(op, peripheral_tol=PERIPHERAL_TOL_DEFAULT,
                        gap_floor=GAP_FLOOR_DEFAULT, reach=None):
    """Extract the full peripheral eigenstructure of the operator.

    The peripheral band is ``|beta| >= lam * (1 - peripheral_tol)``.  The
    count m must match the graph period of the communicating class
    (PeriodMismatch otherwise), the band's arguments must sit on the m-th
    root angles within 1e-3 (TolTooLoose otherwise), and the largest
    non-peripheral modulus must stay below ``lam * (1 - gap_floor)``
    (NoSpectralGapWithinTol otherwise).
    """
    if gap_floor < peripheral_tol:
        raise NoSpectralGapWithinTol("gap_floor must be at least peripheral_tol")
    reach = reach or check_h2_reachability(op)
    lam, _, _ = spectral_radius(op, reach=reach)

    ev, vr, evl, vl = _dense_eig(op.matrix)
    per = np.flatnonzero(np.abs(ev) >= lam * (1 - peripheral_tol))
    m = len(per)

    # snap arguments to the m-th-root angles
    slots = {}
    for k in per:
        theta = cmath.phase(ev[k] / lam) % (2 * math.pi)
        j = int(round(theta * m / (2 * math.pi))) % m
        snapped = 2 * math.pi * j / m
        err = abs((theta - snapped + math.pi) % (2 * math.pi) - math.pi)
        if err > ANGLE_SNAP_TOL or j in slots:
            raise TolTooLoose(
                f"peripheral eigenvalue {ev[k]:.6g} off the {m}-th root angles")
        slots[j] = int(k)
    if sorted(slots) != list(range(m)):
        raise TolTooLoose("peripheral band does not fill the root-of-unity slots")

    if reach.graph_period and m != reach.graph_period:
        raise PeriodMismatch(
            f"{m} peripheral eigenvalues but graph period {reach.graph_period}")

    rest = np.abs(ev)[[k for k in range(len(ev)) if k not in set(per)]]
    sub = float(rest.max()) if rest.size else 0.0
    if sub >= lam * (1 - gap_floor):
        raise NoSpectralGapWithinTol(
            f"subdominant modulus {sub:.6g} inside the gap floor of {lam:.6g}")

    keep = op.nonescape_indices()
    i0 = int(keep[0])
    n = op.size
    right = np.zeros((m, n), dtype=complex)
    left = np.zeros((m, n), dtype=complex)
    half = m // 2
    for j in sorted(slots):
        if j > half or (m % 2 == 0 and j == half and j > 0 and right[j].any()):
            continue
        k = slots[j]
        f = vr[:, k].astype(complex)
        kl = int(np.argmin(np.abs(evl - ev[k])))
        if abs(evl[kl] - ev[k]) > lam * 1e-6:
            raise DefectiveMatrix("left spectrum does not match right spectrum")
        mu = vl[:, kl].astype(complex)
        if j == 0:
            f0 = _nonnegative_real(f, tol=1e-8)
            mu0 = _nonnegative_real(mu, tol=1e-8)
            if f0 is None or mu0 is None:
                raise DefectiveMatrix("leading eigenpair leaves the cone")
            mu = mu0.astype(complex) / mu0.sum()
            f = f0.astype(complex)
        else:
            # align phase and magnitude with f_0 at the first non-escape node:
            # makes the family consistent under the discrete Fourier transform
            # that produces the disjointly supported cyclic generators
            anchor = f[i0]
            if abs(anchor) < 1e-13 * np.abs(f).max():
                raise DefectiveMatrix("cannot fix the phase at the first non-escape node")
            f = f * (right[0][i0] / anchor)
        pairing = mu @ f
        if abs(pairing) < 1e-12 * (np.abs(mu).sum() * np.abs(f).max()):
            raise DefectiveMatrix(f"peripheral eigenvalue {ev[k]:.6g} looks defective")
        if j == 0:
            f = f / pairing          # mu_0 stays a probability vector
        else:
            mu = mu / pairing
        right[j] = f
        left[j] = mu
        if j != 0 and (m - j) != j:
            right[m - j] = np.conj(f)
            left[m - j] = np.conj(mu)

    snapped_vals = lam * np.exp(2j * math.pi * np.arange(m) / m)
    res_r = np.array([np.abs(op.matrix @ right[j] - snapped_vals[j] * right[j]).max()
                      for j in range(m)])
    res_l = np.array([variation_norm(left[j] @ op.matrix - snapped_vals[j] * left[j])
                      for j in range(m)])
    biorth = np.array([[left[j] @ right[k] for k in range(m)] for j in range(m)])
    if np.abs(biorth - np.eye(m)).max() > 1e-8:
        raise DefectiveMatrix("biorthogonalization failed beyond 1e-8")

    raw = np.array([ev[slots[j]] for j in range(m)])
    return SpectralData(
        lam=lam, period_m=m, eigenvalues=snapped_vals, raw_eigenvalues=raw,
        right_eigs=right, left_eigs=left, subdominant_radius=sub,
        residuals_right=res_r, residuals_left=res_l,
        peripheral_tol=peripheral_tol, gap_floor=gap_floor,
        graph_period=reach.graph_period, op=op,
    )


@dataclass(frozen=True)
class DiracDecomposition:
    """Split of a point mass into peripheral eigenmeasures plus remainder.

    ``coefficients[j] = f_j(node)`` and the remainder
    ``nu = delta_node - sum_j f_j(node) mu_j`` carries everything that decays
    strictly faster than lam^n; ``decay_curve[k] = ||nu A^k|| / lam^k`` in the
    full variation norm.
    """

    point_index: int
    coefficients: np.ndarray
    remainder: np.ndarray
    residual_norm: float
    decay_curve: np.ndarray


def dirac_decomposition(sd, op, node, horizon):
    """Decompose the point mass at ``node`` against the peripheral eigenpairs."""
    if node in op.escape.indices:
        raise EscapeNode(f"node {node} is in the escape set")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    m, n = sd.period_m, op.size
    coeff = np.array([sd.right_eigs[j][node] for j in range(m)])
    delta = np.zeros(n)
    delta[node] = 1.0
    nu_c = delta.astype(complex) - coeff @ sd.left_eigs
    if np.abs(nu_c.imag).max() > 1e-10:
        raise DefectiveMatrix("Dirac remainder came out non-real")
    nu = nu_c.real
    curve = np.empty(horizon + 1)
    v = nu.copy()
    curve[0] = variation_norm(v)
    for k in range(1, horizon + 1):
        v = (v @ op.matrix) / sd.lam
        curve[k] = variation_norm(v)
    return DiracDecomposition(
        point_index=int(node), coefficients=coeff, remainder=nu,
        residual_norm=float(variation_norm(nu)), decay_curve=curve,
    )


def subdominant_rate(sd):
    """Predicted exponential rate log(lam / subdominant_radius).

    Returns math.inf when the non-peripheral spectrum is {0} (nilpotent
    tail), meaning the conditioned law locks onto the peripheral dynamics in
    finitely many steps.
    """
    if sd.subdominant_radius <= 1e-14 * sd.lam:
        return math.inf
    return math.log(sd.lam) - math.log(sd.subdominant_radius)
