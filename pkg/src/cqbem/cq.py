"""BDF convolution quadrature: weights, discrete convolutions, solvers.

A temporal convolution whose kernel is known through its Laplace
transform K(s) is discretized on the uniform grid t_n = n tau by

    (K g)_n  ~=  sum_{j=0..n} w_j g_{n-j},

with weights generated by K(delta(zeta)/tau), delta the generating
polynomial of the BDF method of order p (only p = 1, 2 are A-stable and
supported).  Weights are recovered from samples of K on a scaled circle
of radius lambda via the FFT; the same scaled transform decouples an
implicit convolution system into independent frequency-domain solves.

Numerical accuracy of the weight/transform machinery ("contour
tolerance") is set by the circle radius: aliasing decays like
lambda^(#nodes) while roundoff grows like eps/lambda^N.  The decoupled
solver balances the two at sqrt(eps); standalone scalar weights use
oversampled contours (more nodes than weights) pushing the error close
to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_EPS = float(np.finfo(float).eps)
FFT_FAST_PATH_MIN_STEPS = 512


class CQError(RuntimeError):
    """Failure inside the convolution quadrature machinery."""


def bdf_delta(p: int, zeta) -> np.ndarray | complex:
    """Generating polynomial of the BDF method of order p at zeta.

    delta(zeta) = sum_{l=1..p} (1 - zeta)^l / l; supports scalar or
    array zeta.
    """
    if p not in (1, 2):
        raise ValueError("only BDF orders 1 and 2 are A-stable; got p=%r" % p)
    one_minus = 1.0 - np.asarray(zeta)
    out = one_minus if p == 1 else one_minus + 0.5 * one_minus**2
    if np.isscalar(zeta):
        return complex(out)
    return out


def contour_tolerance(lam: float, N: int, nodes: int) -> float:
    """A-priori accuracy of the scaled-circle transform at radius lam.

    Sum of the aliasing term lam^nodes and the roundoff amplification
    eps * lam^(-N); the default radii balance the two.
    """
    return float(lam**nodes + _EPS * lam ** (-N))


def default_contour_radius(N: int, oversample: int = 1) -> float:
    """Radius balancing aliasing decay against roundoff amplification.

    With L = oversample*(N+1) contour nodes the total weight error is
    roughly lambda^L + eps * lambda^(-N), minimized at
    lambda = eps^(1/(L+N)).  oversample=1 recovers the classical
    sqrt(eps) balance.
    """
    nodes = oversample * (N + 1)
    return float(_EPS ** (1.0 / (nodes + N)))


@dataclass(frozen=True)
class CQScheme:
    """Time grid and contour parameters of one convolution quadrature run.

    p: BDF order (1 or 2); tau: stepsize; N: number of steps so that the
    grid is t_n = n tau for n = 0..N; lam: contour radius in (0, 1),
    defaulting to the sqrt(eps) balance for N+1 nodes.
    """

    p: int
    tau: float
    N: int
    lam: float = field(default=0.0)

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError("BDF order must be 1 or 2")
        if self.tau <= 0.0:
            raise ValueError("stepsize tau must be positive")
        if self.N < 1:
            raise ValueError("need at least one step")
        if self.lam == 0.0:
            object.__setattr__(self, "lam", default_contour_radius(self.N))
        if not 0.0 < self.lam < 1.0:
            raise ValueError("contour radius must lie in (0, 1)")
        if self.lam ** (self.N + 1) < 100.0 * _EPS:
            raise ValueError(
                "contour radius too small: lambda^(N+1) below 100*eps makes "
                "the scaled transform ill-conditioned")

    @property
    def num_nodes(self) -> int:
        return self.N + 1

    @property
    def final_time(self) -> float:
        return self.N * self.tau

    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.N + 1)

    def frequencies(self) -> np.ndarray:
        """Contour frequencies s_l = delta(lam e^{-2 pi i l/(N+1)})/tau.

        All have positive real part (A-stability plus lam < 1); they come
        in conjugate pairs s_{N+1-l} = conj(s_l).
        """
        M = self.num_nodes
        zeta = self.lam * np.exp(-2j * np.pi * np.arange(M) / M)
        return bdf_delta(self.p, zeta) / self.tau

    def num_distinct_frequencies(self) -> int:
        """Independent solves needed for real data (conjugate symmetry)."""
        return self.num_nodes // 2 + 1


def _contour_samples(symbol, nodes_s):
    vals = np.empty(len(nodes_s), dtype=complex)
    for l, s in enumerate(nodes_s):
        try:
            v = complex(symbol(s))
        except Exception as exc:
            raise CQError(
                f"symbol evaluation failed at contour node l={l}, s={s}") from exc
        if not np.isfinite(v):
            raise CQError(f"symbol not finite at contour node l={l}, s={s}")
        vals[l] = v
    return vals


def scalar_weights(symbol: Callable[[complex], complex], scheme: CQScheme,
                   oversample: int = 8, lam: Optional[float] = None) -> np.ndarray:
    """Convolution quadrature weights w_0..w_N of a scalar symbol.

    The Cauchy integral for the Taylor coefficients of K(delta(zeta)/tau)
    is approximated by the trapezoidal rule on a circle of radius lam
    with oversample*(N+1) nodes; oversampling drives the aliasing error
    below the classical sqrt(eps) balance, which matters when weights of
    composed symbols must agree to 1e-10 or better.

    Pass lam explicitly (e.g. scheme.lam with oversample=1) to reproduce
    the plain N+1-node transform of the decoupled solver.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    M = scheme.num_nodes
    L = oversample * M
    if lam is None:
        lam = default_contour_radius(scheme.N, oversample)
    zeta = lam * np.exp(-2j * np.pi * np.arange(L) / L)
    svals = bdf_delta(scheme.p, zeta) / scheme.tau
    kvals = _contour_samples(symbol, svals)
    coeff = np.fft.ifft(kvals)[:M]
    weights = coeff * lam ** (-np.arange(M, dtype=float))
    if np.max(np.abs(kvals.imag)) == 0.0 or _conjugate_symmetric(kvals):
        weights = weights.real.astype(complex)
    return weights


def _conjugate_symmetric(vals):
    if vals[0].imag != 0.0:
        return False
    head = vals[1:]
    return np.allclose(head, np.conj(head[::-1]), rtol=1e-12,
                       atol=1e-300)


def operator_weights(matrix_symbol: Callable[[complex], np.ndarray],
                     scheme: CQScheme, oversample: int = 1,
                     lam: Optional[float] = None) -> np.ndarray:
    """Matrix-valued CQ weights, shape (N+1, d, d).

    Entrywise the same scaled-FFT transform as scalar_weights; intended
    for the explicit marching solver and for matrix transfer symbols.
    """
    M = scheme.num_nodes
    L = oversample * M
    if lam is None:
        lam = scheme.lam if oversample == 1 else default_contour_radius(scheme.N, oversample)
    zeta = lam * np.exp(-2j * np.pi * np.arange(L) / L)
    svals = bdf_delta(scheme.p, zeta) / scheme.tau
    first = np.asarray(matrix_symbol(complex(svals[0])), dtype=complex)
    stack = np.empty((L,) + first.shape, dtype=complex)
    stack[0] = first
    for l in range(1, L):
        stack[l] = matrix_symbol(complex(svals[l]))
    coeff = np.fft.ifft(stack, axis=0)[:M]
    return coeff * (lam ** (-np.arange(M, dtype=float)))[:, None, None]


def apply_convolution(weights: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Causal discrete convolution out_n = sum_{j<=n} w_j g_{n-j}.

    weights may be scalar-valued (N+1,) or matrix-valued (N+1, d, d);
    g is (N+1,) or (N+1, d).  Scalar weights take an FFT fast path for
    long series.
    """
    weights = np.asarray(weights)
    g = np.asarray(g)
    M = weights.shape[0]
    if g.shape[0] != M:
        raise ValueError("weights and signal must share the time grid")

    if weights.ndim == 1:
        gz = g.astype(complex)
        if M > FFT_FAST_PATH_MIN_STEPS:
            n_fft = 1
            while n_fft < 2 * M - 1:
                n_fft *= 2
            wz = np.fft.fft(weights.astype(complex), n_fft)
            if gz.ndim == 1:
                out = np.fft.ifft(wz * np.fft.fft(gz, n_fft))[:M]
            else:
                out = np.fft.ifft(wz[:, None] * np.fft.fft(gz, n_fft, axis=0),
                                  axis=0)[:M]
        else:
            out = np.zeros_like(gz)
            for n in range(M):
                acc = weights[:n + 1][::-1]
                out[n] = np.tensordot(acc, gz[:n + 1], axes=(0, 0))
        if np.isrealobj(weights) and np.isrealobj(g):
            return out.real
        return out

    if weights.ndim != 3:
        raise ValueError("weights must be (N+1,) or (N+1, d, d)")
    d = weights.shape[1]
    gz = g.reshape(M, d).astype(complex)
    out = np.zeros((M, d), dtype=complex)
    for n in range(M):
        for j in range(n + 1):
            out[n] += weights[j] @ gz[n - j]
    if np.isrealobj(weights) and np.isrealobj(g):
        return out.real
    return out.reshape(g.shape)


def frequency_apply(make_map: Callable[[complex], Callable[[np.ndarray], np.ndarray]],
                    series: np.ndarray, scheme: CQScheme,
                    progress: Optional[Callable[[int, int], None]] = None,
                    keep_imag: bool = False) -> np.ndarray:
    """Apply a frequency-defined operator family through the scaled DFT.

    Computes the convolution quadrature of the operator symbol s -> B(s)
    applied to the series: scaled forward DFT, one application of
    make_map(s_l) per contour node, scaled inverse DFT.  The map may
    change the vector dimension.  For real input the conjugate symmetry
    s_{N+1-l} = conj(s_l) halves the number of map applications, assuming
    B(conj s) = conj(B(s)) (true for all real-coefficient symbols here).

    With keep_imag=False and real input, the real part is returned; the
    imaginary residue is of contour-tolerance size.
    """
    series = np.asarray(series)
    squeeze = series.ndim == 1
    if squeeze:
        series = series[:, None]
    M = scheme.num_nodes
    if series.shape[0] != M:
        raise ValueError(f"series must have N+1 = {M} time levels")

    real_input = np.isrealobj(series)
    lam_pow = scheme.lam ** np.arange(M)
    ghat = np.fft.fft(lam_pow[:, None] * series, axis=0)
    freqs = scheme.frequencies()

    n_apply = scheme.num_distinct_frequencies() if real_input else M
    xhat = None
    for l in range(n_apply):
        try:
            mapped = np.asarray(make_map(complex(freqs[l]))(ghat[l]),
                                dtype=complex)
        except Exception as exc:
            raise CQError(
                f"frequency solve failed at node l={l}, s={freqs[l]}") from exc
        if xhat is None:
            xhat = np.empty((M, mapped.shape[0]) if mapped.ndim else (M, 1),
                            dtype=complex)
        xhat[l] = mapped
        if progress is not None:
            progress(l + 1, n_apply)
    if real_input:
        for l in range(n_apply, M):
            xhat[l] = np.conj(xhat[M - l])

    x = np.fft.ifft(xhat, axis=0) / lam_pow[:, None]
    if real_input and not keep_imag:
        x = x.real
    if squeeze and x.shape[1] == 1:
        return x[:, 0]
    return x


def operator_cq_solve(make_solver: Callable[[complex], Callable[[np.ndarray], np.ndarray]],
                      rhs: np.ndarray, scheme: CQScheme,
                      progress: Optional[Callable[[int, int], None]] = None) -> np.ndarray:
    """Solve the implicit CQ system A(d/dt) x = rhs by frequency decoupling.

    make_solver(s) must return a callable applying A(s)^{-1}; it is
    invoked once per distinct contour frequency.  Agrees with the
    sequential marching solve up to contour tolerance.
    """
    return frequency_apply(make_solver, rhs, scheme, progress=progress)


def marching_cq_solve(weights: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Sequential solve of sum_j W_j x_{n-j} = rhs_n (one factorization).

    weights: (N+1, d, d) operator weights (or (N+1,) scalars).  The
    leading weight is factorized once; inherently sequential in n, used
    as the independent cross-check of the decoupled solver and for
    causality tests.
    """
    import scipy.linalg as sla

    weights = np.asarray(weights)
    rhs = np.asarray(rhs)
    squeeze = rhs.ndim == 1
    scalar = weights.ndim == 1
    M = weights.shape[0]
    if rhs.shape[0] != M:
        raise ValueError("weights and rhs must share the time grid")
    rhsz = rhs.reshape(M, -1).astype(complex)
    d = rhsz.shape[1]

    if scalar:
        if weights[0] == 0:
            raise CQError("leading convolution weight is zero")
        x = np.zeros((M, d), dtype=complex)
        for n in range(M):
            acc = rhsz[n].copy()
            if n:
                acc -= np.tensordot(weights[1:n + 1][::-1], x[:n], axes=(0, 0))
            x[n] = acc / weights[0]
    else:
        try:
            lu = sla.lu_factor(weights[0])
        except Exception as exc:
            raise CQError("leading operator weight is singular") from exc
        x = np.zeros((M, d), dtype=complex)
        for n in range(M):
            acc = rhsz[n].copy()
            for j in range(1, n + 1):
                acc -= weights[j] @ x[n - j]
            x[n] = sla.lu_solve(lu, acc)

    if np.isrealobj(weights) and np.isrealobj(rhs):
        x = x.real
    return x[:, 0] if squeeze else x.reshape(rhs.shape)
