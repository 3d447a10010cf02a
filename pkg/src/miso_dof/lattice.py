"""Full-diversity rotated-QAM block codes for the common symbols.

A codeword stretches one message across T slots: c = theta * M * q, where q
is a vector of T square-QAM points (odd-integer coordinates, spacing 2) and
M is a unitary Vandermonde matrix built from T equally spaced points on the
unit circle, offset so that every nonzero integer input keeps a nonzero
coordinate product.  That non-vanishing product distance is what lets one
codeword survive per-slot noise levels of unequal size, as long as the mean
noise exponent stays at or below the code's design exponent.

Construction: with t the odd part of T and m = 4*T*t, the generator rows are
powers of x_k = zeta_m * zeta_T^k.  All x_k are roots of x^T - zeta_{4t},
which is irreducible over the Gaussian rationals (zeta_{4t} is not a p-th
power there for any prime p | T, nor in -4*(field)^4), so the coordinate
product of M*d is a nonzero algebraic norm for every nonzero Gaussian-integer
vector d.  For power-of-two T this reduces to the familiar exp(i*pi/(2T))
rotation family; for other T the extra factor t avoids reducible cases.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    IndexOutOfRange,
    RangeViolation,
    RateUnderflow,
    TooLargeToEnumerate,
    ValidationError,
)
from .mlsearch import ml_search
from .rational import as_fraction

UNITARITY_TOL = 1e-10
EXHAUSTIVE_BIT_LIMIT = 24
PAIR_ENUM_LIMIT = 1 << 20


def _odd_part(n):
    while n % 2 == 0:
        n //= 2
    return n


def _is_prime(n):
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def rotation_matrix(T):
    """Unitary T x T generator with non-vanishing coordinate product.

    When 2T+1 is prime the generator is the totally real cyclotomic
    rotation (rows of sines): its coordinate products are norm forms of
    the real cyclotomic field, so the minimum product distance is bounded
    below independently of the constellation size.  Since the matrix is
    real it gives the same guarantee for complex (QAM) inputs
    coordinatewise.  Other dimensions fall back to a Vandermonde of
    offset roots of unity, which is unitary and keeps products nonzero
    but has no height-independent bound.
    """
    if T < 1:
        raise RangeViolation("dimension must be a positive integer")
    p = 2 * T + 1
    if _is_prime(p):
        k = np.arange(1, T + 1)
        M = (2.0 / math.sqrt(p)) * np.sin(2 * np.pi * np.outer(k, k) / p)
        return M.astype(complex)
    m = 4 * T * _odd_part(T)
    roots = np.array(
        [cmath.exp(2j * cmath.pi * (1.0 / m + k / T)) for k in range(T)]
    )
    M = np.vander(roots, T, increasing=True) / math.sqrt(T)
    return M


def unitarity_residual(M):
    """Max entrywise deviation of M M^H from the identity."""
    T = M.shape[0]
    return float(np.max(np.abs(M @ M.conj().T - np.eye(T))))


def pam_sizes(q):
    """Split q QAM points per complex dimension into (real, imag) PAM sizes."""
    if q < 2 or q & (q - 1):
        raise RangeViolation("QAM size must be a power of two (at least 2)")
    bits = q.bit_length() - 1
    return 1 << ((bits + 1) // 2), 1 << (bits // 2)


def _pam_value(u, m):
    return 2 * u - (m - 1)


@dataclass(frozen=True)
class LatticeCode:
    """Immutable rotated-QAM code over T slots."""

    T: int
    q: int
    theta: float
    generator: np.ndarray
    rate_prelog: Fraction
    P: float
    epsilon: Fraction

    def __post_init__(self):
        if self.T < 1:
            raise RangeViolation("dimension must be a positive integer")
        m_re, m_im = pam_sizes(self.q)  # validates q
        if self.theta <= 0:
            raise RangeViolation("scaling must be positive")
        if self.generator.shape != (self.T, self.T):
            raise ValidationError("generator shape must match the dimension")
        res = unitarity_residual(self.generator)
        if res > UNITARITY_TOL:
            raise ValidationError(
                f"generator unitarity residual {res:.2e} exceeds tolerance"
            )
        del m_re, m_im

    @property
    def pam(self):
        return pam_sizes(self.q)

    @property
    def bits_per_slot(self):
        return self.q.bit_length() - 1

    @property
    def total_bits(self):
        return self.T * self.bits_per_slot

    @property
    def delta_bar_star(self):
        return 1 - self.rate_prelog - self.epsilon

    @property
    def mean_symbol_energy(self):
        """E|q_j|^2 under uniform messages (same for every slot j)."""
        m_re, m_im = self.pam
        return (m_re**2 - 1) / 3 + (m_im**2 - 1) / 3

    def message_space(self):
        return self.q**self.T

    def to_json_dict(self):
        return {
            "T": self.T,
            "q": self.q,
            "theta": self.theta,
            "rate_prelog": str(self.rate_prelog),
            "P": self.P,
            "epsilon": str(self.epsilon),
            "total_bits": self.total_bits,
            "unitarity_residual": unitarity_residual(self.generator),
        }


@dataclass(frozen=True)
class WhitenedObservation:
    """Received T-vector plus the per-slot noise exponents used to whiten."""

    ybar: np.ndarray
    noise_exponents: tuple

    def validate(self, delta_bar_star):
        """Check the design hypothesis: mean noise exponent <= delta-bar-star."""
        mean = Fraction(sum(as_fraction(d) for d in self.noise_exponents),
                        len(self.noise_exponents))
        if mean > as_fraction(delta_bar_star):
            raise RangeViolation(
                "mean noise exponent exceeds the code design exponent"
            )


def build_code(T, delta_bar_star, epsilon, P, margin_bits=1):
    """Size a code for operating point P at prelog 1 - delta_bar_star - epsilon.

    Bits per real dimension are floor(r*log2(P)/2) minus a safety margin
    (default one bit), so the total payload stays at or below r*T*log2(P)
    while leaving the nearest-neighbor gap comfortably above the noise at
    simulation SNRs.  theta is set so the mean per-slot transmit power is
    exactly P, which always dominates the growth rate the distance chain
    needs (P to the (delta_bar_star+epsilon)/2).
    """
    ds = as_fraction(delta_bar_star)
    eps = as_fraction(epsilon)
    if T < 1:
        raise RangeViolation("dimension must be a positive integer")
    if eps <= 0:
        raise RangeViolation("epsilon must be positive")
    if ds < 0 or ds + eps > 1:
        raise RangeViolation(
            "need 0 <= delta_bar_star and delta_bar_star + epsilon <= 1"
        )
    if P <= 1:
        raise RangeViolation("operating SNR must exceed 1")
    r = 1 - ds - eps
    b = math.floor(float(r) * math.log2(P) / 2) - margin_bits
    if b < 1:
        raise RateUnderflow(
            "operating SNR too small to carry at least one bit per dimension"
        )
    q = 1 << (2 * b)
    m_re, m_im = pam_sizes(q)
    energy = (m_re**2 - 1) / 3 + (m_im**2 - 1) / 3
    theta = math.sqrt(P / energy)
    if theta < P ** (float(ds + eps) / 2):
        raise ValidationError("power normalization fell below the design scale")
    return LatticeCode(
        T=T,
        q=q,
        theta=theta,
        generator=rotation_matrix(T),
        rate_prelog=r,
        P=float(P),
        epsilon=eps,
    )


def code_with_bits(T, bits_per_real_dim, theta=1.0, rate_prelog=Fraction(1, 2),
                   P=1.0, epsilon=Fraction(1, 20)):
    """Directly sized code (used by certification and tests)."""
    if bits_per_real_dim < 1:
        raise RateUnderflow("need at least one bit per real dimension")
    return LatticeCode(
        T=T,
        q=1 << (2 * bits_per_real_dim),
        theta=float(theta),
        generator=rotation_matrix(T),
        rate_prelog=as_fraction(rate_prelog),
        P=float(P),
        epsilon=as_fraction(epsilon),
    )


def _message_to_qvec(code, message):
    m_re, m_im = code.pam
    if len(message) != code.T:
        raise IndexOutOfRange("message must have one index per slot")
    q = np.empty(code.T, dtype=complex)
    for j, idx in enumerate(message):
        idx = int(idx)
        if not 0 <= idx < code.q:
            raise IndexOutOfRange(
                f"message index {idx} outside [0, {code.q})"
            )
        u_re, u_im = divmod(idx, m_im)
        q[j] = _pam_value(u_re, m_re) + 1j * _pam_value(u_im, m_im)
    return q


def encode(code, message):
    """Map a tuple of T QAM indices to the transmitted T-slot vector."""
    return code.theta * (code.generator @ _message_to_qvec(code, message))


def _whitened_model(code, noise_exponents):
    """Real-valued search model for the whitened metric."""
    w = np.array([code.P ** (-float(as_fraction(d)) / 2)
                  for d in noise_exponents])
    A_c = w[:, None] * (code.theta * code.generator)
    m_re, m_im = code.pam
    T = code.T
    # Interleave (re_0, im_0, re_1, im_1, ...) so the exhaustive scan order
    # equals the lexicographic message order (lowest message wins ties).
    A = np.empty((2 * T, 2 * T))
    levels = []
    for j in range(T):
        A[:T, 2 * j] = A_c[:, j].real
        A[T:, 2 * j] = A_c[:, j].imag
        A[:T, 2 * j + 1] = -A_c[:, j].imag
        A[T:, 2 * j + 1] = A_c[:, j].real
        levels.extend((m_re, m_im))
    return w, A, levels


def decode(code, obs, exhaustive_bit_limit=EXHAUSTIVE_BIT_LIMIT,
           max_nodes=None):
    """Exact nearest codeword in the whitened metric; returns the message.

    Both search routes below the dispatch limit and above it return the
    same answer; the limit only trades enumeration for sphere pruning.
    ``max_nodes`` caps the sphere enumeration (best-found answer after the
    budget); leave it ``None`` for a guaranteed-exact search.
    """
    ybar = np.asarray(obs.ybar, dtype=complex)
    if ybar.shape != (code.T,):
        raise ValidationError("observation length must match the dimension")
    if len(obs.noise_exponents) != code.T:
        raise ValidationError("need one noise exponent per slot")
    w, A, levels = _whitened_model(code, obs.noise_exponents)
    y_w = w * ybar
    y = np.concatenate([y_w.real, y_w.imag])
    u = ml_search(A, y, levels, exhaustive_bit_limit=exhaustive_bit_limit,
                  max_nodes=max_nodes)
    m_re, m_im = code.pam
    return tuple(int(u[2 * j]) * m_im + int(u[2 * j + 1])
                 for j in range(code.T))


def _difference_grid(m):
    """All PAM coordinate differences: even integers in [-2(m-1), 2(m-1)]."""
    return np.arange(-2 * (m - 1), 2 * (m - 1) + 1, 2)


def min_product_distance(code):
    """Exact min over distinct codeword pairs of the coordinate product.

    Every distinct pair differs by a nonzero vector whose per-slot real and
    imaginary parts range independently over the PAM difference grid, and
    every such vector is realized by some pair, so minimizing the product
    |theta|^{2T} * prod_t |(M d)_t|^2 over nonzero difference vectors d gives
    the pair minimum exactly.
    """
    n = code.message_space()
    pairs = n * (n - 1) // 2
    if pairs > PAIR_ENUM_LIMIT:
        raise TooLargeToEnumerate(
            f"{pairs} codeword pairs exceed the enumeration limit"
        )
    m_re, m_im = code.pam
    d_re = _difference_grid(m_re)
    d_im = _difference_grid(m_im)
    per_slot = (d_re[:, None] + 1j * d_im[None, :]).ravel()
    grids = np.meshgrid(*([per_slot] * code.T), indexing="ij")
    diffs = np.stack([g.ravel() for g in grids], axis=-1)
    nonzero = np.any(diffs != 0, axis=1)
    prods = np.prod(np.abs(diffs[nonzero] @ code.generator.T) ** 2, axis=1)
    return float(code.theta ** (2 * code.T) * np.min(prods))


def certify(T, q=4, theta=1.0):
    """Certification record for one (T, q, theta) point."""
    code = LatticeCode(
        T=T,
        q=q,
        theta=float(theta),
        generator=rotation_matrix(T),
        rate_prelog=Fraction(1, 2),
        P=1.0,
        epsilon=Fraction(1, 20),
    )
    return {
        "T": T,
        "q": q,
        "theta": float(theta),
        "min_product_distance": min_product_distance(code),
        "unitarity_residual": unitarity_residual(code.generator),
    }
