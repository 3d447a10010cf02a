"""Finite-SNR link simulation of the phased two-user broadcast scheme.

One run transmits S phases of T slots each.  In every non-terminal phase the
transmitter sends, per slot,

    x_t = nu_t * (w_t c_t + gperp_t a_t + hhat_t a'_t
                           + hperp_t b_t + ghat_t b'_t)

where c is one coordinate of a T-slot rotated-QAM common codeword, (a, a')
are user-1 private QAM symbols zero-forced against user 2's current channel
estimate, (b, b') the mirror image, and nu_t normalizes the mean transmit
power to exactly P.  After a phase, the transmitter rebuilds each user's
received interference from delayed estimates, quantizes it, and ships those
bits - plus any fresh common payload - inside the next phase's common
codeword.  The terminal phase carries only the leftover quantized bits (plus
filler) on a common code sized for the weaker user, with single-stream
private symbols.

Decoding runs backwards.  The common codeword of phase s+1 yields the
quantized interference of phase s, which each user subtracts before
lattice-decoding phase s's common codeword (whitened by its per-slot nominal
noise), peeling it, and solving a per-slot 2x2 maximum-likelihood problem
for its two private symbols, the second equation being the forwarded
quantized version of the interference its own symbols caused at the other
user.

Physical layout: phases occupy alternating T-slot blocks; the skipped blocks
notionally carry an independent replica of the same scheme (never simulated,
never counted), which is what guarantees that delayed estimates - available
eta <= T slots after their slot - of one phase have arrived before the next
phase is encoded.  Rate accounting covers the non-terminal phases only; the
terminal phase is a vanishing end effect as the number of phases grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .allocation import (
    AllocationPlan,
    PhaseBudget,
    phase_budget,
    plan_phase,
    plan_terminal_phase,
)
from .errors import (
    BitOverflow,
    LengthMismatch,
    RangeViolation,
    RateUnderflow,
    ValidationError,
)
from .exponents import ExponentProfile, averages
from .lattice import (
    LatticeCode,
    WhitenedObservation,
    code_with_bits,
)
from .lattice import decode as lattice_decode
from .lattice import encode as lattice_encode
from .mlsearch import ml_search
from .rational import as_fraction

# The simulator dispatches the exact ML searches to the sphere routine at a
# lower size than the stand-alone decoder default; both routes return the
# same answer (cross-checked in tests), the sphere is just much faster at
# the sizes a run produces.
_SIM_EXHAUSTIVE_LIMIT = 12

# Node budget for the sphere search.  A healthy decode finishes in well
# under this; the budget only bites on decodes that are already lost
# (wrong-subtraction inputs after an upstream failure) where unbounded
# enumeration can take minutes without changing the outcome.
_SIM_MAX_NODES = 500_000

_PRIVATE_KINDS = ("a", "ap", "b", "bp")
_USER_KINDS = {1: ("a", "ap"), 2: ("b", "bp")}


# ---------------------------------------------------------------------------
# Bit and constellation helpers
# ---------------------------------------------------------------------------


def int_to_bits(value, width):
    """Big-endian bit list of the given width."""
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def bits_to_int(bits):
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def gray_encode(index):
    return index ^ (index >> 1)


def gray_decode(code):
    index = 0
    while code:
        index ^= code
        code >>= 1
    return index


@dataclass(frozen=True)
class QamShape:
    """Rectangular QAM carved from two Gray-labeled odd-integer PAM axes."""

    bits: int

    @property
    def bits_re(self):
        return self.bits - self.bits // 2

    @property
    def bits_im(self):
        return self.bits // 2

    @property
    def m_re(self):
        return 1 << self.bits_re

    @property
    def m_im(self):
        return 1 << self.bits_im

    @property
    def mean_energy(self):
        return (self.m_re**2 - 1) / 3 + (self.m_im**2 - 1) / 3

    def modulate(self, bits):
        """Data bits -> zero-mean odd-grid point (spacing 2 per axis)."""
        if len(bits) != self.bits:
            raise LengthMismatch("bit count does not match the QAM load")
        u_re = gray_decode(bits_to_int(bits[: self.bits_re]))
        u_im = gray_decode(bits_to_int(bits[self.bits_re:]))
        return complex(2 * u_re - (self.m_re - 1), 2 * u_im - (self.m_im - 1))

    def demodulate(self, u_re, u_im):
        """PAM axis indices -> data bits."""
        return (int_to_bits(gray_encode(u_re), self.bits_re)
                + int_to_bits(gray_encode(u_im), self.bits_im))


# ---------------------------------------------------------------------------
# Uniform scalar quantizer (per real axis, budget split evenly)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantizerSpec:
    """Per-sample quantizer: `bits` in total, range tied to a nominal power.

    The dynamic range covers `range_factor` standard deviations of each real
    axis of a circular complex sample with the given nominal power.  With
    zero bits the reconstruction is 0 and the "noise" is the sample itself.
    """

    bits: int
    nominal_power: float
    range_factor: float

    @property
    def bits_re(self):
        return self.bits - self.bits // 2

    @property
    def bits_im(self):
        return self.bits // 2

    @property
    def half_range(self):
        return self.range_factor * math.sqrt(self.nominal_power / 2)

    def _encode_axis(self, value, nbits):
        if nbits == 0:
            return [], 0.0, 0
        r = self.half_range
        step = 2 * r / (1 << nbits)
        idx = int(math.floor((value + r) / step))
        clipped = 0
        if idx < 0:
            idx, clipped = 0, 1
        elif idx >= (1 << nbits):
            idx, clipped = (1 << nbits) - 1, 1
        return int_to_bits(idx, nbits), -r + (idx + 0.5) * step, clipped

    def quantize(self, value):
        """Complex sample -> (bit list, reconstruction, clip count)."""
        if self.bits == 0:
            return [], 0.0 + 0.0j, 0
        b_re, rec_re, c1 = self._encode_axis(value.real, self.bits_re)
        b_im, rec_im, c2 = self._encode_axis(value.imag, self.bits_im)
        return b_re + b_im, complex(rec_re, rec_im), c1 + c2

    def reconstruct(self, bits):
        """Bit list -> the same reconstruction the encoder produced."""
        if self.bits == 0:
            return 0.0 + 0.0j
        if len(bits) != self.bits:
            raise LengthMismatch("quantizer bit count mismatch")
        r = self.half_range

        def axis(chunk, nbits):
            if nbits == 0:
                return 0.0
            step = 2 * r / (1 << nbits)
            return -r + (bits_to_int(chunk) + 0.5) * step

        return complex(axis(bits[: self.bits_re], self.bits_re),
                       axis(bits[self.bits_re:], self.bits_im))

    @property
    def nominal_noise_power(self):
        """Nominal reconstruction-error power per complex sample."""
        if self.bits == 0:
            return self.nominal_power
        r = self.half_range
        total = 0.0
        for nbits in (self.bits_re, self.bits_im):
            if nbits > 0:
                step = 2 * r / (1 << nbits)
                total += step**2 / 12
        return total


# ---------------------------------------------------------------------------
# Channel and CSIT generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelTrace:
    """True channel vectors per slot: row t of `h` reaches user 1, `g` user 2."""

    h: np.ndarray
    g: np.ndarray
    model: str

    @property
    def n(self):
        return self.h.shape[0]


def _cgauss(rng, shape, per_entry_var):
    scale = np.sqrt(np.asarray(per_entry_var, dtype=float) / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rng_for(seed, stream):
    key = stream if isinstance(stream, tuple) else (stream,)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=key))


def generate_channel(n, model, seed):
    """Draw n slots of (h_t, g_t); `model` is "iid" or ("block", Tc)."""
    if n < 1:
        raise RangeViolation("need at least one slot")
    rng = _rng_for(seed, 0)
    if model == "iid":
        return ChannelTrace(h=_cgauss(rng, (n, 2), 1.0),
                            g=_cgauss(rng, (n, 2), 1.0), model="iid")
    kind, tc = model
    if kind != "block" or tc < 1:
        raise ValidationError('model must be "iid" or ("block", Tc)')
    blocks = (n + tc - 1) // tc
    h = np.repeat(_cgauss(rng, (blocks, 2), 1.0), tc, axis=0)[:n]
    g = np.repeat(_cgauss(rng, (blocks, 2), 1.0), tc, axis=0)[:n]
    return ChannelTrace(h=h, g=g, model=f"block({tc})")


@dataclass(frozen=True)
class CsitTrace:
    """Channel estimates per slot.

    Current estimates (h_hat, g_hat) are known when slot t is sent; delayed
    estimates (h_check, g_check) describe slot t but become available only at
    slot t + eta.  Construction is estimate-first: channel = current estimate
    + refinement + residual with independent complex Gaussian terms of
    per-entry variances (1 - P^-alpha/2), (P^-alpha - P^-beta)/2 and
    P^-beta/2, so E||h - h_hat||^2 = P^-alpha and E||h - h_check||^2 =
    P^-beta hold exactly and every error is independent of every estimate.
    """

    h_hat: np.ndarray
    g_hat: np.ndarray
    h_check: np.ndarray
    g_check: np.ndarray
    eta: int
    profile: ExponentProfile

    def delayed_available(self, slot, at_slot):
        """Is the delayed estimate of `slot` known when `at_slot` starts?"""
        return slot + self.eta <= at_slot


def generate_csit(trace, profile, P, seed):
    """Attach estimate chains to a channel trace (see CsitTrace)."""
    profile.validate()
    n = trace.n
    if profile.n < n:
        raise LengthMismatch("profile shorter than the channel trace")
    rng = _rng_for(seed, 1)
    out = {}
    for name, channel, alphas, betas in (
        ("h", trace.h, profile.alpha1, profile.beta1),
        ("g", trace.g, profile.alpha2, profile.beta2),
    ):
        a = np.array([float(as_fraction(x)) for x in alphas[:n]])[:, None]
        b = np.array([float(as_fraction(x)) for x in betas[:n]])[:, None]
        var_cur = float(P) ** (-a)    # E||channel - current estimate||^2
        var_del = float(P) ** (-b)    # E||channel - delayed estimate||^2
        refine = _cgauss(rng, (n, 2), (var_cur - var_del) / 2)
        residual = _cgauss(rng, (n, 2), var_del / 2)
        out[name + "_hat"] = channel - refine - residual
        out[name + "_check"] = channel - residual
    return CsitTrace(eta=profile.eta, profile=profile, **out)


def orthogonal_complement(v):
    """Unit vector u with v^T u = 0 exactly (transpose, not conjugate)."""
    u = np.array([-v[1], v[0]])
    return u / np.linalg.norm(u)


def unit(v):
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Run design: everything deterministic shared by transmitter and receivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimKnobs:
    """Finite-SNR engineering margins.

    range_factor: quantizer dynamic range in per-axis standard deviations.
        Small values sharpen the quantizer (less noise on the forwarded
        row) at the cost of clipping; 2.0 clips ~0.5% of Gaussian samples.
    common_gap_bits: how far below its nominal capacity each common code is
        loaded (the rotated lattice is uncoded, so it cannot run at capacity).
    private_margin_bits: backoff of single-symbol private loads below their
        nominal-noise adjusted capacity.
    pair_error_target: acceptable modeled symbol-error rate when sizing a
        two-symbol private constellation pair (fade outage model fitted to
        Monte-Carlo sweeps of the peeled 2x2 system).
    """

    range_factor: float = 2.0
    common_gap_bits: float = 4.0
    private_margin_bits: int = 2
    pair_error_target: float = 0.08


def _float(x):
    return float(as_fraction(x))


@dataclass(frozen=True)
class RunDesign:
    """Deterministic per-run layout derived from (profile slice, point)."""

    S: int
    T: int
    P: float
    epsilon: Fraction
    delta_bar: Fraction
    omega: Fraction
    knobs: SimKnobs
    plan: AllocationPlan
    tplan: AllocationPlan
    budget: PhaseBudget
    code: LatticeCode
    tcode: LatticeCode
    specs: dict          # user -> per-slot QuantizerSpec (non-terminal)
    quant_bits: dict     # user -> per-slot bit counts
    fresh1: int
    fresh2: int
    loads: dict          # kind -> per-slot private bit loads (non-terminal)
    tloads: dict         # kind -> per-slot loads (terminal phase)
    qnoise: dict         # user -> per-slot nominal forwarded-quant noise
    w_seed: int = 0      # run seed the public common precoders derive from

    @property
    def lg(self):
        return math.log2(self.P)

    def slots_of_phase(self, s):
        """Physical slot range of 1-based phase s (alternating blocks)."""
        start = 2 * (s - 1) * self.T
        return range(start, start + self.T)

    @property
    def n_slots(self):
        return (2 * self.S - 1) * self.T

    def code_of_phase(self, s):
        return self.tcode if s == self.S else self.code

    def plan_of_phase(self, s):
        return self.tplan if s == self.S else self.plan

    def loads_of_phase(self, s):
        return self.tloads if s == self.S else self.loads

    @property
    def quant_section(self):
        return sum(self.quant_bits[1]) + sum(self.quant_bits[2])

    def payload_sections(self, s):
        """(quant, fresh1, fresh2, filler) bit counts of phase s's payload."""
        cap = self.code_of_phase(s).total_bits
        q = self.quant_section
        if s == self.S:
            return q, 0, 0, cap - q
        return q, self.fresh1, self.fresh2, cap - q - self.fresh1 - self.fresh2

    def split_quant_bits(self, section_bits):
        """Quant section -> per-user per-slot bit lists (slot-major order)."""
        out = {1: [], 2: []}
        pos = 0
        for t in range(self.T):
            for user in (1, 2):
                nbits = self.quant_bits[user][t]
                out[user].append(section_bits[pos:pos + nbits])
                pos += nbits
        return out

    def nu(self, s):
        """Per-slot transmit normalizers (mean slot power exactly P)."""
        plan = self.plan_of_phase(s)
        out = np.empty(self.T)
        for t in range(self.T):
            total = 1.0
            for kind in _PRIVATE_KINDS:
                if self.loads_of_phase(s)[kind][t] > 0:
                    total += self._power(plan, kind, t) / self.P
            out[t] = math.sqrt(1.0 / total)
        return out

    def _rate(self, plan, kind, t):
        seq = {"a": plan.r_a, "ap": plan.r_ap, "b": plan.r_b,
               "bp": plan.r_bp}[kind]
        return as_fraction(seq[t])

    def _power(self, plan, kind, t):
        return self.P ** _float(self._rate(plan, kind, t))

    def scale_of(self, s, kind, t):
        """Amplitude scale mapping the odd-grid QAM to its nominal power."""
        load = self.loads_of_phase(s)[kind][t]
        if load == 0:
            return 0.0
        shape = QamShape(load)
        return math.sqrt(self._power(self.plan_of_phase(s), kind, t)
                         / shape.mean_energy)


def _allocate_quant_bits(plan, P, capacity, knobs):
    """Bit budgets per interference stream under a shared bit capacity.

    The plan asks for (delta - alpha)^+ log2 P bits per sample (these
    exponents equal the primed-symbol rates).  When everything fits, each
    sample gets its own floor.  Otherwise all demands are scaled by a common
    factor and leftover capacity is handed out largest-fraction-first,
    never exceeding a sample's unscaled demand.
    """
    lg = math.log2(P)
    demands = []  # (user, slot, real-valued demand)
    for t in range(plan.T):
        demands.append((1, t, _float(plan.r_bp[t]) * lg))
        demands.append((2, t, _float(plan.r_ap[t]) * lg))
    total = sum(d for _, _, d in demands)
    bits = {1: [0] * plan.T, 2: [0] * plan.T}
    if total <= 0:
        return bits
    scale = min(1.0, capacity / total)
    floors = []
    for user, t, d in demands:
        b = math.floor(d * scale)
        bits[user][t] = b
        floors.append((d * scale - b, d, user, t))
    spare = capacity - (sum(bits[1]) + sum(bits[2]))
    # Hand spare bits to the largest fractional losers, capped at the
    # unscaled demand; deterministic tie-break by (user, slot).
    order = sorted(range(len(floors)),
                   key=lambda i: (-floors[i][0], floors[i][2], floors[i][3]))
    for i in order:
        if spare <= 0:
            break
        frac, d, user, t = floors[i]
        if bits[user][t] < math.floor(d):
            bits[user][t] += 1
            spare -= 1
    return bits


def _quant_specs(plan, P, quant_bits, knobs):
    """QuantizerSpec per stream and slot; range follows the plan exponent."""
    specs = {1: [], 2: []}
    for user, rp_seq in ((1, plan.r_bp), (2, plan.r_ap)):
        for t in range(plan.T):
            x = as_fraction(rp_seq[t])
            specs[user].append(QuantizerSpec(
                bits=quant_bits[user][t],
                nominal_power=max(float(P) ** _float(x), 1.0),
                range_factor=knobs.range_factor,
            ))
    return specs


def _plan_rates(plan):
    """kind -> per-slot Fraction rate exponents."""
    return {"a": [as_fraction(x) for x in plan.r_a],
            "ap": [as_fraction(x) for x in plan.r_ap],
            "b": [as_fraction(x) for x in plan.r_b],
            "bp": [as_fraction(x) for x in plan.r_bp]}


def _nu_sq(plan, P):
    """Per-slot squared power normalizers with every rate-positive symbol on."""
    rates = _plan_rates(plan)
    out = []
    for t in range(plan.T):
        total = 1.0
        for kind in _PRIVATE_KINDS:
            if rates[kind][t] > 0:
                total += float(P) ** (_float(rates[kind][t]) - 1.0)
        out.append(1.0 / total)
    return out


def _stream_exists(plan, stream):
    """Per-slot flags: does interference stream `stream` carry anything?

    Stream i is the interference user i suffers, caused by the other
    user's symbols; it exists wherever any of those has positive rate.
    """
    rates = _plan_rates(plan)
    causing = _USER_KINDS[2 if stream == 1 else 1]
    return [any(rates[k][t] > 0 for k in causing) for t in range(plan.T)]


def _forward_noise(plan, specs):
    """user -> per-slot nominal noise on the forwarded-interference rows.

    Zero wherever the stream carries nothing (an exactly-zero sample needs
    no bits and leaves no residual).
    """
    out = {}
    for user in (1, 2):
        exists = _stream_exists(plan, user)
        out[user] = [specs[user][t].nominal_noise_power if exists[t] else 0.0
                     for t in range(plan.T)]
    return out


def _resid_nominal(plan, P, beta_seq, user, nu2):
    """Per-slot nominal power of the post-subtraction estimation residual.

    Subtracting the reconstructed interference cancels the delayed-estimate
    projection; what survives (besides quantization noise) is the true
    channel minus the delayed estimate, whose energy sits at the delayed
    accuracy exponent.
    """
    rates = _plan_rates(plan)
    other = _USER_KINDS[2 if user == 1 else 1]
    out = []
    for t in range(plan.T):
        total = 0.0
        for kind in other:
            if rates[kind][t] > 0:
                total += nu2[t] * float(P) ** (
                    _float(rates[kind][t]) - _float(as_fraction(beta_seq[t])))
        out.append(total)
    return out


def _cross_nominal(plan, P, alpha_seq, user, nu2):
    """Per-slot nominal power of unsubtracted cross interference.

    Used for the terminal phase, where nothing is quantized or subtracted:
    the other user's zero-forced symbols leak at the instantaneous-estimate
    accuracy exponent, while non-zero-forced ones arrive at full gain.
    """
    rates = _plan_rates(plan)
    other = _USER_KINDS[2 if user == 1 else 1]
    zf = {"a", "b"}   # kinds beamformed orthogonal to this user's estimate
    out = []
    for t in range(plan.T):
        total = 0.0
        for kind in other:
            if rates[kind][t] > 0:
                gain = (float(P) ** -_float(as_fraction(alpha_seq[t]))
                        if kind in zf else 1.0)
                total += nu2[t] * float(P) ** _float(rates[kind][t]) * gain
        out.append(total)
    return out


def _nominal_common_capacity(plan, P, user, nu2, qnoise, resid, cross):
    """Nominal bits the common code can carry past this user's decoder.

    Per slot the codeword sees AWGN, this user's own private symbols (never
    subtractable - they are its own unknown data), and either the
    subtraction residual plus forwarded-quantization noise (non-terminal)
    or the raw cross interference (terminal).
    """
    rates = _plan_rates(plan)
    own = _USER_KINDS[user]
    cap = 0.0
    for t in range(plan.T):
        v = 1.0
        for kind in own:
            if rates[kind][t] > 0:
                v += nu2[t] * float(P) ** _float(rates[kind][t])
        v += resid[t] + qnoise[t] + cross[t]
        cap += math.log2(1.0 + float(P) * nu2[t] / v)
    return cap


def _private_loads(plan, P, knobs, *, terminal, alpha1, alpha2,
                   qnoise=None, resid=None):
    """Constellation bit loads from the nominal joint capacity per slot.

    Non-terminal: a user's plain and primed symbols are seen through two
    rows - the peeled direct observation (AWGN + subtraction residual +
    forwarded-quantization noise) and the forwarded interference they
    caused at the other user (quantization noise only).  The pair load is
    chosen by maximizing total bits subject to a fitted fade-outage model
    of one-shot ML on that 2x2 system (per-symbol Rayleigh margin against
    the stronger row plus an outage of the smaller load against the
    weak-direction capacity), staying under `pair_error_target`.  When the
    forwarded row is too noisy for a pair to beat one symbol, the slot
    falls back to the plain symbol alone (one unknown, still combining
    both rows).  Each candidate is priced with the slot normalizer its own
    active-symbol set induces: dropping the primed symbol hands its power
    share to the survivors, exactly as the transmit normalizer does.  Loads
    round down to even so every private constellation is square.  All
    terms are deterministic, so both ends agree on every load.
    """
    rates = _plan_rates(plan)
    nu2 = _nu_sq(plan, P)
    loads = {kind: [0] * plan.T for kind in _PRIVATE_KINDS}
    kappa = knobs.private_margin_bits

    def _even(bits):
        b = math.floor(bits)
        return max(0, b - (b % 2))

    def _nu2_for(active, t):
        total = 1.0 + sum(float(P) ** (_float(rates[k][t]) - 1.0)
                          for k in active)
        return 1.0 / total

    for user in (1, 2):
        plain, primed = _USER_KINDS[user]
        # Gain of each symbol on the forwarded row: zero-forced kinds leak
        # at the other user's instantaneous accuracy, primed kinds fully.
        alpha_other = alpha2 if user == 1 else alpha1
        for t in range(plan.T):
            present = [k for k in (plain, primed) if rates[k][t] > 0]
            if not present:
                continue
            if terminal:
                powers = {k: nu2[t] * float(P) ** _float(rates[k][t])
                          for k in present}
                v1 = 1.0 + _cross_nominal(plan, P,
                                          alpha1 if user == 1 else alpha2,
                                          user, nu2)[t]
                cap = math.log2(1.0 + sum(powers.values()) / v1)
                total_rate = sum(_float(rates[k][t]) for k in present)
                for k in present:
                    share = cap * _float(rates[k][t]) / total_rate
                    loads[k][t] = _even(share - kappa)
                continue
            v1 = 1.0 + resid[user][t] + qnoise[user][t]
            other = 2 if user == 1 else 1
            v2 = qnoise[other][t]
            g = {plain: float(P) ** -_float(as_fraction(alpha_other[t])),
                 primed: 1.0}

            def _rows(k, power):
                direct = power / v1
                forward = power * g[k] / v2 if v2 > 0.0 else 0.0
                return direct, forward

            # Solo candidate: the strongest single unknown at the power the
            # normalizer grants it when it transmits alone.
            solo_kind = plain if plain in present else present[0]
            n1 = _nu2_for([solo_kind], t)
            d1, f1 = _rows(solo_kind, n1 * float(P) ** _float(rates[solo_kind][t]))
            solo = _even(math.log2(1.0 + d1 + f1) - kappa)
            if len(present) < 2:
                loads[solo_kind][t] = solo
                continue
            # Two-stream candidate at the shared normalizer.
            n2 = _nu2_for(present, t)
            powers = {k: n2 * float(P) ** _float(rates[k][t]) for k in present}
            s_dir = {}
            s_fwd = {}
            for k in present:
                s_dir[k], s_fwd[k] = _rows(k, powers[k])
            s_det = (0.0 if v2 <= 0.0 else
                     powers[plain] * powers[primed]
                     * (g[plain] + g[primed]) / (v1 * v2))
            joint = math.log2(1.0 + sum(s_dir.values())
                              + sum(s_fwd.values()) + s_det)
            cap = {k: math.log2(1.0 + s_dir[k] + s_fwd[k]) for k in present}
            # Weak-direction capacity of the 2x2: what the pair of rows can
            # resolve beyond the best single row (sigma_min^2 ~ det/sigma_max^2).
            strongest = max(s_dir[k] + s_fwd[k] for k in present)
            weak = math.log2(1.0 + s_det / (1.0 + strongest))
            # Fade-outage model for uncoded ML on the pair, fitted against
            # Monte-Carlo sweeps of this channel: each symbol rides the
            # direct row (Rayleigh margin), and the pair direction the rows
            # barely span adds an outage on the smaller load.
            def _perr(k1, k2):
                p = 0.7 * (2.0 ** (k1 - cap[plain]) + 2.0 ** (k2 - cap[primed]))
                if min(k1, k2) > 0:
                    p += 0.05 * 2.0 ** (min(k1, k2) - weak)
                return p

            target = knobs.pair_error_target
            lim = {k: _even(cap[k]) for k in present}
            best = (0, -0.0, 0, 0)
            for k1 in range(0, lim[plain] + 1, 2):
                for k2 in range(0, lim[primed] + 1, 2):
                    if k1 + k2 > joint - 2.0 * kappa:
                        continue
                    p = _perr(k1, k2)
                    if p > target:
                        continue
                    key = (k1 + k2, -p, k1, k2)
                    if key > best:
                        best = key
            k_plain, k_primed = best[2], best[3]
            if k_plain + k_primed >= solo and k_plain + k_primed > 0:
                loads[plain][t] = k_plain
                loads[primed][t] = k_primed
            else:
                loads[solo_kind][t] = solo
    return loads


def _sized_code(T, bits_per_dim, prelog, P, epsilon):
    """Power-normalized rotated code at an explicit per-dimension load."""
    m = 1 << bits_per_dim
    energy = 2.0 * (m * m - 1) / 3.0
    return code_with_bits(T, bits_per_dim,
                          theta=math.sqrt(float(P) / energy),
                          rate_prelog=as_fraction(prelog), P=float(P),
                          epsilon=epsilon)


def make_design(profile, delta_bar, omega, S, T, P, epsilon=Fraction(1, 20),
                knobs=SimKnobs(), w_seed=0):
    """Validate inputs and lay out all deterministic run parameters.

    The common codes start at the asymptotic sizing (rate prelog times
    log2 P) and are clamped to their nominal decoder capacity minus the gap
    knob: an uncoded lattice cannot run at capacity, and at desk-scale SNR
    the quantization-noise constants eat a P-independent slice the
    asymptotic formula ignores.  Shrinking the common load shrinks the
    quantizer budget, which raises quantization noise, which lowers
    capacity again - so the non-terminal load is the fixed point of that
    map (it decreases monotonically, hence terminates).
    """
    delta_bar = as_fraction(delta_bar)
    omega = as_fraction(omega)
    epsilon = as_fraction(epsilon)
    if S < 2:
        raise RangeViolation("need at least two phases")
    if not 0 <= omega <= 1:
        raise RangeViolation("fresh-bit split must lie in [0, 1]")
    profile.validate()
    n = (2 * S - 1) * T
    if profile.n < n:
        raise LengthMismatch(
            f"profile must cover {n} slots (phases interleave with replicas)"
        )
    if profile.eta > T:
        raise ValidationError(
            "delayed estimates must arrive within one phase (eta <= T)"
        )
    first = None
    for s in range(1, 2 * S):
        lo = (s - 1) * T
        sl = (profile.alpha1[lo:lo + T], profile.alpha2[lo:lo + T],
              profile.beta1[lo:lo + T], profile.beta2[lo:lo + T])
        if first is None:
            first = sl
        elif sl != first:
            raise ValidationError(
                "per-phase exponent slices must all equal the first phase "
                "(choose the phase length as a multiple of the profile period)"
            )
    a1, a2, b1, b2 = first
    plan = plan_phase(a1, a2, b1, b2, delta_bar)
    avg = averages(ExponentProfile(n=T, eta=min(profile.eta, T),
                                   alpha1=a1, alpha2=a2, beta1=b1, beta2=b2))
    tplan = plan_terminal_phase(a1, a2, avg.a2)
    budget = phase_budget(avg, delta_bar)

    lg = math.log2(P)
    nu2 = _nu_sq(plan, P)
    tnu2 = _nu_sq(tplan, P)
    b_spec = math.floor(_float(1 - delta_bar - epsilon) * lg / 2)
    tb_spec = math.floor(_float(1 - avg.a2 - epsilon) * lg / 2)
    zero = [0.0] * T

    resid = {u: _resid_nominal(plan, P, b1 if u == 1 else b2, u, nu2)
             for u in (1, 2)}
    b_dim = b_spec
    if b_dim < 1:
        raise RateUnderflow(
            "common code cannot carry one bit per dimension here")
    while True:
        cap_q = 2 * T * b_dim
        quant_bits = _allocate_quant_bits(plan, P, cap_q, knobs)
        specs = _quant_specs(plan, P, quant_bits, knobs)
        qnoise = _forward_noise(plan, specs)
        cap_n = min(
            _nominal_common_capacity(plan, P, u, nu2, qnoise[u], resid[u],
                                     zero)
            for u in (1, 2))
        nb = max(1, min(b_spec,
                        math.floor((cap_n - knobs.common_gap_bits)
                                   / (2 * T))))
        if nb >= b_dim:
            break
        b_dim = nb

    q_total = sum(quant_bits[1]) + sum(quant_bits[2])

    # The terminal phase forwards no quantization of its own, so its
    # common payload only has to fit the final phase's quant bits (any
    # slack is filler).  Sizing it to that demand rather than to the
    # asymptotic rate leaves the terminal decoder a wide margin, clamped
    # by its own nominal capacity and the rate ceiling.
    tcross = {u: _cross_nominal(tplan, P, a1 if u == 1 else a2, u, tnu2)
              for u in (1, 2)}
    cap_t = min(
        _nominal_common_capacity(tplan, P, u, tnu2, zero, zero, tcross[u])
        for u in (1, 2))
    tb_cap = max(1, math.floor((cap_t - knobs.common_gap_bits) / (2 * T)))
    tb_need = max(1, math.ceil(q_total / (2 * T)))
    tb_dim = max(1, min(tb_spec, tb_cap, tb_need))

    code = _sized_code(T, b_dim, 1 - delta_bar - epsilon, P, epsilon)
    tcode = _sized_code(T, tb_dim, 1 - avg.a2 - epsilon, P, epsilon)
    if q_total > min(code.total_bits, tcode.total_bits):
        raise BitOverflow("quantized bits exceed the common-code capacity")

    fresh_room = code.total_bits - q_total
    fresh_target = math.floor(_float(budget.delta_com) * T * lg)
    fresh_total = max(0, min(fresh_room, fresh_target))
    fresh1 = math.floor(_float(omega) * fresh_total)
    fresh2 = fresh_total - fresh1

    loads = _private_loads(plan, P, knobs, terminal=False, alpha1=a1,
                           alpha2=a2, qnoise=qnoise, resid=resid)
    tloads = _private_loads(tplan, P, knobs, terminal=True, alpha1=a1,
                            alpha2=a2)

    return RunDesign(S=S, T=T, P=float(P), epsilon=epsilon,
                     delta_bar=delta_bar, omega=omega, knobs=knobs,
                     plan=plan, tplan=tplan, budget=budget, code=code,
                     tcode=tcode, specs=specs, quant_bits=quant_bits,
                     fresh1=fresh1, fresh2=fresh2, loads=loads,
                     tloads=tloads, qnoise=qnoise, w_seed=w_seed)


# ---------------------------------------------------------------------------
# Phase encoding and the channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseMessages:
    """Bits the transmitter loads into one phase."""

    payload_bits: list    # common-codeword payload, already assembled
    private_bits: dict    # kind -> per-slot bit lists


@dataclass(frozen=True)
class PhaseSignals:
    """One transmitted phase."""

    s: int
    slots: range
    x: np.ndarray          # (T, 2) transmit vectors
    w: np.ndarray          # (T, 2) public common precoders
    c: np.ndarray          # (T,) common codeword coordinates
    nu: np.ndarray         # (T,) power normalizers
    symbols: dict          # kind -> (T,) odd-grid QAM points (0 if absent)
    precoders: dict        # kind -> (T, 2) unit precoders (0 if absent)
    message: tuple         # lattice message carried by c


def payload_to_message(code, payload_bits):
    """Payload bits -> lattice message tuple (Gray labeling per PAM axis)."""
    if len(payload_bits) != code.total_bits:
        raise BitOverflow(
            f"payload has {len(payload_bits)} bits; the code carries exactly "
            f"{code.total_bits}"
        )
    m_re, m_im = code.pam
    bits_re = (m_re - 1).bit_length()
    bits_im = (m_im - 1).bit_length()
    message = []
    pos = 0
    for _ in range(code.T):
        u_re = gray_decode(bits_to_int(payload_bits[pos:pos + bits_re]))
        pos += bits_re
        u_im = gray_decode(bits_to_int(payload_bits[pos:pos + bits_im]))
        pos += bits_im
        message.append(u_re * m_im + u_im)
    return tuple(message)


def message_to_payload(code, message):
    """Inverse of payload_to_message."""
    m_re, m_im = code.pam
    bits_re = (m_re - 1).bit_length()
    bits_im = (m_im - 1).bit_length()
    bits = []
    for idx in message:
        u_re, u_im = divmod(int(idx), m_im)
        bits.extend(int_to_bits(gray_encode(u_re), bits_re))
        bits.extend(int_to_bits(gray_encode(u_im), bits_im))
    return bits


def encode_phase(s, messages, csit, plan, budget, P, *, design, w=None):
    """Build the transmit vectors for phase s (see module docstring)."""
    del plan, budget, P  # carried by design; kept for the documented call shape
    T = design.T
    slots = design.slots_of_phase(s)
    if w is None:
        w = np.array([design_w_slot(design, t) for t in slots])
    if w.shape != (T, 2):
        raise LengthMismatch("need one public precoder per slot")
    code = design.code_of_phase(s)
    loads = design.loads_of_phase(s)
    message = payload_to_message(code, messages.payload_bits)
    c = lattice_encode(code, message)
    nu = design.nu(s)

    symbols = {k: np.zeros(T, dtype=complex) for k in _PRIVATE_KINDS}
    precoders = {k: np.zeros((T, 2), dtype=complex) for k in _PRIVATE_KINDS}
    x = np.zeros((T, 2), dtype=complex)
    for j, t in enumerate(slots):
        dirs = {
            "a": orthogonal_complement(csit.g_hat[t]),
            "ap": unit(csit.h_hat[t]),
            "b": orthogonal_complement(csit.h_hat[t]),
            "bp": unit(csit.g_hat[t]),
        }
        slot_x = np.zeros(2, dtype=complex)
        for kind in _PRIVATE_KINDS:
            load = loads[kind][j]
            bits = messages.private_bits[kind][j]
            if load == 0:
                if bits:
                    raise BitOverflow(f"symbol {kind} carries no bits here")
                continue
            if len(bits) != load:
                raise LengthMismatch(f"symbol {kind} expects {load} bits")
            point = QamShape(load).modulate(bits)
            symbols[kind][j] = point
            precoders[kind][j] = dirs[kind]
            slot_x += dirs[kind] * (design.scale_of(s, kind, j) * point)
        x[j] = nu[j] * (w[j] * c[j] + slot_x)
    return PhaseSignals(s=s, slots=slots, x=x, w=w, c=c, nu=nu,
                        symbols=symbols, precoders=precoders, message=message)


def transmit_receive(trace, signals, noise_seed):
    """y1_t = h_t^T x_t + z1_t, y2_t = g_t^T x_t + z2_t with unit AWGN."""
    rng = _rng_for(noise_seed, 2)
    T = len(signals.slots)
    slots = np.fromiter(signals.slots, dtype=int)
    y1 = (np.einsum("ij,ij->i", trace.h[slots], signals.x)
          + _cgauss(rng, (T,), 1.0))
    y2 = (np.einsum("ij,ij->i", trace.g[slots], signals.x)
          + _cgauss(rng, (T,), 1.0))
    return y1, y2


# ---------------------------------------------------------------------------
# Interference quantization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterferenceRecord:
    """Per-slot interference bookkeeping for one phase.

    Stream 1 is the interference suffered by user 1 (caused by b, b');
    stream 2 the mirror.  `est` values are exact given delayed CSIT; `quant`
    are their quantizations; `noise` the quantization errors.
    """

    true_i: dict     # user -> (T,) complex
    est_i: dict
    quant_i: dict
    noise_i: dict
    bits: dict       # user -> per-slot bit lists
    clip_count: int

    @property
    def section_bits(self):
        """Bits laid out in the payload's slot-major order."""
        out = []
        for t in range(len(self.bits[1])):
            out.extend(self.bits[1][t])
            out.extend(self.bits[2][t])
        return out


def _private_component(signals, design, kinds, j):
    """Sum of the chosen private components of slot j, including nu."""
    vec = np.zeros(2, dtype=complex)
    for kind in kinds:
        scale = design.scale_of(signals.s, kind, j)
        if scale == 0.0:
            continue
        vec += signals.precoders[kind][j] * (scale * signals.symbols[kind][j])
    return signals.nu[j] * vec


def quantize_interference(csit, signals, plan, P, *, design, trace):
    """Rebuild both users' interference from delayed estimates and quantize."""
    del plan, P  # carried by design; kept for the documented call shape
    T = design.T
    true_i = {1: np.zeros(T, dtype=complex), 2: np.zeros(T, dtype=complex)}
    est_i = {1: np.zeros(T, dtype=complex), 2: np.zeros(T, dtype=complex)}
    quant_i = {1: np.zeros(T, dtype=complex), 2: np.zeros(T, dtype=complex)}
    noise_i = {1: np.zeros(T, dtype=complex), 2: np.zeros(T, dtype=complex)}
    bits = {1: [], 2: []}
    clips = 0
    for j, t in enumerate(signals.slots):
        cause = {1: _USER_KINDS[2], 2: _USER_KINDS[1]}
        true_vec = {1: trace.h[t], 2: trace.g[t]}
        check_vec = {1: csit.h_check[t], 2: csit.g_check[t]}
        for user in (1, 2):
            comp = _private_component(signals, design, cause[user], j)
            true_i[user][j] = true_vec[user] @ comp
            est_i[user][j] = check_vec[user] @ comp
            spec = design.specs[user][j]
            b, rec, c = spec.quantize(complex(est_i[user][j]))
            quant_i[user][j] = rec
            noise_i[user][j] = est_i[user][j] - rec
            bits[user].append(b)
            clips += c
    return InterferenceRecord(true_i=true_i, est_i=est_i, quant_i=quant_i,
                              noise_i=noise_i, bits=bits, clip_count=clips)


# ---------------------------------------------------------------------------
# Backward decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecodeFailure:
    phase: int
    slot: int            # -1 for whole-codeword events
    user: int
    symbol: str          # "common", "a", "ap", "b", "bp"


@dataclass
class DecodedUser:
    """One user's backward-decoding output."""

    payload: dict        # phase -> decoded payload bit list
    private: dict        # phase -> kind -> per-slot bit lists


def _phase_channel_rows(design, csit, trace, user, s):
    """Receiver-side deterministic geometry for one phase and user."""
    slots = design.slots_of_phase(s)
    rows = []
    for j, t in enumerate(slots):
        own = trace.h[t] if user == 1 else trace.g[t]
        delayed_own = csit.h_check[t] if user == 1 else csit.g_check[t]
        delayed_other = csit.g_check[t] if user == 1 else csit.h_check[t]
        dirs = {
            "a": orthogonal_complement(csit.g_hat[t]),
            "ap": unit(csit.h_hat[t]),
            "b": orthogonal_complement(csit.h_hat[t]),
            "bp": unit(csit.g_hat[t]),
        }
        rows.append({
            "own": own,
            "delayed_own": delayed_own,
            "delayed_other": delayed_other,
            "dirs": dirs,
            "w": None,  # filled by caller
            "j": j,
            "t": t,
        })
    return rows


def _residual_noise_power(design, row, s, user):
    """Nominal power of (true - delayed-estimate) interference after
    subtraction, computable at the receiver from known estimate errors."""
    plan = design.plan_of_phase(s)
    loads = design.loads_of_phase(s)
    other_kinds = _USER_KINDS[2 if user == 1 else 1]
    err = row["own"] - row["delayed_own"]
    j = row["j"]
    total = 0.0
    nu = design.nu(s)[j]
    for kind in other_kinds:
        if loads[kind][j] == 0:
            continue
        power = design._power(plan, kind, j)
        gain = abs(np.dot(err, row["dirs"][kind])) ** 2
        total += nu**2 * power * gain
    return total


def _own_private_power(design, row, s, user):
    """Power of the user's own private signal seen in its receive row."""
    plan = design.plan_of_phase(s)
    loads = design.loads_of_phase(s)
    j = row["j"]
    nu = design.nu(s)[j]
    total = 0.0
    for kind in _USER_KINDS[user]:
        if loads[kind][j] == 0:
            continue
        power = design._power(plan, kind, j)
        gain = abs(np.dot(row["own"], row["dirs"][kind])) ** 2
        total += nu**2 * power * gain
    return total


def _decode_common(design, s, user, rows, y_clean, quant_noise_nominal):
    """Whitened lattice decode of phase s's common codeword."""
    code = design.code_of_phase(s)
    nu = design.nu(s)
    ybar = np.zeros(design.T, dtype=complex)
    exps = []
    lgP = math.log(design.P)
    for row in rows:
        j = row["j"]
        coef = nu[j] * np.dot(row["own"], row["w"])
        own_power = _own_private_power(design, row, s, user)
        if s == design.S:
            # Terminal phase: nothing is subtracted, so the other user's
            # single stream contributes at full strength.
            other = _own_cross_noise(design, row, s, user)
        else:
            other = _residual_noise_power(design, row, s, user)
        v = own_power + other + quant_noise_nominal[j] + 1.0
        ybar[j] = y_clean[j] / coef
        v_eff = v / max(abs(coef) ** 2, 1e-300)
        exps.append(math.log(max(v_eff, 1e-300)) / lgP)
    obs = WhitenedObservation(ybar=ybar, noise_exponents=tuple(exps))
    return lattice_decode(code, obs,
                          exhaustive_bit_limit=_SIM_EXHAUSTIVE_LIMIT,
                          max_nodes=_SIM_MAX_NODES)


def _decode_private_pair(design, s, user, row, y_peeled, forward_value,
                         forward_noise, direct_noise):
    """Per-slot exact ML for the user's (plain, primed) private symbols.

    Rows (complex): the peeled direct observation and the forwarded
    quantized interference the user's own symbols caused at the other user.
    """
    loads = design.loads_of_phase(s)
    plan = design.plan_of_phase(s)
    j = row["j"]
    nu = design.nu(s)[j]
    kinds = [k for k in _USER_KINDS[user] if loads[k][j] > 0]
    if not kinds:
        return {}
    own = row["own"]
    fwd = row["delayed_other"]
    cols = []
    shapes = []
    for kind in kinds:
        scale = design.scale_of(s, kind, j)
        cols.append((nu * np.dot(own, row["dirs"][kind]) * scale,
                     nu * np.dot(fwd, row["dirs"][kind]) * scale))
        shapes.append(QamShape(loads[kind][j]))
    use_forward = forward_value is not None
    n_rows = 2 if use_forward else 1
    A_c = np.zeros((n_rows, len(kinds)), dtype=complex)
    y_c = np.zeros(n_rows, dtype=complex)
    weights = [1.0 / math.sqrt(max(direct_noise, 1e-300))]
    y_c[0] = y_peeled
    for i, col in enumerate(cols):
        A_c[0, i] = col[0]
    if use_forward:
        weights.append(1.0 / math.sqrt(max(forward_noise, 1e-300)))
        y_c[1] = forward_value
        for i, col in enumerate(cols):
            A_c[1, i] = col[1]
    wvec = np.array(weights)
    A_c = A_c * wvec[:, None]
    y_c = y_c * wvec
    # Realify with interleaved (re, im) columns per unknown symbol.
    k = len(kinds)
    A = np.zeros((2 * n_rows, 2 * k))
    levels = []
    for i in range(k):
        A[:n_rows, 2 * i] = A_c[:, i].real
        A[n_rows:, 2 * i] = A_c[:, i].imag
        A[:n_rows, 2 * i + 1] = -A_c[:, i].imag
        A[n_rows:, 2 * i + 1] = A_c[:, i].real
        levels.extend((shapes[i].m_re, shapes[i].m_im))
    y = np.concatenate([y_c.real, y_c.imag])
    u = ml_search(A, y, levels, exhaustive_bit_limit=_SIM_EXHAUSTIVE_LIMIT,
                  max_nodes=_SIM_MAX_NODES)
    out = {}
    for i, kind in enumerate(kinds):
        out[kind] = shapes[i].demodulate(int(u[2 * i]), int(u[2 * i + 1]))
    return out


def backward_decode(observations, csit, design, trace, *, genie_payloads=None):
    """Decode all phases for both users, last phase first.

    `observations` maps phase -> (y1, y2).  With `genie_payloads` the
    quantized-interference reconstruction uses the true payload bits instead
    of each user's own decoded ones (the decoding itself still runs).
    Returns {user: DecodedUser}.
    """
    out = {}
    for user in (1, 2):
        dec = DecodedUser(payload={}, private={})
        next_quant = None  # per-user split quant bits of the phase above
        for s in range(design.S, 0, -1):
            rows = _phase_channel_rows(design, csit, trace, user, s)
            for row in rows:
                row["w"] = design_w_slot(design, row["t"])
            y = observations[s][user - 1]
            T = design.T
            own_stream = user
            other_stream = 2 if user == 1 else 1
            if s == design.S:
                quant_nominal = [0.0] * T
                y_clean = np.array(y, dtype=complex)
                recon_own = np.zeros(T, dtype=complex)
                recon_other = [None] * T
            else:
                source = (genie_payloads[s + 1] if genie_payloads is not None
                          else dec.payload[s + 1])
                q, _, _, _ = design.payload_sections(s + 1)
                split = design.split_quant_bits(source[:q])
                recon_own = np.array(
                    [design.specs[own_stream][t].reconstruct(split[own_stream][t])
                     for t in range(T)])
                recon_other = [
                    design.specs[other_stream][t].reconstruct(split[other_stream][t])
                    for t in range(T)]
                quant_nominal = list(design.qnoise[own_stream])
                y_clean = np.array(y, dtype=complex) - recon_own
            message = _decode_common(design, s, user, rows, y_clean,
                                     quant_nominal)
            dec.payload[s] = message_to_payload(design.code_of_phase(s),
                                                message)
            c_hat = lattice_encode(design.code_of_phase(s), message)
            nu = design.nu(s)
            dec.private[s] = {k: [[] for _ in range(T)]
                              for k in _PRIVATE_KINDS}
            for row in rows:
                j = row["j"]
                coef = nu[j] * np.dot(row["own"], row["w"])
                y_peeled = y_clean[j] - coef * c_hat[j]
                if s == design.S:
                    forward_value = None
                    forward_noise = 1.0
                    direct = (_own_cross_noise(design, row, s, user) + 1.0)
                else:
                    forward_noise = design.qnoise[other_stream][j]
                    forward_value = (recon_other[j] if forward_noise > 0.0
                                     else None)
                    direct = (_residual_noise_power(design, row, s, user)
                              + quant_nominal[j] + 1.0)
                decoded = _decode_private_pair(design, s, user, row, y_peeled,
                                               forward_value, forward_noise,
                                               direct)
                for kind, bits in decoded.items():
                    dec.private[s][kind][j] = bits
        out[user] = dec
    return out


def _own_cross_noise(design, row, s, user):
    """Terminal phase: the other user's single stream acts as noise."""
    plan = design.plan_of_phase(s)
    loads = design.loads_of_phase(s)
    other = _USER_KINDS[2 if user == 1 else 1]
    j = row["j"]
    nu = design.nu(s)[j]
    total = 0.0
    for kind in other:
        if loads[kind][j] == 0:
            continue
        gain = abs(np.dot(row["own"], row["dirs"][kind])) ** 2
        total += nu**2 * design._power(plan, kind, j) * gain
    return total


def design_w_slot(design, t):
    """Public unit-norm common precoder for physical slot t.

    Derived deterministically from the run seed carried by the design, so
    the transmitter and both receivers rebuild the identical sequence
    without sharing further state.
    """
    rng = _rng_for(design.w_seed, (5, t))
    vec = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return vec / np.linalg.norm(vec)


# ---------------------------------------------------------------------------
# Full-run orchestration and accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    """Outcome of one end-to-end run.

    Rates cover the non-terminal phases only: the terminal phase exists to
    flush the last quantized interference and is a vanishing end effect in
    the number of phases, so its slots are excluded from both the delivered
    bits and the slot count.  A bit counts as delivered only if the backward
    decoder reproduced it exactly.
    """

    S: int
    T: int
    P: float
    delta_bar: Fraction
    omega: Fraction
    seed: int
    channel_model: str
    delivered_bits: dict
    sent_bits: dict
    slots_used: int
    rate_bits_per_slot: dict
    dof_estimate: dict
    failures: tuple
    clip_count: int
    residual_power: dict
    mi_proxy_bits: dict
    genie: dict | None

    @property
    def sum_dof_estimate(self):
        return self.dof_estimate[1] + self.dof_estimate[2]

    def to_json_dict(self):
        from .rational import rat_str
        out = {
            "S": self.S, "T": self.T, "P": self.P,
            "delta_bar": rat_str(self.delta_bar),
            "omega": rat_str(self.omega),
            "seed": self.seed,
            "channel_model": self.channel_model,
            "delivered_bits": {str(u): self.delivered_bits[u] for u in (1, 2)},
            "sent_bits": {str(u): self.sent_bits[u] for u in (1, 2)},
            "slots_used": self.slots_used,
            "rate_bits_per_slot": {str(u): self.rate_bits_per_slot[u]
                                   for u in (1, 2)},
            "dof_estimate": {str(u): self.dof_estimate[u] for u in (1, 2)},
            "sum_dof_estimate": self.sum_dof_estimate,
            "failure_count": len(self.failures),
            "failures": [{"phase": f.phase, "slot": f.slot, "user": f.user,
                          "symbol": f.symbol} for f in self.failures],
            "clip_count": self.clip_count,
            "residual_power": {str(u): self.residual_power[u] for u in (1, 2)},
            "mi_proxy_bits": {str(u): self.mi_proxy_bits[u] for u in (1, 2)},
        }
        if self.genie is not None:
            out["genie"] = {
                "delivered_bits": {str(u): self.genie["delivered_bits"][u]
                                   for u in (1, 2)},
                "dof_estimate": {str(u): self.genie["dof_estimate"][u]
                                 for u in (1, 2)},
            }
        return out


def _random_bits(rng, count):
    return rng.integers(0, 2, size=count).tolist() if count else []


def _account(decoded, truths, design):
    """Bitwise delivered/sent counts over the non-terminal phases."""
    delivered = {1: 0, 2: 0}
    sent = {1: 0, 2: 0}
    failures = []
    for s in range(1, design.S):
        q, f1, f2, _ = design.payload_sections(s)
        spans = {1: (q, q + f1), 2: (q + f1, q + f1 + f2)}
        truth = truths[s]
        for user in (1, 2):
            lo, hi = spans[user]
            true_bits = truth["payload"][lo:hi]
            dec_bits = decoded[user].payload[s][lo:hi]
            sent[user] += len(true_bits)
            delivered[user] += sum(1 for a, b in zip(true_bits, dec_bits)
                                   if a == b)
            if decoded[user].payload[s] != truth["payload"]:
                failures.append(DecodeFailure(s, -1, user, "common"))
        for kind in _PRIVATE_KINDS:
            user = 1 if kind in _USER_KINDS[1] else 2
            for j in range(design.T):
                tb = truth["private"][kind][j]
                db = decoded[user].private[s][kind][j]
                sent[user] += len(tb)
                if len(db) == len(tb):
                    delivered[user] += sum(1 for a, b in zip(tb, db)
                                           if a == b)
                if tb and db != tb:
                    failures.append(DecodeFailure(s, j, user, kind))
    for user in (1, 2):
        if decoded[user].payload[design.S] != truths[design.S]["payload"]:
            failures.append(DecodeFailure(design.S, -1, user, "common"))
    return delivered, sent, failures


def _mi_proxy(design, csit, trace):
    """Sum of log2(1 + common-stream SINR) over non-terminal slots, per user;
    a smooth capacity-style sanity quantity reported next to the bit counts."""
    out = {1: 0.0, 2: 0.0}
    for user in (1, 2):
        for s in range(1, design.S):
            rows = _phase_channel_rows(design, csit, trace, user, s)
            nu = design.nu(s)
            for row in rows:
                j = row["j"]
                row["w"] = design_w_slot(design, row["t"])
                coef = nu[j] * np.dot(row["own"], row["w"])
                own = _own_private_power(design, row, s, user)
                resid = _residual_noise_power(design, row, s, user)
                quant = design.specs[user][j].nominal_noise_power
                v = own + resid + quant + 1.0
                out[user] += math.log2(1.0 + design.P * abs(coef) ** 2 / v)
    return out


def run_scheme(*, profile, delta_bar, omega, S, T, P, seed,
               epsilon=Fraction(1, 20), knobs=SimKnobs(),
               channel_model="iid", compute_genie=False):
    """Transmit S phases at the scheme point (delta_bar, omega) and decode.

    The profile must cover (2S-1)*T slots (phases interleave with replica
    blocks that are never simulated) and repeat with period dividing T.
    """
    if seed < 0:
        raise RangeViolation("seed must be a non-negative integer")
    design = make_design(profile, delta_bar, omega, S, T, P,
                         epsilon=epsilon, knobs=knobs, w_seed=seed)
    n = design.n_slots
    trace = generate_channel(n, channel_model, seed)
    csit = generate_csit(trace, profile, P, seed)
    bit_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(4,)))

    truths = {}
    observations = {}
    records = {}
    pending_quant = None
    clip_count = 0
    for s in range(1, design.S + 1):
        q, f1, f2, filler = design.payload_sections(s)
        if s == 1:
            quant_bits = _random_bits(bit_rng, q)  # nothing to forward yet
        else:
            if len(pending_quant) != q:
                raise BitOverflow("forwarded quantized bits do not fill "
                                  "the payload's quantization section")
            quant_bits = pending_quant
        payload = (quant_bits + _random_bits(bit_rng, f1)
                   + _random_bits(bit_rng, f2) + _random_bits(bit_rng, filler))
        loads = design.loads_of_phase(s)
        private = {kind: [_random_bits(bit_rng, loads[kind][j])
                          for j in range(T)]
                   for kind in _PRIVATE_KINDS}
        messages = PhaseMessages(payload_bits=payload, private_bits=private)
        signals = encode_phase(s, messages, csit, design.plan_of_phase(s),
                               design.budget, P, design=design)
        y1, y2 = transmit_receive(trace, signals, [seed, s])
        observations[s] = (y1, y2)
        truths[s] = {"payload": payload, "private": private}
        if s < design.S:
            next_start = design.slots_of_phase(s + 1).start
            for t in signals.slots:
                if not csit.delayed_available(t, next_start):
                    raise ValidationError(
                        "delayed estimates of a phase must arrive before "
                        "the next phase is encoded")
            record = quantize_interference(csit, signals,
                                           design.plan_of_phase(s), P,
                                           design=design, trace=trace)
            records[s] = record
            pending_quant = record.section_bits
            clip_count += record.clip_count

    decoded = backward_decode(observations, csit, design, trace)
    delivered, sent, failures = _account(decoded, truths, design)

    genie = None
    if compute_genie:
        gpayloads = {s: truths[s]["payload"] for s in truths}
        gdecoded = backward_decode(observations, csit, design, trace,
                                   genie_payloads=gpayloads)
        gdelivered, _, gfailures = _account(gdecoded, truths, design)
        slots_used = (design.S - 1) * design.T
        genie = {
            "delivered_bits": gdelivered,
            "dof_estimate": {u: gdelivered[u] / slots_used / design.lg
                             for u in (1, 2)},
            "failures": tuple(gfailures),
        }

    slots_used = (design.S - 1) * design.T
    residual = {u: float(np.mean([np.abs(records[s].true_i[u]
                                         - records[s].quant_i[u]) ** 2
                                  for s in records]))
                for u in (1, 2)}
    rate = {u: delivered[u] / slots_used for u in (1, 2)}
    return RunResult(
        S=design.S, T=design.T, P=design.P, delta_bar=design.delta_bar,
        omega=design.omega, seed=seed, channel_model=trace.model,
        delivered_bits=delivered, sent_bits=sent, slots_used=slots_used,
        rate_bits_per_slot=rate,
        dof_estimate={u: rate[u] / design.lg for u in (1, 2)},
        failures=tuple(failures), clip_count=clip_count,
        residual_power=residual, mi_proxy_bits=_mi_proxy(design, csit, trace),
        genie=genie,
    )
