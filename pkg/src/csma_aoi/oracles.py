"""Independent brute-force validators for the closed-form model.

Oracles, each deliberately ignorant of the closed forms they check:

* ``chain_stationary``: stationary distribution of the protocol chain on
  states (stage i, counter j, buffer k) plus the idle state, built from the
  literal one-slot transition rules, with the stage dimension truncated at
  ``i_max`` and the buffer dimension handled exactly (unbounded).  Windows
  double per stage, so explicit enumeration is hopeless; instead both
  unbounded dimensions are resolved analytically.  Buffer: every buffer
  operator is diagonalized by the transform sum_k x_k z^k (the arrival shift
  becomes multiplication by q + p z), so the whole solve runs pointwise over
  sample points on a circle and buffer profiles are recovered by coefficient
  extraction.  Counters: within a stage the recurrence over counters is a
  constant-coefficient linear map, so per-stage sums close as geometric
  series.  The stationary equations are then linear and scale-free in the
  stage-entry flux and solve in closed form.
* ``chain_stationary_folded``: the same chain with a hard rectangular
  truncation (buffer capped at ``c_max``, overflow arrivals dropped),
  solved by the matrix analogue of the same aggregation.  This is the
  literal fold-at-the-boundary construction; it matches the dense oracle to
  machine precision but systematically loses arrivals at deep backoff
  stages, where sojourns of order w_i overflow any fixed buffer.
* ``chain_stationary_dense``: the rectangle chain as an explicit sparse
  matrix, feasible only for small truncations; validates the aggregated
  solvers with no shared machinery.
* ``queue_oracle``: a slot-level Geom/Geom/1 simulation (shared kernel with
  the network simulator) for system/waiting times and the AoI sawtooth.
* ``series_idle_probability``: the idle mass obtained by summing per-stage
  stationary masses term by term instead of through the closed
  geometric-series identity.

Truncation policy: collision flux that would leave the top stage re-enters
it (redirected to the boundary), and the redirected flux is reported so the
oracle error is quantified rather than silent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    DivergenceError,
    InstabilityError,
    ParameterError,
    TruncationError,
)
from .kernels import get_kernel

__all__ = [
    "TruncatedChain",
    "ChainStationary",
    "chain_stationary",
    "chain_stationary_folded",
    "chain_stationary_dense",
    "series_idle_probability",
    "series_idle_tail_bound",
    "QueueOracleResult",
    "queue_oracle",
    "affine_abs_sum",
]

_SAMPLES = 512   # circle sample count for buffer-coefficient extraction
_RADIUS = 0.9    # circle radius; alias error ~ RADIUS**_SAMPLES


def _check_chain_args(p, p_cl, w0, i_max, c_max):
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p!r}")
    if not 0.0 <= p_cl < 1.0:
        raise ParameterError(f"p_cl must lie in [0, 1), got {p_cl!r}")
    if p_cl >= 0.5:
        raise DivergenceError(
            f"p_cl = {p_cl!r} >= 0.5: the untruncated chain has no "
            "normalizable stationary distribution")
    if not (isinstance(w0, int) and w0 >= 1):
        raise ParameterError(f"w0 must be an integer >= 1, got {w0!r}")
    if not (isinstance(i_max, int) and 0 <= i_max <= 1000):
        raise ParameterError(
            f"i_max must be an integer in [0, 1000], got {i_max!r}")
    if not (isinstance(c_max, int) and c_max >= 1):
        raise ParameterError(f"c_max must be an integer >= 1, got {c_max!r}")


@dataclass(frozen=True)
class TruncatedChain:
    """Truncation geometry plus redirected/unresolved-mass diagnostics."""

    i_max: int
    c_max: int
    stage_fold_flux: float      # collision flux redirected back into stage i_max
    buffer_drop_flux: float     # arrival flux dropped at full buffers (folded mode)
    buffer_tail_mass: float     # busy mass at k > c_max (unresolved, exact mode)
    stage_tail_estimate: float  # mass the stage redirect stands in for


class ChainStationary:
    """Stationary distribution of the stage-truncated chain.

    Per stage the solve keeps the exact entry-flux and counter-0 totals plus
    buffer profiles resolved for k = 1..c_max; counter marginals follow
    exactly because the within-stage mass recurrence collapses to
    m(i, j) = (w_i - j) E_i / (w_i (1 - p_cl)) for j >= 1 and m(i, 0) = E_i.
    """

    def __init__(self, p, p_cl, w0, i_max, c_max, entry_totals, x0_totals,
                 entry_profiles, x0_profiles, buffer_marginal, b_idle,
                 chain, solver_iterations, profile_fn=None):
        self.p = p
        self.p_cl = p_cl
        self.w0 = w0
        self.i_max = i_max
        self.c_max = c_max
        self.entry_totals = entry_totals
        self.x0_totals = x0_totals
        self.entry_profiles = entry_profiles
        self.x0_profiles = x0_profiles
        self.buffer_marginal = buffer_marginal
        self.b_idle = b_idle
        self.chain = chain
        self.solver_iterations = solver_iterations
        self._profile_fn = profile_fn

    def window(self, i):
        return self.w0 << i

    def _check_stage(self, i):
        if not (isinstance(i, int) and 0 <= i <= self.i_max):
            raise ParameterError(
                f"stage must lie in [0, {self.i_max}], got {i!r}")

    def entry_total(self, i):
        """Exact stage-entry flux E_i (equals the mass at counter 0)."""
        self._check_stage(i)
        return self.entry_totals[i]

    def counter0_profile(self, i):
        """Mass at (stage i, counter 0) resolved over buffers k = 1..c_max."""
        self._check_stage(i)
        return self.x0_profiles[i]

    def marginal(self, i, j):
        """Buffer-aggregated stationary mass of state (stage i, counter j)."""
        self._check_stage(i)
        w_i = self.window(i)
        if not 0 <= j <= w_i - 1:
            raise ParameterError(
                f"counter must lie in [0, {w_i - 1}] at stage {i}, got {j!r}")
        e_total = self.entry_totals[i]
        if j == 0:
            return e_total
        return ((w_i - j) / w_i) * e_total / (1.0 - self.p_cl)

    def profile(self, i, j):
        """Buffer-resolved mass vector (k = 1..c_max) of state (i, j)."""
        self._check_stage(i)
        w_i = self.window(i)
        if not 0 <= j <= w_i - 1:
            raise ParameterError(
                f"counter must lie in [0, {w_i - 1}] at stage {i}, got {j!r}")
        if j == 0:
            return self.x0_profiles[i].copy()
        return self._profile_fn(i, j)

    def stage_mass(self, i):
        """Total mass of stage i over every counter and buffer level."""
        self._check_stage(i)
        w_i = self.window(i)
        return self.entry_totals[i] * (
            1.0 + (w_i - 1) / (2.0 * (1.0 - self.p_cl)))

    def busy_mass(self):
        return math.fsum(self.stage_mass(i) for i in range(self.i_max + 1))

    def total_mass(self):
        return self.b_idle + self.busy_mass()


def _coefficients(samples, count, radius):
    """Taylor coefficients c_1..c_count of f from samples on |z| = radius."""
    m = samples.size
    spectrum = np.fft.fft(samples) / m
    k = np.arange(1, count + 1)
    return np.real(spectrum[1:count + 1]) / radius**k


def _stage_tail_estimate(stage_fold, w0, i_max, p_cl):
    # What the stage redirect stands in for: the untruncated chain would
    # spread the folded flux over ever-doubling windows above i_max.
    if p_cl <= 0.0:
        return 0.0
    w_next = float(w0 << min(i_max + 1, 1023))
    sojourn = 1.0 + (w_next - 1.0) / (2.0 * (1.0 - p_cl))
    return stage_fold * sojourn / (1.0 - 2.0 * p_cl)


def chain_stationary(p, p_cl, w0, i_max, c_max, boundary_tol=1e-8):
    """Stationary distribution of the protocol chain, buffer dimension exact.

    The collision probability is an exogenous input, as in the transition
    rules themselves: this decouples chain validation from the network fixed
    point.  ``c_max`` controls only how many buffer levels the returned
    profiles resolve; the dynamics keep the buffer unbounded.  Raises
    TruncationError when the collision flux folded back at stage ``i_max``
    exceeds ``boundary_tol``.
    """
    _check_chain_args(p, p_cl, w0, i_max, c_max)
    q = 1.0 - p
    r = 1.0 - p_cl

    z = _RADIUS * np.exp(2j * np.pi * np.arange(_SAMPLES) / _SAMPLES)
    windows = [w0 << i for i in range(i_max + 1)]

    def evaluate(zv):
        """Per-point symbols (d, binv, a, stage maps, chain response S)."""
        dv = q + p * zv
        binvv = 1.0 / (1.0 - p_cl * dv)
        av = r * dv * binvv
        mapsv = []
        for w in windows:
            if w == 1:
                mapsv.append(np.ones_like(zv))
            else:
                geo = (1.0 - av ** (w - 1)) / (1.0 - av)
                mapsv.append((r * dv * geo * binvv + 1.0) / w)
        foldv = 1.0 / (1.0 - p_cl * dv * mapsv[i_max])
        # S(z): transform of the map from stage-0 entry flux to the summed
        # counter-0 occupancies over all stages.
        response = np.zeros_like(zv)
        carry = np.ones_like(zv)
        for i in range(i_max + 1):
            if i == i_max:
                carry = carry * foldv
            response = response + mapsv[i] * carry
            carry = carry * p_cl * dv * mapsv[i]
        return dv, binvv, av, mapsv, foldv, response

    d, binv, a, maps, fold, response = evaluate(z)

    # The stationary equations are linear in the entry flux and scale-free:
    # eliminating the recycle gives e0(z) = q r v1 (z - 1) / denom(z) with
    # denom(z) = 1 - r (p + q/z) S(z), which vanishes only at z = 1 (the
    # conservation eigenvalue).  Solve directly; no iteration is needed.
    denom = 1.0 - r * (p + q / z) * response
    if float(np.min(np.abs(denom))) < 1e-9:
        raise TruncationError(
            "transform solve hit a near-singular recycle denominator; "
            "the sampling circle grazes a root")
    e0_s = q * r * (z - 1.0) / denom

    def sweep(e0_samples):
        """Propagate entry-flux transforms up the stages."""
        x0_s = []
        entry_s = []
        flux = e0_samples
        for i in range(i_max + 1):
            if i == i_max:
                flux = fold * flux
            entry_s.append(flux)
            x0_s.append(maps[i] * flux)
            flux = p_cl * d * x0_s[i]
        return entry_s, x0_s

    entry_s, x0_s = sweep(e0_s)
    v_s = np.sum(x0_s, axis=0)
    v1 = _coefficients(v_s, 1, _RADIUS)[0]
    if abs(v1 - 1.0) > 1e-8:
        raise TruncationError(
            f"flux-conservation self-check failed: recycle gain {v1!r} != 1")
    b_idle = q * r * v1 / p

    # z = 1 totals: e0(1) is a removable singularity of the closed form, so
    # the limit needs denom'(1).  Every factor has an explicit derivative at
    # z = 1 (d' = p, binv' = p_cl p / r^2, a' = p / r, and the order-(w-1)
    # geometric sum differentiates to a'(1) (w-2)(w-1)/2), giving per stage
    #     M_i'(1) = p (w-1)/w [1 + (w-2)/(2r) + p_cl/r]
    # and the chain rule over the stage cascade for S'(1).  Stage totals
    # then follow the flux recursion E_{i+1} = p_cl E_i with the top-stage
    # fold (maps conserve flux, so sum_i E_i = E_0 / (1 - p_cl) exactly).
    map_primes = []
    for w in windows:
        if w == 1:
            map_primes.append(0.0)
        else:
            map_primes.append(
                p * (w - 1) / w * (1.0 + (w - 2) / (2.0 * r) + p_cl / r))
    s_one = 0.0
    s_prime = 0.0
    log_carry = 0.0     # derivative of log of the stage-cascade prefactor
    for i in range(i_max + 1):
        value = p_cl**i
        deriv_terms = map_primes[i] + log_carry
        if i == i_max:
            value /= r
            deriv_terms += p_cl * (p + map_primes[i]) / r  # fold log-derivative
        s_one += value
        s_prime += value * deriv_terms
        log_carry += p + map_primes[i]
    denom_prime = r * q * s_one - r * s_prime
    if not denom_prime > 0.0:
        raise TruncationError(
            f"degenerate conservation root: denom'(1) = {denom_prime!r}")
    e0_total = q * r * v1 / denom_prime
    entry_totals = []
    flux_total = e0_total
    for i in range(i_max + 1):
        if i == i_max:
            flux_total = flux_total / (1.0 - p_cl)
        entry_totals.append(flux_total)
        flux_total = p_cl * entry_totals[i]

    busy = math.fsum(
        entry_totals[i] * (1.0 + (windows[i] - 1) / (2.0 * r))
        for i in range(i_max + 1))
    total = b_idle + busy

    entry_totals = [e / total for e in entry_totals]
    entry_s = [e / total for e in entry_s]
    x0_s = [x / total for x in x0_s]
    b_idle /= total
    x0_totals = [entry_totals[i] for i in range(i_max + 1)]

    entry_profiles = [_coefficients(e, c_max, _RADIUS) for e in entry_s]
    x0_profiles = [_coefficients(x, c_max, _RADIUS) for x in x0_s]

    # Buffer marginal resolved to c_max: counter-0 part plus the closed
    # H-sum over counters j >= 1 per stage.
    buffer_s = np.zeros_like(z)
    for i in range(i_max + 1):
        w = windows[i]
        buffer_s = buffer_s + x0_s[i]
        if w > 1:
            h = (w - 1 - a * (1.0 - a ** (w - 1)) / (1.0 - a)) / (1.0 - a)
            buffer_s = buffer_s + h * binv * entry_s[i] / w
    buffer_marginal = _coefficients(buffer_s, c_max, _RADIUS)
    buffer_tail = max(busy / total - float(np.sum(buffer_marginal)), 0.0)

    stage_fold = p_cl * x0_totals[i_max]
    chain = TruncatedChain(i_max, c_max, stage_fold, 0.0, buffer_tail,
                           _stage_tail_estimate(stage_fold, w0, i_max, p_cl))
    if stage_fold > boundary_tol:
        raise TruncationError(
            f"stage truncation too small: folded collision flux {stage_fold:.3g} "
            f"exceeds {boundary_tol:g} (raise i_max)", boundary_flux=stage_fold)

    def profile_fn(i, j):
        w = windows[i]
        geo = (1.0 - a ** (w - j)) / (1.0 - a)
        return _coefficients(geo * binv * entry_s[i] / w, c_max, _RADIUS)

    return ChainStationary(p, p_cl, w0, i_max, c_max, entry_totals, x0_totals,
                           entry_profiles, x0_profiles, buffer_marginal,
                           b_idle, chain, solver_iterations=1,
                           profile_fn=profile_fn)


def _arrival_operator(c_max, p):
    """One-slot buffer operator D (column-stochastic on k = 1..c_max):
    keep k with 1-p, k -> k+1 with p, arrivals at k = c_max are dropped."""
    d = np.zeros((c_max, c_max))
    for k in range(c_max):
        d[k, k] += 1.0 - p
        if k + 1 < c_max:
            d[k + 1, k] += p
        else:
            d[k, k] += p
    return d


def _geometric_sums(a, count):
    """(A**count, sum_{m<count} A**m) by binary doubling; count >= 0."""
    dim = a.shape[0]
    power = np.eye(dim)
    total = np.zeros((dim, dim))
    base_pow = a
    base_sum = np.eye(dim)
    k = count
    while k:
        if k & 1:
            total = total + power @ base_sum
            power = power @ base_pow
        base_sum = base_sum + base_pow @ base_sum
        base_pow = base_pow @ base_pow
        k >>= 1
    return power, total


def _geometric_sums3(a, count):
    """(A**n, G_n, H_n) for n = count, where G_n = sum_{m<n} A**m and
    H_n = sum_{s=1..n} G_s, by binary doubling.

    Composition rules for term counts a then b:
        P_{a+b} = P_a P_b
        G_{a+b} = G_a + P_a G_b
        H_{a+b} = H_a + b G_a + P_a H_b
    """
    dim = a.shape[0]
    acc_p = np.eye(dim)
    acc_g = np.zeros((dim, dim))
    acc_h = np.zeros((dim, dim))
    base_p = a
    base_g = np.eye(dim)
    base_h = np.eye(dim)
    base_n = 1
    k = count
    while k:
        if k & 1:
            acc_h = acc_h + base_n * acc_g + acc_p @ base_h
            acc_g = acc_g + acc_p @ base_g
            acc_p = acc_p @ base_p
        base_h = base_h + base_n * base_g + base_p @ base_h
        base_g = base_g + base_p @ base_g
        base_p = base_p @ base_p
        base_n *= 2
        k >>= 1
    return acc_p, acc_g, acc_h


def chain_stationary_folded(p, p_cl, w0, i_max, c_max, boundary_tol=math.inf,
                            tol=1e-12, max_iterations=200000):
    """Rectangle-truncated variant: buffer capped at ``c_max``, overflow
    arrivals folded onto the boundary (dropped).

    Matches ``chain_stationary_dense`` to machine precision.  Note the fold
    is lossy: deep backoff stages have sojourns of order w_i, whose arrivals
    overflow any fixed buffer, so entry fluxes sit systematically below the
    untruncated chain's.  Use ``chain_stationary`` for closed-form checks.
    """
    _check_chain_args(p, p_cl, w0, i_max, c_max)
    q = 1.0 - p
    r = 1.0 - p_cl

    d = _arrival_operator(c_max, p)
    eye = np.eye(c_max)
    b_inv = np.linalg.inv(eye - p_cl * d)
    a = b_inv @ (r * d)

    maps = []
    backoff_sums = []
    for i in range(i_max + 1):
        w_i = w0 << i
        if w_i == 1:
            maps.append(eye.copy())
            backoff_sums.append(np.zeros((c_max, c_max)))
        else:
            _, geo, geo_h = _geometric_sums3(a, w_i - 1)
            maps.append((r * d @ geo @ b_inv + eye) / w_i)
            backoff_sums.append(geo_h @ b_inv / w_i)

    fold_solve = np.linalg.inv(eye - p_cl * (d @ maps[i_max]))

    def sweep(e0):
        x0 = []
        entry = []
        flux = e0
        for i in range(i_max + 1):
            if i == i_max:
                flux = fold_solve @ flux
            entry.append(flux)
            x0.append(maps[i] @ flux)
            flux = p_cl * (d @ x0[i])
        return entry, x0

    e0 = np.zeros(c_max)
    e0[0] = 1.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        _, x0 = sweep(e0)
        v = np.sum(x0, axis=0)
        b_idle = q * r * v[0] / p
        e0_new = r * (p * v + q * np.append(v[1:], 0.0))
        e0_new[0] += p * b_idle
        e0_new /= e0_new.sum()
        change = float(np.abs(e0_new - e0).sum())
        e0 = e0_new
        if change < tol:
            break
    else:
        raise TruncationError(
            f"stage-flux iteration did not converge within {max_iterations} sweeps")

    entry, x0 = sweep(e0)
    v = np.sum(x0, axis=0)
    b_idle = q * r * v[0] / p

    entry_totals = [float(e.sum()) for e in entry]
    busy = math.fsum(
        entry_totals[i] * (1.0 + ((w0 << i) - 1) / (2.0 * r))
        for i in range(i_max + 1))
    total = b_idle + busy

    entry = [e / total for e in entry]
    x0 = [x / total for x in x0]
    b_idle /= total
    entry_totals = [e / total for e in entry_totals]

    buffer_marg = np.sum(
        [x0[i] + backoff_sums[i] @ entry[i] for i in range(i_max + 1)], axis=0)
    stage_fold = p_cl * float(x0[i_max].sum())
    drop = p * float(buffer_marg[c_max - 1])
    chain = TruncatedChain(i_max, c_max, stage_fold, drop, 0.0,
                           _stage_tail_estimate(stage_fold, w0, i_max, p_cl))
    if stage_fold > boundary_tol:
        raise TruncationError(
            f"stage truncation too small: folded collision flux {stage_fold:.3g} "
            f"exceeds {boundary_tol:g} (raise i_max)", boundary_flux=stage_fold)

    context = (a, b_inv, d)

    def profile_fn(i, j):
        w_i = w0 << i
        c_vec = b_inv @ (entry[i] / w_i)
        _, geo = _geometric_sums(a, w_i - j)  # sum over A^0 .. A^(w_i-1-j)
        return geo @ c_vec

    return ChainStationary(p, p_cl, w0, i_max, c_max, entry_totals,
                           entry_totals, entry, x0, buffer_marg, b_idle,
                           chain, iterations, profile_fn)


def chain_stationary_dense(p, p_cl, w0, i_max, c_max):
    """Literal sparse-matrix stationary solve of the rectangle-truncated chain.

    Every state (i, j, k) and the idle state are enumerated and the one-slot
    transition rules are written out verbatim; feasible only while
    sum_i 2**i * w0 * c_max stays modest.  Returns (states, pi) where
    ``states`` maps 'idle' and (i, j, k) tuples to indices into ``pi``.
    """
    _check_chain_args(p, p_cl, w0, i_max, c_max)
    q = 1.0 - p
    r = 1.0 - p_cl

    states = {"idle": 0}
    for i in range(i_max + 1):
        for j in range(w0 << i):
            for k in range(1, c_max + 1):
                states[(i, j, k)] = len(states)
    dim = len(states)
    if dim > 2_000_000:
        raise TruncationError(
            f"dense oracle state space too large ({dim} states); "
            "use chain_stationary instead")

    rows, cols, vals = [], [], []

    def add(src, dst, prob):
        if prob:
            rows.append(states[dst])
            cols.append(states[src])
            vals.append(prob)

    def bump(k):  # buffer fold: arrivals at a full buffer are dropped
        return k + 1 if k < c_max else c_max

    add("idle", "idle", q)
    for j in range(w0):
        add("idle", (0, j, 1), p / w0)

    for i in range(i_max + 1):
        w_i = w0 << i
        i_up = min(i + 1, i_max)       # stage fold at the top stage
        w_up = w0 << i_up
        for k in range(1, c_max + 1):
            for j in range(1, w_i):
                add((i, j, k), (i, j, bump(k)), p * p_cl)
                add((i, j, k), (i, j - 1, bump(k)), p * r)
                add((i, j, k), (i, j, k), q * p_cl)
                add((i, j, k), (i, j - 1, k), q * r)
            # counter 0: the node transmits.  On success with a simultaneous
            # arrival the buffer is unchanged (one leaves, one enters).
            for j2 in range(w0):
                add((i, 0, k), (0, j2, k), p * r / w0)
            for j2 in range(w_up):
                add((i, 0, k), (i_up, j2, k), q * p_cl / w_up)
                add((i, 0, k), (i_up, j2, bump(k)), p * p_cl / w_up)
            if k == 1:
                add((i, 0, 1), "idle", q * r)
            else:
                for j2 in range(w0):
                    add((i, 0, k), (0, j2, k - 1), q * r / w0)

    mat = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(dim, dim))
    col_sums = np.asarray(mat.sum(axis=0)).ravel()
    if not np.allclose(col_sums, 1.0, atol=1e-12):
        raise TruncationError(
            "transition rules leak probability: worst row sum defect "
            f"{np.abs(col_sums - 1.0).max():.3g}")

    # pi solves (P - I) pi = 0 with sum(pi) = 1.
    system = (mat - scipy.sparse.identity(dim)).tolil()
    system[0, :] = 1.0
    rhs = np.zeros(dim)
    rhs[0] = 1.0
    pi = scipy.sparse.linalg.spsolve(system.tocsc(), rhs)
    return states, pi


def series_idle_probability(p, p_cl, w0, i_max=200):
    """Idle mass by direct term-wise summation of the per-stage masses.

    Sums 1 - sum_i [b(i,0) + sum_{j>=1} b(i,j)] stage by stage up to
    ``i_max`` (the inner counter sum is the exact triangular count
    w_i (w_i - 1) / 2); no geometric-series closure over stages is used.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p!r}")
    if not 0.0 <= p_cl < 1.0:
        raise ParameterError(f"p_cl must lie in [0, 1), got {p_cl!r}")
    if p_cl >= 0.5:
        raise DivergenceError(
            f"p_cl = {p_cl!r} >= 0.5: stationary series diverges")
    if not (isinstance(w0, int) and w0 >= 1):
        raise ParameterError(f"w0 must be an integer >= 1, got {w0!r}")
    terms = []
    for i in range(i_max + 1):
        # p p_cl^i (1 + (w_i - 1)/(2(1 - p_cl))) without forming 2**i * w0.
        stage = p * p_cl**i + p * (w0 * (2.0 * p_cl)**i - p_cl**i) \
            / (2.0 * (1.0 - p_cl))
        terms.append(stage)
        if stage < 1e-18:
            break
    return 1.0 - math.fsum(terms)


def series_idle_tail_bound(p, p_cl, w0, i_max):
    """Upper bound on the stage mass ignored beyond ``i_max``."""
    if p_cl == 0.0:
        return 0.0
    if p_cl >= 0.5:
        raise DivergenceError(f"p_cl = {p_cl!r} >= 0.5: tail diverges")
    ratio = 2.0 * p_cl
    # stage mass <= p w0 (2 p_cl)^i / (1 - p_cl) for every i >= 1
    return p * w0 * ratio ** (i_max + 1) / ((1.0 - p_cl) * (1.0 - ratio))


@dataclass(frozen=True)
class QueueOracleResult:
    """Time averages of a simulated Geom/Geom/1 queue with an AoI sawtooth."""

    mean_system_time: float
    var_system_time: float
    mean_waiting_time: float
    mean_aoi: float
    mean_xw: float
    delivered: int
    arrivals: int
    final_queue: int


def queue_oracle(p, mu, horizon, seed=1, backend=None):
    """Simulate a single Geom/Geom/1 queue for ``horizon`` slots.

    Bernoulli(p) arrivals; the head-of-line packet completes with
    probability ``mu`` in each slot after the one it entered service in.
    Deterministic per seed.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p!r}")
    if not 0.0 < mu <= 1.0:
        raise ParameterError(f"mu must lie in (0, 1], got {mu!r}")
    if p >= mu:
        raise InstabilityError(f"queue oracle needs p < mu, got {p!r} >= {mu!r}")
    if not (isinstance(horizon, int) and horizon >= 1):
        raise ParameterError(f"horizon must be an integer >= 1, got {horizon!r}")
    raw = get_kernel(backend).queue_sim(p, mu, horizon, seed)
    delivered = raw["delivered"]
    mean_t = raw["system_sum"] / delivered if delivered else float("nan")
    return QueueOracleResult(
        mean_system_time=mean_t,
        var_system_time=(raw["system_sumsq"] / delivered - mean_t**2
                         if delivered else float("nan")),
        mean_waiting_time=raw["waiting_sum"] / delivered if delivered else float("nan"),
        mean_aoi=raw["age_sum"] / horizon,
        mean_xw=raw["xw_sum"] / raw["xw_count"] if raw["xw_count"] else float("nan"),
        delivered=delivered,
        arrivals=raw["arrivals"],
        final_queue=raw["final_queue"],
    )


def affine_abs_sum(da, dc, j_lo, j_hi):
    """sum_{j=j_lo}^{j_hi} |da - dc * j| in closed form (exact triangular sums).

    Used to take L1 distances between two counter marginals that are both
    affine in the counter, without materializing 2**i window entries.
    """
    if j_hi < j_lo:
        return 0.0

    def signed_sum(lo, hi):  # sum of (da - dc j) over an integer range
        count = hi - lo + 1
        return da * count - dc * (lo + hi) * count / 2.0

    if dc == 0.0:
        return abs(da) * (j_hi - j_lo + 1)
    crossing = da / dc
    if crossing <= j_lo or crossing >= j_hi:
        return abs(signed_sum(j_lo, j_hi))
    split = min(max(int(math.floor(crossing)), j_lo), j_hi - 1)
    return abs(signed_sum(j_lo, split)) + abs(signed_sum(split + 1, j_hi))
