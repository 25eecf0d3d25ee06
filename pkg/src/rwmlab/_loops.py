"""Compiled inner loops for the chain kernels, estimators and SDE stepper.

Every function takes the target's g as an ascending polynomial coefficient
array (empty array means g == 0) plus a support code (0 = unit interval,
1 = half-line), and consumes a numpy Generator.

RNG draw discipline per proposal, relied on by the exact shared-stream
equality tests between kernels:

    1. coordinate-selection uniforms (MwG with a partial update only),
    2. one U[-1, 1] increment per updated coordinate, in update order,
    3. exactly one acceptance uniform, drawn whether or not it is used.
"""

import math

import numpy as np
from numba import njit

KIND_RWM = 0
KIND_MWG = 1
KIND_RWH = 2

_LOG_ZERO = -1.0e308


@njit(cache=True, inline="always")
def _gval(coeffs, x):
    acc = 0.0
    for i in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + coeffs[i]
    return acc


@njit(cache=True, inline="always")
def _inside(support_code, y):
    if support_code == 0:
        return 0.0 < y < 1.0
    return y > 0.0


@njit(cache=True, inline="always")
def _omega(x, sigma):
    a = x / sigma
    if a > 1.0:
        a = 1.0
    b = (1.0 - x) / sigma
    if b > 1.0:
        b = 1.0
    return 0.5 * (a + b)


@njit(cache=True)
def run_chain(
    coeffs,
    support_code,
    kind_code,
    sigma,
    d,
    n_update,
    n_iters,
    x,
    rng,
    first_trace,
    collect_first,
    mean_trace,
    collect_mean,
    stat_stride,
    collect_oi,
    window,
    window_accepts,
):
    """Advance x in place for n_iters proposals; accumulate run statistics.

    Returns (n_accept, sum_sq_jump, b_sum, b_sq_sum, n_stat, oi_sum, oi_sq_sum)
    where b is the count of components within sigma of the boundary and oi is
    the product of 1/omega over components, both sampled every stat_stride
    iterations.  first_trace/mean_trace are filled per iteration when their
    collect flags are set; window_accepts[t // window] counts accepted moves.
    """
    prop = np.empty(d)
    sel = np.empty(n_update, np.int64)
    idx = np.empty(d, np.int64)

    n_accept = 0
    sum_sq = 0.0
    b_sum = 0.0
    b_sq_sum = 0.0
    oi_sum = 0.0
    oi_sq_sum = 0.0
    n_stat = 0
    has_g = coeffs.shape[0] > 0

    x_sum = 0.0
    if collect_mean:
        for j in range(d):
            x_sum += x[j]

    for t in range(n_iters):
        accepted = False
        if kind_code == KIND_MWG and n_update < d:
            for j in range(d):
                idx[j] = j
            for j in range(n_update):
                r = j + int(rng.random() * (d - j))
                tmp = idx[j]
                idx[j] = idx[r]
                idx[r] = tmp
                sel[j] = idx[j]
            inside = True
            s = 0.0
            for j in range(n_update):
                z = rng.uniform(-1.0, 1.0)
                yj = x[sel[j]] + sigma * z
                prop[j] = yj
                if inside:
                    if not _inside(support_code, yj):
                        inside = False
                    elif has_g:
                        s += _gval(coeffs, yj) - _gval(coeffs, x[sel[j]])
            u = rng.random()
            lu = math.log(u) if u > 0.0 else _LOG_ZERO
            if inside and lu < s:
                accepted = True
                sq = 0.0
                for j in range(n_update):
                    delta = prop[j] - x[sel[j]]
                    sq += delta * delta
                    if collect_mean:
                        x_sum += delta
                    x[sel[j]] = prop[j]
                sum_sq += sq
        else:
            # full update: rwm, rwh, and mwg with c == 1 share this path
            inside = True
            s = 0.0
            for j in range(d):
                z = rng.uniform(-1.0, 1.0)
                yj = x[j] + sigma * z
                prop[j] = yj
                if inside:
                    if not _inside(support_code, yj):
                        inside = False
                    elif has_g and kind_code != KIND_RWH:
                        s += _gval(coeffs, yj) - _gval(coeffs, x[j])
            u = rng.random()
            lu = math.log(u) if u > 0.0 else _LOG_ZERO
            if kind_code == KIND_RWH:
                ok = inside
            else:
                ok = inside and lu < s
            if ok:
                accepted = True
                sq = 0.0
                for j in range(d):
                    delta = prop[j] - x[j]
                    sq += delta * delta
                    if collect_mean:
                        x_sum += delta
                    x[j] = prop[j]
                sum_sq += sq

        if accepted:
            n_accept += 1
        if window > 0 and accepted:
            window_accepts[t // window] += 1
        if collect_first:
            first_trace[t] = x[0]
        if collect_mean:
            mean_trace[t] = x_sum / d
        if stat_stride > 0 and (t + 1) % stat_stride == 0:
            b = 0
            for j in range(d):
                if x[j] < sigma or (support_code == 0 and x[j] > 1.0 - sigma):
                    b += 1
            b_sum += b
            b_sq_sum += b * b
            if collect_oi:
                oi = 1.0
                for j in range(d):
                    oi /= _omega(x[j], sigma)
                oi_sum += oi
                oi_sq_sum += oi * oi
            n_stat += 1

    return n_accept, sum_sq, b_sum, b_sq_sum, n_stat, oi_sum, oi_sq_sum


@njit(cache=True)
def pseudo_jumps(coeffs, support_code, sigma, d, n_jumps, x, rng, cap):
    """Advance x by n_jumps accepted RWM moves (the jump chain).

    Returns the total number of proposals consumed, or -1 if any single jump
    needed more than cap proposals (numerically stuck state).
    """
    prop = np.empty(d)
    has_g = coeffs.shape[0] > 0
    total = 0
    for s_idx in range(n_jumps):
        trials = 0
        while True:
            trials += 1
            if trials > cap:
                return -1
            inside = True
            s = 0.0
            for j in range(d):
                z = rng.uniform(-1.0, 1.0)
                yj = x[j] + sigma * z
                prop[j] = yj
                if inside:
                    if not _inside(support_code, yj):
                        inside = False
                    elif has_g:
                        s += _gval(coeffs, yj) - _gval(coeffs, x[j])
            u = rng.random()
            lu = math.log(u) if u > 0.0 else _LOG_ZERO
            if inside and lu < s:
                for j in range(d):
                    x[j] = prop[j]
                break
        total += trials
    return total


@njit(cache=True)
def lambda_replicas(coeffs, support_code, sigma, d, k_jumps, n_rep, x0, rng, r_over_d, cap):
    """Boundary counts b_d^r after k_jumps pseudo-chain steps, n_rep replicas.

    Returns (sums, sq_sums, status): per-r sums of the endpoint counts, their
    squares, and status -1 if a replica hit the stuck-state cap (0 otherwise).
    """
    nr = r_over_d.shape[0]
    sums = np.zeros(nr)
    sqs = np.zeros(nr)
    x = np.empty(d)
    for rep in range(n_rep):
        for j in range(d):
            x[j] = x0[j]
        status = pseudo_jumps(coeffs, support_code, sigma, d, k_jumps, x, rng, cap)
        if status < 0:
            return sums, sqs, -1
        for ri in range(nr):
            bound = r_over_d[ri]
            b = 0
            for j in range(d):
                if x[j] < bound or (support_code == 0 and x[j] > 1.0 - bound):
                    b += 1
            sums[ri] += b
            sqs[ri] += b * b
    return sums, sqs, 0


@njit(cache=True)
def accept_mc(coeffs, support_code, sigma, d, x, n_mc, rng):
    """Count accepted fresh proposals from the fixed state x (estimates J_d)."""
    has_g = coeffs.shape[0] > 0
    n_acc = 0
    for it in range(n_mc):
        inside = True
        s = 0.0
        for j in range(d):
            z = rng.uniform(-1.0, 1.0)
            yj = x[j] + sigma * z
            if inside:
                if not _inside(support_code, yj):
                    inside = False
                elif has_g:
                    s += _gval(coeffs, yj) - _gval(coeffs, x[j])
        u = rng.random()
        lu = math.log(u) if u > 0.0 else _LOG_ZERO
        if inside and lu < s:
            n_acc += 1
    return n_acc


@njit(cache=True)
def coupled_decouple_count(coeffs, support_code, sigma, d, n_steps, x, rng):
    """Per-step RWM/RWH decision mismatches along the RWM path.

    Both decisions reuse the same increments and the same acceptance uniform;
    after every step the hypercube walker is re-matched to the RWM state, so
    each step measures the one-step decoupling probability from equal states.
    Returns (n_decoupled, n_accept); x advances by the RWM rule in place.
    """
    prop = np.empty(d)
    has_g = coeffs.shape[0] > 0
    n_dec = 0
    n_acc = 0
    for t in range(n_steps):
        inside = True
        s = 0.0
        for j in range(d):
            z = rng.uniform(-1.0, 1.0)
            yj = x[j] + sigma * z
            prop[j] = yj
            if inside:
                if not (0.0 < yj < 1.0):
                    inside = False
                elif has_g:
                    s += _gval(coeffs, yj) - _gval(coeffs, x[j])
        u = rng.random()
        lu = math.log(u) if u > 0.0 else _LOG_ZERO
        a_rwm = inside and lu < s
        if a_rwm != inside:
            n_dec += 1
        if a_rwm:
            n_acc += 1
            for j in range(d):
                x[j] = prop[j]
    return n_dec, n_acc


@njit(cache=True)
def ensemble_chains(coeffs, support_code, sigma, d, n_iters, states, rng):
    """Run n_iters RWM iterations on every row of states (in place, chain-major)."""
    n_chains = states.shape[0]
    prop = np.empty(d)
    has_g = coeffs.shape[0] > 0
    for c in range(n_chains):
        for t in range(n_iters):
            inside = True
            s = 0.0
            for j in range(d):
                z = rng.uniform(-1.0, 1.0)
                yj = states[c, j] + sigma * z
                prop[j] = yj
                if inside:
                    if not _inside(support_code, yj):
                        inside = False
                    elif has_g:
                        s += _gval(coeffs, yj) - _gval(coeffs, states[c, j])
            u = rng.random()
            lu = math.log(u) if u > 0.0 else _LOG_ZERO
            if inside and lu < s:
                for j in range(d):
                    states[c, j] = prop[j]


@njit(cache=True, inline="always")
def _poisson_knuth(rng, mean):
    # Knuth product-of-uniforms method; exact for the modest means used here.
    if mean <= 0.0:
        return 0
    limit = math.exp(-mean)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


@njit(cache=True)
def interior_esjd_mc(l, f_minus, f_plus, n_mc, rng):
    """Monte Carlo mean of  1 ^ prod_j (f_j^- / f_j^+)^(Y_j^+ - Y_j^-).

    Y_j^- ~ Po(l f_j^-/4), Y_j^+ ~ Po(l f_j^+/4) independently, with 0^0 = 1
    and a base-zero factor with positive exponent annihilating the product.
    Returns (sum, sum_sq) of the per-draw terms.
    """
    m = f_minus.shape[0]
    s1 = 0.0
    s2 = 0.0
    for it in range(n_mc):
        logprod = 0.0
        killed = False
        for j in range(m):
            ym = _poisson_knuth(rng, l * f_minus[j] / 4.0)
            yp = _poisson_knuth(rng, l * f_plus[j] / 4.0)
            e = yp - ym
            if e == 0:
                continue
            if f_minus[j] == 0.0:
                if e > 0:
                    killed = True
            elif f_plus[j] == 0.0:
                if e < 0:
                    killed = True
            else:
                logprod += e * (math.log(f_minus[j]) - math.log(f_plus[j]))
        if killed:
            term = 0.0
        else:
            term = math.exp(logprod)
            if term > 1.0:
                term = 1.0
        s1 += term
        s2 += term * term
    return s1, s2


@njit(cache=True)
def euler_reflected(dcoeffs, speed, support_code, h, n_steps, v0, rng, stride, out):
    """Euler-Maruyama for dV = sqrt(speed) dB + (speed/2) g'(V) dt with folding
    reflection into [0,1] (or a single fold at 0 on the half-line).

    Records every stride-th point into out; returns the final value.
    """
    v = v0
    sq = math.sqrt(speed * h)
    half = 0.5 * speed * h
    k = 0
    for t in range(n_steps):
        drift = _gval(dcoeffs, v) if dcoeffs.shape[0] > 0 else 0.0
        v = v + half * drift + sq * rng.normal(0.0, 1.0)
        if support_code == 0:
            while v < 0.0 or v > 1.0:
                if v < 0.0:
                    v = -v
                else:
                    v = 2.0 - v
        else:
            if v < 0.0:
                v = -v
        if stride > 0 and (t + 1) % stride == 0:
            out[k] = v
            k += 1
    return v


@njit(cache=True)
def euler_reflected_with_increments(dcoeffs, speed, support_code, h, incr, v0, out_stride, out):
    """Same stepper driven by pre-drawn standard-normal increments (for
    common-random-number step-size comparisons)."""
    v = v0
    sq = math.sqrt(speed * h)
    half = 0.5 * speed * h
    k = 0
    for t in range(incr.shape[0]):
        drift = _gval(dcoeffs, v) if dcoeffs.shape[0] > 0 else 0.0
        v = v + half * drift + sq * incr[t]
        if support_code == 0:
            while v < 0.0 or v > 1.0:
                if v < 0.0:
                    v = -v
                else:
                    v = 2.0 - v
        else:
            if v < 0.0:
                v = -v
        if out_stride > 0 and (t + 1) % out_stride == 0:
            out[k] = v
            k += 1
    return v
