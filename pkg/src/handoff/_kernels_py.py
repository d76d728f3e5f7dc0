"""Pure numpy versions of the hot loops; the Cython module mirrors these."""

import numpy as np


def value_iteration(sa_start, tr_start, tr_succ, tr_prob, tr_rew, active, gamma, tol, max_iter):
    """Bellman optimality sweeps (maximisation) until the error bound is below ``tol``.

    Inactive states keep value 0; transitions into them collect their reward
    and stop. Returns ``(values, sweeps)``.
    """
    n = len(sa_start) - 1
    active = np.asarray(active, dtype=bool)
    succ_active = active[tr_succ]
    v = np.zeros(n)
    stop = tol * (1.0 - gamma) / gamma
    for it in range(1, max_iter + 1):
        cont = np.where(succ_active, v[tr_succ], 0.0)
        q = np.add.reduceat(tr_prob * (tr_rew + gamma * cont), tr_start[:-1])
        new = np.maximum.reduceat(q, sa_start[:-1])
        new[~active] = 0.0
        delta = np.abs(new - v).max(initial=0.0)
        v = new
        if delta <= stop:
            return v, it
    return v, max_iter


def _row_pick(cdf, rows, u, last):
    # first column with cdf > u, never beyond the last positive-probability column
    return np.minimum((cdf[rows] <= u[:, None]).sum(axis=1), last)


def simulate_block(pol_cdf, pol_last, sa_start, tr_cdf, tr_last, tr_start, tr_succ, tr_cost,
                   switch_to, w_index, gamma, uniforms, t0, v, k, disc, switch, reach, cost, visits):
    """Advance one trace per row of ``uniforms`` by ``uniforms.shape[1] // 2`` steps.

    ``pol_cdf[k * n + v]`` is the padded action CDF of policy ``k`` at state
    ``v`` and ``tr_cdf[sa]`` the padded successor CDF of pair ``sa``. Policy
    ``k = 0`` is followed until a state with ``switch_to >= 0`` is hit, then
    policy ``switch_to[v]``. The simulation state (``v``, ``k``, ``disc``,
    ``switch``, ``reach``, ``cost``, ``visits``) is updated in place so long
    horizons can be run in blocks; ``t0`` is the global step of column 0.
    """
    n = len(sa_start) - 1
    rows = np.arange(uniforms.shape[0])
    for t in range(uniforms.shape[1] // 2):
        hit = (switch < 0) & (switch_to[v] >= 0)
        if hit.any():
            switch[hit] = t0 + t
            k[hit] = switch_to[v[hit]]
            if t0 + t == 0:
                reach[hit] = 1.0
        on = switch >= 0
        if on.any():
            wi = w_index[v[on]]
            ok = wi >= 0
            np.add.at(visits, (rows[on][ok], wi[ok]), 1)
        prow = k * n + v
        sa = sa_start[v] + _row_pick(pol_cdf, prow, uniforms[:, 2 * t], pol_last[prow])
        j = tr_start[sa] + _row_pick(tr_cdf, sa, uniforms[:, 2 * t + 1], tr_last[sa])
        v2 = tr_succ[j]
        cost += disc * tr_cost[j]
        reach += np.where((switch < 0) & (switch_to[v2] >= 0), disc, 0.0)
        disc *= gamma
        v[:] = v2
