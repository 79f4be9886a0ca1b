"""Compiled slot loop.

Mirrors ``engine.step_slot`` exactly (same draws in, same state out); the
pure-Python path is the readable reference and is checked against this one
in the test suite.
"""

import numpy as np
from numba import njit

SBA_CODE = 1
GSIMND_CODE = 3


@njit(cache=True)
def run_block(t0, n_slots, u_tx, u_beam, ch1, ch2,
              B, k, p_t, algo, gossip, freeze, warmup, stop_fraction, max_slots,
              nb_ptr, nb_idx, nb_back, adj, deg, cand_ptr, cand_idx, target,
              disc, disc_time, n_disc, T1, T2, conv, conv_slot,
              frac, n_active, n_new_direct, n_new_any,
              pair_open, pair_direct, pair_any,
              hello_log, fb_log, log_counts):
    """Run up to ``n_slots`` slots starting at slot number ``t0`` (1-based).

    Returns (slots executed, finished flag).  ``hello_log``/``fb_log`` get
    (receiver, sender) rows for the last slot executed when they have rows.
    """
    M = deg.shape[0]
    tx = np.zeros(M, dtype=np.bool_)
    heard = np.zeros(M, dtype=np.bool_)
    new_direct = np.zeros(M, dtype=np.bool_)
    new_any = np.zeros(M, dtype=np.bool_)
    active = np.zeros(M, dtype=np.bool_)
    beam = np.zeros(M, dtype=np.int64)
    cnt = np.zeros(k, dtype=np.int64)
    who = np.zeros(k, dtype=np.int64)
    logging = hello_log.shape[0] > 0

    for s in range(n_slots):
        t = t0 + s
        sweep = (t - 1) % B
        for i in range(M):
            tx[i] = u_tx[s, i] < p_t
            if algo == SBA_CODE:
                if tx[i]:
                    beam[i] = sweep
                else:
                    beam[i] = (sweep + B // 2) % B
            elif algo == GSIMND_CODE:
                c0 = cand_ptr[i]
                nc = cand_ptr[i + 1] - c0
                pick = int(u_beam[s, i] * nc)
                if pick >= nc:
                    pick = nc - 1
                beam[i] = cand_idx[c0 + pick]
            else:
                b = int(u_beam[s, i] * B)
                if b >= B:
                    b = B - 1
                beam[i] = b
            heard[i] = False
            new_direct[i] = False
            new_any[i] = False
            active[i] = (not (freeze and conv[i])) and n_disc[i] < deg[i]
        nh = 0
        nf = 0
        po = 0
        pd = 0
        pa = 0
        for i in range(M):
            if active[i]:
                po += deg[i] - n_disc[i]

        # sub-slot 1: hello packets from transmitters to listeners
        for i in range(M):
            if tx[i]:
                continue
            b = beam[i]
            cnt[:] = 0
            for e in range(nb_ptr[i, b], nb_ptr[i, b + 1]):
                j = nb_idx[e]
                if tx[j] and beam[j] == nb_back[e]:
                    c = ch1[s, j]
                    cnt[c] += 1
                    who[c] = j
            for c in range(k):
                if cnt[c] != 1:
                    continue
                j = who[c]
                heard[i] = True
                if logging:
                    hello_log[nh, 0] = i
                    hello_log[nh, 1] = j
                    nh += 1
                if freeze and conv[i]:
                    continue
                if not disc[i, j]:
                    disc[i, j] = True
                    disc_time[i, j] = t
                    n_disc[i] += 1
                    pd += 1
                    new_direct[i] = True
                    new_any[i] = True

        # sub-slot 2: every node that heard a hello answers with feedback
        for i in range(M):
            if heard[i]:
                continue
            b = beam[i]
            cnt[:] = 0
            for e in range(nb_ptr[i, b], nb_ptr[i, b + 1]):
                j = nb_idx[e]
                if heard[j] and beam[j] == nb_back[e]:
                    c = ch2[s, j]
                    cnt[c] += 1
                    who[c] = j
            for c in range(k):
                if cnt[c] != 1:
                    continue
                j = who[c]
                if logging:
                    fb_log[nf, 0] = i
                    fb_log[nf, 1] = j
                    nf += 1
                if freeze and conv[i]:
                    continue
                if not disc[i, j]:
                    disc[i, j] = True
                    disc_time[i, j] = t
                    n_disc[i] += 1
                    pd += 1
                    new_direct[i] = True
                    new_any[i] = True
                if gossip:
                    for e2 in range(nb_ptr[j, 0], nb_ptr[j, B]):
                        u = nb_idx[e2]
                        if u != i and disc[j, u] and adj[i, u] and not disc[i, u]:
                            disc[i, u] = True
                            disc_time[i, u] = t
                            n_disc[i] += 1
                            pa += 1
                            new_any[i] = True

        # timers and convergence
        for i in range(M):
            if freeze and conv[i]:
                continue
            T1[i] = t
            if new_any[i]:
                T2[i] = 0
            else:
                T2[i] += 1
            if not conv[i]:
                if target[i] >= 0:
                    ok = n_disc[i] >= target[i]
                else:
                    ok = T1[i] >= warmup and 2 * T2[i] >= T1[i]
                if ok:
                    conv[i] = True
                    conv_slot[i] = t

        total = 0.0
        with_nbrs = 0
        na = 0
        nd = 0
        ny = 0
        all_conv = True
        all_found = True
        for i in range(M):
            if deg[i] > 0:
                total += n_disc[i] / deg[i]
                with_nbrs += 1
            if active[i]:
                na += 1
                if new_direct[i]:
                    nd += 1
                if new_any[i]:
                    ny += 1
            if not conv[i]:
                all_conv = False
            if n_disc[i] < deg[i]:
                all_found = False
        frac[t] = total / with_nbrs if with_nbrs > 0 else 1.0
        n_active[t] = na
        n_new_direct[t] = nd
        n_new_any[t] = ny
        pair_open[t] = po
        pair_direct[t] = pd
        pair_any[t] = pd + pa
        log_counts[0] = nh
        log_counts[1] = nf

        if freeze:
            done = all_conv
        else:
            done = all_found or frac[t] >= stop_fraction
        if done or t >= max_slots:
            return s + 1, done
    return n_slots, False
