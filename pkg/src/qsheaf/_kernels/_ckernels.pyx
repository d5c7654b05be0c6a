# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of ``_pykernels``.

Same contracts, explicit stacks instead of recursion.  ``downsets`` works on
64-bit masks, so it only accepts posets with at most 64 elements; the
dispatcher falls back to Python beyond that.
"""

from libc.stdlib cimport malloc, free

ctypedef unsigned long long u64


def downsets(down, flat, Py_ssize_t limit):
    cdef Py_ssize_t n = len(down)
    if n > 64:
        raise ValueError("compiled downsets supports at most 64 elements")
    cdef u64* strict = <u64*>malloc(max(n, 1) * sizeof(u64))
    cdef long* fl = <long*>malloc(max(n, 1) * sizeof(long))
    cdef int* state = <int*>malloc((n + 1) * sizeof(int))
    cdef u64* us = <u64*>malloc((n + 1) * sizeof(u64))
    cdef Py_ssize_t i
    cdef int has_flat = flat is not None
    cdef u64 u, one = 1
    cdef int can, must
    out = []
    try:
        for i in range(n):
            strict[i] = (<u64>down[i]) & ~(one << i)
            fl[i] = flat[i] if has_flat else i
        # state[i]: 0 = try exclude, 1 = try include, 2 = exhausted
        i = 0
        us[0] = 0
        state[0] = 0
        while i >= 0:
            if i == n:
                out.append(us[n])
                if len(out) > limit:
                    break
                i -= 1
                continue
            u = us[i]
            can = (strict[i] & ~u) == 0
            must = has_flat and fl[i] != i and ((u >> fl[i]) & 1)
            if state[i] == 0:
                state[i] = 1
                if not must:
                    us[i + 1] = u
                    state[i + 1] = 0
                    i += 1
                    continue
            if state[i] == 1:
                state[i] = 2
                if can:
                    us[i + 1] = u | (one << i)
                    state[i + 1] = 0
                    i += 1
                    continue
            i -= 1
    finally:
        free(strict)
        free(fl)
        free(state)
        free(us)
    return out


cdef long* _longs(seq, Py_ssize_t n):
    cdef long* out = <long*>malloc(max(n, 1) * sizeof(long))
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = seq[i]
    return out


def sections(sizes, order, up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off, tab,
             Py_ssize_t limit, bint collect):
    cdef Py_ssize_t n = len(sizes)
    cdef long* sz = _longs(sizes, n)
    cdef long* od = _longs(order, n)
    cdef long* uptr = _longs(up_ptr, n + 1)
    cdef long* uc = _longs(up_ctx, len(up_ctx))
    cdef long* uo = _longs(up_off, len(up_off))
    cdef long* dptr = _longs(dn_ptr, n + 1)
    cdef long* dc = _longs(dn_ctx, len(dn_ctx))
    cdef long* do = _longs(dn_off, len(dn_off))
    cdef long* tb = _longs(tab, len(tab))
    cdef long* choice = <long*>malloc(max(n, 1) * sizeof(long))
    cdef long* nxt = <long*>malloc(max(n, 1) * sizeof(long))
    cdef long* forced = <long*>malloc(max(n, 1) * sizeof(long))
    cdef Py_ssize_t i, k, pos
    cdef long v, w, x, val, f
    cdef long long count = 0
    cdef bint ok
    found = []
    try:
        for i in range(n):
            choice[i] = -1
        pos = 0
        if n > 0:
            nxt[0] = -2  # -2: entering fresh
        while True:
            if pos == n:
                count += 1
                if collect:
                    found.append(tuple([choice[i] for i in range(n)]))
                if count > limit or n == 0:
                    break
                pos = n - 1
                continue
            if pos < 0:
                break
            v = od[pos]
            if nxt[pos] == -2:
                f = -1
                ok = True
                for k in range(uptr[v], uptr[v + 1]):
                    if choice[uc[k]] < 0:
                        continue
                    val = tb[uo[k] + choice[uc[k]]]
                    if f == -1:
                        f = val
                    elif f != val:
                        ok = False
                        break
                if not ok:
                    pos -= 1
                    continue
                forced[pos] = f
                nxt[pos] = f if f != -1 else 0
            # next candidate that fits every decided smaller context
            x = -1
            while nxt[pos] < sz[v]:
                val = nxt[pos]
                nxt[pos] = sz[v] if forced[pos] != -1 else val + 1
                ok = True
                for k in range(dptr[v], dptr[v + 1]):
                    w = dc[k]
                    if choice[w] >= 0 and tb[do[k] + val] != choice[w]:
                        ok = False
                        break
                if ok:
                    x = val
                    break
            if x >= 0:
                choice[v] = x
                pos += 1
                if pos < n:
                    nxt[pos] = -2
                continue
            choice[v] = -1
            pos -= 1
    finally:
        free(sz)
        free(od)
        free(uptr)
        free(uc)
        free(uo)
        free(dptr)
        free(dc)
        free(do)
        free(tb)
        free(choice)
        free(nxt)
        free(forced)
    return count, found


def hyper_families(full, active, up_ptr, up_ctx, up_off, tab, Py_ssize_t limit):
    cdef Py_ssize_t n = len(full)
    cdef Py_ssize_t m = len(up_ctx)
    cdef Py_ssize_t t = len(tab)
    cdef long* fu = <long*>malloc(max(n, 1) * sizeof(long))
    cdef char* act = <char*>malloc(max(n, 1) * sizeof(char))
    cdef long* ptr = <long*>malloc((n + 1) * sizeof(long))
    cdef long* uc = <long*>malloc(max(m, 1) * sizeof(long))
    cdef long* uo = <long*>malloc(max(m, 1) * sizeof(long))
    cdef long* tb = <long*>malloc(max(t, 1) * sizeof(long))
    cdef long* choice = <long*>malloc(max(n, 1) * sizeof(long))
    cdef long* nxt = <long*>malloc(max(n, 1) * sizeof(long))
    cdef long* lbs = <long*>malloc(max(n, 1) * sizeof(long))
    cdef Py_ssize_t i, k, pos
    cdef long lb, cand
    found = []
    try:
        for i in range(n):
            fu[i] = full[i]
            act[i] = 1 if active[i] else 0
            choice[i] = -1
        for i in range(n + 1):
            ptr[i] = up_ptr[i]
        for i in range(m):
            uc[i] = up_ctx[i]
            uo[i] = up_off[i]
        for i in range(t):
            tb[i] = tab[i]
        pos = n - 1
        if pos >= 0:
            nxt[pos] = -2
        while True:
            if pos < 0:
                found.append(tuple([choice[i] for i in range(n)]))
                if len(found) > limit:
                    break
                if n == 0:
                    break
                pos = 0
                continue
            if pos >= n:
                break
            if not act[pos]:
                # pass-through context: descend once, then climb
                if nxt[pos] == -2:
                    nxt[pos] = -1
                    pos -= 1
                    if pos >= 0:
                        nxt[pos] = -2
                    continue
                pos += 1
                continue
            if nxt[pos] == -2:
                lb = 0
                for k in range(ptr[pos], ptr[pos + 1]):
                    if choice[uc[k]] >= 0:
                        lb |= tb[uo[k] + choice[uc[k]]]
                lbs[pos] = lb
                nxt[pos] = 0
            lb = lbs[pos]
            cand = nxt[pos]
            while cand <= fu[pos] and (cand & lb) != lb:
                cand += 1
            if cand <= fu[pos]:
                choice[pos] = cand
                nxt[pos] = cand + 1
                pos -= 1
                if pos >= 0:
                    nxt[pos] = -2
                continue
            choice[pos] = -1
            pos += 1
    finally:
        free(fu)
        free(act)
        free(ptr)
        free(uc)
        free(uo)
        free(tb)
        free(choice)
        free(nxt)
        free(lbs)
    return found
