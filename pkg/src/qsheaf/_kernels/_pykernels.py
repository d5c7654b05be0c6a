"""Pure-Python enumeration kernels.

These are the reference implementations; ``_ckernels.pyx`` mirrors them
line for line.  ``downsets`` and ``hyper_families`` walk contexts from the
highest id down, a reverse linear extension of inclusion, so every context
above the current one is already decided; ``sections`` takes an explicit
order and checks both directions.

Packed restriction data (shared by ``sections`` and ``hyper_families``):
for context ``v`` the entries ``up_ptr[v]:up_ptr[v + 1]`` of ``up_ctx`` and
``up_off`` list each strictly larger context ``u`` together with the offset
of the table ``tab[up_off[k] + x]`` that maps an element ``x`` at ``u`` to
its restriction at ``v``.
"""

from __future__ import annotations


def downsets(down, flat, limit):
    """Enumerate down-closed subsets as bitmasks.

    ``down[i]`` is the inclusive down-set mask of element ``i``.  When ``flat``
    is given, only sets ``U`` with ``flat[i] in U => i in U`` are produced.
    Stops after ``limit + 1`` results.
    """
    n = len(down)
    out = []
    strict = [down[i] & ~(1 << i) for i in range(n)]

    def rec(i, u):
        if i == n:
            out.append(u)
            return len(out) > limit
        can = (strict[i] & ~u) == 0
        must = flat is not None and flat[i] != i and (u >> flat[i]) & 1
        if not must and rec(i + 1, u):
            return True
        if can and rec(i + 1, u | (1 << i)):
            return True
        return False

    rec(0, 0)
    return out


def sections(sizes, order, up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off, tab,
             limit, collect):
    """Compatible families of a finite presheaf.

    Contexts are assigned in ``order``.  A value at ``v`` is forced by any
    decided larger context and checked against every decided smaller one
    (``dn_*`` lists pairs ``v > w`` with the table for ``v -> w``).
    Returns ``(count, families)``; ``families`` is empty unless ``collect``.
    Counting stops once ``count`` exceeds ``limit``.
    """
    n = len(sizes)
    choice = [-1] * n
    found = []
    count = 0

    def fits(v, x):
        for k in range(dn_ptr[v], dn_ptr[v + 1]):
            w = dn_ctx[k]
            if choice[w] >= 0 and tab[dn_off[k] + x] != choice[w]:
                return False
        return True

    def rec(pos):
        nonlocal count
        if pos == n:
            count += 1
            if collect:
                found.append(tuple(choice))
            return count > limit
        v = order[pos]
        forced = -1
        for k in range(up_ptr[v], up_ptr[v + 1]):
            u = up_ctx[k]
            if choice[u] < 0:
                continue
            val = tab[up_off[k] + choice[u]]
            if forced == -1:
                forced = val
            elif forced != val:
                return False
        stop = False
        for x in ([forced] if forced != -1 else range(sizes[v])):
            if fits(v, x):
                choice[v] = x
                if rec(pos + 1):
                    stop = True
                    break
        choice[v] = -1
        return stop

    rec(0)
    return count, found


def hyper_families(full, active, up_ptr, up_ctx, up_off, tab, limit):
    """Families of atom masks ``h`` with ``restrict(h[u]) subset h[v]`` for ``v < u``.

    ``full[v]`` is the all-atoms mask of context ``v``; inactive contexts get
    ``-1`` and impose nothing.  Returns at most ``limit + 1`` families.
    """
    n = len(full)
    choice = [-1] * n
    found = []

    def rec(pos):
        if pos < 0:
            found.append(tuple(choice))
            return len(found) > limit
        if not active[pos]:
            return rec(pos - 1)
        lb = 0
        for k in range(up_ptr[pos], up_ptr[pos + 1]):
            u = up_ctx[k]
            if choice[u] >= 0:
                lb |= tab[up_off[k] + choice[u]]
        stop = False
        for m in range(full[pos] + 1):
            if m & lb == lb:
                choice[pos] = m
                if rec(pos - 1):
                    stop = True
                    break
        choice[pos] = -1
        return stop

    rec(n - 1)
    return found
