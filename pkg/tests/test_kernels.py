"""The compiled kernels and the pure-Python fallback agree on arbitrary input."""

import itertools

import pytest
from hypothesis import given, strategies as st

from qsheaf import _kernels, fixtures
from qsheaf._kernels import _pykernels as py
from qsheaf.presheaves import _pack_sections, build_omega
from qsheaf.spectral import build_outer, build_sigma

needs_compiled = pytest.mark.skipif(_kernels.compiled is None, reason="extension not built")


def brute_downsets(down, flat=None):
    n = len(down)
    out = []
    for m in range(1 << n):
        if any(m >> i & 1 and down[i] & ~m for i in range(n)):
            continue
        if flat is not None and any(m >> flat[i] & 1 and not m >> i & 1 for i in range(n)):
            continue
        out.append(m)
    return sorted(out)


def brute_sections(q):
    p = q.poset
    out = []
    for fam in itertools.product(*(range(q.size(v)) for v in p.ids)):
        if all(q.maps[v, w][fam[v]] == fam[w] for v in p.ids for w in p.below(v)):
            out.append(fam)
    return sorted(out)


@st.composite
def random_tables(draw):
    """A random poset and arbitrary (not necessarily functorial) restriction tables."""
    poset = fixtures.random_fixture(draw(st.integers(0, 60)), max_contexts=8)
    sizes = [draw(st.integers(1, 3)) for _ in poset.ids]
    offsets, tab = {}, []
    for v in poset.ids:
        for w in poset.below(v):
            if w != v:
                offsets[v, w] = len(tab)
                tab.extend(draw(st.integers(0, sizes[w] - 1)) for _ in range(sizes[v]))
    up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off = [0], [], [], [0], [], []
    for v in poset.ids:
        for u in poset.above(v):
            if u != v:
                up_ctx.append(u)
                up_off.append(offsets[u, v])
        up_ptr.append(len(up_ctx))
        for w in poset.below(v):
            if w != v:
                dn_ctx.append(w)
                dn_off.append(offsets[v, w])
        dn_ptr.append(len(dn_ctx))
    order = draw(st.permutations(list(poset.ids)))
    return poset, sizes, list(order), up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off, tab


class TestPython:
    def test_downsets_vs_brute(self, all_posets):
        for p in all_posets:
            down = [p.down_mask(v) for v in p.ids]
            assert sorted(py.downsets(down, None, 1 << 40)) == brute_downsets(down)
            flat = list(p.flat_map)
            assert sorted(py.downsets(down, flat, 1 << 40)) == brute_downsets(down, flat)

    def test_sections_vs_brute(self, all_posets):
        for p in all_posets:
            for q in (build_sigma(p), build_omega(p), build_outer(p)):
                sizes = [q.size(v) for v in p.ids]
                count, found = py.sections(sizes, *_pack_sections(q), 1 << 40, True)
                assert count == len(found)
                assert sorted(map(tuple, found)) == brute_sections(q)

    def test_limit_stops_early(self, fa):
        q = build_omega(fa)
        sizes = [q.size(v) for v in fa.ids]
        count, found = py.sections(sizes, *_pack_sections(q), 2, True)
        assert count == 3 and len(found) == 3


@needs_compiled
class TestCompiledMatchesPython:
    @given(random_tables())
    def test_sections(self, data):
        _, sizes, *rest = data
        for collect in (True, False):
            a = py.sections(sizes, *rest, 1 << 40, collect)
            b = _kernels.compiled.sections(sizes, *rest, 1 << 40, collect)
            assert a[0] == b[0]
            assert sorted(map(tuple, a[1])) == sorted(map(tuple, b[1]))

    @given(random_tables(), st.booleans())
    def test_downsets(self, data, use_flat):
        poset = data[0]
        down = [poset.down_mask(v) for v in poset.ids]
        flat = list(poset.flat_map) if use_flat else None
        assert sorted(py.downsets(down, flat, 1 << 40)) == \
            sorted(_kernels.compiled.downsets(down, flat, 1 << 40))

    @given(random_tables(), st.data())
    def test_hyper_families(self, data, draw):
        poset, sizes, _, up_ptr, up_ctx, up_off, *_ = data
        full = [(1 << s) - 1 for s in sizes]
        active = [draw.draw(st.booleans()) for _ in poset.ids]
        tab = []
        offs = []
        for v in poset.ids:
            for k in range(up_ptr[v], up_ptr[v + 1]):
                u = up_ctx[k]
                offs.append(len(tab))
                tab.extend(draw.draw(st.integers(0, full[v])) for _ in range(full[u] + 1))
        a = py.hyper_families(full, active, up_ptr, up_ctx, offs, tab, 1 << 40)
        b = _kernels.compiled.hyper_families(full, active, up_ptr, up_ctx, offs, tab, 1 << 40)
        assert sorted(map(tuple, a)) == sorted(map(tuple, b))

    def test_ks_fixture(self):
        q = build_sigma(fixtures.cabello18())
        sizes = [q.size(v) for v in q.poset.ids]
        packed = _pack_sections(q)
        assert py.sections(sizes, *packed, 10, False)[0] == 0
        assert _kernels.compiled.sections(sizes, *packed, 10, False)[0] == 0


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "python")
    assert (_kernels.BACKEND == "cython") == (_kernels.compiled is not None)
