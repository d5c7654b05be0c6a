import itertools

import pytest

import oracle
from qsheaf import fixtures
from qsheaf.errors import NotDense, NotSheaf, SizeLimit
from qsheaf.presheaves import (NatTransform, Sieve, Subpresheaf, TruthValue, apply_j,
                               build_omega, build_omega_j, closure, constant_presheaf,
                               count_global_elements, extend_along_dense, global_elements,
                               is_dense, is_sheaf, nat_transforms, retraction_r,
                               sheafify, sub_sheafify, subobjects, truth_values,
                               truth_values_j, zeta)
from qsheaf.spectral import build_outer, build_sigma, clopen_power_sheaf


def fixture_presheaves(p):
    omega_j, _ = build_omega_j(p)
    return [build_sigma(p), build_outer(p), build_omega(p), omega_j,
            constant_presheaf(p, ("x", "y"))]


def small_posets(all_posets):
    return [p for p in all_posets if len(p) <= 5]


def sieve_of(poset, v, labels):
    return Sieve(v, frozenset(poset.index(x) for x in labels))


class TestOmega:
    def test_stage_sizes(self, fa, frozen):
        omega = build_omega(fa)
        omega_j, true_j = build_omega_j(fa)
        ref = frozen["fixture_a"]
        assert {fa.label(v): omega.size(v) for v in fa.ids} == ref["omega_sizes"]
        assert {fa.label(v): omega_j.size(v) for v in fa.ids} == ref["omega_j_sizes"]
        assert true_j == TruthValue.top(fa)

    def test_stage_contents(self, fa, labels):
        omega_j, _ = build_omega_j(fa)
        ci, d, vx = labels["CI"], labels["D"], labels["Vx"]
        assert set(omega_j.elements[vx]) == {frozenset(), frozenset({ci, vx})}
        assert omega_j.elements[d] == build_omega(fa).elements[d]
        omega = build_omega(fa)
        top = omega.index(d, frozenset({ci, d}))
        assert omega.elements[ci][omega.restrict(d, ci, top)] == frozenset({ci})

    def test_oracle_sieves(self, all_posets):
        for p in all_posets:
            omega = build_omega(p)
            leq = [[bool(p.leq[a, b]) for b in p.ids] for a in p.ids]
            for v in p.ids:
                assert set(omega.elements[v]) == set(oracle.sieves_at(v, leq))

    def test_apply_j_examples(self, fa, labels):
        ci, d, vx = labels["CI"], labels["D"], labels["Vx"]
        assert apply_j(fa, sieve_of(fa, vx, ["CI"])).members == {ci, vx}
        assert apply_j(fa, sieve_of(fa, d, ["CI"])).members == {ci}
        for v in fa.ids:
            top = Sieve(v, frozenset(fa.below(v)))
            assert apply_j(fa, top) == top

    def test_lawvere_tierney(self, all_posets):
        for p in all_posets:
            omega = build_omega(p)
            for v in p.ids:
                top = Sieve(v, frozenset(p.below(v)))
                assert apply_j(p, top) == top
                for s in omega.elements[v]:
                    js = apply_j(p, Sieve(v, s))
                    assert js.is_valid(p) and s <= js.members
                    assert apply_j(p, js) == js
                    for t in omega.elements[v]:
                        both = apply_j(p, Sieve(v, s & t)).members
                        assert both == js.members & apply_j(p, Sieve(v, t)).members

    def test_retraction(self, fa, labels):
        ci, vx = labels["CI"], labels["Vx"]
        assert retraction_r(fa, sieve_of(fa, vx, ["CI"])).members == {ci, vx}
        assert retraction_r(fa, Sieve(vx, frozenset())).members == frozenset()
        omega_j, _ = build_omega_j(fa)
        for v in fa.ids:
            for s in omega_j.elements[v]:
                assert retraction_r(fa, Sieve(v, s)).members == s


class TestGlobalElements:
    def test_counts(self, fa, frozen):
        ref = frozen["fixture_a"]
        omega_j, _ = build_omega_j(fa)
        assert count_global_elements(build_omega(fa)) == ref["gamma_omega"]
        assert count_global_elements(omega_j) == ref["gamma_omega_j"]
        assert len(truth_values(fa)) == ref["gamma_omega"]
        assert len(truth_values_j(fa)) == ref["gamma_omega_j"]
        assert count_global_elements(build_sigma(fa)) == ref["sigma_sections"]

    def test_gamma_omega_is_downsets(self, all_posets):
        for p in all_posets:
            omega = build_omega(p)
            leq = [[bool(p.leq[a, b]) for b in p.ids] for a in p.ids]
            got = set()
            for fam in global_elements(omega):
                tv = TruthValue(tuple(omega.elements[v][i] for v, i in enumerate(fam)))
                assert tv.is_compatible(p)
                got.add(tv.downset)
            assert got == set(oracle.downsets(len(p), leq))
            assert {tv.downset for tv in truth_values(p)} == got

    def test_gamma_omega_j(self, all_posets):
        for p in all_posets:
            leq = [[bool(p.leq[a, b]) for b in p.ids] for a in p.ids]
            ref = {d for d in oracle.downsets(len(p), leq) if oracle.is_j_closed(d, leq, p.flat_map)}
            assert {tv.downset for tv in truth_values_j(p)} == ref
            assert all(tv.in_omega_j(p) for tv in truth_values_j(p))

    def test_guard(self, fa):
        with pytest.raises(SizeLimit):
            global_elements(build_omega(fa), guard=3)

    def test_ks_sections(self, frozen):
        for name, ref in frozen["ks"].items():
            assert count_global_elements(build_sigma(getattr(fixtures, name)())) == ref["sections"]


class TestSheaves:
    def test_is_sheaf_examples(self, fa):
        omega_j, _ = build_omega_j(fa)
        assert is_sheaf(omega_j)
        assert not is_sheaf(build_omega(fa))
        assert is_sheaf(constant_presheaf(fa, ("x",)))

    def test_omega_not_sheaf_when_flat_moves(self, all_posets):
        for p in all_posets:
            omega_j, _ = build_omega_j(p)
            assert is_sheaf(omega_j)
            moves = any(p.flat(v) != v for v in p.ids)
            assert is_sheaf(build_omega(p)) == (not moves)

    def test_zeta(self, fa, labels):
        z = zeta(build_omega(fa))
        assert z.is_natural()
        vx = labels["Vx"]
        assert len(z.components[vx]) == 3 and len(set(z.components[vx])) == 2
        sq = sheafify(build_omega(fa))
        assert zeta(sq).is_iso()

    def test_sheafify_examples(self, fa, labels):
        sig = sheafify(build_sigma(fa))
        assert sig.size(labels["Vx"]) == 1
        trivial = fixtures.single_context_fixture()
        q = build_sigma(trivial)
        assert sheafify(q).same_as(q)

    def test_sheafify_is_sheaf_and_idempotent(self, all_posets):
        for p in all_posets:
            for q in fixture_presheaves(p):
                sq = sheafify(q)
                assert sq.is_functorial() and is_sheaf(sq)
                assert sheafify(sq).same_as(sq)
                assert zeta(q).is_natural()

    def test_flat_identities(self, all_posets):
        for p in all_posets:
            for q in fixture_presheaves(p):
                sq = sheafify(q)
                for v in p.ids:
                    f = p.flat(v)
                    assert sheafify(q.down(v)).same_as(sheafify(q.down(f)))
                    assert sheafify(sq.down(v)).same_as(sheafify(q.down(v)))
                    for w in p.below(v):
                        assert sheafify(sheafify(q.down(v)).down(w)).same_as(sheafify(q.down(w)))

    def test_clopen_power_sheaf(self, fa):
        power = clopen_power_sheaf(fa)
        assert [power.size(v) for v in fa.ids] == [2, 5, 2]
        assert power.is_functorial() and is_sheaf(power)


class TestSubobjects:
    def test_closure_examples(self, fa, labels):
        omega = build_omega(fa)
        full = Subpresheaf.full(omega)
        assert closure(full) == full
        vx = labels["Vx"]
        stages = [frozenset(range(omega.size(v))) for v in fa.ids]
        stages[vx] = frozenset({omega.index(vx, frozenset())})
        s = Subpresheaf(omega, tuple(stages))
        assert s.is_valid()
        assert closure(s).stages[vx] == frozenset(range(omega.size(vx)))
        assert is_dense(s)
        assert not is_dense(Subpresheaf.empty(omega))

    def test_closure_axioms(self, all_posets):
        for p in small_posets(all_posets):
            omega = build_omega(p)
            subs = subobjects(omega)
            for s in subs:
                c = closure(s)
                assert s <= c and c.is_valid() and closure(c) == c
            for s, t in itertools.islice(itertools.product(subs, repeat=2), 4000):
                if s <= t:
                    assert closure(s) <= closure(t)

    def test_subsheaves_of_sheafified(self, all_posets):
        """Closed subobjects of a sheaf are exactly the ones with ``A = flat^* A``."""
        for p in small_posets(all_posets):
            for q in fixture_presheaves(p)[:3]:
                sq = sheafify(q)
                try:
                    subs = subobjects(sq, guard=20_000)
                except SizeLimit:
                    continue
                for a in subs:
                    fixed = sub_sheafify(a) == a
                    assert fixed == (closure(a) == a)
                    if is_sheaf(a.as_presheaf()):
                        assert fixed

    def test_non_sheaf_subobject_exists(self, fa):
        sq = sheafify(build_sigma(fa))
        assert any(sub_sheafify(a) != a for a in subobjects(sq))


class TestExtension:
    def test_identity_extension(self, fa):
        omega_j, _ = build_omega_j(fa)
        s = Subpresheaf.full(omega_j)
        lam = NatTransform(s.as_presheaf(), omega_j,
                           tuple(tuple(range(omega_j.size(v))) for v in fa.ids))
        mu = extend_along_dense(lam, s, omega_j)
        assert mu.components == lam.components

    def test_retraction_is_extension(self, all_posets):
        for p in all_posets:
            omega = build_omega(p)
            omega_j, _ = build_omega_j(p)
            s = Subpresheaf(omega, tuple(frozenset(omega.index(v, x) for x in omega_j.elements[v])
                                         for v in p.ids))
            assert s.is_valid()
            lam = NatTransform(s.as_presheaf(), omega_j,
                               tuple(tuple(range(omega_j.size(v))) for v in p.ids))
            if not is_dense(s):
                with pytest.raises(NotDense):
                    extend_along_dense(lam, s, omega_j)
                continue
            mu = extend_along_dense(lam, s, omega_j)
            assert mu.is_natural()
            for v in p.ids:
                for i, x in enumerate(omega.elements[v]):
                    r = retraction_r(p, Sieve(v, x)).members
                    assert omega_j.elements[v][mu.components[v][i]] == r

    def test_constant_target(self, fa):
        point = constant_presheaf(fa, ("*",))
        omega = build_omega(fa)
        s = Subpresheaf.full(omega)
        lam = NatTransform(s.as_presheaf(), point, tuple((0,) * omega.size(v) for v in fa.ids))
        mu = extend_along_dense(lam, s, point)
        assert all(set(c) == {0} for c in mu.components)

    def test_not_sheaf_target(self, fa):
        omega = build_omega(fa)
        s = Subpresheaf.full(omega)
        lam = NatTransform(s.as_presheaf(), omega,
                           tuple(tuple(range(omega.size(v))) for v in fa.ids))
        with pytest.raises(NotSheaf):
            extend_along_dense(lam, s, omega)

    def test_matches_exhaustive_search(self, fa):
        omega_j, _ = build_omega_j(fa)
        for q in (build_omega(fa), build_sigma(fa), build_outer(fa)):
            everything = nat_transforms(q, omega_j)
            for s in subobjects(q):
                if not is_dense(s):
                    continue
                sub = s.as_presheaf()
                for lam in nat_transforms(sub, omega_j):
                    mu = extend_along_dense(lam, s, omega_j)
                    assert mu.is_natural()
                    agree = [m for m in everything
                             if all(m.components[v][x] == lam.components[v][k]
                                    for v in fa.ids for k, x in enumerate(sorted(s.stages[v])))]
                    assert len(agree) == 1 and agree[0].components == mu.components
