"""Will construction, portion derivation, and surgery tests.

The construction oracle enumerates every full binary tree on the ordered
leaves, assigns internal simulators by the max-of-left-half rule, and
checks the implementation picks the unique minimal-depth shape whose
in-order simulator sequence is sorted. Expected values for the worked
4-child example are frozen below.
"""

import math

import pytest

from forgiving_tree.wills import (
    HELPER,
    REAL,
    ROOT,
    OwnerContext,
    WillError,
    diff_portions,
    generate_sub_rt,
)


# ---- oracle: exhaustive shape enumeration ----

def enumerate_shapes(leaves):
    """All full binary trees over the ordered leaves.

    Each shape is a nested tuple; internal nodes carry the simulator id
    given by the rule 'max leaf id of the left subtree'.
    """
    if len(leaves) == 1:
        yield ("leaf", leaves[0])
        return
    for k in range(1, len(leaves)):
        for left in enumerate_shapes(leaves[:k]):
            for right in enumerate_shapes(leaves[k:]):
                yield ("int", max(leaves[:k]), left, right)


def shape_depth(shape):
    if shape[0] == "leaf":
        return 0
    return 1 + max(shape_depth(shape[2]), shape_depth(shape[3]))


def shape_in_order(shape):
    if shape[0] == "leaf":
        return [("leaf", shape[1])]
    return shape_in_order(shape[2]) + [("int", shape[1])] + shape_in_order(shape[3])


def will_to_shape(slot):
    if slot.is_leaf:
        return ("leaf", slot.sim)
    return ("int", slot.sim, will_to_shape(slot.left), will_to_shape(slot.right))


class TestConstruction:
    def test_four_children_frozen(self):
        w = generate_sub_rt([9, 2, 7, 5], owner=1)
        assert w.heir == 9
        assert w.in_order() == [
            ("leaf", 2), ("int", 2), ("leaf", 5), ("int", 5),
            ("leaf", 7), ("int", 7), ("leaf", 9),
        ]
        assert w.depth() == 2
        assert sorted(w.internal_slot) == [2, 5, 7]
        assert w.check_structure() == []

    def test_four_children_matches_enumeration_oracle(self):
        leaves = [2, 5, 7, 9]
        shapes = list(enumerate_shapes(leaves))
        assert len(shapes) == 5  # Catalan(3)
        best = min(shape_depth(s) for s in shapes)
        minimal = [s for s in shapes if shape_depth(s) == best]
        assert len(minimal) == 1 and best == 2
        chosen = will_to_shape(generate_sub_rt(leaves, owner=0).root)
        assert chosen == minimal[0]
        sims = [sim for _, sim in shape_in_order(chosen)]
        assert sims == sorted(sims)  # search-tree order over ids

    @pytest.mark.parametrize("d", range(1, 17))
    def test_depth_is_ceil_log2(self, d):
        w = generate_sub_rt(list(range(10, 10 + d)), owner=0)
        want = math.ceil(math.log2(d)) if d > 1 else 0
        assert w.depth() == want
        assert w.check_structure() == []

    def test_heir_never_simulates_internal(self):
        for d in range(1, 33):
            w = generate_sub_rt(list(range(d)), owner=99)
            assert w.heir == d - 1
            assert w.heir not in w.internal_slot

    def test_empty_and_duplicates(self):
        assert generate_sub_rt([], owner=3).root is None
        with pytest.raises(WillError):
            generate_sub_rt([4, 4], owner=3)


class TestPortions:
    CTX = OwnerContext(parent=0, parent_kind=REAL, ishelper=False)

    def portions(self, children, ctx=None):
        w = generate_sub_rt(children, owner=1)
        return w.derive_portions(ctx or self.CTX)

    def test_heir_portion_nonhelper_owner(self):
        p = self.portions([2, 5, 7, 9])[9]
        assert p.is_heir and p.assigns_helper
        assert p.nexthparent == 0 and p.nexthparent_kind == REAL
        assert p.nexthchildren == ((5, HELPER),)  # root simulator
        assert p.nextparent == 7 and p.nextparent_kind == HELPER

    def test_nonheir_portions_frozen(self):
        ps = self.portions([2, 5, 7, 9])
        assert ps[2].nextparent == 5  # own slot is its leaf's parent: go up
        assert ps[2].nexthparent == 5
        assert ps[2].nexthchildren == ((2, REAL), (5, REAL))
        assert ps[5].nextparent == 2
        # Root slot hangs under the heir's new top helper; dual of the
        # heir portion's nexthchildren == {5}.
        assert ps[5].nexthparent == 9 and ps[5].nexthparent_kind == HELPER
        assert ps[5].nexthchildren == ((2, HELPER), (7, HELPER))
        assert ps[7].nextparent == 5
        assert ps[7].nexthchildren == ((7, REAL), (9, REAL))

    def test_root_slot_attachment_helper_owner(self):
        ctx = OwnerContext(
            parent=40, parent_kind=HELPER, ishelper=True,
            hparent=41, hparent_kind=HELPER,
            hchildren=((42, REAL), (43, HELPER)),
        )
        ps = self.portions([2, 5, 7, 9], ctx)
        # Will root slot (sim 5) slides in under the owner's old parent.
        assert ps[5].nexthparent == 40 and ps[5].nexthparent_kind == HELPER
        # Heir inherits the owner's helper position verbatim.
        assert ps[9].nexthparent == 41
        assert ps[9].nexthchildren == ((42, REAL), (43, HELPER))
        assert ps[9].nextparent == 7

    def test_single_child_heir_attaches_under_own_helper(self):
        # nextparent names the true slot parent, the heir's own fresh
        # helper here; the executor resolves the self-reference upward.
        ps = self.portions([6])
        assert ps[6].nextparent == 6 and ps[6].nextparent_kind == HELPER
        assert ps[6].is_heir
        assert ps[6].nexthparent == 0
        assert ps[6].nexthchildren == ((6, REAL),)
        assert ps[6].announces_top and ps[6].top_kind == HELPER

    def test_self_covering_owner_routes_top_into_inherited_helper(self):
        # The owner's helper holds the owner's own leaf; the heir inherits
        # that helper with the dead leaf's entry replaced by the will top,
        # and nobody announces outside the family.
        ctx = OwnerContext(
            parent=0, parent_kind=REAL, ishelper=True,
            hparent=0, hparent_kind=REAL,
            hchildren=((1, REAL), (9, HELPER)),
        )
        ps = self.portions([2, 5, 7], ctx)  # owner is 1
        assert ps[7].nexthchildren == ((5, HELPER), (9, HELPER))
        assert ps[7].nexthparent == 0 and ps[7].nexthparent_kind == REAL
        assert not ps[7].announces_top
        assert ps[5].nexthparent == 7 and ps[5].nexthparent_kind == HELPER
        assert not ps[5].announces_top

    def test_root_owner_heir_gets_empty_hparent(self):
        ctx = OwnerContext(parent=None, parent_kind=ROOT, ishelper=False)
        ps = self.portions([2, 5], ctx)
        assert ps[5].nexthparent is None and ps[5].nexthparent_kind == ROOT

    def test_child_kinds_flow_into_leaf_entries(self):
        w = generate_sub_rt([2, 5], owner=1)
        ctx = OwnerContext(
            parent=0, parent_kind=REAL, ishelper=False,
            child_kinds={2: HELPER, 5: REAL},
        )
        ps = w.derive_portions(ctx)
        assert ps[2].nexthchildren == ((2, HELPER), (5, REAL))


class TestSurgery:
    def test_remove_nonheir_whose_slot_is_own_parent(self):
        # Frozen from the worked example: dropping 7 splices h7; only the
        # portions of 5 and 9 change (bound: at most 4).
        w = generate_sub_rt([2, 5, 7, 9], owner=1)
        ctx = OwnerContext(parent=0, parent_kind=REAL, ishelper=False)
        before = w.derive_portions(ctx)
        new_heir = w.remove_leaf(7)
        assert new_heir is None
        assert w.in_order() == [
            ("leaf", 2), ("int", 2), ("leaf", 5), ("int", 5), ("leaf", 9),
        ]
        assert w.check_structure() == []
        after = w.derive_portions(ctx)
        changed = diff_portions(before, after)
        assert set(changed) == {5, 9} and len(changed) <= 4

    def test_remove_leaf_resims_freed_slot(self):
        # Dropping 2 splices h2 (simmed by 2's sibling-slot owner 2 itself?
        # no: l2's parent is h2) ... l2's parent IS h2, so both vanish.
        w = generate_sub_rt([2, 5, 7, 9], owner=1)
        w.remove_leaf(2)
        assert w.in_order() == [
            ("leaf", 5), ("int", 5), ("leaf", 7), ("int", 7), ("leaf", 9),
        ]
        assert w.check_structure() == []

    def test_remove_heir_redesignates(self):
        # Dropping heir 9 splices h7 (l9's parent); survivor 7 frees its
        # planned helper and is exactly the new heir.
        w = generate_sub_rt([2, 5, 7, 9], owner=1)
        new_heir = w.remove_leaf(9)
        assert new_heir == 7 and w.heir == 7
        assert 7 not in w.internal_slot
        assert w.in_order() == [
            ("leaf", 2), ("int", 2), ("leaf", 5), ("int", 5), ("leaf", 7),
        ]
        assert w.check_structure() == []

    def test_remove_mid_resim_case(self):
        # Will over {1,2,3,4,5}: l4's parent is h4; removing 3 splices h3
        # and hands nothing off (h3 is 3's own parent? trace the shape).
        w = generate_sub_rt([1, 2, 3, 4, 5], owner=9)
        before_pairs = w.in_order()
        assert before_pairs == [
            ("leaf", 1), ("int", 1), ("leaf", 2), ("int", 2), ("leaf", 3),
            ("int", 3), ("leaf", 4), ("int", 4), ("leaf", 5),
        ]
        w.remove_leaf(2)
        assert w.check_structure() == []
        assert [s for k, s in w.in_order() if k == "leaf"] == [1, 3, 4, 5]

    def test_remove_down_to_empty(self):
        w = generate_sub_rt([3, 8], owner=1)
        w.remove_leaf(8)
        assert w.heir == 3 and w.root is not None and w.root.is_leaf
        w.remove_leaf(3)
        assert w.root is None and w.heir is None
        assert w.check_structure() == []

    def test_substitution_frozen(self):
        w = generate_sub_rt([2, 5, 7, 9], owner=1)
        shape_before = will_to_shape(w.root)
        w.substitute(5, 11)
        assert w.in_order() == [
            ("leaf", 2), ("int", 2), ("leaf", 11), ("int", 11),
            ("leaf", 7), ("int", 7), ("leaf", 9),
        ]
        assert w.heir == 9
        # Shape identical: only simulator names changed.
        def rename(s):
            if s[0] == "leaf":
                return ("leaf", 11 if s[1] == 5 else s[1])
            return ("int", 11 if s[1] == 5 else s[1], rename(s[2]), rename(s[3]))
        assert will_to_shape(w.root) == rename(shape_before)
        assert w.check_structure() == []

    def test_substitution_of_heir(self):
        w = generate_sub_rt([2, 5], owner=1)
        w.substitute(5, 12)
        assert w.heir == 12
        assert w.check_structure() == []

    def test_surgery_errors(self):
        w = generate_sub_rt([2, 5], owner=1)
        with pytest.raises(WillError):
            w.remove_leaf(99)
        with pytest.raises(WillError):
            w.substitute(2, 5)

    def test_depth_never_grows_under_removals(self):
        w = generate_sub_rt(list(range(16)), owner=99)
        cap = w.depth()
        for dead in [3, 9, 15, 0, 7, 12, 1, 14]:
            w.remove_leaf(dead)
            assert w.depth() <= cap
            assert w.check_structure() == []
