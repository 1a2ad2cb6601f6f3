import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phyloflow import aligner
from phyloflow.aligner import (
    ConservationProfile,
    DistanceMatrix,
    GuideNode,
    LeafMismatch,
    LengthMismatch,
    NotAligned,
    ScoringParams,
    build_guide_tree,
    conservation_profile,
    distance_matrix,
    p_distance,
    pairwise_align,
    progressive_align,
    realign,
)
from phyloflow.errors import ValidationError
from phyloflow.seqio import Alignment, SequenceRecord

from oracles import best_alignment_score, score_explicit_alignment

UNIT = ScoringParams(match=1, mismatch=-1, gap_open=-2, gap_extend=-1)


def rec(i, r):
    return SequenceRecord(i, r)


def aln(*pairs):
    return Alignment.from_records(rec(i, r) for i, r in pairs)


class TestScoringParams:
    def test_defaults(self):
        s = ScoringParams()
        assert (s.match, s.mismatch, s.gap_open, s.gap_extend) == (2, -1, -4, -1)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            ScoringParams(match=1, mismatch=1)
        with pytest.raises(ValidationError):
            ScoringParams(gap_open=-1, gap_extend=-2)
        with pytest.raises(ValidationError):
            ScoringParams(gap_extend=1)


class TestPairwise:
    def test_identical(self):
        (ra, rb), score = pairwise_align(rec("a", "ACGT"), rec("b", "ACGT"), UNIT)
        assert score == 4 and ra == rb == "ACGT"

    def test_known_optimum(self):
        # frozen from the enumeration oracle
        (ra, rb), score = pairwise_align(rec("a", "ACGT"), rec("b", "AGT"), UNIT)
        assert score == 1.0
        assert score == best_alignment_score("ACGT", "AGT", UNIT)

    def test_single_mismatch_beats_double_gap(self):
        (_, _), score = pairwise_align(rec("a", "A"), rec("b", "T"), UNIT)
        assert score == -1.0 == max(UNIT.mismatch, 2 * UNIT.gap_open)

    def test_gaps_removable(self):
        (ra, rb), _ = pairwise_align(rec("a", "ACCGT"), rec("b", "AGT"), UNIT)
        assert ra.replace("-", "") == "ACCGT"
        assert rb.replace("-", "") == "AGT"
        assert len(ra) == len(rb)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            pairwise_align(rec("a", ""), rec("b", "A"), UNIT)

    def test_matches_enumeration_corpus(self):
        """>=200 random short pairs equal the exhaustive optimum."""
        rng = np.random.default_rng(42)
        params = [
            UNIT,
            ScoringParams(),
            ScoringParams(match=3, mismatch=-2, gap_open=-5, gap_extend=-1),
        ]
        cases = 0
        for _ in range(70):
            for s in params:
                a = "".join(rng.choice(list("ACGT"), rng.integers(1, 7)))
                b = "".join(rng.choice(list("ACGT"), rng.integers(1, 7)))
                (ra, rb), score = pairwise_align(rec("a", a), rec("b", b), s)
                assert score == best_alignment_score(a, b, s)
                assert score_explicit_alignment(ra, rb, s) == score
                cases += 1
        assert cases >= 200


class TestPDistance:
    def test_quarter(self):
        assert p_distance("ACGT", "ACGA") == 0.25

    def test_zero(self):
        assert p_distance("ACGT", "ACGT") == 0.0

    def test_gap_skipped(self):
        assert p_distance("AC-T", "ACGT") == 0.0

    def test_n_skipped(self):
        assert p_distance("ACNT", "ACGA") == pytest.approx(1 / 3)

    def test_no_comparable_sites(self):
        assert p_distance("--", "AC") == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            p_distance("AC", "ACG")


class TestDistanceMatrix:
    SEQS = [rec("a", "ACGTACGT"), rec("b", "ACGTACGA"), rec("c", "TTGTACGA")]

    def test_identical_zero(self):
        dm = distance_matrix([rec("a", "ACGT"), rec("b", "ACGT")])
        assert dm[("a", "b")] == 0.0

    def test_symmetric_shape(self):
        dm = distance_matrix(self.SEQS)
        assert np.allclose(dm.values, dm.values.T)
        assert np.all(np.diag(dm.values) == 0)
        assert (dm.values > 0).sum() == 6  # 3 off-diagonal pairs, mirrored

    @pytest.mark.parametrize("workers", [2, 3, 5])
    def test_worker_count_invariance(self, workers):
        base = distance_matrix(self.SEQS, workers=1)
        par = distance_matrix(self.SEQS, workers=workers)
        assert base.labels == par.labels
        assert np.array_equal(base.values, par.values)


class TestGuideTree:
    def test_hand_executed_upgma(self):
        # d(A,B)=2, d(A,C)=4, d(B,C)=4 -> ((A,B),C) with heights 1 then 2
        dm = DistanceMatrix(
            ["A", "B", "C"], [[0, 2, 4], [2, 0, 4], [4, 4, 0]]
        )
        root = build_guide_tree(dm)
        assert root.height == 2.0
        inner = [c for c in root.children if c.label is None][0]
        assert inner.height == 1.0
        assert set(inner.leaves) == {"A", "B"}

    def test_two_taxa_cherry(self):
        dm = DistanceMatrix(["x", "y"], [[0, 1], [1, 0]])
        root = build_guide_tree(dm)
        assert set(root.leaves) == {"x", "y"} and root.height == 0.5

    def test_tie_break_lexicographic(self):
        # all distances equal: first merge must be the (a, b) pair
        dm = DistanceMatrix(
            ["c", "a", "b"], [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
        )
        root = build_guide_tree(dm)
        inner = [c for c in root.children if c.label is None][0]
        assert sorted(inner.leaves) == ["a", "b"]

    def test_heights_nondecreasing(self):
        dm = distance_matrix(
            [rec("a", "ACGTAC"), rec("b", "ACGTAA"), rec("c", "TTTTAA"),
             rec("d", "TTTTTT")]
        )
        root = build_guide_tree(dm)

        def check(node):
            for c in node.children:
                assert c.height <= node.height
                check(c)

        check(root)


class TestProgressive:
    def test_identical_sequences_gap_free(self):
        seqs = [rec("a", "ACGT"), rec("b", "ACGT"), rec("c", "ACGT")]
        out = progressive_align(seqs, build_guide_tree(distance_matrix(seqs)))
        assert all(r.residues == "ACGT" for r in out.records)

    def test_degap_recovers_inputs(self):
        seqs = [rec("a", "ACGTTT"), rec("b", "AGT"), rec("c", "ACGT")]
        out = progressive_align(seqs, build_guide_tree(distance_matrix(seqs)))
        assert out.kind == "aligned"
        got = {r.id: r.residues.replace("-", "") for r in out.records}
        assert got == {"a": "ACGTTT", "b": "AGT", "c": "ACGT"}

    def test_width_at_least_longest_input(self):
        seqs = [rec("a", "ACGTACG"), rec("b", "AAA"), rec("c", "ACG")]
        out = progressive_align(seqs, build_guide_tree(distance_matrix(seqs)))
        assert out.nchar >= 7

    def test_row_order_follows_input(self):
        seqs = [rec("z", "ACGT"), rec("a", "ACGA"), rec("m", "TCGA")]
        out = progressive_align(seqs, build_guide_tree(distance_matrix(seqs)))
        assert out.taxa == ("z", "a", "m")

    def test_leaf_mismatch(self):
        seqs = [rec("a", "ACGT"), rec("b", "ACGA")]
        guide = GuideNode(
            0.5,
            children=(GuideNode(0, label="a"), GuideNode(0, label="zzz")),
        )
        with pytest.raises(LeafMismatch):
            progressive_align(seqs, guide)


class TestConservation:
    def test_identical_rows_all_ones(self):
        prof = conservation_profile(aln(("a", "ACGT"), ("b", "ACGT")))
        assert prof.scores == (1.0, 1.0, 1.0, 1.0) and prof.mean == 1.0

    def test_half_conserved_column(self):
        prof = conservation_profile(
            aln(("a", "A"), ("b", "A"), ("c", "C"), ("d", "G"))
        )
        assert prof.scores == (0.5,)

    def test_all_gap_column_zero(self):
        prof = conservation_profile(aln(("a", "A-"), ("b", "A-")))
        assert prof.scores == (1.0, 0.0)

    def test_requires_aligned(self):
        with pytest.raises(NotAligned):
            conservation_profile(aln(("a", "ACGT"), ("b", "AC")))

    def test_mean_one_iff_identical_gap_free(self):
        assert conservation_profile(aln(("a", "ACGT"), ("b", "ACGT"))).mean == 1.0
        assert conservation_profile(aln(("a", "AC-T"), ("b", "AC-T"))).mean < 1.0
        assert conservation_profile(aln(("a", "ACGT"), ("b", "ACGA"))).mean < 1.0


class TestRealign:
    SEQS = aln(("a", "ACGTTT"), ("b", "A-GT--"), ("c", "ACGT--"))

    def test_idempotent_after_first_pass(self):
        once = realign(self.SEQS)
        twice = realign(once)
        assert once == twice

    def test_gap_free_identical_rows_unchanged(self):
        a = aln(("a", "ACGT"), ("b", "ACGT"))
        assert realign(a) == a

    def test_taxa_preserved(self):
        assert realign(self.SEQS).taxa == self.SEQS.taxa

    def test_single_sequence(self):
        out = realign(aln(("solo", "AC-GT")))
        assert out.records[0].residues == "ACGT"


@given(
    st.lists(
        st.text(alphabet="ACGT", min_size=1, max_size=10),
        min_size=2,
        max_size=5,
    )
)
@settings(max_examples=60, deadline=None)
def test_progressive_degap_property(rows):
    seqs = [rec(f"t{i}", row) for i, row in enumerate(rows)]
    out = realign(Alignment.from_records(seqs))
    assert out.kind == "aligned"
    for r, s in zip(out.records, seqs):
        assert r.residues.replace("-", "") == s.residues
