import numpy as np
import pytest

from pathfusion import autodiff as ad
from pathfusion import pathways as pw
from pathfusion.errors import ConfigError, ContractError, DataError, ParseError
from pathfusion.rng import Rng


def write_gmt(tmp_path, text, name="sets.gmt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestParseGeneSets:
    def test_dedup_within_set(self, tmp_path):
        p = write_gmt(tmp_path, "HALLMARK_X\tdesc\tA\tB\tA\n")
        defs = pw.parse_gene_sets(p)
        assert len(defs) == 1
        assert defs[0].members == ("A", "B")

    def test_empty_file(self, tmp_path):
        p = write_gmt(tmp_path, "")
        assert pw.parse_gene_sets(p) == []

    def test_two_line_fixture(self, tmp_path):
        p = write_gmt(tmp_path, "S1\tfirst\tA\tB\tC\nS2\tsecond\tC\tD\n")
        defs = pw.parse_gene_sets(p)
        assert [d.name for d in defs] == ["S1", "S2"]
        assert defs[0].members == ("A", "B", "C")
        assert defs[1].members == ("C", "D")

    def test_malformed_line_reports_number(self, tmp_path):
        p = write_gmt(tmp_path, "S1\tdesc\tA\nS2_only_two_fields\tdesc\n")
        with pytest.raises(ParseError, match="line 2"):
            pw.parse_gene_sets(p)

    def test_duplicate_name_conflict(self, tmp_path):
        p = write_gmt(tmp_path, "S1\ta\tA\nS1\tb\tB\n")
        with pytest.raises(DataError, match="duplicate"):
            pw.parse_gene_sets(p)

    def test_blank_lines_skipped(self, tmp_path):
        p = write_gmt(tmp_path, "S1\tdesc\tA\tB\n\n")
        assert len(pw.parse_gene_sets(p)) == 1


class TestCoverageFilter:
    def setup_method(self):
        members = tuple(f"G{i}" for i in range(10))
        self.defs = [pw.PathwayDefinition("TEN", "d", members)]

    def test_boundary_inclusive(self):
        # 9 of 10 present at threshold 0.9 stays in
        genes = [f"G{i}" for i in range(9)] + ["OTHER"]
        kept = pw.filter_by_coverage(self.defs, genes, 0.9)
        assert len(kept) == 1
        assert len(kept[0].indices) == 9
        assert np.all(np.diff(kept[0].indices) > 0)

    def test_below_threshold_dropped(self):
        genes = [f"G{i}" for i in range(8)] + ["X1", "X2"]
        assert pw.filter_by_coverage(self.defs, genes, 0.9) == []

    def test_bad_threshold(self):
        with pytest.raises(ContractError):
            pw.filter_by_coverage(self.defs, ["G0"], 0.0)

    def test_granularity_values(self):
        for g in pw.GRANULARITIES:
            assert pw.check_granularity(g) == g
        with pytest.raises(ConfigError, match="nope"):
            pw.check_granularity("nope")


class TestNormalizer:
    def test_zscores_per_gene(self):
        x = np.array([[1.0, 10.0], [3.0, 30.0], [5.0, 50.0]])
        norm = pw.Normalizer.fit(x)
        z = norm.transform(np.array([3.0, 30.0]))
        assert np.allclose(z, 0.0)
        z2 = norm.transform(x[0])
        assert np.allclose(z2, [-np.sqrt(1.5), -np.sqrt(1.5)])

    def test_constant_gene_maps_to_zero(self):
        x = np.array([[2.0, 1.0], [2.0, 3.0]])
        norm = pw.Normalizer.fit(x)
        assert norm.transform(np.array([2.0, 2.0]))[0] == 0.0

    def test_length_checked(self):
        norm = pw.Normalizer.fit(np.ones((3, 4)))
        with pytest.raises(ContractError):
            norm.transform(np.ones(5))


def toy_encoder(d=4, seed=2024):
    defs = [
        pw.PathwayDefinition("SET_A", "d", ("G0", "G1", "G2"), np.array([0, 1, 2])),
        pw.PathwayDefinition("SET_B", "d", ("G3", "G4"), np.array([3, 4])),
    ]
    return pw.PathwayEncoder(defs, n_genes=5, d=d, rng=Rng(seed))


class TestPathwayEncoder:
    def test_hidden_width_rule(self):
        assert pw.hidden_width(1) == 4
        assert pw.hidden_width(8) == 4
        assert pw.hidden_width(9) == 5
        assert pw.hidden_width(100) == 50

    def test_structural_sparsity(self):
        enc = toy_encoder()
        base = np.array([[0.5, -1.0, 2.0, 0.3, -0.7]])

        def run(vec):
            return enc.encode(ad.Tape().constant(vec), training=False).data

        t0 = run(base)
        # gene 3 belongs only to SET_B: row 0 must be bit-identical
        bumped = base.copy()
        bumped[0, 3] += 1.0
        t1 = run(bumped)
        assert np.array_equal(t0[0], t1[0])
        assert not np.array_equal(t0[1], t1[1])

    def test_gene_in_no_pathway_changes_nothing(self):
        defs = [pw.PathwayDefinition("S", "d", ("G0", "G1"), np.array([0, 1]))]
        enc = pw.PathwayEncoder(defs, n_genes=3, d=4, rng=Rng(7))
        a = enc.encode(ad.Tape().constant([[1.0, 2.0, 3.0]]), training=False).data
        b = enc.encode(ad.Tape().constant([[1.0, 2.0, 99.0]]), training=False).data
        assert np.array_equal(a, b)

    def test_golden_snapshot(self):
        # frozen output of the 2-pathway, d=4, seed-2024 toy encoder
        enc = toy_encoder()
        tokens = enc.encode(
            ad.Tape().constant([[0.5, -1.0, 2.0, 0.3, -0.7]]), training=False
        )
        golden = np.array(
            [
                [0.10606885001168606, -1.4202108559622235,
                 -0.4573481858939392, -0.5487485870769849],
                [-0.1105636131994563, 0.22345155348161042,
                 -0.3826451250351504, 0.1516499921687286],
            ]
        )
        assert np.max(np.abs(tokens.data - golden)) < 1e-15

    def test_jacobian_sparsity_by_finite_differences(self):
        defs = [
            pw.PathwayDefinition("A", "d", ("G0", "G1"), np.array([0, 1])),
            pw.PathwayDefinition("B", "d", ("G2",), np.array([2])),
            pw.PathwayDefinition("C", "d", ("G1", "G3"), np.array([1, 3])),
        ]
        enc = pw.PathwayEncoder(defs, n_genes=4, d=3, rng=Rng(11))
        base = np.array([[0.2, -0.4, 0.9, 1.1]])
        t0 = enc.encode(ad.Tape().constant(base), training=False).data
        member = {0: {0}, 1: {0, 2}, 2: {1}, 3: {2}}  # gene -> pathway rows
        for j in range(4):
            bumped = base.copy()
            bumped[0, j] += 1e-4
            t1 = enc.encode(ad.Tape().constant(bumped), training=False).data
            for i in range(3):
                changed = not np.array_equal(t0[i], t1[i])
                assert changed == (i in member[j]), (i, j)

    def test_flatten_matches_row_concat(self):
        enc = toy_encoder()
        tokens = enc.encode(
            ad.Tape().constant([[0.1, 0.2, 0.3, 0.4, 0.5]]), training=False
        ).data
        flat = tokens.reshape(-1)
        assert np.array_equal(flat[:4], tokens[0])
        assert np.array_equal(flat[4:], tokens[1])

    def test_eval_mode_deterministic(self):
        enc = toy_encoder()
        vec = [[0.5, -1.0, 2.0, 0.3, -0.7]]
        a = enc.encode(ad.Tape().constant(vec), training=False).data
        b = enc.encode(ad.Tape().constant(vec), training=False).data
        assert np.array_equal(a, b)

    def test_training_dropout_needs_rng(self):
        enc = toy_encoder()
        with pytest.raises(ContractError):
            enc.encode(ad.Tape().constant([[0.0] * 5]), training=True)

    def test_length_mismatch(self):
        enc = toy_encoder()
        with pytest.raises(ContractError):
            enc.encode(ad.Tape().constant([[1.0, 2.0]]), training=False)

    def test_gradients_flow_to_weights_and_input(self):
        enc = toy_encoder()
        g = ad.Parameter([[0.5, -1.0, 2.0, 0.3, -0.7]], "g")
        probe = Rng(3).normal_matrix(2, 4)

        def build():
            tape = ad.Tape()
            return ad.weighted_sum(enc.encode(tape.read(g), training=False), probe)

        from helpers import check_gradients

        params = enc.parameters() + [g]
        assert check_gradients(build, params) < 1e-4
