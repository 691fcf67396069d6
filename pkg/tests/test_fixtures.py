import numpy as np
import pytest

from pfprune.fixtures import FIXTURES, build_fixture
from pfprune.forward import run_network
from pfprune.graph import discover_groups


class TestArchitectures:
    def test_conv_layer_counts(self):
        assert len(build_fixture("dcase21").graph.conv_ids()) == 3
        assert len(build_fixture("vggish").graph.conv_ids()) == 6
        assert len(build_fixture("vgg16").graph.conv_ids()) == 13
        assert len(build_fixture("resnet50").graph.conv_ids()) == 53

    def test_all_fixtures_validate(self):
        for name in FIXTURES:
            model = build_fixture(name)
            shapes = model.shapes()
            assert shapes["SM"][-1] in (10, 200)

    def test_seeded_weights_are_reproducible(self):
        a = build_fixture("dcase21", seed=3)
        b = build_fixture("dcase21", seed=3)
        c = build_fixture("dcase21", seed=4)
        assert a.content_hash() == b.content_hash()
        assert a.content_hash() != c.content_hash()

    def test_unknown_fixture(self):
        with pytest.raises(ValueError, match="unknown fixture"):
            build_fixture("lenet")

    def test_dcase21_shapes(self):
        shapes = build_fixture("dcase21").shapes()
        assert shapes["C1"] == (16, 40, 500)
        assert shapes["P2"] == (16, 8, 100)
        assert shapes["P3"] == (32, 2, 1)
        assert shapes["F"] == (64,)

    def test_vggish_shapes(self):
        shapes = build_fixture("vggish").shapes()
        assert shapes["C6"] == (512, 12, 8)
        assert shapes["F"] == (12288,)

    def test_resnet50_stage_groups(self):
        """Each stage's adds chain the block-exit convs and the conv shortcut
        into one shared-mask group."""
        model = build_fixture("resnet50")
        groups = discover_groups(model.graph)
        multi = sorted((g for g in groups if len(g.members) > 1),
                       key=lambda g: g.members[0])
        assert len(multi) == 4
        sizes = {g.members[0][:2]: len(g.members) for g in multi}
        # blocks per stage + 1 conv shortcut
        assert sizes == {"s2": 4, "s3": 5, "s4": 7, "s5": 4}
        for g in multi:
            assert g.prunable
            stage = g.members[0][:2]
            assert any(m.endswith("_sc") for m in g.members)
            assert all(m.startswith(stage) for m in g.members)

    def test_resnet50_main_branch_convs_are_singletons(self):
        model = build_fixture("resnet50")
        groups = discover_groups(model.graph)
        singles = {g.members[0] for g in groups if len(g.members) == 1}
        for stage, blocks in ((2, 3), (3, 4), (4, 6), (5, 3)):
            for bi in range(1, blocks + 1):
                assert f"s{stage}b{bi}_a" in singles
                assert f"s{stage}b{bi}_b" in singles

    def test_resnet50_forward_runs(self):
        model = build_fixture("resnet50")
        x = np.random.default_rng(0).standard_normal((3, 64, 64)).astype(np.float32)
        acts = run_network(model.graph, model.weights, x, model.flatten_order)
        assert acts["SM"].shape == (200,)
        assert np.isfinite(acts["SM"]).all()
        assert acts["SM"].sum() == pytest.approx(1.0, abs=1e-5)
