import numpy as np
import pytest

from pfprune.container import Model
from pfprune.cost import compare, cost_report, count_macs, count_params, format_cost_table
from pfprune.fixtures import build_fixture
from pfprune.graph import LayerNode, NetworkGraph


def single_conv_model(n_out=16, n_in=3, k=7, h=40, w=500, bias=True):
    weights = {"C.kernel": np.zeros((n_out, n_in, k, k), dtype=np.float32)}
    refs = {"kernel": "C.kernel"}
    if bias:
        weights["C.bias"] = np.zeros(n_out, dtype=np.float32)
        refs["bias"] = "C.bias"
    graph = NetworkGraph([
        LayerNode("in", "input"),
        LayerNode("C", "conv2d", ("in",), {"padding": "same", "stride": 1}, refs),
    ])
    return Model(graph, weights, (n_in, h, w))


def dense_model(n_in=100, n_out=10):
    weights = {"D.kernel": np.zeros((n_out, n_in), dtype=np.float32),
               "D.bias": np.zeros(n_out, dtype=np.float32)}
    graph = NetworkGraph([
        LayerNode("in", "input"),
        LayerNode("F", "flatten", ("in",)),
        LayerNode("D", "dense", ("F",), {}, {"kernel": "D.kernel", "bias": "D.bias"}),
    ])
    return Model(graph, weights, (n_in, 1, 1))


class TestParamCounting:
    def test_conv_with_bias(self):
        report = count_params(single_conv_model())
        assert report.per_node["C"]["params"] == 16 * 147 + 16 == 2368

    def test_conv_without_bias(self):
        report = count_params(single_conv_model(bias=False))
        assert report.per_node["C"]["params"] == 16 * 147

    def test_dense(self):
        report = count_params(dense_model())
        assert report.per_node["D"]["params"] == 1010

    def test_batchnorm_four_per_channel_toggleable(self):
        model = build_fixture("dcase21")
        with_bn = count_params(model).total_params
        without_bn = count_params(model, include_batchnorm=False).total_params
        assert with_bn - without_bn == 4 * (16 + 16 + 32)


class TestMacCounting:
    def test_conv_example(self):
        report = count_macs(single_conv_model())
        assert report.per_node["C"]["macs"] == 40 * 500 * 147 * 16 == 47_040_000

    def test_dense_example(self):
        assert count_macs(dense_model()).per_node["D"]["macs"] == 1000

    def test_non_mac_ops_are_zero(self):
        model = build_fixture("dcase21")
        report = cost_report(model)
        for nid in ("BN1", "R1", "P2", "SM"):
            assert report.per_node[nid]["macs"] == 0

    def test_macs_scale_linearly_with_height(self):
        """Doubling input height doubles every stride-1 same conv's MACs."""
        base = count_macs(single_conv_model(h=40), (3, 40, 500))
        doubled = count_macs(single_conv_model(h=80), (3, 80, 500))
        assert doubled.per_node["C"]["macs"] == 2 * base.per_node["C"]["macs"]

    def test_input_shape_override(self):
        model = single_conv_model()
        report = count_macs(model, (3, 20, 250))
        assert report.per_node["C"]["macs"] == 20 * 250 * 147 * 16

    def test_one_filter_removal_saves_both_layers(self):
        """Removing a filter saves its own column cost plus the consumer's
        per-input-channel cost, exactly."""
        rng = np.random.default_rng(0)
        def two_conv(n1):
            w = {
                "C1.kernel": rng.standard_normal((n1, 3, 3, 3)).astype(np.float32),
                "C2.kernel": rng.standard_normal((8, n1, 5, 5)).astype(np.float32),
            }
            g = NetworkGraph([
                LayerNode("in", "input"),
                LayerNode("C1", "conv2d", ("in",), {"padding": "same"}, {"kernel": "C1.kernel"}),
                LayerNode("C2", "conv2d", ("C1",), {"padding": "same"}, {"kernel": "C2.kernel"}),
            ])
            return Model(g, w, (3, 10, 12))
        full = cost_report(two_conv(6)).total_macs
        less = cost_report(two_conv(5)).total_macs
        own = 10 * 12 * 3 * 3 * 3 * 1
        consumer = 10 * 12 * 5 * 5 * 1 * 8
        assert full - less == own + consumer


class TestFixtureCosts:
    """Regression pins for the shipped architectures (seeded weights)."""

    def test_dcase21(self):
        report = cost_report(build_fixture("dcase21"))
        assert report.total_params == 46_246
        assert report.total_macs == 286_637_800

    def test_vgg16(self):
        report = cost_report(build_fixture("vgg16"))
        assert report.total_params == 14_999_370
        assert report.total_macs == 313_463_808

    def test_vggish(self):
        report = cost_report(build_fixture("vggish"))
        assert report.total_params == 55_361_162
        assert report.total_macs == 847_119_616

    def test_resnet50(self):
        report = cost_report(build_fixture("resnet50"))
        assert report.total_params == 24_163_656
        assert report.total_macs == 315_344_896


class TestCompare:
    def test_identical_reports_zero_reduction(self):
        model = build_fixture("dcase21")
        report = cost_report(model)
        comp = compare(report, report)
        assert comp["total_params_reduction_pct"] == 0.0
        assert comp["total_macs_reduction_pct"] == 0.0
        for entry in comp["per_node"].values():
            assert entry["params_reduction_pct"] == 0.0

    def test_halved_dense(self):
        before = count_params(dense_model(n_in=100))
        after_model = dense_model(n_in=100)
        after_model.weights["D.kernel"] = np.zeros((10, 50), dtype=np.float32)
        after_model.input_shape = (50, 1, 1)
        after = count_params(after_model)
        comp = compare(before, after)
        assert comp["per_node"]["D"]["params_before"] == 1010
        assert comp["per_node"]["D"]["params_after"] == 510
        assert comp["per_node"]["D"]["params_reduction_pct"] == pytest.approx(
            100 * 500 / 1010)

    def test_mismatched_node_sets_rejected(self):
        a = count_params(dense_model())
        b = count_params(single_conv_model())
        with pytest.raises(ValueError, match="different nodes"):
            compare(a, b)


class TestTable:
    def test_format_contains_totals(self):
        text = format_cost_table(cost_report(build_fixture("dcase21")))
        assert "total" in text
        assert "46,246" in text
        assert "286,637,800" in text
