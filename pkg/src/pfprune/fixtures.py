"""Reference network fixtures with seeded random weights.

Four architectures used throughout audio/image classification work:
a VGGish-based audio net, the DCASE 2021 task-1 baseline, a CIFAR-sized
VGG-16, and a ResNet-50 with a small classification head.  Weights are
He-initialized from a fixed seed; real checkpoints arrive through the
exporter instead.
"""

from __future__ import annotations

import numpy as np

from .container import Model
from .graph import LayerNode, NetworkGraph, infer_shapes

__all__ = ["FIXTURES", "build_fixture", "build_dcase21", "build_vggish",
           "build_vgg16", "build_resnet50"]


class _Builder:
    def __init__(self, input_shape, seed: int):
        self.rng = np.random.default_rng(seed)
        self.input_shape = tuple(input_shape)
        self.nodes: list[LayerNode] = [LayerNode("input", "input")]
        self.weights: dict[str, np.ndarray] = {}
        self.last = "input"

    def _shape_of(self, nid: str) -> tuple[int, ...]:
        graph = NetworkGraph(list(self.nodes))
        return infer_shapes(graph, self.input_shape, self.weights)[nid]

    def _push(self, node: LayerNode) -> str:
        self.nodes.append(node)
        self.last = node.id
        return node.id

    def conv(self, nid, n_out, k, stride=1, padding="same", src=None):
        src = src or self.last
        n_in = self._shape_of(src)[0]
        scale = np.sqrt(2.0 / (n_in * k * k))
        self.weights[f"{nid}.kernel"] = (
            self.rng.standard_normal((n_out, n_in, k, k)) * scale).astype(np.float32)
        self.weights[f"{nid}.bias"] = np.zeros(n_out, dtype=np.float32)
        return self._push(LayerNode(
            nid, "conv2d", (src,), {"stride": stride, "padding": padding},
            {"kernel": f"{nid}.kernel", "bias": f"{nid}.bias"}))

    def bn(self, nid, src=None):
        src = src or self.last
        ch = self._shape_of(src)[0]
        self.weights[f"{nid}.gamma"] = self.rng.uniform(0.8, 1.2, ch).astype(np.float32)
        self.weights[f"{nid}.beta"] = (self.rng.standard_normal(ch) * 0.1).astype(np.float32)
        self.weights[f"{nid}.mean"] = (self.rng.standard_normal(ch) * 0.1).astype(np.float32)
        self.weights[f"{nid}.variance"] = self.rng.uniform(0.5, 1.5, ch).astype(np.float32)
        refs = {k: f"{nid}.{k}" for k in ("gamma", "beta", "mean", "variance")}
        return self._push(LayerNode(nid, "batchnorm", (src,), {"epsilon": 1e-3}, refs))

    def relu(self, nid, src=None):
        return self._push(LayerNode(nid, "activation", (src or self.last,), {"name": "relu"}))

    def maxpool(self, nid, window, stride=None, padding="valid", src=None):
        attrs = {"window": window, "stride": stride or window, "padding": padding}
        return self._push(LayerNode(nid, "maxpool", (src or self.last,), attrs))

    def gap(self, nid, src=None):
        return self._push(LayerNode(nid, "globalavgpool", (src or self.last,)))

    def flatten(self, nid, src=None):
        return self._push(LayerNode(nid, "flatten", (src or self.last,)))

    def dense(self, nid, n_out, src=None):
        src = src or self.last
        n_in = self._shape_of(src)[0]
        scale = np.sqrt(2.0 / n_in)
        self.weights[f"{nid}.kernel"] = (
            self.rng.standard_normal((n_out, n_in)) * scale).astype(np.float32)
        self.weights[f"{nid}.bias"] = np.zeros(n_out, dtype=np.float32)
        return self._push(LayerNode(nid, "dense", (src,), {},
                                    {"kernel": f"{nid}.kernel", "bias": f"{nid}.bias"}))

    def add(self, nid, a, b):
        return self._push(LayerNode(nid, "add", (a, b)))

    def softmax(self, nid, src=None):
        return self._push(LayerNode(nid, "softmax", (src or self.last,)))

    def model(self) -> Model:
        return Model(NetworkGraph(self.nodes), self.weights, self.input_shape)


def build_dcase21(seed: int = 0) -> Model:
    """DCASE 2021 task-1 baseline: three 7x7 convs and one hidden dense.

    46,246 parameters at input (1, 40, 500), batchnorm counted 4/channel.
    """
    b = _Builder((1, 40, 500), seed)
    b.conv("C1", 16, 7)
    b.bn("BN1")
    b.relu("R1")
    b.conv("C2", 16, 7)
    b.bn("BN2")
    b.relu("R2")
    b.maxpool("P2", (5, 5))
    b.conv("C3", 32, 7)
    b.bn("BN3")
    b.relu("R3")
    b.maxpool("P3", (4, 100))
    b.flatten("F")
    b.dense("FC1", 100)
    b.relu("R4")
    b.dense("FC2", 10)
    b.softmax("SM")
    return b.model()


def build_vggish(seed: int = 0) -> Model:
    """VGGish audio embedding trunk plus a small classification head.

    Six 3x3 convs (C1-C6), a 4096 dense, a 128 dense and a 10-way
    classifier: 55,361,162 parameters at input (1, 96, 64).
    """
    b = _Builder((1, 96, 64), seed)
    b.conv("C1", 64, 3)
    b.relu("R1")
    b.maxpool("P1", (2, 2))
    b.conv("C2", 128, 3)
    b.relu("R2")
    b.maxpool("P2", (2, 2))
    b.conv("C3", 256, 3)
    b.relu("R3")
    b.conv("C4", 256, 3)
    b.relu("R4")
    b.maxpool("P3", (2, 2))
    b.conv("C5", 512, 3)
    b.relu("R5")
    b.conv("C6", 512, 3)
    b.relu("R6")
    b.maxpool("P4", (2, 2))
    b.flatten("F")
    b.dense("FC1", 4096)
    b.relu("R7")
    b.dense("FC2", 128)
    b.relu("R8")
    b.dense("FC3", 10)
    b.softmax("SM")
    return b.model()


_VGG16_PLAN = (64, 64, "P", 128, 128, "P", 256, 256, 256, "P",
               512, 512, 512, "P", 512, 512, 512, "P")


def build_vgg16(seed: int = 0) -> Model:
    """CIFAR-sized VGG-16: thirteen 3x3 convs with batchnorm, two denses.

    About 15M parameters and 313M MACs at input (3, 32, 32).
    """
    b = _Builder((3, 32, 32), seed)
    ci = pi = 0
    for item in _VGG16_PLAN:
        if item == "P":
            pi += 1
            b.maxpool(f"P{pi}", (2, 2))
        else:
            ci += 1
            b.conv(f"C{ci}", item, 3)
            b.bn(f"BN{ci}")
            b.relu(f"R{ci}")
    b.flatten("F")
    b.dense("FC1", 512)
    b.relu("RF1")
    b.dense("FC2", 10)
    b.softmax("SM")
    return b.model()


def build_resnet50(seed: int = 0, num_classes: int = 200) -> Model:
    """ResNet-50 trunk with global pooling and a small two-dense head.

    Stages 2-5 hold (3, 4, 6, 3) bottleneck blocks; the first block of a
    stage carries a conv shortcut (stride on both its first 1x1 and the
    shortcut), the rest use identity shortcuts.  About 24.16M parameters at
    input (3, 64, 64).
    """
    b = _Builder((3, 64, 64), seed)
    b.conv("conv1", 64, 7, stride=2)
    b.bn("conv1_bn")
    b.relu("conv1_relu")
    b.maxpool("pool1", (3, 3), stride=(2, 2), padding="same")

    stages = ((2, 3, 64, 256, 1), (3, 4, 128, 512, 2),
              (4, 6, 256, 1024, 2), (5, 3, 512, 2048, 2))
    for stage, blocks, mid, out, first_stride in stages:
        for bi in range(1, blocks + 1):
            prefix = f"s{stage}b{bi}"
            entry = b.last
            stride = first_stride if bi == 1 else 1
            b.conv(f"{prefix}_a", mid, 1, stride=stride)
            b.bn(f"{prefix}_a_bn")
            b.relu(f"{prefix}_a_relu")
            b.conv(f"{prefix}_b", mid, 3)
            b.bn(f"{prefix}_b_bn")
            b.relu(f"{prefix}_b_relu")
            b.conv(f"{prefix}_c", out, 1)
            b.bn(f"{prefix}_c_bn")
            main = b.last
            if bi == 1:
                b.conv(f"{prefix}_sc", out, 1, stride=stride, src=entry)
                b.bn(f"{prefix}_sc_bn")
                shortcut = b.last
            else:
                shortcut = entry
            b.add(f"{prefix}_add", main, shortcut)
            b.relu(f"{prefix}_out")
    b.gap("gap")
    b.dense("fc1", 256)
    b.relu("fc1_relu")
    b.dense("fc2", num_classes)
    b.softmax("SM")
    return b.model()


FIXTURES = {
    "dcase21": build_dcase21,
    "vggish": build_vggish,
    "vgg16": build_vgg16,
    "resnet50": build_resnet50,
}


def build_fixture(name: str, seed: int = 0) -> Model:
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture '{name}'; available: {sorted(FIXTURES)}")
    return FIXTURES[name](seed)
