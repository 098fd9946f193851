#!/usr/bin/env python3
"""Builds the small ONNX models used by the classifier tests and records
onnxruntime outputs for a few input frames as goldens.

    python3 tools/fixtures/make_onnx_models.py tests/data/onnx
"""
import json
import sys
from pathlib import Path

import numpy as np
import onnx
import onnxruntime as ort
from onnx import TensorProto, helper, numpy_helper


def init(name, arr):
    return numpy_helper.from_array(np.asarray(arr, dtype=np.float32), name)


def model_probs(rng, classes=5, feature_dim=1280):
    """1x1x32x32 input, opset 14; conv/bn/relu/pool stack, grouped and dilated convs,
    softmax output named probs."""
    inits = [
        init("c1_w", rng.normal(0, 0.4, (8, 1, 4, 4))),
        init("c1_b", rng.normal(0, 0.1, 8)),
        init("bn_s", rng.uniform(0.5, 1.5, 8)),
        init("bn_b", rng.normal(0, 0.1, 8)),
        init("bn_m", rng.normal(0, 0.1, 8)),
        init("bn_v", rng.uniform(0.5, 1.5, 8)),
        init("c2_w", rng.normal(0, 0.4, (16, 4, 3, 3))),
        init("c2_b", rng.normal(0, 0.1, 16)),
        init("c3_w", rng.normal(0, 0.4, (16, 1, 3, 3))),
        init("clip_lo", np.array(0.0)),
        init("clip_hi", np.array(6.0)),
        init("f_w", rng.normal(0, 0.3, (feature_dim, 16))),
        init("f_b", rng.normal(0, 0.1, feature_dim)),
        init("o_w", rng.normal(0, 0.3, (classes, feature_dim))),
        init("o_b", rng.normal(0, 0.1, classes)),
    ]
    nodes = [
        helper.make_node("Conv", ["image", "c1_w", "c1_b"], ["c1"], auto_pad="SAME_UPPER", kernel_shape=[4, 4]),
        helper.make_node("BatchNormalization", ["c1", "bn_s", "bn_b", "bn_m", "bn_v"], ["bn"], epsilon=1e-5),
        helper.make_node("Relu", ["bn"], ["r1"]),
        helper.make_node("MaxPool", ["r1"], ["p1"], kernel_shape=[2, 2], strides=[2, 2]),
        helper.make_node("Conv", ["p1", "c2_w", "c2_b"], ["c2"], group=2, strides=[2, 2], pads=[1, 1, 1, 1]),
        helper.make_node("HardSwish", ["c2"], ["h2"]),
        helper.make_node("Conv", ["h2", "c3_w"], ["c3"], group=16, dilations=[2, 2], pads=[2, 2, 2, 2]),
        helper.make_node("Clip", ["c3", "clip_lo", "clip_hi"], ["k3"]),
        helper.make_node("GlobalAveragePool", ["k3"], ["gap"]),
        helper.make_node("Flatten", ["gap"], ["flat"], axis=1),
        helper.make_node("Gemm", ["flat", "f_w", "f_b"], ["features"], transB=1),
        helper.make_node("Gemm", ["features", "o_w", "o_b"], ["scores"], transB=1, alpha=0.05),
        helper.make_node("Softmax", ["scores"], ["probs"], axis=1),
    ]
    graph = helper.make_graph(
        nodes, "tiny_probs",
        [helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 1, 32, 32])],
        [helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, classes]),
         helper.make_tensor_value_info("features", TensorProto.FLOAT, [1, feature_dim])],
        inits)
    return helper.make_model(graph, ir_version=8, opset_imports=[helper.make_opsetid("", 14)])


def model_logits(rng):
    """1x3x24x20 input, opset 18 (ReduceMean axes as an input); emits logits."""
    inits = [
        init("c_w", rng.normal(0, 0.3, (6, 3, 5, 5))),
        init("c_b", rng.normal(0, 0.1, 6)),
        numpy_helper.from_array(np.array([2, 3], dtype=np.int64), "axes"),
        numpy_helper.from_array(np.array([0], dtype=np.int64), "axis0"),
        numpy_helper.from_array(np.array([1, -1], dtype=np.int64), "shape2d"),
        init("m_w", rng.normal(0, 0.5, (6, 1280))),
        init("m_b", rng.normal(0, 0.1, 1280)),
        init("o_w", rng.normal(0, 0.05, (1280, 5))),
        init("o_b", rng.normal(0, 0.1, 5)),
        init("half", np.array(0.5)),
    ]
    nodes = [
        helper.make_node("Conv", ["input", "c_w", "c_b"], ["c"], auto_pad="VALID", kernel_shape=[5, 5]),
        helper.make_node("Sigmoid", ["c"], ["sg"]),
        helper.make_node("Mul", ["c", "sg"], ["silu"]),
        helper.make_node("AveragePool", ["silu"], ["ap"], kernel_shape=[3, 3], strides=[2, 2], pads=[1, 1, 1, 1],
                         count_include_pad=0),
        helper.make_node("LeakyRelu", ["ap"], ["lr"], alpha=0.1),
        helper.make_node("HardSigmoid", ["lr"], ["hs"]),
        helper.make_node("Sub", ["hs", "half"], ["centered"]),
        helper.make_node("ReduceMean", ["centered", "axes"], ["rm"], keepdims=0),
        helper.make_node("Unsqueeze", ["rm", "axis0"], ["u"]),
        helper.make_node("Squeeze", ["u", "axis0"], ["sq"]),
        helper.make_node("Reshape", ["sq", "shape2d"], ["r2"]),
        helper.make_node("MatMul", ["r2", "m_w"], ["mm"]),
        helper.make_node("Add", ["mm", "m_b"], ["pre"]),
        helper.make_node("Tanh", ["pre"], ["features"]),
        helper.make_node("MatMul", ["features", "o_w"], ["lo"]),
        helper.make_node("Add", ["lo", "o_b"], ["logits"]),
    ]
    graph = helper.make_graph(
        nodes, "tiny_logits",
        [helper.make_tensor_value_info("input", TensorProto.FLOAT, [1, 3, 24, 20])],
        [helper.make_tensor_value_info("logits", TensorProto.FLOAT, [1, 5]),
         helper.make_tensor_value_info("features", TensorProto.FLOAT, [1, 1280])],
        inits)
    return helper.make_model(graph, ir_version=8, opset_imports=[helper.make_opsetid("", 18)])


def model_unsupported(rng):
    inits = [init("f_w", rng.normal(0, 0.3, (1280, 64))), init("o_w", rng.normal(0, 0.3, (5, 1280)))]
    nodes = [
        helper.make_node("Flatten", ["image"], ["flat"]),
        helper.make_node("Gemm", ["flat", "f_w"], ["pre"], transB=1),
        helper.make_node("Erf", ["pre"], ["features"]),
        helper.make_node("Gemm", ["features", "o_w"], ["s"], transB=1),
        helper.make_node("Softmax", ["s"], ["probs"], axis=1),
    ]
    graph = helper.make_graph(
        nodes, "unsupported",
        [helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 1, 8, 8])],
        [helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 5]),
         helper.make_tensor_value_info("features", TensorProto.FLOAT, [1, 1280])],
        inits)
    return helper.make_model(graph, ir_version=8, opset_imports=[helper.make_opsetid("", 13)])


def test_frames(h, w):
    """Deterministic grayscale patterns in [0,1]: gradient, ring, checker."""
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    grad = (x + y) / (h + w - 2)
    r = np.hypot(x - w / 2, y - h / 2)
    ring = np.exp(-((r - min(h, w) / 3) ** 2) / 6.0)
    checker = ((x // 4 + y // 4) % 2) * 0.8 + 0.1
    return [f.astype(np.float32) for f in (grad, ring, checker)]


def run_golden(path, channels, h, w):
    sess = ort.InferenceSession(str(path), providers=["CPUExecutionProvider"])
    in_name = sess.get_inputs()[0].name
    out_names = [o.name for o in sess.get_outputs()]
    entries = []
    for frame in test_frames(h, w):
        data = np.repeat(frame[None, None], channels, axis=1)
        outs = dict(zip(out_names, sess.run(None, {in_name: data})))
        cls = outs.get("probs", outs.get("logits"))
        entries.append({
            "width": w, "height": h,
            "pixels": [float(v) for v in frame.ravel()],
            "class_output": [float(v) for v in cls.ravel()],
            "features": [float(v) for v in outs["features"].ravel()],
        })
    return entries


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/onnx")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240601)

    models = {
        "tiny_probs.onnx": model_probs(rng),
        "tiny_logits.onnx": model_logits(rng),
        "four_way.onnx": model_probs(rng, classes=4),
        "short_features.onnx": model_probs(rng, feature_dim=1000),
        "unsupported_op.onnx": model_unsupported(rng),
    }
    for name, m in models.items():
        onnx.checker.check_model(m)
        onnx.save(m, out / name)

    goldens = {
        "tiny_probs.onnx": {"output": "probs", "cases": run_golden(out / "tiny_probs.onnx", 1, 32, 32)},
        "tiny_logits.onnx": {"output": "logits", "cases": run_golden(out / "tiny_logits.onnx", 3, 24, 20)},
    }
    (out / "goldens.json").write_text(json.dumps(goldens) + "\n")
    (out / "not_a_model.onnx").write_bytes(bytes(range(7, 200, 3)) * 5)


if __name__ == "__main__":
    main()
