#!/usr/bin/env python3
"""Reference values for the GRU head computed with torch.

    python3 tools/fixtures/make_gru_golden.py tests/data/gru_golden.json

cell: one torch.nn.GRUCell step (input 3, hidden 2, torch seed 42).
head: two stacked torch.nn.GRU layers (input 7, hidden 4) + Linear + sigmoid
over a 5-step sequence, with the MSE loss and its autograd gradients. No
dropout, so training and inference coincide.
"""
import json
import sys

import torch


def flat(t):
    return [float(v) for v in t.detach().reshape(-1)]


def layer_dict(prefix, mod):
    return {
        "w_ih": flat(getattr(mod, "weight_ih" + prefix)),
        "w_hh": flat(getattr(mod, "weight_hh" + prefix)),
        "b_ih": flat(getattr(mod, "bias_ih" + prefix)),
        "b_hh": flat(getattr(mod, "bias_hh" + prefix)),
    }


def grad_dict(prefix, mod):
    return {
        "w_ih": flat(getattr(mod, "weight_ih" + prefix).grad),
        "w_hh": flat(getattr(mod, "weight_hh" + prefix).grad),
        "b_ih": flat(getattr(mod, "bias_ih" + prefix).grad),
        "b_hh": flat(getattr(mod, "bias_hh" + prefix).grad),
    }


def main():
    out_path = sys.argv[1] if len(sys.argv) > 1 else "tests/data/gru_golden.json"
    torch.set_default_dtype(torch.float64)

    torch.manual_seed(42)
    cell = torch.nn.GRUCell(3, 2)
    x = torch.randn(1, 3)
    h = torch.randn(1, 2)
    h_next = cell(x, h)
    cell_doc = {
        "input_dim": 3, "hidden_dim": 2,
        "w_ih": flat(cell.weight_ih), "w_hh": flat(cell.weight_hh),
        "b_ih": flat(cell.bias_ih), "b_hh": flat(cell.bias_hh),
        "x": flat(x), "h": flat(h), "h_next": flat(h_next),
    }

    torch.manual_seed(7)
    g1 = torch.nn.GRU(7, 4)
    g2 = torch.nn.GRU(4, 4)
    dense = torch.nn.Linear(4, 1)
    seq = torch.randn(5, 1, 7)
    target = torch.rand(5)
    o1, _ = g1(seq)
    o2, _ = g2(o1)
    y = torch.sigmoid(dense(o2).reshape(-1))
    loss = torch.mean((y - target) ** 2)
    loss.backward()
    head_doc = {
        "input_dim": 7, "hidden_dim": 4, "steps": 5,
        "layer1": layer_dict("_l0", g1), "layer2": layer_dict("_l0", g2),
        "dense_w": flat(dense.weight), "dense_b": float(dense.bias.detach()),
        "sequence": flat(seq), "target": flat(target),
        "output": flat(y), "loss": float(loss.detach()),
        "grad": {
            "layer1": grad_dict("_l0", g1), "layer2": grad_dict("_l0", g2),
            "dense_w": flat(dense.weight.grad), "dense_b": float(dense.bias.grad),
        },
    }
    with open(out_path, "w") as f:
        json.dump({"cell": cell_doc, "head": head_doc}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
