import torch
import torch.nn.functional as F


def run(x, w_gate, w_up, w_down):
    gate = F.silu(x @ w_gate)
    return (gate * (x @ w_up)) @ w_down
