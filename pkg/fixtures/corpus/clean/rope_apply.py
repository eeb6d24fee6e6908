import torch


def run(q, cos, sin):
    q1, q2 = q.chunk(2, dim=-1)
    rotated = torch.cat((-q2, q1), dim=-1)
    return q * cos + rotated * sin
