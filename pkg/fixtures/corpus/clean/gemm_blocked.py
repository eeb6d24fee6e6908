import torch


def run(a, b, block=256):
    # Block over the contracted axis; accumulation stays in fp32.
    out = torch.zeros(a.shape[0], b.shape[1], dtype=torch.float32, device=a.device)
    for start in range(0, a.shape[1], block):
        stop = min(start + block, a.shape[1])
        out += a[:, start:stop].float() @ b[start:stop, :].float()
    return out.to(a.dtype)
