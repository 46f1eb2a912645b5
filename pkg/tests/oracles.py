"""Scalar-loop reference implementations used as test oracles.

Written against plain Python floats, independent of the vectorized code.
"""
import math


def mse_loop(pred, target, length):
    """pred/target: nested lists [T][M]; only the first ``length`` frames count."""
    total, count = 0.0, 0
    for t in range(length):
        for m in range(len(target[t])):
            d = pred[t][m] - target[t][m]
            total += d * d
            count += 1
    return total, count


def bce_logit(z, y):
    # log(1 + exp(-|z|)) form for stability
    return max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))


def loss_dec_loop(mel_before, mel_out, stop_logits, mel, stop, lengths, r, double=True):
    """All arguments nested lists; stop_logits is [B][steps]."""
    se_out = se_before = 0.0
    count = 0
    for b in range(len(mel)):
        s, c = mse_loop(mel_out[b], mel[b], lengths[b])
        se_out += s
        count += c
        s, _ = mse_loop(mel_before[b], mel[b], lengths[b])
        se_before += s
    mse = se_out / count + (se_before / count if double else 0.0)
    bce_sum, n = 0.0, 0
    for b in range(len(mel)):
        for i in range(len(stop_logits[b])):
            if i * r >= lengths[b]:
                continue
            last = min((i + 1) * r, lengths[b]) - 1
            bce_sum += bce_logit(stop_logits[b][i], stop[b][last])
            n += 1
    return mse + bce_sum / n


def loss_d_loop(log_probs, singer, lengths):
    per_utt = []
    for b in range(len(log_probs)):
        acc = 0.0
        for t in range(lengths[b]):
            acc -= log_probs[b][t][singer[b]]
        per_utt.append(acc / lengths[b])
    return sum(per_utt) / len(per_utt)


def loss_melenc_loop(pred, target, lengths):
    total, count = 0.0, 0
    for b in range(len(target)):
        s, c = mse_loop(pred[b], target[b], lengths[b])
        total += s
        count += c
    return total / count


def loss_g_loop(l_dec, l_melenc, l_d, gamma, lam):
    return l_dec + gamma * l_melenc - lam * l_d


def ncc_loop(ref_hz, ref_v, hyp_hz, hyp_v):
    xs, ys = [], []
    for i in range(min(len(ref_hz), len(hyp_hz))):
        if ref_v[i] > 0 and hyp_v[i] > 0:
            xs.append(ref_hz[i])
            ys.append(hyp_hz[i])
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    dx = math.sqrt(sum((x - mx) ** 2 for x in xs))
    dy = math.sqrt(sum((y - my) ** 2 for y in ys))
    return num / (dx * dy)
