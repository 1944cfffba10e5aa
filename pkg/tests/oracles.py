"""Independent reference implementations used as test oracles.

Nothing here imports groupvoice. Most are plain loops or direct formula
evaluations, slow but easy to check by eye.
"""
import math
import struct
from itertools import permutations

import numpy as np
from scipy import integrate, stats


# ---------------------------------------------------------------- WAV bytes

def riff_wav(payload: bytes, channels: int, rate: int, bits: int, fmt_tag: int = 1,
             extensible: bool = False, sub_tag: int = 1) -> bytes:
    """Hand-built RIFF/WAVE bytes."""
    block = channels * bits // 8
    if extensible:
        guid = struct.pack("<H", sub_tag) + b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"
        fmt = struct.pack("<HHIIHHHHI", 0xFFFE, channels, rate, rate * block, block, bits, 22, bits, 0) + guid
    else:
        fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def pcm16_bytes(values) -> bytes:
    return b"".join(struct.pack("<h", int(v)) for v in values)


# ---------------------------------------------------------------- framing / transforms

def frame_count_enumerated(n: int, length: int, hop: int) -> int:
    """Count frames by stepping until the last sample is covered."""
    if n < 1:
        return 0
    count, start = 1, 0
    while start + length < n:
        start += hop
        count += 1
    return count


def hann_closed_form(n: int):
    if n == 1:
        return [1.0]
    return [0.5 - 0.5 * math.cos(2 * math.pi * k / (n - 1)) for k in range(n)]


def dft(x):
    """Direct O(N^2) one-sided DFT."""
    n = len(x)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return (np.exp(-2j * np.pi * k * t / n) * np.asarray(x)[None, :]).sum(axis=1)


def autocorr_direct(x):
    n = len(x)
    return np.array([sum(x[i] * x[i + lag] for i in range(n - lag)) for lag in range(n)])


# ---------------------------------------------------------------- scene / ica

def mix_loop(a, sources):
    m, k = len(a), len(a[0])
    n = len(sources[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for t in range(n):
            acc = 0.0
            for j in range(k):
                acc += a[i][j] * sources[j][t]
            out[i][t] = acc
    return out


def kurtosis_direct(y):
    y = np.asarray(y, dtype=float)
    mu = math.fsum(y) / len(y)
    d = y - mu
    m2 = math.fsum(d * d) / len(y)
    m4 = math.fsum(d ** 4) / len(y)
    return m4 / (m2 * m2) - 3.0


def gaussian_expectation_quad(G):
    """E G(v) for v ~ N(0, 1) by adaptive quadrature."""
    val, _ = integrate.quad(lambda u: G(u) * math.exp(-u * u / 2) / math.sqrt(2 * math.pi),
                            -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
    return val


def logcosh(u):
    a = abs(u)
    return a + math.log1p(math.exp(-2 * a)) - math.log(2)


def neg_gauss(u):
    return -math.exp(-u * u / 2)


def si_sdr_direct(est, ref):
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    a = float(np.dot(est, ref) / np.dot(ref, ref))
    target = a * ref
    resid = est - target
    return 10 * math.log10(float(np.dot(target, target)) / float(np.dot(resid, resid)))


def best_permutation_direct(est, refs):
    k = len(refs)
    best, best_score = None, -1.0
    for perm in permutations(range(k)):
        score = sum(abs(stats.pearsonr(est[perm[i]], refs[i])[0]) for i in range(k)) / k
        if score > best_score + 1e-15:
            best, best_score = perm, score
    return best, best_score


# ---------------------------------------------------------------- perturbation

def mad_loop(v, runs):
    tot, cnt = 0.0, 0
    for i in range(len(v) - 1):
        if runs[i] == runs[i + 1]:
            tot += abs(v[i + 1] - v[i])
            cnt += 1
    return tot / cnt


def pq_loop(v, k, runs):
    """Mean |centre - window mean| over in-run windows, over the overall mean, in percent."""
    tot, cnt = 0.0, 0
    half = (k - 1) // 2
    for i in range(len(v) - k + 1):
        if any(runs[i + j] != runs[i] for j in range(k)):
            continue
        s = 0.0
        for j in range(k):
            s += v[i + j]
        tot += abs(v[i + half] - s / k)
        cnt += 1
    mean = sum(v) / len(v)
    return tot / cnt / mean * 100


def shimmer_db_loop(a, runs):
    tot, cnt = 0.0, 0
    for i in range(len(a) - 1):
        if runs[i] == runs[i + 1]:
            tot += abs(20 * math.log10(a[i + 1] / a[i]))
            cnt += 1
    return tot / cnt


def classical_loop(t, a, runs, k=5):
    t, a, runs = list(map(float, t)), list(map(float, a)), list(map(int, runs))
    mt, ma = sum(t) / len(t), sum(a) / len(a)
    return {
        "jitter.local_pct": mad_loop(t, runs) / mt * 100,
        "jitter.rap_pct": pq_loop(t, 3, runs),
        f"jitter.ppq{k}_pct": pq_loop(t, k, runs),
        "jitter.mad_s": mad_loop(t, runs),
        "shimmer.local_pct": mad_loop(a, runs) / ma * 100,
        "shimmer.apq3_pct": pq_loop(a, 3, runs),
        f"shimmer.apq{k}_pct": pq_loop(a, k, runs),
        "shimmer.mad": mad_loop(a, runs),
        "shimmer.local_db": shimmer_db_loop(a, runs),
    }


# ---------------------------------------------------------------- pitch scale / psychoacoustics

def semitone_direct(f):
    return 69 + 12 * math.log(f / 440, 2)


def pstdev_semitones(f0s):
    import statistics
    return statistics.pstdev([semitone_direct(f) for f in f0s])


def trapezoid_loop(y, x):
    return sum((x[i + 1] - x[i]) * (y[i] + y[i + 1]) / 2 for i in range(len(x) - 1))


def sharpness_direct(nprime, z, k):
    """k * int N' g z dz / int N' dz with the Zwicker/DIN weighting, by trapezoids."""
    g = [1.0 if zz <= 15.8 else 0.15 * math.exp(0.42 * (zz - 15.8)) + 0.85 for zz in z]
    num = trapezoid_loop([n * gg * zz for n, gg, zz in zip(nprime, g, z)], z)
    den = trapezoid_loop(list(nprime), z)
    return k * num / den


def sine_at_spl(freq, spl, rate, seconds, full_scale_spl=94.0):
    amp = 10 ** ((spl - full_scale_spl) / 20)
    t = np.arange(int(rate * seconds)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


def band_noise(lo, hi, spl, rate, seconds, seed, full_scale_spl=94.0):
    """FFT-masked white noise at a given SPL (full-scale sine = full_scale_spl)."""
    n = int(rate * seconds)
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / rate)
    spec[(f < lo) | (f > hi)] = 0
    x = np.fft.irfft(spec, n)
    target_ms = 0.5 * 10 ** ((spl - full_scale_spl) / 10)
    return x * math.sqrt(target_ms / np.mean(x * x))


# ---------------------------------------------------------------- enhancement

def segmental_snr(clean, est, frame=882, lo=-10.0, hi=35.0):
    """Mean per-frame SNR in dB, each frame clipped to [lo, hi]."""
    vals = []
    for i in range(0, len(clean) - frame + 1, frame):
        c = clean[i:i + frame]
        e = est[i:i + frame] - c
        num = sum(v * v for v in c)
        den = max(sum(v * v for v in e), 1e-20)
        vals.append(min(hi, max(lo, 10 * math.log10(num / den))))
    return sum(vals) / len(vals)


def periodic_noise(period, repeats, seed, rms=0.1):
    """Random-phase multitone repeating every ``period`` samples.

    Every STFT frame whose hop is a multiple of ``period`` sees the same
    magnitude spectrum, so a profile averaged over it matches each frame.
    """
    rng = np.random.default_rng(seed)
    spec = np.exp(2j * np.pi * rng.uniform(size=period // 2 + 1))
    spec[0] = spec[-1] = 0
    x = np.tile(np.fft.irfft(spec, period), repeats)
    return x * rms / np.std(x)


# ---------------------------------------------------------------- pitch

def pulse_train(period_s, seconds, rate, alternate=None):
    """Unit impulses at the given spacing; ``alternate`` gives a second spacing used on odd cycles."""
    x = np.zeros(int(rate * seconds))
    t, i = 0.0, 0
    while True:
        k = int(round(t * rate))
        if k >= len(x):
            break
        x[k] = 1.0
        t += alternate if (alternate is not None and i % 2) else period_s
        i += 1
    return x


def normalized_acf_direct(frame, window):
    x = [(v - sum(frame) / len(frame)) * w for v, w in zip(frame, window)]
    rx = autocorr_direct(x)
    rw = autocorr_direct(list(window))
    return [(rx[k] / rx[0]) / (rw[k] / rw[0]) if rw[k] > 0 else math.nan for k in range(len(x))]
