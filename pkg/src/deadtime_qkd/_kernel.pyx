# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loop.  Mirrors ``_pykernel.py`` draw for draw."""

from libc.stdint cimport int64_t, uint64_t, uint8_t
from libc.stdlib cimport free, malloc, realloc
from cpython.bytes cimport PyBytes_FromStringAndSize

cdef enum:
    NAIVE = 0
    SELF_DISABLING = 2
    HIST_LEN = 34

HIST_BINS = HIST_LEN


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _seed(uint64_t* s, uint64_t seed) noexcept nogil:
    cdef int i
    cdef uint64_t x = seed
    for i in range(4):
        x = x + <uint64_t>0x9E3779B97F4A7C15ULL
        s[i] = _mix(x)


cdef inline uint64_t _rotl(uint64_t x, int r) noexcept nogil:
    return (x << r) | (x >> (64 - r))


cdef inline uint64_t _next(uint64_t* s) noexcept nogil:
    cdef uint64_t result = _rotl(s[1] * 5, 7) * 9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


cdef struct BitBuf:
    uint8_t* data
    int64_t size
    int64_t cap


cdef int _push(BitBuf* buf, uint8_t bit) noexcept nogil:
    cdef uint8_t* grown
    if buf.size == buf.cap:
        buf.cap = buf.cap * 2 if buf.cap else 4096
        grown = <uint8_t*>realloc(buf.data, buf.cap)
        if grown == NULL:
            return -1
        buf.data = grown
    buf.data[buf.size] = bit
    buf.size += 1
    return 0


def raw_stream(uint64_t seed, int n):
    """First ``n`` raw generator outputs, for cross-checking the Python twin."""
    cdef uint64_t s[4]
    _seed(s, seed)
    return [_next(s) for _ in range(n)]


def simulate_slots(int64_t n_slots, uint64_t seed, uint64_t thr_signal, uint64_t thr_noise,
                   int64_t k, int mode, bint record_bits, int64_t[:] hist, int64_t[:] batch_sifted,
                   events=None):
    if events is not None:
        raise ValueError("event capture is only available in the pure-Python kernel")
    cdef BitBuf buf
    buf.data = NULL
    buf.size = 0
    buf.cap = 0
    cdef int64_t counts[9]
    cdef int rc
    if mode == SELF_DISABLING:
        with nogil:
            rc = _self_disabling(n_slots, seed, thr_signal, thr_noise, k, record_bits, hist, batch_sifted, &buf, counts)
    else:
        with nogil:
            rc = _four_detector(n_slots, seed, thr_signal, thr_noise, k, mode, record_bits, hist, batch_sifted, &buf, counts)
    bits = None
    try:
        if rc != 0:
            raise MemoryError("sifted-bit buffer allocation failed")
        if record_bits:
            bits = PyBytes_FromStringAndSize(<char*>buf.data, buf.size) if buf.size else b""
    finally:
        free(buf.data)
    return tuple([counts[i] for i in range(9)]), bits


cdef int _four_detector(int64_t n_slots, uint64_t seed, uint64_t thr_signal, uint64_t thr_noise,
                        int64_t k, int mode, bint record_bits, int64_t[:] hist, int64_t[:] batch_sifted,
                        BitBuf* buf, int64_t* counts) noexcept nogil:
    cdef uint64_t s[4]
    _seed(s, seed)
    cdef int64_t last_bin = HIST_LEN - 1
    cdef int64_t n_batches = batch_sifted.shape[0]
    cdef int64_t batch_i = 0
    cdef int64_t batch_end = n_slots // n_batches if n_batches else -1

    cdef int64_t dead[4]
    cdef bint seq_open[2]
    cdef int64_t seq_len[2]
    cdef bint seq_done[2]
    cdef bint idle[2]
    cdef int per_basis[2]
    cdef int d, b, c, n_fired, key_bit, last_bit = -1
    cdef unsigned int fired, signal
    cdef uint64_t x, y
    cdef int a_basis, a_bit, b_basis, hit
    cdef int64_t t, n
    cdef int64_t clicks = 0, noise_clicks = 0, sequences = 0, sifted = 0, transitions = 0
    cdef int64_t bit_errors = 0, discarded = 0, arrivals = 0, arrivals_idle = 0

    for d in range(4):
        dead[d] = 0
    for b in range(2):
        seq_open[b] = False
        seq_len[b] = 0
        seq_done[b] = False

    for t in range(n_slots):
        idle[0] = dead[0] == 0 and dead[1] == 0
        idle[1] = dead[2] == 0 and dead[3] == 0
        for b in range(2):
            if idle[b] and seq_open[b]:
                n = seq_len[b]
                hist[n if n < last_bin else last_bin] += 1
                seq_open[b] = False

        x = _next(s)
        a_basis = <int>(x & 1)
        a_bit = <int>((x >> 1) & 1)
        fired = 0
        signal = 0
        if (x >> 11) < thr_signal:
            arrivals += 1
            b_basis = <int>((x >> 2) & 1)
            hit = a_bit if a_basis == b_basis else <int>((x >> 3) & 1)
            if idle[b_basis]:
                arrivals_idle += 1
            d = 2 * b_basis + hit
            if dead[d] == 0:
                fired = 1u << d
                signal = fired
        if thr_noise:
            for d in range(4):
                y = _next(s)
                if (y >> 11) < thr_noise and dead[d] == 0:
                    fired |= 1u << d

        if fired:
            n_fired = (fired & 1) + (fired >> 1 & 1) + (fired >> 2 & 1) + (fired >> 3 & 1)
            clicks += n_fired
            noise_clicks += n_fired - (1 if signal else 0)
            per_basis[0] = (fired & 1) + (fired >> 1 & 1)
            per_basis[1] = (fired >> 2 & 1) + (fired >> 3 & 1)
            for b in range(2):
                c = per_basis[b]
                if c:
                    if idle[b]:
                        seq_open[b] = True
                        seq_len[b] = c
                        seq_done[b] = False
                        sequences += 1
                    else:
                        seq_len[b] += c

            key_bit = -1
            if mode == NAIVE:
                if n_fired > 1:
                    discarded += 1
                else:
                    d = 0
                    while not (fired >> d & 1):
                        d += 1
                    if d >> 1 == a_basis:
                        key_bit = d & 1
            else:
                c = per_basis[a_basis]
                if c == 1 and not seq_done[a_basis]:
                    key_bit = <int>(((fired >> (2 * a_basis)) & 3) >> 1)
                    seq_done[a_basis] = True
            if key_bit >= 0:
                if last_bit >= 0 and key_bit != last_bit:
                    transitions += 1
                last_bit = key_bit
                sifted += 1
                if key_bit != a_bit:
                    bit_errors += 1
                if record_bits:
                    if _push(buf, <uint8_t>key_bit) != 0:
                        return -1

        for d in range(4):
            if fired >> d & 1:
                dead[d] = k
            elif dead[d]:
                dead[d] -= 1

        if t + 1 == batch_end:
            batch_sifted[batch_i] = sifted
            batch_i += 1
            batch_end = (batch_i + 1) * n_slots // n_batches if batch_i < n_batches else -1

    counts[0] = clicks
    counts[1] = noise_clicks
    counts[2] = sequences
    counts[3] = sifted
    counts[4] = transitions
    counts[5] = bit_errors
    counts[6] = discarded
    counts[7] = arrivals
    counts[8] = arrivals_idle
    return 0


cdef int _self_disabling(int64_t n_slots, uint64_t seed, uint64_t thr_signal, uint64_t thr_noise,
                         int64_t k, bint record_bits, int64_t[:] hist, int64_t[:] batch_sifted,
                         BitBuf* buf, int64_t* counts) noexcept nogil:
    cdef uint64_t s[4]
    _seed(s, seed)
    cdef int64_t n_batches = batch_sifted.shape[0]
    cdef int64_t batch_i = 0
    cdef int64_t batch_end = n_slots // n_batches if n_batches else -1

    cdef int64_t dead[2]
    cdef int fire_bit[2]
    cdef int b, bit, last_bit = -1
    cdef uint64_t x, y
    cdef int a_basis, a_bit, b_basis
    cdef int64_t t
    cdef int64_t clicks = 0, noise_clicks = 0, sequences = 0, sifted = 0, transitions = 0
    cdef int64_t bit_errors = 0, arrivals = 0, arrivals_idle = 0

    dead[0] = 0
    dead[1] = 0
    for t in range(n_slots):
        x = _next(s)
        a_basis = <int>(x & 1)
        a_bit = <int>((x >> 1) & 1)
        fire_bit[0] = -1
        fire_bit[1] = -1
        if (x >> 11) < thr_signal:
            arrivals += 1
            b_basis = <int>((x >> 2) & 1)
            if dead[b_basis] == 0:
                arrivals_idle += 1
                fire_bit[b_basis] = a_bit if a_basis == b_basis else <int>((x >> 3) & 1)
        if thr_noise:
            for b in range(2):
                y = _next(s)
                if (y >> 11) < thr_noise and dead[b] == 0 and fire_bit[b] < 0:
                    fire_bit[b] = <int>(y & 1)
                    noise_clicks += 1

        for b in range(2):
            bit = fire_bit[b]
            if bit < 0:
                if dead[b]:
                    dead[b] -= 1
                continue
            clicks += 1
            sequences += 1
            hist[1] += 1
            dead[b] = k
            if b == a_basis:
                if last_bit >= 0 and bit != last_bit:
                    transitions += 1
                last_bit = bit
                sifted += 1
                if bit != a_bit:
                    bit_errors += 1
                if record_bits:
                    if _push(buf, <uint8_t>bit) != 0:
                        return -1

        if t + 1 == batch_end:
            batch_sifted[batch_i] = sifted
            batch_i += 1
            batch_end = (batch_i + 1) * n_slots // n_batches if batch_i < n_batches else -1

    counts[0] = clicks
    counts[1] = noise_clicks
    counts[2] = sequences
    counts[3] = sifted
    counts[4] = transitions
    counts[5] = bit_errors
    counts[6] = 0
    counts[7] = arrivals
    counts[8] = arrivals_idle
    return 0
