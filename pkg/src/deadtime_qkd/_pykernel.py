"""Pure-Python slot loop, used when the compiled kernel is unavailable.

Must stay draw-for-draw identical to ``_kernel.pyx``; the test suite runs
both on the same configurations and compares every counter.
"""

from ._rng import Xoshiro256

NAIVE, SECURE, SELF_DISABLING = 0, 1, 2
HIST_LEN = 34  # index n counts completed sequences of n clicks; the last bin is ">= HIST_LEN - 1"

ORIGIN_SIGNAL, ORIGIN_NOISE = 0, 1


def simulate_slots(n_slots, seed, thr_signal, thr_noise, k, mode, record_bits, hist, batch_sifted, events=None):
    if mode == SELF_DISABLING:
        return _self_disabling(n_slots, seed, thr_signal, thr_noise, k, record_bits, hist, batch_sifted, events)
    return _four_detector(n_slots, seed, thr_signal, thr_noise, k, mode, record_bits, hist, batch_sifted, events)


def _four_detector(n_slots, seed, thr_signal, thr_noise, k, mode, record_bits, hist, batch_sifted, events):
    rng = Xoshiro256(seed)
    draw = rng.next
    last_bin = HIST_LEN - 1
    n_batches = len(batch_sifted)
    batch_i = 0
    batch_end = n_slots // n_batches if n_batches else -1

    dead = [0, 0, 0, 0]  # detector index = 2 * basis + bit
    seq_open = [False, False]
    seq_len = [0, 0]
    seq_done = [False, False]
    clicks = noise_clicks = sequences = sifted = transitions = bit_errors = 0
    discarded = arrivals = arrivals_idle = 0
    last_bit = -1
    bits = bytearray() if record_bits else None

    for t in range(n_slots):
        idle0 = dead[0] == 0 and dead[1] == 0
        idle1 = dead[2] == 0 and dead[3] == 0
        idle = (idle0, idle1)
        for b in (0, 1):
            if idle[b] and seq_open[b]:
                n = seq_len[b]
                hist[n if n < last_bin else last_bin] += 1
                seq_open[b] = False

        x = draw()
        a_basis = x & 1
        a_bit = (x >> 1) & 1
        fired = 0
        signal = 0
        if (x >> 11) < thr_signal:
            arrivals += 1
            b_basis = (x >> 2) & 1
            hit = a_bit if a_basis == b_basis else (x >> 3) & 1
            if idle[b_basis]:
                arrivals_idle += 1
            det = 2 * b_basis + hit
            if dead[det] == 0:
                fired = 1 << det
                signal = fired
        if thr_noise:
            for d in range(4):
                y = draw()
                if (y >> 11) < thr_noise and dead[d] == 0:
                    fired |= 1 << d

        if fired:
            n_fired = (fired & 1) + (fired >> 1 & 1) + (fired >> 2 & 1) + (fired >> 3 & 1)
            clicks += n_fired
            for d in range(4):
                if fired >> d & 1:
                    if not signal >> d & 1:
                        noise_clicks += 1
                    if events is not None:
                        assert dead[d] == 0, "click on a dead detector"
                        events.append((t, d >> 1, d & 1, (d >> 1) == a_basis, ORIGIN_SIGNAL if signal >> d & 1 else ORIGIN_NOISE))
            per_basis = ((fired & 1) + (fired >> 1 & 1), (fired >> 2 & 1) + (fired >> 3 & 1))
            for b in (0, 1):
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
                    d = fired.bit_length() - 1
                    if d >> 1 == a_basis:
                        key_bit = d & 1
            else:
                c = per_basis[a_basis]
                if c == 1 and not seq_done[a_basis]:
                    mask = (fired >> (2 * a_basis)) & 3
                    key_bit = mask >> 1
                    seq_done[a_basis] = True
            if key_bit >= 0:
                if last_bit >= 0 and key_bit != last_bit:
                    transitions += 1
                last_bit = key_bit
                sifted += 1
                if key_bit != a_bit:
                    bit_errors += 1
                if bits is not None:
                    bits.append(key_bit)

        for d in range(4):
            if fired >> d & 1:
                dead[d] = k
            elif dead[d]:
                dead[d] -= 1

        if t + 1 == batch_end:
            batch_sifted[batch_i] = sifted
            batch_i += 1
            batch_end = (batch_i + 1) * n_slots // n_batches if batch_i < n_batches else -1

    counts = (clicks, noise_clicks, sequences, sifted, transitions, bit_errors, discarded, arrivals, arrivals_idle)
    return counts, (bytes(bits) if bits is not None else None)


def _self_disabling(n_slots, seed, thr_signal, thr_noise, k, record_bits, hist, batch_sifted, events):
    rng = Xoshiro256(seed)
    draw = rng.next
    n_batches = len(batch_sifted)
    batch_i = 0
    batch_end = n_slots // n_batches if n_batches else -1

    dead = [0, 0]  # one detector per basis
    clicks = noise_clicks = sequences = sifted = transitions = bit_errors = 0
    arrivals = arrivals_idle = 0
    last_bit = -1
    bits = bytearray() if record_bits else None

    for t in range(n_slots):
        x = draw()
        a_basis = x & 1
        a_bit = (x >> 1) & 1
        fire_bit = [-1, -1]
        origin = [ORIGIN_SIGNAL, ORIGIN_SIGNAL]
        if (x >> 11) < thr_signal:
            arrivals += 1
            b_basis = (x >> 2) & 1
            if dead[b_basis] == 0:
                arrivals_idle += 1
                fire_bit[b_basis] = a_bit if a_basis == b_basis else (x >> 3) & 1
        if thr_noise:
            for b in (0, 1):
                y = draw()
                if (y >> 11) < thr_noise and dead[b] == 0 and fire_bit[b] < 0:
                    fire_bit[b] = y & 1
                    origin[b] = ORIGIN_NOISE
                    noise_clicks += 1

        for b in (0, 1):
            bit = fire_bit[b]
            if bit < 0:
                if dead[b]:
                    dead[b] -= 1
                continue
            if events is not None:
                assert dead[b] == 0, "click on a dead detector"
                events.append((t, b, bit, b == a_basis, origin[b]))
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
                if bits is not None:
                    bits.append(bit)

        if t + 1 == batch_end:
            batch_sifted[batch_i] = sifted
            batch_i += 1
            batch_end = (batch_i + 1) * n_slots // n_batches if batch_i < n_batches else -1

    counts = (clicks, noise_clicks, sequences, sifted, transitions, bit_errors, 0, arrivals, arrivals_idle)
    return counts, (bytes(bits) if bits is not None else None)
