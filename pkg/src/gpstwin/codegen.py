"""C/A spreading codes and the LNAV navigation message.

Bits are carried as 0/1 integers internally and mapped to signal levels with
``level = 1 - 2*bit`` (logic 0 -> +1, logic 1 -> -1).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import CA_LEN, F_CA, SUBFRAME_SECONDS

# G2 output delay (chips) per PRN 1..32
G2_DELAY = (5, 6, 7, 8, 17, 18, 139, 140, 141, 251, 252, 254, 255, 256, 257, 258,
            469, 470, 471, 472, 473, 474, 509, 512, 513, 514, 515, 516, 859, 860, 861, 862)

PREAMBLE = np.array([1, 0, 0, 0, 1, 0, 1, 1], dtype=np.uint8)
BITS_PER_WORD = 30
BITS_PER_SUBFRAME = 300
PAGE18_SV_ID = 56


@dataclass(frozen=True)
class SpreadingCode:
    prn: int
    chips: np.ndarray          # int8, +-1
    chip_rate: float = F_CA

    def __len__(self):
        return len(self.chips)

    def at(self, index):
        return self.chips[np.mod(np.asarray(index, dtype=np.int64), CA_LEN)]


def _lfsr(taps, n=CA_LEN):
    reg = np.ones(10, dtype=np.uint8)
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        out[i] = reg[9]
        fb = np.bitwise_xor.reduce(reg[[t - 1 for t in taps]])
        reg[1:] = reg[:-1]
        reg[0] = fb
    return out


@lru_cache(maxsize=None)
def _g1_g2():
    return _lfsr((3, 10)), _lfsr((2, 3, 6, 8, 9, 10))


@lru_cache(maxsize=None)
def _ca_cached(prn):
    g1, g2 = _g1_g2()
    bits = g1 ^ np.roll(g2, G2_DELAY[prn - 1])
    chips = (1 - 2 * bits.astype(np.int8)).astype(np.int8)
    chips.flags.writeable = False
    return chips


def ca_code(prn: int) -> SpreadingCode:
    """1023-chip Gold code: G1 xor a PRN-specific delayed copy of G2."""
    if not 1 <= int(prn) <= 32:
        raise ValueError(f"PRN {prn} outside 1..32")
    return SpreadingCode(int(prn), _ca_cached(int(prn)))


def ca_bits(prn: int) -> np.ndarray:
    return ((1 - ca_code(prn).chips) // 2).astype(np.uint8)


def spread_symbol(d_bit, chip, secondary_chip=1):
    """Product of +-1 symbols, i.e. XOR in the logic domain."""
    for v in (d_bit, chip, secondary_chip):
        if np.any(np.abs(np.asarray(v)) != 1):
            raise ValueError("spreading inputs must be +-1")
    return np.asarray(d_bit) * np.asarray(chip) * np.asarray(secondary_chip)


# --- LNAV parity -----------------------------------------------------------

# (uses D29*, uses D30*), data bit indices 1..24 for parity bits 25..30
_PARITY = (
    (True, (1, 2, 3, 5, 6, 10, 11, 12, 13, 14, 17, 18, 20, 23)),
    (False, (2, 3, 4, 6, 7, 11, 12, 13, 14, 15, 18, 19, 21, 24)),
    (True, (1, 3, 4, 5, 7, 8, 12, 13, 14, 15, 16, 19, 20, 22)),
    (False, (2, 4, 5, 6, 8, 9, 13, 14, 15, 16, 17, 20, 21, 23)),
    (False, (1, 3, 5, 6, 7, 9, 10, 14, 15, 16, 17, 18, 21, 22, 24)),
    (True, (3, 5, 6, 8, 9, 10, 11, 13, 15, 19, 22, 23, 24)),
)


def parity_bits(d, d29s, d30s):
    """Six parity bits for 24 source data bits given the previous word's D29*, D30*."""
    out = np.empty(6, dtype=np.uint8)
    for k, (use29, idx) in enumerate(_PARITY):
        v = d29s if use29 else d30s
        for i in idx:
            v ^= int(d[i - 1])
        out[k] = v
    return out


def encode_word(d, d29s, d30s):
    """Transmitted 30-bit word: data xor D30* followed by parity."""
    d = np.asarray(d, dtype=np.uint8)
    return np.concatenate([d ^ np.uint8(d30s), parity_bits(d, d29s, d30s)])


def check_word(word, d29s, d30s):
    """Return (ok, source data bits) for a received 30-bit word."""
    word = np.asarray(word, dtype=np.uint8)
    d = word[:24] ^ np.uint8(d30s)
    return bool(np.array_equal(parity_bits(d, d29s, d30s), word[24:])), d


def _solve_tbits(d, d29s, d30s):
    """Set data bits 23-24 so the word's parity bits 29 and 30 are zero."""
    d = np.array(d, dtype=np.uint8)
    for a in (0, 1):
        for b in (0, 1):
            d[22], d[23] = a, b
            p = parity_bits(d, d29s, d30s)
            if p[4] == 0 and p[5] == 0:
                return d
    raise AssertionError("no t-bit solution")  # the equations always admit one


# --- field packing ---------------------------------------------------------

def _to_bits(value, n):
    return np.array([(value >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)


def _from_bits(bits, signed=False):
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    if signed and bits[0]:
        v -= 1 << len(bits)
    return v


def _quant(x, scale, n, signed, name):
    v = int(round(x / scale))
    lo, hi = (-(1 << (n - 1)), (1 << (n - 1)) - 1) if signed else (0, (1 << n) - 1)
    if not lo <= v <= hi:
        raise ValueError(f"{name}={x!r} does not fit {n}-bit field at scale {scale}")
    return v & ((1 << n) - 1)


# (name, bits, scale, signed, semicircle)
_SF1 = [("week", 10, 1, False, False), ("l2codes", 2, 1, False, False), ("ura", 4, 1, False, False),
        ("health", 6, 1, False, False), ("iodc_msb", 2, 1, False, False), ("l2p", 1, 1, False, False),
        ("res1", 23, 1, False, False), ("res2", 24, 1, False, False), ("res3", 24, 1, False, False),
        ("res4", 16, 1, False, False), ("tgd", 8, 2.0 ** -31, True, False), ("iodc_lsb", 8, 1, False, False),
        ("toc", 16, 2.0 ** 4, False, False), ("af2", 8, 2.0 ** -55, True, False),
        ("af1", 16, 2.0 ** -43, True, False), ("af0", 22, 2.0 ** -31, True, False)]
_SF2 = [("iode", 8, 1, False, False), ("crs", 16, 2.0 ** -5, True, False),
        ("delta_n", 16, 2.0 ** -43, True, True), ("m0", 32, 2.0 ** -31, True, True),
        ("cuc", 16, 2.0 ** -29, True, False), ("e", 32, 2.0 ** -33, False, False),
        ("cus", 16, 2.0 ** -29, True, False), ("sqrt_a", 32, 2.0 ** -19, False, False),
        ("toe", 16, 2.0 ** 4, False, False), ("fit", 1, 1, False, False), ("aodo", 5, 1, False, False)]
_SF3 = [("cic", 16, 2.0 ** -29, True, False), ("omega0", 32, 2.0 ** -31, True, True),
        ("cis", 16, 2.0 ** -29, True, False), ("i0", 32, 2.0 ** -31, True, True),
        ("crc", 16, 2.0 ** -5, True, False), ("omega", 32, 2.0 ** -31, True, True),
        ("omega_dot", 24, 2.0 ** -43, True, True), ("iode", 8, 1, False, False),
        ("idot", 14, 2.0 ** -43, True, True)]
_SF4_P18 = [("data_id", 2, 1, False, False), ("sv_id", 6, 1, False, False),
            ("a0", 8, 2.0 ** -30, True, False), ("a1", 8, 2.0 ** -27, True, False),
            ("a2", 8, 2.0 ** -24, True, False), ("a3", 8, 2.0 ** -24, True, False),
            ("b0", 8, 2.0 ** 11, True, False), ("b1", 8, 2.0 ** 14, True, False),
            ("b2", 8, 2.0 ** 16, True, False), ("b3", 8, 2.0 ** 16, True, False)]
_LAYOUT = {1: _SF1, 2: _SF2, 3: _SF3, 4: _SF4_P18, 5: [("data_id", 2, 1, False, False),
                                                      ("sv_id", 6, 1, False, False)]}


def _pack(layout, values):
    bits = []
    for name, n, scale, signed, semi in layout:
        x = values.get(name, 0)
        if semi:
            x = x / np.pi
        bits.append(_to_bits(_quant(x, scale, n, signed, name), n))
    body = np.concatenate(bits) if bits else np.zeros(0, np.uint8)
    # words 3..10 carry 8 x 24 = 192 data bits, the last 2 of word 10 are t-bits
    if len(body) > 190:
        raise AssertionError("subframe layout overflow")
    return np.concatenate([body, np.zeros(192 - len(body), np.uint8)])


def _unpack(layout, body):
    out, pos = {}, 0
    for name, n, scale, signed, semi in layout:
        v = _from_bits(body[pos:pos + n], signed) * scale
        out[name] = v * np.pi if semi else v
        pos += n
    return out


def _eph_values(eph):
    return {"week": eph.week % 1024, "health": eph.health, "iodc_msb": (eph.iodc >> 8) & 3,
            "iodc_lsb": eph.iodc & 0xFF, "tgd": eph.tgd, "toc": eph.toc, "af2": eph.af2,
            "af1": eph.af1, "af0": eph.af0, "iode": eph.iode, "crs": eph.crs, "delta_n": eph.delta_n,
            "m0": eph.m0, "cuc": eph.cuc, "e": eph.e, "cus": eph.cus, "sqrt_a": eph.sqrt_a,
            "toe": eph.toe, "cic": eph.cic, "omega0": eph.omega0, "cis": eph.cis, "i0": eph.i0,
            "crc": eph.crc, "omega": eph.omega, "omega_dot": eph.omega_dot, "idot": eph.idot}


def _iono_values(alpha, beta):
    a = list(alpha) if alpha is not None else [0.0] * 4
    b = list(beta) if beta is not None else [0.0] * 4
    return {"data_id": 1, "sv_id": PAGE18_SV_ID, "a0": a[0], "a1": a[1], "a2": a[2], "a3": a[3],
            "b0": b[0], "b1": b[1], "b2": b[2], "b3": b[3]}


def subframe_id_at(t_sow):
    return int(t_sow // SUBFRAME_SECONDS) % 5 + 1


def build_subframe(sf_id, t_start, values):
    """300 transmitted bits of one subframe starting at GPS time ``t_start``.

    The previous subframe always ends with parity bits 29-30 equal to zero, so
    D29* = D30* = 0 at the start of every subframe.
    """
    tow_count = (int(round(t_start / SUBFRAME_SECONDS)) + 1) % 100800
    tlm = np.concatenate([PREAMBLE, np.zeros(16, np.uint8)])
    how = np.concatenate([_to_bits(tow_count, 17), [0, 0], _to_bits(sf_id, 3), [0, 0]]).astype(np.uint8)
    body = _pack(_LAYOUT[sf_id], values)
    words = [tlm, how] + [body[24 * k:24 * (k + 1)] for k in range(8)]
    out = []
    d29s = d30s = 0
    for k, d in enumerate(words):
        if k in (1, 9):
            d = _solve_tbits(d, d29s, d30s)
        w = encode_word(d, d29s, d30s)
        out.append(w)
        d29s, d30s = int(w[28]), int(w[29])
    return np.concatenate(out)


@dataclass(frozen=True)
class NavMessage:
    prn: int
    t0: float               # GPS time of the first bit (a subframe boundary)
    bits: np.ndarray        # uint8 logic bits at 50 bit/s

    def levels(self):
        return (1 - 2 * self.bits.astype(np.int8)).astype(np.int8)

    def bit_at(self, t):
        k = np.floor((np.asarray(t, float) - self.t0) * 50.0).astype(np.int64)
        if np.any(k < 0) or np.any(k >= len(self.bits)):
            raise ValueError("time outside navigation message span")
        return self.bits[k]


def build_nav_message(eph, tow0, duration=30.0, alpha=None, beta=None) -> NavMessage:
    """LNAV bits from subframe boundary ``tow0`` covering ``duration`` seconds.

    Subframes 1-3 carry clock and ephemeris, subframe 4 carries page 18
    (ionosphere; UTC terms zero), subframe 5 is parity-valid filler.
    """
    if abs(tow0 / SUBFRAME_SECONDS - round(tow0 / SUBFRAME_SECONDS)) > 1e-9:
        raise ValueError("tow0 must lie on a 6 s subframe boundary")
    if alpha is None:
        alpha = eph.klobuchar_alpha
    if beta is None:
        beta = eph.klobuchar_beta
    n_sf = max(1, int(np.ceil(duration / SUBFRAME_SECONDS - 1e-9)))
    ev = _eph_values(eph)
    iono = _iono_values(alpha, beta)
    filler = {"data_id": 1, "sv_id": 0}
    parts = []
    for k in range(n_sf):
        t = tow0 + k * SUBFRAME_SECONDS
        sf = subframe_id_at(t)
        vals = ev if sf <= 3 else (iono if sf == 4 else filler)
        parts.append(build_subframe(sf, t, vals))
    return NavMessage(eph.prn, float(tow0), np.concatenate(parts))


# --- decoding --------------------------------------------------------------

@dataclass(frozen=True)
class DecodedSubframe:
    start: int              # bit index of the first preamble bit
    inverted: bool
    subframe_id: int
    tow: int                # HOW truncated TOW count (start of next subframe / 6)
    fields: dict

    @property
    def t_start(self):
        """GPS time of the subframe's leading edge."""
        return self.tow * SUBFRAME_SECONDS - SUBFRAME_SECONDS


def decode_subframe(bits300, d29s=0, d30s=0):
    """Decode one 300-bit subframe (already polarity-corrected); None on parity failure."""
    data = []
    for k in range(10):
        w = bits300[30 * k:30 * (k + 1)]
        ok, d = check_word(w, d29s, d30s)
        if not ok:
            return None
        data.append(d)
        d29s, d30s = int(w[28]), int(w[29])
    if not np.array_equal(data[0][:8], PREAMBLE):
        return None
    how = data[1]
    tow = _from_bits(how[:17])
    sf_id = _from_bits(how[19:22])
    if sf_id not in _LAYOUT:
        return None
    body = np.concatenate(data[2:])
    fields = _unpack(_LAYOUT[sf_id], body)
    if sf_id == 4 and fields.get("sv_id") != PAGE18_SV_ID:
        fields = {"sv_id": fields.get("sv_id")}
    return sf_id, tow, fields


def find_subframes(bits, max_search=None):
    """Scan a hard-decision bit stream (0/1) for parity-valid subframes.

    Either polarity is accepted: a preamble match or its complement followed
    by parity-consistent words. Returns a list of :class:`DecodedSubframe`.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    found = []
    n = len(bits)
    limit = n - BITS_PER_SUBFRAME if max_search is None else min(n - BITS_PER_SUBFRAME, max_search)
    i = 0
    while i <= limit:
        seg = bits[i:i + 8]
        inverted = None
        if np.array_equal(seg, PREAMBLE):
            inverted = False
        elif np.array_equal(seg, 1 - PREAMBLE):
            inverted = True
        if inverted is not None:
            sf = bits[i:i + BITS_PER_SUBFRAME] ^ np.uint8(inverted)
            # D29*/D30* of the preceding word, if any, else zero (true at subframe edges)
            prev = bits[i - 2:i] ^ np.uint8(inverted) if i >= 2 else np.zeros(2, np.uint8)
            res = decode_subframe(sf, int(prev[0]), int(prev[1]))
            if res is None and i >= 2:
                res = decode_subframe(sf, 0, 0)
            if res is not None:
                sf_id, tow, fields = res
                found.append(DecodedSubframe(i, inverted, sf_id, tow, fields))
                i += BITS_PER_SUBFRAME
                continue
        i += 1
    return found


def ephemeris_from_subframes(prn, subframes, template=None, week_hint=None):
    """Assemble a BroadcastEphemeris from decoded subframes 1-3 (and 4 page 18).

    Requires matching IODE in 2 and 3 and IODC low byte in 1. Returns None
    when a consistent set is not available. The broadcast week is modulo
    1024; ``week_hint`` (or ``template.week``) picks the nearest full week.
    """
    from .scenario.ephemeris import BroadcastEphemeris

    latest = {}
    for s in subframes:
        if s.subframe_id in (1, 2, 3) or (s.subframe_id == 4 and "a0" in s.fields):
            latest[s.subframe_id] = s.fields
    if not all(k in latest for k in (1, 2, 3)):
        return None
    f1, f2, f3 = latest[1], latest[2], latest[3]
    if int(f2["iode"]) != int(f3["iode"]) or int(f1["iodc_lsb"]) != int(f2["iode"]):
        return None
    alpha = beta = (0.0, 0.0, 0.0, 0.0)
    if 4 in latest:
        f4 = latest[4]
        alpha = (f4["a0"], f4["a1"], f4["a2"], f4["a3"])
        beta = (f4["b0"], f4["b1"], f4["b2"], f4["b3"])
    week = int(f1["week"])
    hint = template.week if template is not None else week_hint
    if hint is not None:
        week = week + 1024 * int(round((hint - week) / 1024))
    return BroadcastEphemeris(
        prn=prn, week=week, toe=f2["toe"], toc=f1["toc"], sqrt_a=f2["sqrt_a"], e=f2["e"],
        i0=f3["i0"], omega0=f3["omega0"], omega=f3["omega"], m0=f2["m0"], delta_n=f2["delta_n"],
        idot=f3["idot"], omega_dot=f3["omega_dot"], cuc=f2["cuc"], cus=f2["cus"], crc=f3["crc"],
        crs=f2["crs"], cic=f3["cic"], cis=f3["cis"], af0=f1["af0"], af1=f1["af1"], af2=f1["af2"],
        tgd=f1["tgd"], iode=int(f2["iode"]), iodc=int(f1["iodc_msb"]) * 256 + int(f1["iodc_lsb"]),
        health=int(f1["health"]), klobuchar_alpha=tuple(alpha), klobuchar_beta=tuple(beta))


def quantize_ephemeris(eph, alpha=None, beta=None):
    """The ephemeris a receiver would decode from the broadcast message."""
    t0 = 0.0
    msg = build_nav_message(eph, t0, 30.0, alpha, beta)
    subs = find_subframes(msg.bits)
    out = ephemeris_from_subframes(eph.prn, subs, template=eph)
    if out is None:
        raise AssertionError("roundtrip decode failed")
    return out
