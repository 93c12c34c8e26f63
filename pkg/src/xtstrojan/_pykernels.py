"""Pure-Python kernels. Same surface as the compiled ``_ckernels`` module.

Blocks are 16-byte ``bytes`` in FIPS-197 column-major order; round keys are
the 15 AES-256 round keys concatenated (240 bytes).
"""

from ._gf import mul_table

NR = 14

_M2 = mul_table(2)
_M3 = mul_table(3)
_M9 = mul_table(9)
_M11 = mul_table(11)
_M13 = mul_table(13)
_M14 = mul_table(14)

def _inv_mix(s):
    out = [0] * 16
    m9, m11, m13, m14 = _M9, _M11, _M13, _M14
    for c in range(0, 16, 4):
        a0, a1, a2, a3 = s[c], s[c + 1], s[c + 2], s[c + 3]
        out[c] = m14[a0] ^ m11[a1] ^ m13[a2] ^ m9[a3]
        out[c + 1] = m9[a0] ^ m14[a1] ^ m11[a2] ^ m13[a3]
        out[c + 2] = m13[a0] ^ m9[a1] ^ m14[a2] ^ m11[a3]
        out[c + 3] = m11[a0] ^ m13[a1] ^ m9[a2] ^ m14[a3]
    return out


# Columns are 32-bit words with row r in bits 8r..8r+7. Each T-table fuses
# SubBytes with one input row's MixColumns coefficients.
_MIX_COEFFS = ((2, 1, 1, 3), (3, 2, 1, 1), (1, 3, 2, 1), (1, 1, 3, 2))
_INV_COEFFS = ((14, 9, 13, 11), (11, 14, 9, 13), (13, 11, 14, 9), (9, 13, 11, 14))
_MUL = {1: list(range(256)), 2: _M2, 3: _M3, 9: _M9, 11: _M11, 13: _M13, 14: _M14}
_TABLES = {}


def _tables(box, coeffs):
    key = (bytes(box), coeffs)
    tabs = _TABLES.get(key)
    if tabs is None:
        tabs = tuple(
            [sum(_MUL[f][v] << (8 * r) for r, f in enumerate(col)) for v in (box[x] for x in range(256))]
            for col in coeffs
        )
        if len(_TABLES) > 16:
            _TABLES.clear()
        _TABLES[key] = tabs
    return tabs


def _to_words(s):
    return [s[c] | s[c + 1] << 8 | s[c + 2] << 16 | s[c + 3] << 24 for c in range(0, 16, 4)]


def _from_words(w):
    return bytes(x >> (8 * r) & 0xFF for x in w for r in range(4))


_IDENTITY = bytes(range(256))
_KEY_CACHE = {}


def _key_words(round_keys, inverse):
    ck = (bytes(round_keys), inverse)
    words = _KEY_CACHE.get(ck)
    if words is None:
        words = [_to_words(round_keys[16 * r:16 * r + 16]) for r in range(NR + 1)]
        if inverse:
            # equivalent inverse cipher: InvMixColumns on the middle round keys
            for r in range(1, NR):
                words[r] = _to_words(_inv_mix(list(round_keys[16 * r:16 * r + 16])))
        if len(_KEY_CACHE) > 64:
            _KEY_CACHE.clear()
        _KEY_CACHE[ck] = words
    return words


def _enc_words(w, rks, tabs, sbox, rounds=NR):
    t0, t1, t2, t3 = tabs
    a, b, c, d = (w[k] ^ rks[0][k] for k in range(4))
    for r in range(1, rounds):
        k = rks[r]
        a, b, c, d = (
            t0[a & 255] ^ t1[b >> 8 & 255] ^ t2[c >> 16 & 255] ^ t3[d >> 24] ^ k[0],
            t0[b & 255] ^ t1[c >> 8 & 255] ^ t2[d >> 16 & 255] ^ t3[a >> 24] ^ k[1],
            t0[c & 255] ^ t1[d >> 8 & 255] ^ t2[a >> 16 & 255] ^ t3[b >> 24] ^ k[2],
            t0[d & 255] ^ t1[a >> 8 & 255] ^ t2[b >> 16 & 255] ^ t3[c >> 24] ^ k[3],
        )
    k = rks[rounds]
    s = sbox
    return [
        (s[a & 255] | s[b >> 8 & 255] << 8 | s[c >> 16 & 255] << 16 | s[d >> 24] << 24) ^ k[0],
        (s[b & 255] | s[c >> 8 & 255] << 8 | s[d >> 16 & 255] << 16 | s[a >> 24] << 24) ^ k[1],
        (s[c & 255] | s[d >> 8 & 255] << 8 | s[a >> 16 & 255] << 16 | s[b >> 24] << 24) ^ k[2],
        (s[d & 255] | s[a >> 8 & 255] << 8 | s[b >> 16 & 255] << 16 | s[c >> 24] << 24) ^ k[3],
    ]


def _dec_words(w, rks, tabs, inv):
    t0, t1, t2, t3 = tabs
    a, b, c, d = (w[k] ^ rks[NR][k] for k in range(4))
    for r in range(NR - 1, 0, -1):
        k = rks[r]
        a, b, c, d = (
            t0[a & 255] ^ t1[d >> 8 & 255] ^ t2[c >> 16 & 255] ^ t3[b >> 24] ^ k[0],
            t0[b & 255] ^ t1[a >> 8 & 255] ^ t2[d >> 16 & 255] ^ t3[c >> 24] ^ k[1],
            t0[c & 255] ^ t1[b >> 8 & 255] ^ t2[a >> 16 & 255] ^ t3[d >> 24] ^ k[2],
            t0[d & 255] ^ t1[c >> 8 & 255] ^ t2[b >> 16 & 255] ^ t3[a >> 24] ^ k[3],
        )
    k = rks[0]
    s = inv
    return [
        (s[a & 255] | s[d >> 8 & 255] << 8 | s[c >> 16 & 255] << 16 | s[b >> 24] << 24) ^ k[0],
        (s[b & 255] | s[a >> 8 & 255] << 8 | s[d >> 16 & 255] << 16 | s[c >> 24] << 24) ^ k[1],
        (s[c & 255] | s[b >> 8 & 255] << 8 | s[a >> 16 & 255] << 16 | s[d >> 24] << 24) ^ k[2],
        (s[d & 255] | s[c >> 8 & 255] << 8 | s[b >> 16 & 255] << 16 | s[a >> 24] << 24) ^ k[3],
    ]


_ZERO_KEYS = [[0, 0, 0, 0]] * (NR + 1)


def _ms_words(w):
    return _enc_words(w, _ZERO_KEYS, _tables(_IDENTITY, _MIX_COEFFS), _IDENTITY)


def _ms_inv_words(w):
    return _dec_words(w, _ZERO_KEYS, _tables(_IDENTITY, _INV_COEFFS), _IDENTITY)


def _times_alpha_int(v):
    # little-endian 128-bit shift, reduction by x^128 + x^7 + x^2 + x + 1
    v <<= 1
    if v >> 128:
        v = (v & ((1 << 128) - 1)) ^ 0x87
    return v


def _int_words(v):
    return [v >> (32 * k) & 0xFFFFFFFF for k in range(4)]


def _words_int(w):
    return w[0] | w[1] << 32 | w[2] << 64 | w[3] << 96


def encrypt_block(block, round_keys, sbox):
    w = _enc_words(_to_words(block), _key_words(round_keys, False), _tables(sbox, _MIX_COEFFS), sbox)
    return _from_words(w)


def decrypt_block(block, round_keys, inv_sbox):
    w = _dec_words(_to_words(block), _key_words(round_keys, True), _tables(inv_sbox, _INV_COEFFS), inv_sbox)
    return _from_words(w)


def ms_forward(block):
    return _from_words(_ms_words(_to_words(block)))


def ms_inverse(block):
    return _from_words(_ms_inv_words(_to_words(block)))


def mul_alpha_pow(block, j):
    v = int.from_bytes(bytes(block), "little")
    for _ in range(j):
        v = _times_alpha_int(v)
    return v.to_bytes(16, "little")


def xts_sector(data, tweak_mask, round_keys, table, decrypt):
    """XEX every 16-byte unit of ``data``; ``tweak_mask`` is the encrypted tweak."""
    if decrypt:
        rks = _key_words(round_keys, True)
        tabs = _tables(table, _INV_COEFFS)
        crypt = lambda w: _dec_words(w, rks, tabs, table)  # noqa: E731
    else:
        rks = _key_words(round_keys, False)
        tabs = _tables(table, _MIX_COEFFS)
        crypt = lambda w: _enc_words(w, rks, tabs, table)  # noqa: E731
    data = bytes(data)
    out = []
    t = int.from_bytes(bytes(tweak_mask), "little")
    for off in range(0, len(data), 16):
        x = int.from_bytes(data[off:off + 16], "little") ^ t
        y = _words_int(crypt(_int_words(x))) ^ t
        out.append(y.to_bytes(16, "little"))
        t = _times_alpha_int(t)
    return b"".join(out)


def recover_units(cipher, tweak_image, ck):
    """Undo the linearised XTS equation unit by unit.

    ``cipher`` is one sector, ``tweak_image`` is MS of its encoded tweak and
    ``ck`` holds the 32 per-position constants back to back.
    """
    cipher, ck = bytes(cipher), bytes(ck)
    out = []
    t = int.from_bytes(bytes(tweak_image), "little")
    for off in range(0, len(cipher), 16):
        ms_t = _words_int(_ms_words(_int_words(t)))
        y = (int.from_bytes(cipher[off:off + 16], "little") ^ t ^ ms_t
             ^ int.from_bytes(ck[off:off + 16], "little"))
        out.append(_words_int(_ms_inv_words(_int_words(y))).to_bytes(16, "little"))
        t = _times_alpha_int(t)
    return b"".join(out)
