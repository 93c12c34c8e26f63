# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pykernels`` function for function."""

from libc.string cimport memcpy

DEF NR = 14

cdef unsigned char M2[256]
cdef unsigned char M3[256]
cdef unsigned char M9[256]
cdef unsigned char M11[256]
cdef unsigned char M13[256]
cdef unsigned char M14[256]
cdef int SHIFT[16]
cdef int INV_SHIFT[16]


cdef unsigned char _gmul(unsigned int a, unsigned int b) nogil:
    cdef unsigned int p = 0
    while b:
        if b & 1:
            p ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return <unsigned char>(p & 0xFF)


cdef void _init_tables():
    cdef int x, i
    for x in range(256):
        M2[x] = _gmul(x, 2)
        M3[x] = _gmul(x, 3)
        M9[x] = _gmul(x, 9)
        M11[x] = _gmul(x, 11)
        M13[x] = _gmul(x, 13)
        M14[x] = _gmul(x, 14)
    for i in range(16):
        SHIFT[i] = (i % 4) + 4 * (((i // 4) + (i % 4)) % 4)
        INV_SHIFT[i] = (i % 4) + 4 * (((i // 4) - (i % 4) + 4) % 4)


_init_tables()


cdef inline void _mix(unsigned char* s) nogil:
    cdef int c
    cdef unsigned char a0, a1, a2, a3
    for c in range(0, 16, 4):
        a0 = s[c]; a1 = s[c + 1]; a2 = s[c + 2]; a3 = s[c + 3]
        s[c] = M2[a0] ^ M3[a1] ^ a2 ^ a3
        s[c + 1] = a0 ^ M2[a1] ^ M3[a2] ^ a3
        s[c + 2] = a0 ^ a1 ^ M2[a2] ^ M3[a3]
        s[c + 3] = M3[a0] ^ a1 ^ a2 ^ M2[a3]


cdef inline void _inv_mix(unsigned char* s) nogil:
    cdef int c
    cdef unsigned char a0, a1, a2, a3
    for c in range(0, 16, 4):
        a0 = s[c]; a1 = s[c + 1]; a2 = s[c + 2]; a3 = s[c + 3]
        s[c] = M14[a0] ^ M11[a1] ^ M13[a2] ^ M9[a3]
        s[c + 1] = M9[a0] ^ M14[a1] ^ M11[a2] ^ M13[a3]
        s[c + 2] = M13[a0] ^ M9[a1] ^ M14[a2] ^ M11[a3]
        s[c + 3] = M11[a0] ^ M13[a1] ^ M9[a2] ^ M14[a3]


cdef inline void _sub_shift(unsigned char* s, const unsigned char* box, const int* perm) nogil:
    cdef unsigned char t[16]
    cdef int i
    for i in range(16):
        t[i] = box[s[perm[i]]]
    memcpy(s, t, 16)


cdef inline void _shift(unsigned char* s, const int* perm) nogil:
    cdef unsigned char t[16]
    cdef int i
    for i in range(16):
        t[i] = s[perm[i]]
    memcpy(s, t, 16)


cdef inline void _ark(unsigned char* s, const unsigned char* rk, int r) nogil:
    cdef int i
    for i in range(16):
        s[i] ^= rk[16 * r + i]


cdef void _encrypt(unsigned char* s, const unsigned char* rk, const unsigned char* box) nogil:
    cdef int r
    _ark(s, rk, 0)
    for r in range(1, NR):
        _sub_shift(s, box, SHIFT)
        _mix(s)
        _ark(s, rk, r)
    _sub_shift(s, box, SHIFT)
    _ark(s, rk, NR)


cdef void _decrypt(unsigned char* s, const unsigned char* rk, const unsigned char* inv) nogil:
    cdef int r
    _ark(s, rk, NR)
    for r in range(NR - 1, 0, -1):
        _sub_shift(s, inv, INV_SHIFT)
        _ark(s, rk, r)
        _inv_mix(s)
    _sub_shift(s, inv, INV_SHIFT)
    _ark(s, rk, 0)


cdef void _ms(unsigned char* s) nogil:
    cdef int r
    for r in range(NR - 1):
        _shift(s, SHIFT)
        _mix(s)
    _shift(s, SHIFT)


cdef void _ms_inv(unsigned char* s) nogil:
    cdef int r
    _shift(s, INV_SHIFT)
    for r in range(NR - 1):
        _inv_mix(s)
        _shift(s, INV_SHIFT)


cdef inline void _times_alpha(unsigned char* t) nogil:
    cdef int k
    cdef unsigned char carry = 0, nxt
    for k in range(16):
        nxt = t[k] >> 7
        t[k] = <unsigned char>((t[k] << 1) | carry)
        carry = nxt
    if carry:
        t[0] ^= 0x87


cdef void _check(const unsigned char[::1] buf, Py_ssize_t n, str what) except *:
    if buf.shape[0] != n:
        raise ValueError(f"{what} must be {n} bytes, got {buf.shape[0]}")


def encrypt_block(const unsigned char[::1] block, const unsigned char[::1] round_keys,
                  const unsigned char[::1] sbox):
    cdef unsigned char s[16]
    _check(block, 16, "block")
    _check(round_keys, 16 * (NR + 1), "round_keys")
    _check(sbox, 256, "sbox")
    memcpy(s, &block[0], 16)
    with nogil:
        _encrypt(s, &round_keys[0], &sbox[0])
    return (<char*>s)[:16]


def decrypt_block(const unsigned char[::1] block, const unsigned char[::1] round_keys,
                  const unsigned char[::1] inv_sbox):
    cdef unsigned char s[16]
    _check(block, 16, "block")
    _check(round_keys, 16 * (NR + 1), "round_keys")
    _check(inv_sbox, 256, "inv_sbox")
    memcpy(s, &block[0], 16)
    with nogil:
        _decrypt(s, &round_keys[0], &inv_sbox[0])
    return (<char*>s)[:16]


def ms_forward(const unsigned char[::1] block):
    cdef unsigned char s[16]
    _check(block, 16, "block")
    memcpy(s, &block[0], 16)
    _ms(s)
    return (<char*>s)[:16]


def ms_inverse(const unsigned char[::1] block):
    cdef unsigned char s[16]
    _check(block, 16, "block")
    memcpy(s, &block[0], 16)
    _ms_inv(s)
    return (<char*>s)[:16]


def mul_alpha_pow(const unsigned char[::1] block, int j):
    cdef unsigned char t[16]
    cdef int k
    _check(block, 16, "block")
    memcpy(t, &block[0], 16)
    for k in range(j):
        _times_alpha(t)
    return (<char*>t)[:16]


def xts_sector(const unsigned char[::1] data, const unsigned char[::1] tweak_mask,
               const unsigned char[::1] round_keys, const unsigned char[::1] table,
               bint decrypt):
    cdef Py_ssize_t n = data.shape[0], off
    cdef unsigned char t[16]
    cdef unsigned char x[16]
    cdef int k
    if n % 16:
        raise ValueError("data length must be a multiple of 16")
    _check(tweak_mask, 16, "tweak_mask")
    _check(round_keys, 16 * (NR + 1), "round_keys")
    _check(table, 256, "table")
    out = bytearray(n)
    cdef unsigned char[::1] o = out
    memcpy(t, &tweak_mask[0], 16)
    with nogil:
        off = 0
        while off < n:
            for k in range(16):
                x[k] = data[off + k] ^ t[k]
            if decrypt:
                _decrypt(x, &round_keys[0], &table[0])
            else:
                _encrypt(x, &round_keys[0], &table[0])
            for k in range(16):
                o[off + k] = x[k] ^ t[k]
            _times_alpha(t)
            off += 16
    return bytes(out)


def recover_units(const unsigned char[::1] cipher, const unsigned char[::1] tweak_image,
                  const unsigned char[::1] ck):
    cdef Py_ssize_t n = cipher.shape[0], off
    cdef unsigned char t[16]
    cdef unsigned char m[16]
    cdef unsigned char y[16]
    cdef int k
    if n % 16 or n > 512:
        raise ValueError("cipher must be at most one sector of whole units")
    _check(tweak_image, 16, "tweak_image")
    if ck.shape[0] < n:
        raise ValueError("ck table shorter than cipher")
    out = bytearray(n)
    cdef unsigned char[::1] o = out
    memcpy(t, &tweak_image[0], 16)
    with nogil:
        off = 0
        while off < n:
            memcpy(m, t, 16)
            _ms(m)
            for k in range(16):
                y[k] = cipher[off + k] ^ t[k] ^ m[k] ^ ck[off + k]
            _ms_inv(y)
            for k in range(16):
                o[off + k] = y[k]
            _times_alpha(t)
            off += 16
    return bytes(out)
