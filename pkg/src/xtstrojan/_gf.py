"""GF(2^8) arithmetic shared by the cipher and the table generators."""

AES_POLY = 0x11B


def gf256_mul(a: int, b: int) -> int:
    """Multiply two field elements modulo x^8 + x^4 + x^3 + x + 1."""
    a &= 0xFF
    b &= 0xFF
    product = 0
    while b:
        if b & 1:
            product ^= a
        a <<= 1
        if a & 0x100:
            a ^= AES_POLY
        b >>= 1
    return product


def mul_table(factor: int) -> bytes:
    return bytes(gf256_mul(x, factor) for x in range(256))


def gf256_inverse(a: int) -> int:
    # a^254 == a^-1 for nonzero a; 0 maps to 0 as in the S-box construction
    if a == 0:
        return 0
    result, base, e = 1, a, 254
    while e:
        if e & 1:
            result = gf256_mul(result, base)
        base = gf256_mul(base, base)
        e >>= 1
    return result
