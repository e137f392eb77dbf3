"""Small-field Reed-Solomon codec with errors-and-erasures decoding.

Systematic encoding over GF(2^m), m <= 12; generator roots alpha^1..alpha^(n-k).
Decoding is Berlekamp-Massey seeded with the erasure locator, Chien search
and Forney's formula. It is bounded-distance: any received word outside
``2E + S <= n - k`` raises :class:`DecodeFailure` instead of miscorrecting.

Codewords are lists of field elements, position 0 being the highest-degree
coefficient (message first, parity last).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

from .exceptions import DecodeFailure

PRIMITIVE_POLYS = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89,
    8: 0x11D, 9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053,
}


class GF2m:
    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise ValueError(f"field exponent must lie in 2..12, got {m}")
        self.m = m
        self.order = (1 << m) - 1
        exp = [0] * (2 * self.order)
        log = [0] * (self.order + 1)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= PRIMITIVE_POLYS[m]
        for i in range(self.order, 2 * self.order):
            exp[i] = exp[i - self.order]
        self.exp, self.log = exp, log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF(2^m)")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % self.order]

    def pow_alpha(self, e: int) -> int:
        return self.exp[e % self.order]

    def inv(self, a: int) -> int:
        return self.div(1, a)


@lru_cache(maxsize=None)
def _field(m: int) -> GF2m:
    return GF2m(m)


def _poly_eval_low(gf: GF2m, p: Sequence[int], x: int) -> int:
    """Evaluate a low-degree-first polynomial."""
    y = 0
    for c in reversed(p):
        y = gf.mul(y, x) ^ c
    return y


class RSCodec:
    def __init__(self, m: int, n: int, k: int):
        gf = _field(m)
        if not 1 <= k < n <= gf.order:
            raise ValueError(f"need 1 <= k < n <= {gf.order}")
        self.gf, self.m, self.n, self.k = gf, m, n, k
        self.nsym = n - k
        g = [1]  # high-degree first
        for i in range(1, self.nsym + 1):
            root = gf.pow_alpha(i)
            nxt = g + [0]
            for j, c in enumerate(g):
                nxt[j + 1] ^= gf.mul(c, root)
            g = nxt
        self.generator = g

    def encode(self, message: Sequence[int]) -> list[int]:
        if len(message) != self.k:
            raise ValueError(f"message must have {self.k} symbols")
        if any(not 0 <= s <= self.gf.order for s in message):
            raise ValueError("message symbol outside the field")
        gf, g = self.gf, self.generator
        rem = list(message) + [0] * self.nsym
        for i in range(self.k):
            coef = rem[i]
            if coef:
                for j in range(1, len(g)):
                    rem[i + j] ^= gf.mul(g[j], coef)
        return list(message) + rem[self.k:]

    def syndromes(self, word: Sequence[int]) -> list[int]:
        gf = self.gf
        out = []
        for i in range(1, self.nsym + 1):
            x = gf.pow_alpha(i)
            y = 0
            for c in word:
                y = gf.mul(y, x) ^ c
            out.append(y)
        return out

    def decode(self, word: Sequence[int], erasures: Iterable[int] = ()) -> list[int]:
        """Return the message, correcting errors and erasures within the radius."""
        gf, n, nsym = self.gf, self.n, self.nsym
        if len(word) != n:
            raise ValueError(f"received word must have {n} symbols")
        erasures = sorted(set(erasures))
        if any(not 0 <= e < n for e in erasures):
            raise ValueError("erasure position out of range")
        s = len(erasures)
        if s > nsym:
            raise DecodeFailure(f"{s} erasures exceed {nsym} parity symbols")
        word = list(word)
        synd = self.syndromes(word)
        if not any(synd):
            return word[:self.k]

        # locator polynomials are low-degree first; position p has locator X = alpha^(n-1-p)
        lam = [1]
        for p in erasures:
            x = gf.pow_alpha(n - 1 - p)
            lam = [c ^ gf.mul(x, lam[i - 1]) if i else c for i, c in enumerate(lam + [0])]
        b = list(lam)
        length = s
        for r in range(s + 1, nsym + 1):
            delta = 0
            for j in range(min(length, len(lam) - 1) + 1):
                delta ^= gf.mul(lam[j], synd[r - 1 - j])
            xb = [0] + b
            if delta == 0:
                b = xb
                continue
            size = max(len(lam), len(xb))
            t = [(lam[i] if i < len(lam) else 0) ^ gf.mul(delta, xb[i] if i < len(xb) else 0)
                 for i in range(size)]
            if 2 * length <= r + s - 1:
                inv = gf.inv(delta)
                b = [gf.mul(c, inv) for c in lam]
                length = r + s - length
            else:
                b = xb
            lam = t
        while len(lam) > 1 and lam[-1] == 0:
            lam.pop()
        degree = len(lam) - 1
        n_errors = degree - s
        if degree != length or n_errors < 0 or 2 * n_errors + s > nsym:
            raise DecodeFailure("errata locator exceeds the decoding radius")

        positions = []
        for p in range(n):
            x_inv = gf.pow_alpha(-(n - 1 - p))
            if _poly_eval_low(gf, lam, x_inv) == 0:
                positions.append(p)
        if len(positions) != degree:
            raise DecodeFailure("errata locator roots do not match its degree")

        omega = [0] * nsym
        for i in range(nsym):
            acc = 0
            for j in range(min(i, degree) + 1):
                acc ^= gf.mul(lam[j], synd[i - j])
            omega[i] = acc
        dlam = [lam[i] if i % 2 else 0 for i in range(1, len(lam))]  # formal derivative
        for p in positions:
            x_inv = gf.pow_alpha(-(n - 1 - p))
            denom = _poly_eval_low(gf, dlam, x_inv)
            if denom == 0:
                raise DecodeFailure("zero derivative at errata location")
            word[p] ^= gf.div(_poly_eval_low(gf, omega, x_inv), denom)
        if any(self.syndromes(word)):
            raise DecodeFailure("residual syndrome after correction")
        return word[:self.k]


def rs_codec_roundtrip(m: int, n: int, k: int, message: Sequence[int],
                       errors: dict[int, int] | None = None,
                       erasures: dict[int, int] | Iterable[int] = ()) -> list[int]:
    """Encode, corrupt, decode.

    ``errors`` maps position -> nonzero XOR pattern at an unflagged position;
    ``erasures`` maps flagged positions to the XOR pattern written there
    (a plain iterable of positions leaves the symbol intact but flagged).
    """
    codec = RSCodec(m, n, k)
    word = codec.encode(message)
    errors = errors or {}
    if not isinstance(erasures, dict):
        erasures = {p: 0 for p in erasures}
    if set(errors) & set(erasures):
        raise ValueError("a position cannot be both in error and erased")
    for p, v in errors.items():
        if v == 0:
            raise ValueError("error patterns must be nonzero")
        word[p] ^= v
    for p, v in erasures.items():
        word[p] ^= v
    return codec.decode(word, erasures.keys())
