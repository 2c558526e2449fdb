"""LLVM-level building blocks for the vectorised gate kernels.

Every vector op works on interleaved (re, im) doubles and comes with a scalar
twin that performs the *same* fused operations per component, so the scalar
tail and the vector body round identically.
"""
from __future__ import annotations

import llvmlite.binding as llvm
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

_F64 = ir.DoubleType()
_I32 = ir.IntType(32)

ISA_PATHS = ("avx512", "avx2", "generic")
_REGISTER_BITS = {"avx512": 512, "avx2": 256}


def host_isa() -> str:
    """Widest vector path the running CPU supports."""
    feats = llvm.get_host_cpu_features()
    if feats.get("avx512f"):
        return "avx512"
    if feats.get("avx2") and feats.get("fma"):
        return "avx2"
    return "generic"


def _request_vector_bits(builder, bits: int) -> None:
    # Function multiversioning by hand: without these attributes LLVM splits
    # 512-bit ops into ymm halves on cores tuned for 256-bit vectors.
    attrs = builder.function.attributes
    for key in ("min-legal-vector-width", "prefer-vector-width"):
        tag = f'"{key}"="{bits}"'
        if tag not in attrs:
            attrs._known = attrs._known | {tag}
            attrs.add(tag)


@intrinsic
def prefetch(typingctx, arr, idx):
    """Read prefetch of ``arr[idx]`` into all cache levels (never faults)."""
    sig = types.void(arr, idx)

    def codegen(context, builder, signature, args):
        ary = context.make_array(signature.args[0])(context, builder, args[0])
        i8p = ir.IntType(8).as_pointer()
        ptr = builder.bitcast(builder.gep(ary.data, [args[1]]), i8p)
        fnty = ir.FunctionType(ir.VoidType(), [i8p, _I32, _I32, _I32])
        fn = builder.module.declare_intrinsic("llvm.prefetch", [i8p], fnty)
        builder.call(fn, [ptr, ir.Constant(_I32, 0), ir.Constant(_I32, 3), ir.Constant(_I32, 1)])
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def fma(typingctx, a, b, c):
    """Single-rounding ``a * b + c``."""
    sig = types.float64(types.float64, types.float64, types.float64)

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(_F64, [_F64, _F64, _F64])
        fn = builder.module.declare_intrinsic("llvm.fma", [_F64], fnty)
        return builder.call(fn, args)

    return sig, codegen


# ---------------------------------------------------------------------------
# scalar ops: one complex pair, offsets i (up) and j (partner) in doubles
# ---------------------------------------------------------------------------

@njit(inline="always")
def hadamard_tail(sv, i, j, p):
    r = p[0]
    for c in range(2):
        a = sv[i + c]
        prod = r * sv[j + c]
        sv[i + c] = fma(r, a, prod)
        sv[j + c] = fma(r, a, -prod)


@njit(inline="always")
def swap_tail(sv, i, j, p):
    for c in range(2):
        tmp = sv[i + c]
        sv[i + c] = sv[j + c]
        sv[j + c] = tmp


@njit(inline="always")
def pauli_y_tail(sv, i, j, p):
    ur = sv[i]
    ui = sv[i + 1]
    sv[i] = sv[j + 1]
    sv[i + 1] = -sv[j]
    sv[j] = -ui
    sv[j + 1] = ur


@njit(inline="always")
def unitary_tail(sv, i, j, p):
    a00, b00, a01, b01, a10, b10, a11, b11 = p
    ur = sv[i]
    ui = sv[i + 1]
    lr = sv[j]
    li = sv[j + 1]
    sv[i] = fma(a00, ur, fma(-b00, ui, fma(a01, lr, (-b01) * li)))
    sv[i + 1] = fma(a00, ui, fma(b00, ur, fma(a01, li, b01 * lr)))
    sv[j] = fma(a10, ur, fma(-b10, ui, fma(a11, lr, (-b11) * li)))
    sv[j + 1] = fma(a10, ui, fma(b10, ur, fma(a11, li, b11 * lr)))


@njit(inline="always")
def phase_tail(sv, i, j, p):
    a, b = p
    lr = sv[j]
    li = sv[j + 1]
    sv[j] = fma(a, lr, (-b) * li)
    sv[j + 1] = fma(a, li, b * lr)


# ---------------------------------------------------------------------------
# vector ops over `width` doubles (width // 2 complex amplitudes)
# ---------------------------------------------------------------------------

class _Vec:
    def __init__(self, context, builder, sig, args, width):
        self.b = builder
        self.n = width
        self.ty = ir.VectorType(_F64, width)
        self.data = context.make_array(sig.args[0])(context, builder, args[0]).data
        self.params = args[3]
        self.param_count = sig.args[3].count

    def ptr(self, off):
        return self.b.bitcast(self.b.gep(self.data, [off]), self.ty.as_pointer())

    def load(self, off):
        return self.b.load(self.ptr(off), align=16)

    def store(self, val, off):
        self.b.store(val, self.ptr(off), align=16)

    def param(self, k):
        return self.b.extract_value(self.params, k)

    def splat(self, x):
        vec = self.b.insert_element(ir.Constant(self.ty, ir.Undefined), x, ir.Constant(_I32, 0))
        mask = ir.Constant(ir.VectorType(_I32, self.n), [0] * self.n)
        return self.b.shuffle_vector(vec, ir.Constant(self.ty, ir.Undefined), mask)

    def const(self, pattern):
        return ir.Constant(self.ty, [pattern[k % 2] for k in range(self.n)])

    def swap_re_im(self, v):
        mask = ir.Constant(ir.VectorType(_I32, self.n), [k ^ 1 for k in range(self.n)])
        return self.b.shuffle_vector(v, ir.Constant(self.ty, ir.Undefined), mask)

    def fma(self, a, b, c):
        fnty = ir.FunctionType(self.ty, [self.ty] * 3)
        fn = cgutils.get_or_insert_function(self.b.module, fnty, f"llvm.fma.v{self.n}f64")
        return self.b.call(fn, [a, b, c])

    def signed(self, x):
        # (-x, +x, -x, +x, ...); multiplying by +-1 is exact
        return self.b.fmul(self.splat(x), self.const((-1.0, 1.0)))


def _vector_intrinsic(width, bits, body):
    @intrinsic
    def op(typingctx, sv, i, j, p):
        sig = types.void(sv, i, j, p)

        def codegen(context, builder, signature, args):
            if bits:
                _request_vector_bits(builder, bits)
            body(_Vec(context, builder, signature, args, width), args[1], args[2])
            return context.get_dummy_value()

        return sig, codegen

    return op


def _hadamard_body(v, i, j):
    r = v.splat(v.param(0))
    up = v.load(i)
    prod = v.b.fmul(r, v.load(j))
    v.store(v.fma(r, up, prod), i)
    v.store(v.fma(r, up, v.b.fneg(prod)), j)


def _swap_body(v, i, j):
    up = v.load(i)
    lo = v.load(j)
    v.store(lo, i)
    v.store(up, j)


def _pauli_y_body(v, i, j):
    up = v.load(i)
    lo = v.load(j)
    v.store(v.b.fmul(v.swap_re_im(lo), v.const((1.0, -1.0))), i)
    v.store(v.b.fmul(v.swap_re_im(up), v.const((-1.0, 1.0))), j)


def _unitary_body(v, i, j):
    a00, b00, a01, b01, a10, b10, a11, b11 = (v.param(k) for k in range(8))
    up = v.load(i)
    lo = v.load(j)
    up_x = v.swap_re_im(up)
    lo_x = v.swap_re_im(lo)
    new_up = v.fma(v.splat(a00), up, v.fma(v.signed(b00), up_x,
                   v.fma(v.splat(a01), lo, v.b.fmul(v.signed(b01), lo_x))))
    new_lo = v.fma(v.splat(a10), up, v.fma(v.signed(b10), up_x,
                   v.fma(v.splat(a11), lo, v.b.fmul(v.signed(b11), lo_x))))
    v.store(new_up, i)
    v.store(new_lo, j)


def _phase_body(v, i, j):
    lo = v.load(j)
    v.store(v.fma(v.splat(v.param(0)), lo, v.b.fmul(v.signed(v.param(1)), v.swap_re_im(lo))), j)


_BODIES = {
    "hadamard": _hadamard_body,
    "swap": _swap_body,
    "pauli_y": _pauli_y_body,
    "unitary": _unitary_body,
    "phase": _phase_body,
}

TAILS = {
    "hadamard": hadamard_tail,
    "swap": swap_tail,
    "pauli_y": pauli_y_tail,
    "unitary": unitary_tail,
    "phase": phase_tail,
}


def _generic_batch(tail, complexes):
    @njit(inline="always")
    def batch(sv, i, j, p):
        for c in range(complexes):
            tail(sv, i + 2 * c, j + 2 * c, p)

    return batch


def batch_op(kind: str, isa: str, complexes: int):
    """Op processing ``complexes`` consecutive pairs in one call."""
    if isa == "generic":
        return _generic_batch(TAILS[kind], complexes)
    return _vector_intrinsic(2 * complexes, _REGISTER_BITS[isa], _BODIES[kind])
