"""The four exploration algorithms, wired to the stack machine and the
sphere-sweep geometry, plus the integer oracles used to cross-check them.

All drivers are finite programs: loop counters are bounded by n or by the
eight octahedron faces; every quantity that grows with the search radius
lives in the world as a distance between agents, never in a state token.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .protocol import Driver, StackMember
from .runtime import RunConfig
from .scheduler import ActivationPolicy
from .stack import T as STACK_T
from .stack import P, VARIANTS, W

# ---------------------------------------------------------------------------
# Randomized exploration (stack-backed random walks, one round per marker).
#
# Logical stack format, in pop order: (0*1)^n — a separator 1 is pushed
# before each dimension's zeros, which is the only placement that lets the
# unwind recover the first dimension from a plain integer stack.
# ---------------------------------------------------------------------------

RT: dict = dict(STACK_T)


def deftab(tab, fn, label):
    def reg(h):
        tab.setdefault(fn, {})[label] = h
        return h

    return reg


def _bitsign(r_word, j):
    return 1 if (r_word >> j) & 1 else -1


@deftab(RT, "rand_main", "entry")
def _(s, l, r):
    return ("prim", ("mark", "round"), "round", ())


@deftab(RT, "rand_main", "round")
def _(s, l, r):
    return ("goto", "draw", (0, 0))  # (bits_drawn, r_word)


@deftab(RT, "rand_main", "draw")
def _(s, l, r):
    drawn, word = l
    if drawn == s.n:
        return ("call", "rand_dim", (word, 1), "done", l)
    return ("prim", ("coin", 1), "draw_bit", l)


@deftab(RT, "rand_main", "draw_bit")
def _(s, l, r):
    drawn, word = l
    return ("goto", "draw", (drawn + 1, word | (r << drawn)))


@deftab(RT, "rand_main", "done")
def _(s, l, r):
    return ("goto", "entry", ())


# rand_dim: walk dimension i (1-based), locals (r_word, i)
@deftab(RT, "rand_dim", "entry")
def _(s, l, r):
    return ("call", s.pushfn, (1,), "sep_done", l)  # separator before dim i


@deftab(RT, "rand_dim", "sep_done")
def _(s, l, r):
    return ("goto", "flip", l)


@deftab(RT, "rand_dim", "flip")
def _(s, l, r):
    return ("prim", ("coin", s.p_bits), "flipped", l)


@deftab(RT, "rand_dim", "flipped")
def _(s, l, r):
    word, i = l
    if r < s.p_num:  # keep walking this dimension (probability p per step)
        return ("call", s.pushfn, (0,), "pushed", l)
    if i < s.n:
        return ("call", "rand_dim", (word, i + 1), "deeper", l)
    return ("call", "rand_unwind", (word, s.n), "unwound", l)


@deftab(RT, "rand_dim", "pushed")
def _(s, l, r):
    word, i = l
    return ("call", "op_move", (i - 1, _bitsign(word, i - 1)) + s.move_extra,
            "flip", l)


@deftab(RT, "rand_dim", "deeper")
def _(s, l, r):
    return ("ret", None)


@deftab(RT, "rand_dim", "unwound")
def _(s, l, r):
    return ("ret", None)


# rand_unwind: pops drive the return walk; locals (r_word, i)
@deftab(RT, "rand_unwind", "entry")
def _(s, l, r):
    return ("call", s.popfn, (), "bit", l)


@deftab(RT, "rand_unwind", "bit")
def _(s, l, r):
    word, i = l
    if r == 0:
        return ("call", "op_move", (i - 1, -_bitsign(word, i - 1)) + s.move_extra,
                "moved", l)
    if i == 1:  # the sentinel separator: round complete, back at the origin
        return ("ret", None)
    return ("goto", "entry", (word, i - 1))


@deftab(RT, "rand_unwind", "moved")
def _(s, l, r):
    return ("goto", "entry", l)


class RandomizedDriver(Driver):
    """Alg.-style randomized rounds: 3 synchronous or 4 semi-sync agents."""

    tables = RT
    main = "rand_main"

    def __init__(self, n: int, model: str, p_num: int = 1, p_bits: int = 2):
        if not (0 < p_num < (1 << p_bits)):
            raise ValueError("p must be in (0,1) with dyadic representation")
        self.n = n
        self.p_num = p_num
        self.p_bits = p_bits
        sync = model == "synchronous"
        self.pushfn = "op_push_sync" if sync else "op_push_semi"
        self.popfn = "op_pop_sync" if sync else "op_pop_semi"
        self.move_extra = (("d",) if sync else ("d", "c"), False)


# ---------------------------------------------------------------------------
# Deterministic exploration: enumerate backup values, interpret each as a
# walk, run it forward and mirrored to return.
# ---------------------------------------------------------------------------

DT: dict = dict(STACK_T)


@deftab(DT, "det_main", "entry")
def _(s, l, r):
    return ("call", "op_inc_backup", (), "bumped", (0,))


@deftab(DT, "det_main", "bumped")
def _(s, l, r):
    return ("prim", ("mark", "backup"), "r_loop", (0,))


@deftab(DT, "det_main", "r_loop")
def _(s, l, r):
    (r_idx,) = l
    if r_idx == (1 << s.n):
        return ("goto", "entry", ())
    return ("call", "det_walk", (r_idx, 1), "fwd_done", l)


@deftab(DT, "det_main", "fwd_done")
def _(s, l, r):
    (r_idx,) = l
    return ("call", "det_walk", (r_idx, -1), "bwd_done", l)


@deftab(DT, "det_main", "bwd_done")
def _(s, l, r):
    (r_idx,) = l
    return ("goto", "r_loop", (r_idx + 1,))


# det_walk locals: (r_word, sgn) then (r_word, sgn, i)
@deftab(DT, "det_walk", "entry")
def _(s, l, r):
    return ("call", s.restorefn, (), "restored", l)


@deftab(DT, "det_walk", "restored")
def _(s, l, r):
    word, sgn = l
    return ("goto", "loop", (word, sgn, 1))


@deftab(DT, "det_walk", "loop")
def _(s, l, r):
    word, sgn, i = l
    if i > s.n:
        return ("goto", "drain", l)  # first excessive 1 ended the walk
    return ("call", "op_is_empty", (), "echk", l)


@deftab(DT, "det_walk", "echk")
def _(s, l, r):
    if r:
        return ("ret", None)
    return ("call", s.popfn, (), "bit", l)


@deftab(DT, "det_walk", "bit")
def _(s, l, r):
    word, sgn, i = l
    if r == 0:
        return ("call", "op_move",
                (i - 1, sgn * _bitsign(word, i - 1)) + s.move_extra, "moved", l)
    return ("goto", "loop", (word, sgn, i + 1))


@deftab(DT, "det_walk", "moved")
def _(s, l, r):
    return ("goto", "loop", l)


@deftab(DT, "det_walk", "drain")
def _(s, l, r):
    return ("call", "op_is_empty", (), "dchk", l)


@deftab(DT, "det_walk", "dchk")
def _(s, l, r):
    if r:
        return ("ret", None)
    return ("call", s.popfn, (), "drained_bit", l)


@deftab(DT, "det_walk", "drained_bit")
def _(s, l, r):
    return ("goto", "drain", l)


class DeterministicDriver(Driver):
    """Exhaustive stack enumeration: 4 sync / 5 semi-sync agents (with e)."""

    tables = DT
    main = "det_main"

    def __init__(self, n: int, model: str):
        self.n = n
        sync = model == "synchronous"
        self.popfn = "op_pop_sync" if sync else "op_pop_semi"
        self.restorefn = "op_restore_sync" if sync else "op_restore_semi"
        self.move_extra = (("d",) if sync else ("d", "c"), True)


# ---------------------------------------------------------------------------
# Fast deterministic exploration: q-ary odometer over growing cubes.
# ---------------------------------------------------------------------------

FT: dict = dict(STACK_T)


@deftab(FT, "fast_main", "entry")
def _(s, l, r):
    return ("call", "fast_boot", (0,), "booted", ())


@deftab(FT, "fast_main", "booted")
def _(s, l, r):
    return ("prim", ("mark", "scale"), "scale", ())


@deftab(FT, "fast_main", "scale")
def _(s, l, r):
    return ("call", "fast_lvl", (1,), "explored", ())


@deftab(FT, "fast_main", "explored")
def _(s, l, r):
    # the odometer leaves S = 1; clear it before recentring
    return ("call", "op_dec", (), "cleared", ())


@deftab(FT, "fast_main", "cleared")
def _(s, l, r):
    return ("goto", "recenter", (0,))


# recentring: shift by q/2 per dimension (two S-decrements per step keep the
# count in the world, not in the state), so cube m+1 stays centered
@deftab(FT, "fast_main", "recenter")
def _(s, l, r):
    (dim,) = l
    if dim == s.n:
        return ("call", s.qdoublefn, (), "doubled", ())
    return ("call", s.setsqfn, (), "loaded", l)


@deftab(FT, "fast_main", "loaded")
def _(s, l, r):
    return ("goto", "r_chk", l)


@deftab(FT, "fast_main", "r_chk")
def _(s, l, r):
    return ("call", "op_is_empty", (), "r_chk2", l)


@deftab(FT, "fast_main", "r_chk2")
def _(s, l, r):
    (dim,) = l
    if r:
        return ("goto", "recenter", (dim + 1,))
    return ("call", "op_dec", (), "r_dec1", l)


@deftab(FT, "fast_main", "r_dec1")
def _(s, l, r):
    return ("call", "op_dec", (), "r_dec2", l)


@deftab(FT, "fast_main", "r_dec2")
def _(s, l, r):
    (dim,) = l
    return ("call", "op_move", (dim, -1) + s.move_extra, "r_chk", l)


@deftab(FT, "fast_main", "doubled")
def _(s, l, r):
    return ("prim", ("mark", "scale"), "scale", ())


# fast_lvl locals: (i,)
@deftab(FT, "fast_lvl", "entry")
def _(s, l, r):
    (i,) = l
    if i > s.n:
        return ("ret", None)
    if i == s.n:
        return ("goto", "nloop", l)
    return ("goto", "loop", l)


@deftab(FT, "fast_lvl", "loop")
def _(s, l, r):
    return ("call", s.qpushfn, (), "pushed", l)


@deftab(FT, "fast_lvl", "pushed")
def _(s, l, r):
    (i,) = l
    return ("call", "fast_lvl", (i + 1,), "sub_done", l)


@deftab(FT, "fast_lvl", "sub_done")
def _(s, l, r):
    (i,) = l
    return ("call", "op_move", (i - 1, 1) + s.move_extra, "moved", l)


@deftab(FT, "fast_lvl", "moved")
def _(s, l, r):
    return ("call", s.qdivfn, (), "chk", l)


@deftab(FT, "fast_lvl", "chk")
def _(s, l, r):
    if r:
        return ("goto", "over", l)
    return ("goto", "loop", l)


# over-scan: one extra row at offset q so the swept cube is [0, q]^n
@deftab(FT, "fast_lvl", "over")
def _(s, l, r):
    return ("call", s.qpushfn, (), "over2", l)


@deftab(FT, "fast_lvl", "over2")
def _(s, l, r):
    (i,) = l
    return ("call", "fast_lvl", (i + 1,), "over3", l)


@deftab(FT, "fast_lvl", "over3")
def _(s, l, r):
    return ("call", "op_dec", (), "cd_loop", l)


# countdown return: q decrement+move pairs bring the base home, then the
# wrapped digit is popped and the caller's digit advances by one
@deftab(FT, "fast_lvl", "cd_loop")
def _(s, l, r):
    return ("call", "op_dec", (), "cd_m", l)


@deftab(FT, "fast_lvl", "cd_m")
def _(s, l, r):
    (i,) = l
    return ("call", "op_move", (i - 1, -1) + s.move_extra, "cd_chk", l)


@deftab(FT, "fast_lvl", "cd_chk")
def _(s, l, r):
    return ("call", s.qdivfn, (), "cd_chk2", l)


@deftab(FT, "fast_lvl", "cd_chk2")
def _(s, l, r):
    if r:
        return ("goto", "fin", l)
    return ("goto", "cd_loop", l)


@deftab(FT, "fast_lvl", "fin")
def _(s, l, r):
    return ("call", s.qpopfn, (), "fin2", l)


@deftab(FT, "fast_lvl", "fin2")
def _(s, l, r):
    return ("call", "op_inc", (), "fin3", l)


@deftab(FT, "fast_lvl", "fin3")
def _(s, l, r):
    return ("ret", None)


@deftab(FT, "fast_lvl", "nloop")
def _(s, l, r):
    return ("call", "op_inc", (), "n_m", l)


@deftab(FT, "fast_lvl", "n_m")
def _(s, l, r):
    (i,) = l
    return ("call", "op_move", (i - 1, 1) + s.move_extra, "n_chk", l)


@deftab(FT, "fast_lvl", "n_chk")
def _(s, l, r):
    return ("call", s.qdivfn, (), "n_chk2", l)


@deftab(FT, "fast_lvl", "n_chk2")
def _(s, l, r):
    if r:
        return ("goto", "cd_loop", l)  # S = q(V+1) at offset q: same exit path
    return ("goto", "nloop", l)


# bootstrap: walk f (and c_f) out to mark q = 2, starting collocated
@deftab(FT, "fast_boot", "entry")
def _(s, l, r):
    (step,) = l
    if step == s.boot_steps:
        return ("prim", W((0, -1), ("b",)), "home", l)
    return ("prim", P("f", (0, 1), 1), "f_up", l)


@deftab(FT, "fast_boot", "f_up")
def _(s, l, r):
    return ("prim", W((0, -1), ("c_f",)), "cf_seek", l)


@deftab(FT, "fast_boot", "cf_seek")
def _(s, l, r):
    return ("prim", P("c_f", (0, 1), 0), "cf_up", l)


@deftab(FT, "fast_boot", "cf_up")
def _(s, l, r):
    (step,) = l
    return ("prim", W((0, 1), ("f",)), "entry", (step + 1,))


# shift everything -1 per dimension: the first cube [0, q]^n becomes
# [-q/2, q/2]^n with q = 2, and stays centered under q/2 recentring
@deftab(FT, "fast_boot", "home")
def _(s, l, r):
    return ("goto", "shift", (0,))


@deftab(FT, "fast_boot", "shift")
def _(s, l, r):
    (dim,) = l
    if dim == s.n:
        return ("ret", None)
    return ("call", "op_move", (dim, -1) + s.move_extra, "shift", (dim + 1,))


# semi-synchronous S := q loader: one d increment per c_f step of its f -> b
# sweep, then c_f walks home
@deftab(FT, "op_setsq_semi", "entry")
def _(s, l, r):
    return ("prim", W((0, -1), ("b",)), "seek_cf", l)


@deftab(FT, "op_setsq_semi", "seek_cf")
def _(s, l, r):
    return ("prim", W((0, 1), ("c_f",)), "at_cf", l)


@deftab(FT, "op_setsq_semi", "at_cf")
def _(s, l, r):
    return ("prim", P("c_f", (0, -1), 1), "cf_sense", l)


@deftab(FT, "op_setsq_semi", "cf_sense")
def _(s, l, r):
    return ("prim", ("sense",), "cf_down", l)


@deftab(FT, "op_setsq_semi", "cf_down")
def _(s, l, r):
    landed = 1 if "b" in r else 0
    return ("prim", W((0, -1), ("b",)), "seek_d", (landed,))


@deftab(FT, "op_setsq_semi", "seek_d")
def _(s, l, r):
    return ("prim", W((0, 1), ("d",)), "at_d", l)


@deftab(FT, "op_setsq_semi", "at_d")
def _(s, l, r):
    return ("prim", P("d", (0, 1), 1), "bumped", l)


@deftab(FT, "op_setsq_semi", "bumped")
def _(s, l, r):
    (landed,) = l
    if landed:
        return ("prim", W((0, -1), ("b",)), "esc_cf", l)
    return ("prim", W((0, -1), ("b",)), "back", l)


@deftab(FT, "op_setsq_semi", "back")
def _(s, l, r):
    return ("goto", "seek_cf", l)


@deftab(FT, "op_setsq_semi", "esc_cf")
def _(s, l, r):
    return ("prim", W((0, 1), ("c_f",)), "esc_cf2", l)


@deftab(FT, "op_setsq_semi", "esc_cf2")
def _(s, l, r):
    return ("prim", ("esc", "c_f", 0, 1, ("f",), "call"), "cf_home", l)


@deftab(FT, "op_setsq_semi", "cf_home")
def _(s, l, r):
    return ("prim", W((0, -1), ("b",)), "rejoin", l)


@deftab(FT, "op_setsq_semi", "rejoin")
def _(s, l, r):
    return ("prim", W((0, 1), ("d",)), "done", l)


@deftab(FT, "op_setsq_semi", "done")
def _(s, l, r):
    return ("ret", None)


# synchronous S := q loader: push a 1 and double it log2(q) times
@deftab(FT, "op_setsq_sync", "entry")
def _(s, l, r):
    return ("prim", ("spush", 1, "init"), "seed_done", l)


@deftab(FT, "op_setsq_sync", "seed_done")
def _(s, l, r):
    return ("call", "op_qpush_sync", (), "done", l)


@deftab(FT, "op_setsq_sync", "done")
def _(s, l, r):
    return ("ret", None)


class FastDetDriver(Driver):
    """Polynomial-cost cube sweeps: 5 sync / 6 semi-sync agents."""

    tables = FT
    main = "fast_main"

    def __init__(self, n: int, model: str):
        self.n = n
        sync = model == "synchronous"
        self.boot_steps = 1 if sync else 2  # f marks log2(2)=1 or q=2
        self.qpushfn = "op_qpush_sync" if sync else "op_qpush_semi"
        self.qpopfn = "op_qpop_sync" if sync else "op_qpop_semi"
        self.qdivfn = "op_qdiv_sync" if sync else "op_qdiv_semi"
        self.qdoublefn = "op_qdouble_sync" if sync else "op_qdouble_semi"
        self.setsqfn = "op_setsq_sync" if sync else "op_setsq_semi"
        roles = ("d", "c_f", "f") if sync else ("d", "c_f", "f", "c_d")
        self.move_extra = (roles, False)


# ---------------------------------------------------------------------------
# Explore3Dgrid: sphere sweeps via eight triangle scans per radius.
# ---------------------------------------------------------------------------

XT: dict = {}

# face order: a Hamiltonian cycle on the sign vectors (Gray code); i = base
# corner dim, j = distance-agent corner dim, k = convergence corner dim;
# type B faces drag the base agent to the j corner on their first pass.
_SIGMA = [(1, 1, 1), (1, 1, -1), (1, -1, -1), (1, -1, 1),
          (-1, -1, 1), (-1, -1, -1), (-1, 1, -1), (-1, 1, 1)]
_I = [2, 2, 1, 1, 2, 2, 1, 1]
_J = [3, 1, 3, 2, 3, 1, 3, 2]
_K = [1, 3, 2, 3, 1, 3, 2, 3]
_TYPEB = [False, True, False, True, False, True, False, True]

FACES = [
    {
        "sigma": _SIGMA[m],
        "i": _I[m] - 1,
        "j": _J[m] - 1,
        "k": _K[m] - 1,
        "typeb": _TYPEB[m],
    }
    for m in range(8)
]


def E1(target, dirn):
    return ("esc1", target, dirn[0], dirn[1], "call")


@deftab(XT, "tri_main", "entry")
def _(s, l, r):
    return ("goto", "inc_q", (0,))


# radius increment at the face-0 entry: push b, c and a outward along the
# base corner axis, then walk the edge to d and push it outward too
@deftab(XT, "tri_main", "inc_q")
def _(s, l, r):
    f = s.face(0)
    return ("prim", P("b", (f["i"], f["sigma"][f["i"]]), 0), "inc_c", ())


@deftab(XT, "tri_main", "inc_c")
def _(s, l, r):
    f = s.face(0)
    return ("prim", P("c", (f["i"], f["sigma"][f["i"]]), 0), "inc_a", ())


@deftab(XT, "tri_main", "inc_a")
def _(s, l, r):
    f = s.face(0)
    return ("prim", ("jump", f["i"], f["sigma"][f["i"]]), "inc_mark", ())


@deftab(XT, "tri_main", "inc_mark")
def _(s, l, r):
    return ("prim", ("mark", "sphere"), "inc_walk", ())


# walk down to the old corner and along the old (i, j) edge to d
@deftab(XT, "tri_main", "inc_walk")
def _(s, l, r):
    f = s.face(0)
    return ("prim", ("jump", f["i"], -f["sigma"][f["i"]]), "inc_seekd", ())


@deftab(XT, "tri_main", "inc_seekd")
def _(s, l, r):
    return ("prim", ("sense",), "inc_seekd2", ())


@deftab(XT, "tri_main", "inc_seekd2")
def _(s, l, r):
    f = s.face(0)
    if "d" in r:
        return ("prim", P("d", (f["j"], f["sigma"][f["j"]]), 1), "inc_back", ())
    return ("prim", ("jump", f["i"], -f["sigma"][f["i"]]), "inc_diag", ())


@deftab(XT, "tri_main", "inc_diag")
def _(s, l, r):
    f = s.face(0)
    return ("prim", ("jump", f["j"], f["sigma"][f["j"]]), "inc_seekd", ())


# return up the new edge to the new base corner (b and c mark it)
@deftab(XT, "tri_main", "inc_back")
def _(s, l, r):
    return ("prim", ("sense",), "inc_back2", ())


@deftab(XT, "tri_main", "inc_back2")
def _(s, l, r):
    f = s.face(0)
    if "b" in r:
        return ("call", "tri_face", (0,), "face_done", (0,))
    return ("prim", ("jump", f["j"], -f["sigma"][f["j"]]), "inc_bdiag", ())


@deftab(XT, "tri_main", "inc_bdiag")
def _(s, l, r):
    f = s.face(0)
    return ("prim", ("jump", f["i"], f["sigma"][f["i"]]), "inc_back", ())


@deftab(XT, "tri_main", "face_done")
def _(s, l, r):
    (m,) = l
    return ("call", "tri_shift", (m,), "shifted", l)


@deftab(XT, "tri_main", "shifted")
def _(s, l, r):
    (m,) = l
    if m == 7:
        return ("goto", "inc_q", ())
    return ("call", "tri_face", (m + 1,), "face_done", (m + 1,))


# tri_face locals: (m,) then (m, first)
@deftab(XT, "tri_face", "entry")
def _(s, l, r):
    (m,) = l
    return ("goto", "top", (m, 1))


@deftab(XT, "tri_face", "top")
def _(s, l, r):
    return ("prim", ("sense",), "top2", l)


@deftab(XT, "tri_face", "top2")
def _(s, l, r):
    m, first = l
    if "d" in r:  # c and d met: the face is fully scanned
        return ("ret", None)
    return ("goto", "walk_to_d", l)


# phase leg 1: scan the current line toward d (dragging b on a type-B
# first pass)
@deftab(XT, "tri_face", "walk_to_d")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    if f["typeb"] and first:
        return ("prim", E1("b", (f["i"], -f["sigma"][f["i"]])), "b_leg2", l)
    return ("prim", ("jump", f["i"], -f["sigma"][f["i"]]), "d_leg2", l)


@deftab(XT, "tri_face", "b_leg2")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", E1("b", (f["j"], f["sigma"][f["j"]])), "d_sense", l)


@deftab(XT, "tri_face", "d_leg2")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", ("jump", f["j"], f["sigma"][f["j"]]), "d_sense", l)


@deftab(XT, "tri_face", "d_sense")
def _(s, l, r):
    return ("prim", ("sense",), "d_chk", l)


@deftab(XT, "tri_face", "d_chk")
def _(s, l, r):
    m, first = l
    if "d" in r:
        return ("goto", "push_d", (m, 0))
    return ("goto", "walk_to_d", l)


# push d one diagonal step toward the convergence corner, inward first
@deftab(XT, "tri_face", "push_d")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", E1("d", (f["j"], -f["sigma"][f["j"]])), "push_d2", l)


@deftab(XT, "tri_face", "push_d2")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", E1("d", (f["k"], f["sigma"][f["k"]])), "back_a", l)


# a returns to the old line and walks back to c
@deftab(XT, "tri_face", "back_a")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", ("jump", f["k"], -f["sigma"][f["k"]]), "back_a2", l)


@deftab(XT, "tri_face", "back_a2")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", ("jump", f["j"], f["sigma"][f["j"]]), "walk_to_c", l)


@deftab(XT, "tri_face", "walk_to_c")
def _(s, l, r):
    return ("prim", ("sense",), "c_chk", l)


@deftab(XT, "tri_face", "c_chk")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    if "c" in r:
        return ("prim", E1("c", (f["i"], -f["sigma"][f["i"]])), "push_c2", l)
    return ("prim", ("jump", f["j"], -f["sigma"][f["j"]]), "c_diag", l)


@deftab(XT, "tri_face", "c_diag")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", ("jump", f["i"], f["sigma"][f["i"]]), "walk_to_c", l)


@deftab(XT, "tri_face", "push_c2")
def _(s, l, r):
    m, first = l
    f = s.face(m)
    return ("prim", E1("c", (f["k"], f["sigma"][f["k"]])), "top", l)


# tri_shift: reposition c along the shared edge to the next base corner,
# where b is already waiting; d stays at the convergence corner.
@deftab(XT, "tri_shift", "entry")
def _(s, l, r):
    return ("prim", ("sense",), "chk", l)


@deftab(XT, "tri_shift", "chk")
def _(s, l, r):
    (m,) = l
    f = s.face(m)
    if "b" in r:
        return ("ret", None)
    return ("prim", E1("c", (f["k"], -f["sigma"][f["k"]])), "leg2", l)


@deftab(XT, "tri_shift", "leg2")
def _(s, l, r):
    (m,) = l
    f = s.face(m)
    dst = f["i"] if not f["typeb"] else f["j"]
    return ("prim", E1("c", (dst, f["sigma"][dst])), "entry", l)


class Explore3DDriver(Driver):
    """Octahedron sphere sweeps with 4 agents; n = 3 only."""

    tables = XT
    main = "tri_main"
    n = 3
    faces = FACES

    def face(self, m):
        return self.faces[m]


class TriangleProbe(Explore3DDriver):
    """Runs a single face scan from its entry condition (test surface)."""

    main = "tri_probe"

    def __init__(self, face):
        self.faces = [face]


XT["tri_probe"] = {
    "entry": lambda s, l, r: ("call", "tri_face", (0,), "done", ()),
    "done": lambda s, l, r: ("halt", None),
}


def explore_triangle(q, sigma, i, j, k, policy=None, engine=None, seed=0):
    """Scan one triangle with entry: a, b, c at sigma_i*q*e_i, d at the j
    corner; returns (report, world). Exit: b stays, a, c, d at the k corner."""
    from .engine import make_world
    from .grid import unit

    face = {"sigma": tuple(sigma), "i": i, "j": j, "k": k, "typeb": False}
    driver = TriangleProbe(face)
    controllers = [driver, StackMember("b"), StackMember("c"), StackMember("d")]
    ci = tuple(sigma[i] * q * x for x in unit(3, i))
    cj = tuple(sigma[j] * q * x for x in unit(3, j))
    cfg = RunConfig(
        n=3, controllers=controllers,
        policy=policy or ActivationPolicy("round-robin"),
        seed=seed, stop_fn=lambda tok: tok[:1] == ("a",) and len(tok) == 3
        and tok[2][:1] == ("halt",),
        start_positions=[ci, ci, ci, cj],
    )
    w = make_world(cfg, engine)
    return w.run(), w


# ---------------------------------------------------------------------------
# Run factory
# ---------------------------------------------------------------------------

ALGORITHMS = ("explore3d", "random", "det", "fastdet")

ROSTERS = {
    ("explore3d", "semi-synchronous"): ("a", "b", "c", "d"),
    ("explore3d", "synchronous"): ("a", "b", "c", "d"),
    ("random", "semi-synchronous"): ("a", "b", "c", "d"),
    ("random", "synchronous"): ("a", "b", "d"),
    ("det", "semi-synchronous"): ("a", "b", "c", "d", "e"),
    ("det", "synchronous"): ("a", "b", "d", "e"),
    ("fastdet", "semi-synchronous"): ("a", "b", "d", "f", "c_d", "c_f"),
    ("fastdet", "synchronous"): ("a", "b", "d", "f", "c_f"),
}


def _round_marker(token):
    return (token[0] == "a" and len(token) == 3 and token[2] is not None
            and token[2][:1] == ("mark",))


def build_driver(algo: str, model: str, n: int, p: float = 0.25):
    if algo == "explore3d":
        if n != 3:
            raise ValueError("explore3d requires n=3 (Table-1 constraint)")
        return Explore3DDriver()
    if algo == "random":
        num, bits = dyadic(p)
        return RandomizedDriver(n, model, num, bits)
    if algo == "det":
        return DeterministicDriver(n, model)
    if algo == "fastdet":
        return FastDetDriver(n, model)
    raise ValueError(f"unknown algorithm {algo!r}")


def dyadic(p: float, max_bits: int = 10):
    """Express p as num/2^bits; the coin is a finite-state gadget."""
    for bits in range(1, max_bits + 1):
        num = p * (1 << bits)
        if abs(num - round(num)) < 1e-9 and 0 < round(num) < (1 << bits):
            return int(round(num)), bits
    raise ValueError(f"p={p} is not dyadic with <= {max_bits} bits")


def build_config(algo: str, model: str, n: int, treasure=None, p: float = 0.25,
                 policy: Optional[ActivationPolicy] = None, seed: int = 0,
                 max_ticks=None, max_moves=None, max_excursion=None,
                 stop_covered_radius=None, labeling=None, trace=False,
                 collect_visited=True, stop_marker_count=None,
                 record_schedule=False) -> RunConfig:
    from .metrics import canonical_model

    model = canonical_model(model)
    roster = ROSTERS[(algo, model)]
    driver = build_driver(algo, model, n, p)
    controllers = [driver if role == "a" else StackMember(role)
                   for role in roster]
    if policy is None:
        policy = (ActivationPolicy("synchronous") if model == "synchronous"
                  else ActivationPolicy("round-robin"))
    if model == "synchronous" and policy.kind != "synchronous":
        raise ValueError("synchronous model runs need the synchronous policy")
    return RunConfig(
        n=n, controllers=controllers, policy=policy, seed=seed,
        treasure=tuple(treasure) if treasure is not None else None,
        labeling=labeling, max_ticks=max_ticks, max_moves=max_moves,
        max_excursion=max_excursion, stop_covered_radius=stop_covered_radius,
        trace=trace, marker_fn=_round_marker, collect_visited=collect_visited,
        stop_marker_count=stop_marker_count, record_schedule=record_schedule,
    )


def run_algorithm(algo, model, n, engine=None, **kw):
    from .engine import make_world

    w = make_world(build_config(algo, model, n, **kw), engine)
    rep = w.run()
    rep.extras = algorithm_extras(algo, model, w, rep)
    return rep


def algorithm_extras(algo, model, w, rep) -> dict:
    """Algorithm-specific readouts taken from final agent geometry."""
    out = {"markers": rep.marker_count}
    pb = w.position_of_role("b")
    if algo == "det":
        pe = w.position_of_role("e")
        if pb is not None and pe is not None:
            out["backup"] = sum(abs(x - y) for x, y in zip(pb, pe))
    if algo == "fastdet":
        pf = w.position_of_role("f")
        if pb is not None and pf is not None:
            gap = sum(abs(x - y) for x, y in zip(pb, pf))
            out["q_final"] = gap if model != "synchronous" else (1 << gap)
    return out


# ---------------------------------------------------------------------------
# Integer oracles for differential testing of the explorers
# ---------------------------------------------------------------------------


def walk_interpreter(value: int, r_word: int, n: int):
    """Endpoint of the deterministic walk encoded by `value` under signs
    r_word, mirroring det_walk: bits popped LSB-first, 0 = step in the
    current dimension, 1 = next dimension, stop when empty or past dim n."""
    pos = [0] * n
    i = 1
    s = value
    while s and i <= n:
        if s & 1:
            i += 1
        else:
            pos[i - 1] += 1 if (r_word >> (i - 1)) & 1 else -1
        s >>= 1
    return tuple(pos)


def walk_cells(value: int, r_word: int, n: int):
    """Every cell the logical walk passes through (including the origin)."""
    pos = [0] * n
    cells = [tuple(pos)]
    i = 1
    s = value
    while s and i <= n:
        if s & 1:
            i += 1
        else:
            pos[i - 1] += 1 if (r_word >> (i - 1)) & 1 else -1
            cells.append(tuple(pos))
        s >>= 1
    return cells


def minimal_backup_for(treasure, n: int):
    """Brute force the smallest (B, R) whose walk ends on the treasure."""
    b = 0
    while True:
        b += 1
        for r_word in range(1 << n):
            if walk_interpreter(b, r_word, n) == tuple(treasure):
                return b, r_word


def encode_treasure(treasure, n: int) -> int:
    """The valid D+n digit encoding of a point: 1 0^|k_n| ... 1 0^|k_1|."""
    s = 0
    for j in range(n - 1, -1, -1):
        s = (s << 1) | 1
        s <<= abs(treasure[j])
    return s


def endpoint_rounds_oracle(run_seed: int, n: int, treasure, p_num: int = 1,
                           p_bits: int = 2, max_rounds: int = 10**7):
    """Replay the driver's exact coin stream and count rounds until a round's
    far endpoint lands on the treasure (the geometric quantity the expected-
    rounds formula predicts; the live simulation, which checks every visited
    cell, can only find the treasure earlier)."""
    from .rng import MASK64, mix2, splitmix64

    seed0 = mix2(run_seed, 0x5EED)
    count = 0

    def draw(bits):
        nonlocal count
        w = splitmix64((seed0 + 0x632BE59BD9B4E019 * (count + 1)) & MASK64)
        count += 1
        return w & ((1 << bits) - 1)

    tre = tuple(treasure)
    for rnd in range(1, max_rounds + 1):
        word = 0
        for j in range(n):
            word |= draw(1) << j
        pos = [0] * n
        for i in range(n):
            while draw(p_bits) < p_num:
                pos[i] += 1 if (word >> i) & 1 else -1
        if tuple(pos) == tre:
            return rnd
    return None


def random_round_oracle(n: int, r_word: int, zero_runs):
    """Cells visited by one randomized round with forced coin outcomes.

    zero_runs[i] = number of 0-coins in dimension i+1 (the moves taken).
    Returns (far endpoint, peak stack value, cells in visit order).
    """
    pos = [0] * n
    cells = [tuple(pos)]
    s = 0
    for i in range(n):
        s = 2 * s + 1  # separator before each dimension
        for _ in range(zero_runs[i]):
            s = 2 * s
            pos[i] += 1 if (r_word >> i) & 1 else -1
            cells.append(tuple(pos))
    peak = s
    far = tuple(pos)
    i = n
    while s:
        bit = s & 1
        s >>= 1
        if bit:
            i -= 1
        else:
            pos[i - 1] -= 1 if (r_word >> (i - 1)) & 1 else -1
            cells.append(tuple(pos))
    assert tuple(pos) == (0,) * n
    return far, peak, cells


def triangle_points(q: int, sigma, n: int = 3):
    """Lattice points of the octahedron face with sign vector sigma."""
    out = set()
    for x in range(q + 1):
        for y in range(q + 1 - x):
            z = q - x - y
            out.add((sigma[0] * x, sigma[1] * y, sigma[2] * z))
    return out


def fastdet_cube(anchor, q: int, n: int):
    """The cube swept at scale q: [anchor, anchor+q]^n inclusive."""
    import itertools

    return {tuple(a + o for a, o in zip(anchor, off))
            for off in itertools.product(range(q + 1), repeat=n)}
