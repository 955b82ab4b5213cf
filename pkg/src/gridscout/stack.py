"""The distance-encoded stack: a nonnegative integer S stored in unary as the
gap between the base agent b and the distance agent d along the first axis.

Four variants are implemented as driver programs over the protocol prims:

  bin-semi   a,b,c,d          push/pop = zig-zag shuttling (cost ~ S^2 moves)
  bin-sync   a,b,d            push/pop = speed-1/3 walks   (cost ~ S ticks)
  q-semi     a,b,d,f,c_d,c_f  multiply/divide by q, f marks q at b+q*e1
  q-sync     a,b,d,f,c_f      q a power of two, f marks log2(q), ops are
                              repeated doublings/halvings counted by c_f

plus backup-stack ops for the deterministic explorers (extra agent e holding
a copy of the value as a distance along the second axis).

Driver walks that cannot know which side a target is on are routed through
fixed landmarks (the base corner), so no unbounded order bookkeeping ever
enters a state token.

`SymbolicStack` is the integer-arithmetic twin used for differential
testing; `StackSession` runs the agent-level ops and checks layout
invariants between ops.
"""

from __future__ import annotations

from dataclasses import dataclass

from .protocol import Driver, StackMember, table
from .runtime import RunConfig, World
from .scheduler import ActivationPolicy


@dataclass(frozen=True)
class Variant:
    name: str
    model: str            # "synchronous" | "semi-synchronous"
    qary: bool
    roster: tuple         # roles in agent-id order, driver first
    backup: bool = False  # has the extra agent e


VARIANTS = {
    "bin-semi": Variant("bin-semi", "semi-synchronous", False, ("a", "b", "c", "d")),
    "bin-sync": Variant("bin-sync", "synchronous", False, ("a", "b", "d")),
    "det-semi": Variant("det-semi", "semi-synchronous", False, ("a", "b", "c", "d", "e"), True),
    "det-sync": Variant("det-sync", "synchronous", False, ("a", "b", "d", "e"), True),
    "q-semi": Variant("q-semi", "semi-synchronous", True, ("a", "b", "d", "f", "c_d", "c_f")),
    "q-sync": Variant("q-sync", "synchronous", True, ("a", "b", "d", "f", "c_f")),
}


class StackProtocolError(RuntimeError):
    """Raised for pop-on-empty, non-divisible pop and similar misuse."""


# ---------------------------------------------------------------------------
# Op programs. Each is a program-table function: entry locals are the op
# arguments, and ("ret", value) ends the op. Movement convention: dim 0 is
# the stack axis e1, dim 1 is the backup axis e2; "up" = +e1 (away from b).
# ---------------------------------------------------------------------------

T: dict = {}


def op(fn):
    return table(T, fn)


UP = (0, 1)
DOWN = (0, -1)


def W(dirn, stops, skip=0):
    return ("walk", dirn[0], dirn[1], tuple(stops), skip)


def P(target, dirn, follow):
    return ("push", target, dirn[0], dirn[1], follow)


def E(target, dirn, stops):
    return ("esc", target, dirn[0], dirn[1], tuple(stops), "call")


# -- is_empty ---------------------------------------------------------------

op("op_is_empty")("entry")(lambda s, l, r: ("prim", ("sense",), "got", l))
op("op_is_empty")("got")(lambda s, l, r: ("ret", "b" in r))


# -- binary semi-synchronous push(v) / pop() --------------------------------


@op("op_push_semi")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_push_semi")("sensed")
def _(s, l, r):
    (v,) = l
    if "b" in r:  # S = 0: no shuttling, just the +v adjustment
        if v:
            return ("prim", P("d", UP, 1), "fin", l)
        return ("ret", None)
    return ("prim", W(DOWN, ("b",)), "at_b", l)


@op("op_push_semi")("at_b")
def _(s, l, r):
    return ("prim", E("c", UP, ("d",)), "loop", l)


@op("op_push_semi")("loop")
def _(s, l, r):
    return ("prim", ("sense",), "chk", l)


@op("op_push_semi")("chk")
def _(s, l, r):
    if "b" in r:  # d reached the base: swap roles and finish
        return ("prim", ("rename", "d", "x"), "sw1", l)
    return ("prim", W(UP, ("c",)), "at_c", l)


@op("op_push_semi")("at_c")
def _(s, l, r):
    return ("prim", P("c", UP, 0), "c_pushed", l)


@op("op_push_semi")("c_pushed")
def _(s, l, r):
    return ("prim", W(DOWN, ("d",)), "at_d", l)


@op("op_push_semi")("at_d")
def _(s, l, r):
    return ("prim", P("d", DOWN, 1), "loop", l)


@op("op_push_semi")("sw1")
def _(s, l, r):
    return ("prim", W(UP, ("c",), skip=1), "sw2", l)


@op("op_push_semi")("sw2")
def _(s, l, r):
    return ("prim", ("rename", "c", "d"), "sw3", l)


@op("op_push_semi")("sw3")
def _(s, l, r):
    return ("prim", W(DOWN, ("x",)), "sw4", l)


@op("op_push_semi")("sw4")
def _(s, l, r):
    return ("prim", ("rename", "x", "c"), "sw5", l)


@op("op_push_semi")("sw5")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "adj", l)


@op("op_push_semi")("adj")
def _(s, l, r):
    (v,) = l
    if v:
        return ("prim", P("d", UP, 1), "fin", l)
    return ("ret", None)


@op("op_push_semi")("fin")
def _(s, l, r):
    return ("ret", None)


@op("op_pop_semi")("entry")
def _(s, l, r):
    # loop head: a is at d's cell
    return ("prim", ("sense",), "top", l)


@op("op_pop_semi")("top")
def _(s, l, r):
    if "c" in r:  # gap 0: S even, both marks at S/2
        return ("prim", E("c", DOWN, ("b",)), "even_home", l)
    return ("prim", ("jump", 0, -1), "peek", l)


@op("op_pop_semi")("peek")
def _(s, l, r):
    return ("prim", ("sense",), "peeked", l)


@op("op_pop_semi")("peeked")
def _(s, l, r):
    if "c" in r:  # gap 1: S odd; a sits at c's cell, d is one above
        return ("prim", ("rename", "c", "x"), "od1", l)
    return ("prim", W(DOWN, ("c",)), "at_c", l)


@op("op_pop_semi")("at_c")
def _(s, l, r):
    return ("prim", P("c", UP, 0), "c_up", l)


@op("op_pop_semi")("c_up")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "at_d", l)


@op("op_pop_semi")("at_d")
def _(s, l, r):
    return ("prim", P("d", DOWN, 1), "entry", l)


@op("op_pop_semi")("even_home")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "even_done", l)


@op("op_pop_semi")("even_done")
def _(s, l, r):
    return ("ret", 0)


@op("op_pop_semi")("od1")
def _(s, l, r):
    return ("prim", ("jump", 0, 1), "od2", l)


@op("op_pop_semi")("od2")
def _(s, l, r):
    return ("prim", ("rename", "d", "c"), "od3", l)


@op("op_pop_semi")("od3")
def _(s, l, r):
    return ("prim", ("jump", 0, -1), "od4", l)


@op("op_pop_semi")("od4")
def _(s, l, r):
    return ("prim", ("rename", "x", "d"), "od5", l)


@op("op_pop_semi")("od5")
def _(s, l, r):
    return ("prim", ("jump", 0, 1), "od6", l)


@op("op_pop_semi")("od6")
def _(s, l, r):
    return ("prim", E("c", DOWN, ("b",)), "od7", l)


@op("op_pop_semi")("od7")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "odd_done", l)


@op("op_pop_semi")("odd_done")
def _(s, l, r):
    return ("ret", 1)


# -- binary synchronous push(v) / pop() --------------------------------------

op("op_push_sync")("entry")(lambda s, l, r: ("prim", ("spush", l[0], "init"), "done", l))
op("op_push_sync")("done")(lambda s, l, r: ("ret", None))

op("op_pop_sync")("entry")(lambda s, l, r: ("prim", ("spop", "init", 0), "done", l))
op("op_pop_sync")("done")(lambda s, l, r: ("ret", r))


# -- generic per-role stack translation (moveStack) --------------------------
# locals: (dim, sign, roles_left, has_e)


@op("op_move")("entry")
def _(s, l, r):
    return ("goto", "next_role", l)


@op("op_move")("next_role")
def _(s, l, r):
    dim, sign, roles_left, has_e = l
    if roles_left:
        return ("prim", W(DOWN, ("b",)), "seek", l)
    if has_e:
        return ("prim", W(DOWN, ("b",)), "to_e_corner", l)
    return ("goto", "move_b", l)


@op("op_move")("seek")
def _(s, l, r):
    dim, sign, roles_left, has_e = l
    return ("prim", W(UP, (roles_left[0],)), "shove", l)


@op("op_move")("shove")
def _(s, l, r):
    dim, sign, roles_left, has_e = l
    return ("prim", P(roles_left[0], (dim, sign), 0), "next_role",
            (dim, sign, roles_left[1:], has_e))


@op("op_move")("to_e_corner")
def _(s, l, r):
    return ("prim", ("walk", 1, 1, ("e",), 0), "shove_e", l)


@op("op_move")("shove_e")
def _(s, l, r):
    dim, sign, roles_left, has_e = l
    return ("prim", P("e", (dim, sign), 0), "back_corner", l)


@op("op_move")("back_corner")
def _(s, l, r):
    return ("prim", ("walk", 1, -1, ("b",), 0), "move_b", l)


@op("op_move")("move_b")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "shove_b", l)


@op("op_move")("shove_b")
def _(s, l, r):
    dim, sign, roles_left, has_e = l
    return ("prim", P("b", (dim, sign), 1), "rejoin", l)


@op("op_move")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_move")("done")
def _(s, l, r):
    return ("ret", None)


# -- increment (push d one step away; used by the q-ary machine) -------------

op("op_inc")("entry")(lambda s, l, r: ("prim", P("d", UP, 1), "done", l))
op("op_inc")("done")(lambda s, l, r: ("ret", None))

# decrement: push d one step toward b (S >= 1)
op("op_dec")("entry")(lambda s, l, r: ("prim", P("d", DOWN, 1), "done", l))
op("op_dec")("done")(lambda s, l, r: ("ret", None))


# -- q-ary semi-synchronous ops ----------------------------------------------
# push0: S -> qS. Outer loop walks d down one step; inner loop advances c_d
# by one per step of c_f's f->b sweep (q inner steps per outer step).


@op("op_qpush_semi")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_qpush_semi")("sensed")
def _(s, l, r):
    if "b" in r:
        return ("ret", None)  # S = 0 stays 0
    return ("goto", "outer", (0,))


@op("op_qpush_semi")("outer")
def _(s, l, r):
    return ("prim", P("d", DOWN, 1), "d_pushed", l)


@op("op_qpush_semi")("d_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "d_sensed", l)


@op("op_qpush_semi")("d_sensed")
def _(s, l, r):
    return ("goto", "inner", (1 if "b" in r else 0,))


@op("op_qpush_semi")("inner")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "inner_b", l)


@op("op_qpush_semi")("inner_b")
def _(s, l, r):
    return ("prim", W(UP, ("c_d",)), "at_cd", l)


@op("op_qpush_semi")("at_cd")
def _(s, l, r):
    return ("prim", P("c_d", UP, 1), "cd_pushed", l)


@op("op_qpush_semi")("cd_pushed")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cf", l)


@op("op_qpush_semi")("seek_cf")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qpush_semi")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qpush_semi")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qpush_semi")("cf_sensed")
def _(s, l, r):
    if "b" in r:  # c_f completed its q-sweep: restore it, close the outer step
        return ("prim", E("c_f", UP, ("f",)), "cf_home", l)
    return ("goto", "inner", l)


@op("op_qpush_semi")("cf_home")
def _(s, l, r):
    (d_done,) = l
    if d_done:
        return ("prim", W(DOWN, ("b",)), "sw1", l)
    return ("prim", W(DOWN, ("b",)), "back_b", l)


@op("op_qpush_semi")("back_b")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "outer", l)


# role swap: old d (at the corner) becomes c_d, far c_d becomes d
@op("op_qpush_semi")("sw1")
def _(s, l, r):
    return ("prim", ("rename", "d", "x"), "sw2", l)


@op("op_qpush_semi")("sw2")
def _(s, l, r):
    return ("prim", W(UP, ("c_d",), skip=1), "sw3", l)


@op("op_qpush_semi")("sw3")
def _(s, l, r):
    return ("prim", ("rename", "c_d", "d"), "sw4", l)


@op("op_qpush_semi")("sw4")
def _(s, l, r):
    return ("prim", W(DOWN, ("x",)), "sw5", l)


@op("op_qpush_semi")("sw5")
def _(s, l, r):
    return ("prim", ("rename", "x", "c_d"), "sw6", l)


@op("op_qpush_semi")("sw6")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qpush_semi")("done")
def _(s, l, r):
    return ("ret", None)


# pop: S -> S/q, protocol error unless q | S. d walks down; every q d-steps
# complete one c_f sweep and push c_d up by one.


@op("op_qpop_semi")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_qpop_semi")("sensed")
def _(s, l, r):
    if "b" in r:
        return ("ret", ("ok", 0))  # S = 0 stays 0
    return ("goto", "iter", l)


@op("op_qpop_semi")("iter")
def _(s, l, r):
    return ("prim", P("d", DOWN, 1), "d_pushed", l)


@op("op_qpop_semi")("d_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "d_sensed", l)


@op("op_qpop_semi")("d_sensed")
def _(s, l, r):
    return ("goto", "seek_cf", (1 if "b" in r else 0,))


@op("op_qpop_semi")("seek_cf")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cf2", l)


@op("op_qpop_semi")("seek_cf2")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qpop_semi")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qpop_semi")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qpop_semi")("cf_sensed")
def _(s, l, r):
    (d_done,) = l
    cf_done = 1 if "b" in r else 0
    if cf_done:
        return ("prim", W(UP, ("c_d",), skip=0), "at_cd", (d_done,))
    if d_done:
        return ("ret", ("err", "not_divisible"))
    return ("prim", W(DOWN, ("b",)), "back", l)


@op("op_qpop_semi")("at_cd")
def _(s, l, r):
    # a walked up from the corner; c_d may sit at the corner itself
    return ("prim", P("c_d", UP, 1), "cd_pushed", l)


@op("op_qpop_semi")("cd_pushed")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "esc_cf", l)


@op("op_qpop_semi")("esc_cf")
def _(s, l, r):
    return ("prim", E("c_f", UP, ("f",)), "cf_home", l)


@op("op_qpop_semi")("cf_home")
def _(s, l, r):
    (d_done,) = l
    if d_done:
        return ("prim", W(DOWN, ("b",)), "sw1", l)
    return ("prim", W(DOWN, ("b",)), "back", l)


@op("op_qpop_semi")("back")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "iter", l)


@op("op_qpop_semi")("sw1")
def _(s, l, r):
    return ("prim", ("rename", "d", "x"), "sw2", l)


@op("op_qpop_semi")("sw2")
def _(s, l, r):
    return ("prim", W(UP, ("c_d",), skip=1), "sw3", l)


@op("op_qpop_semi")("sw3")
def _(s, l, r):
    return ("prim", ("rename", "c_d", "d"), "sw4", l)


@op("op_qpop_semi")("sw4")
def _(s, l, r):
    return ("prim", W(DOWN, ("x",)), "sw5", l)


@op("op_qpop_semi")("sw5")
def _(s, l, r):
    return ("prim", ("rename", "x", "c_d"), "sw6", l)


@op("op_qpop_semi")("sw6")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qpop_semi")("done")
def _(s, l, r):
    return ("ret", ("ok", None))


# isDivisible, semi-synchronous: c_d climbs to d one step per c_f step; the
# answer is whether c_f sits at home exactly when c_d arrives. Everything is
# restored afterwards (no net movement).


@op("op_qdiv_semi")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_qdiv_semi")("sensed")
def _(s, l, r):
    if "b" in r:
        return ("ret", True)  # S = 0
    return ("goto", "iter", (0,))


@op("op_qdiv_semi")("iter")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cd", l)


@op("op_qdiv_semi")("seek_cd")
def _(s, l, r):
    return ("prim", W(UP, ("c_d",)), "at_cd", l)


@op("op_qdiv_semi")("at_cd")
def _(s, l, r):
    return ("prim", P("c_d", UP, 1), "cd_pushed", l)


@op("op_qdiv_semi")("cd_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cd_sensed", l)


@op("op_qdiv_semi")("cd_sensed")
def _(s, l, r):
    return ("goto", "seek_cf", (1 if "d" in r else 0,))


@op("op_qdiv_semi")("seek_cf")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cf2", l)


@op("op_qdiv_semi")("seek_cf2")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qdiv_semi")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qdiv_semi")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qdiv_semi")("cf_sensed")
def _(s, l, r):
    (cd_done,) = l
    cf_land = 1 if "b" in r else 0
    if cf_land:
        return ("prim", E("c_f", UP, ("f",)), "cf_back", (cd_done, cf_land))
    if cd_done:
        return ("goto", "restore", (cd_done, cf_land))
    return ("goto", "iter", l)


@op("op_qdiv_semi")("cf_back")
def _(s, l, r):
    cd_done, cf_land = l
    if cd_done:
        return ("goto", "restore", l)
    return ("prim", W(DOWN, ("b",)), "back", (cd_done,))


@op("op_qdiv_semi")("back")
def _(s, l, r):
    return ("goto", "iter", l)


@op("op_qdiv_semi")("restore")
def _(s, l, r):
    # bring c_d home; c_f is home iff cf_land, else escort it up to f
    cd_done, cf_land = l
    return ("prim", W(DOWN, ("b",)), "seek_cd2", l)


@op("op_qdiv_semi")("seek_cd2")
def _(s, l, r):
    return ("prim", W(UP, ("c_d",)), "esc_cd", l)


@op("op_qdiv_semi")("esc_cd")
def _(s, l, r):
    return ("prim", E("c_d", DOWN, ("b",)), "cd_home", l)


@op("op_qdiv_semi")("cd_home")
def _(s, l, r):
    cd_done, cf_land = l
    if cf_land:
        return ("goto", "rejoin", l)
    return ("prim", W(UP, ("c_f",)), "esc_cf", l)


@op("op_qdiv_semi")("esc_cf")
def _(s, l, r):
    return ("prim", E("c_f", UP, ("f",)), "cf_restored", l)


@op("op_qdiv_semi")("cf_restored")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "rejoin", l)


@op("op_qdiv_semi")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qdiv_semi")("done")
def _(s, l, r):
    cd_done, cf_land = l
    return ("ret", bool(cf_land))


# -- q-ary synchronous ops ----------------------------------------------------
# f sits at log2(q); c_f counts doublings/halvings by walking f -> b.


@op("op_qpush_sync")("entry")
def _(s, l, r):
    return ("prim", ("spush", 0, "init"), "count", l)


@op("op_qpush_sync")("count")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cf", l)


@op("op_qpush_sync")("seek_cf")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qpush_sync")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qpush_sync")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qpush_sync")("cf_sensed")
def _(s, l, r):
    if "b" in r:  # log2(q) doublings done
        return ("prim", E("c_f", UP, ("f",)), "cf_home", l)
    return ("prim", W(DOWN, ("b",)), "back", l)


@op("op_qpush_sync")("back")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "entry", l)


@op("op_qpush_sync")("cf_home")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "rejoin", l)


@op("op_qpush_sync")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qpush_sync")("done")
def _(s, l, r):
    return ("ret", None)


@op("op_qpop_sync")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_qpop_sync")("sensed")
def _(s, l, r):
    if "b" in r:
        return ("ret", ("ok", None))  # S = 0 stays 0
    return ("goto", "probe", l)


@op("op_qpop_sync")("probe")
def _(s, l, r):
    return ("prim", ("spop", "init", 0), "count", l)


@op("op_qpop_sync")("count")
def _(s, l, r):
    if r == 1:  # odd remainder: q does not divide S
        return ("ret", ("err", "not_divisible"))
    return ("prim", W(DOWN, ("b",)), "seek_cf", l)


@op("op_qpop_sync")("seek_cf")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qpop_sync")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qpop_sync")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qpop_sync")("cf_sensed")
def _(s, l, r):
    if "b" in r:
        return ("prim", E("c_f", UP, ("f",)), "cf_home", l)
    return ("prim", W(DOWN, ("b",)), "back", l)


@op("op_qpop_sync")("back")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "probe", l)


@op("op_qpop_sync")("cf_home")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "rejoin", l)


@op("op_qpop_sync")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qpop_sync")("done")
def _(s, l, r):
    return ("ret", ("ok", None))


# isDivisible, synchronous: probe halvings counting with c_f; the first 1 bit
# aborts (not divisible). Restore by re-doubling, pushing the 1 back first.


@op("op_qdiv_sync")("entry")
def _(s, l, r):
    return ("prim", ("sense",), "sensed", l)


@op("op_qdiv_sync")("sensed")
def _(s, l, r):
    if "b" in r:
        return ("ret", True)  # S = 0 is divisible
    return ("goto", "probe", l)


@op("op_qdiv_sync")("probe")
def _(s, l, r):
    return ("prim", ("spop", "init", 0), "popped", l)


@op("op_qdiv_sync")("popped")
def _(s, l, r):
    return ("goto", "count", (r,))


@op("op_qdiv_sync")("count")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_cf", l)


@op("op_qdiv_sync")("seek_cf")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qdiv_sync")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_pushed", l)


@op("op_qdiv_sync")("cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "cf_sensed", l)


@op("op_qdiv_sync")("cf_sensed")
def _(s, l, r):
    (bit,) = l
    counted_out = "b" in r
    if bit == 1 or counted_out:
        # verdict known: divisible iff every probed bit was 0
        return ("goto", "restore", (bit, 1 if counted_out else 0, 1))
    return ("prim", W(DOWN, ("b",)), "back", l)


@op("op_qdiv_sync")("back")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "probe", l)


@op("op_qdiv_sync")("probe")
def _(s, l, r):
    return ("prim", ("spop", "init", 0), "popped", l)


# restore: success verdict = (bit == 0 and counted_out). Re-double, pushing
# back the aborting 1 first when there was one; c_f climbs back to f as the
# counter. locals: (bit, counted_out, first)


@op("op_qdiv_sync")("restore")
def _(s, l, r):
    bit, counted_out, first = l
    return ("prim", W(DOWN, ("b",)), "r_seek_d", l)


@op("op_qdiv_sync")("r_seek_d")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "r_push", l)


@op("op_qdiv_sync")("r_push")
def _(s, l, r):
    bit, counted_out, first = l
    v = bit if first else 0
    return ("prim", ("spush", v, "init"), "r_count", (bit, counted_out, 0))


@op("op_qdiv_sync")("r_count")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "r_seek_cf", l)


@op("op_qdiv_sync")("r_seek_cf")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",), skip=0), "r_at_cf", l)


@op("op_qdiv_sync")("r_at_cf")
def _(s, l, r):
    return ("prim", P("c_f", UP, 1), "r_cf_pushed", l)


@op("op_qdiv_sync")("r_cf_pushed")
def _(s, l, r):
    return ("prim", ("sense",), "r_cf_sensed", l)


@op("op_qdiv_sync")("r_cf_sensed")
def _(s, l, r):
    bit, counted_out, first = l
    if "f" in r:  # counter back home: restoration complete
        return ("prim", W(DOWN, ("b",)), "r_rejoin", l)
    return ("goto", "restore", l)


@op("op_qdiv_sync")("r_rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "r_done", l)


@op("op_qdiv_sync")("r_done")
def _(s, l, r):
    bit, counted_out, first = l
    return ("ret", bool(bit == 0 and counted_out))


# -- backup-stack ops (deterministic explorers) -------------------------------
# The backup value B is the distance from b to e along e2.


@op("op_inc_backup")("entry")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "climb", l)


@op("op_inc_backup")("climb")
def _(s, l, r):
    return ("prim", ("walk", 1, 1, ("e",), 0), "shove", l)


@op("op_inc_backup")("shove")
def _(s, l, r):
    return ("prim", ("push", "e", 1, 1, 0), "descend", l)


@op("op_inc_backup")("descend")
def _(s, l, r):
    return ("prim", ("walk", 1, -1, ("b",), 0), "rejoin", l)


@op("op_inc_backup")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_inc_backup")("done")
def _(s, l, r):
    return ("ret", None)


# semi-synchronous restore: pass 1 drains e while c and d climb together;
# pass 2 drains c back down, rebuilding e one step per c step.
# Entry: stack empty (a, d at the corner with b, c), e at B*e2, B >= 1.


@op("op_restore_semi")("entry")
def _(s, l, r):
    return ("prim", ("walk", 1, 1, ("e",), 0), "p1_at_e", l)


@op("op_restore_semi")("p1_at_e")
def _(s, l, r):
    return ("prim", ("push", "e", 1, -1, 1), "p1_e_sense", l)


@op("op_restore_semi")("p1_e_sense")
def _(s, l, r):
    return ("prim", ("sense",), "p1_e_down", l)


@op("op_restore_semi")("p1_e_down")
def _(s, l, r):
    drained = 1 if "b" in r else 0
    return ("prim", ("walk", 1, -1, ("b",), 0), "p1_corner", (drained,))


@op("op_restore_semi")("p1_corner")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "p1_at_d", l)


@op("op_restore_semi")("p1_at_d")
def _(s, l, r):
    return ("prim", P("d", UP, 1), "p1_d_up", l)


@op("op_restore_semi")("p1_d_up")
def _(s, l, r):
    # c trails one below after d's push; fetch and push it up to rejoin d
    return ("prim", W(DOWN, ("c",)), "p1_at_c", l)


@op("op_restore_semi")("p1_at_c")
def _(s, l, r):
    return ("prim", P("c", UP, 1), "p1_next", l)


@op("op_restore_semi")("p1_next")
def _(s, l, r):
    (drained,) = l
    if drained:
        return ("goto", "p2_start", ())
    return ("prim", W(DOWN, ("b",)), "p1_back", l)


@op("op_restore_semi")("p1_back")
def _(s, l, r):
    return ("prim", ("walk", 1, 1, ("e",), 0), "p1_at_e", l)


@op("op_restore_semi")("p2_start")
def _(s, l, r):
    # a sits with c (and d) at height B; drain c, rebuilding e
    return ("prim", P("c", DOWN, 1), "p2_c_sense", l)


@op("op_restore_semi")("p2_c_sense")
def _(s, l, r):
    return ("prim", ("sense",), "p2_c_down", l)


@op("op_restore_semi")("p2_c_down")
def _(s, l, r):
    landed = 1 if "b" in r else 0
    return ("prim", W(DOWN, ("b",)), "p2_corner", (landed,))


@op("op_restore_semi")("p2_corner")
def _(s, l, r):
    return ("prim", ("walk", 1, 1, ("e",), 0), "p2_at_e", l)


@op("op_restore_semi")("p2_at_e")
def _(s, l, r):
    return ("prim", ("push", "e", 1, 1, 0), "p2_next", l)


@op("op_restore_semi")("p2_next")
def _(s, l, r):
    (landed,) = l
    if landed:
        return ("prim", ("walk", 1, -1, ("b",), 0), "p2_done_corner", l)
    return ("prim", ("walk", 1, -1, ("b",), 0), "p2_back", l)


@op("op_restore_semi")("p2_back")
def _(s, l, r):
    return ("prim", ("walk", 0, 1, ("c",), 0), "p2_start", l)


@op("op_restore_semi")("p2_done_corner")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_restore_semi")("done")
def _(s, l, r):
    return ("ret", None)


# synchronous restore: the speed-1/3 chase prim does all the work
op("op_restore_sync")("entry")(lambda s, l, r: ("prim", ("scopy", "init"), "done", l))
op("op_restore_sync")("done")(lambda s, l, r: ("ret", None))


# -- q maintenance ------------------------------------------------------------
# Semi-synchronous doubling of q: c_f sweeps f -> b;每 step pushes f up one.


@op("op_qdouble_semi")("entry")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "start", l)


@op("op_qdouble_semi")("start")
def _(s, l, r):
    return ("prim", W(UP, ("c_f",)), "at_cf", l)


@op("op_qdouble_semi")("at_cf")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_sense", l)


@op("op_qdouble_semi")("cf_sense")
def _(s, l, r):
    return ("prim", ("sense",), "cf_down", l)


@op("op_qdouble_semi")("cf_down")
def _(s, l, r):
    landed = 1 if "b" in r else 0
    return ("prim", W(UP, ("f",)), "at_f", (landed,))


@op("op_qdouble_semi")("at_f")
def _(s, l, r):
    return ("prim", P("f", UP, 0), "f_pushed", l)


@op("op_qdouble_semi")("f_pushed")
def _(s, l, r):
    (landed,) = l
    if landed:
        return ("prim", W(DOWN, ("c_f",)), "esc_cf", l)
    return ("prim", W(DOWN, ("c_f",)), "back", l)


@op("op_qdouble_semi")("back")
def _(s, l, r):
    return ("prim", P("c_f", DOWN, 1), "cf_sense", l)


@op("op_qdouble_semi")("esc_cf")
def _(s, l, r):
    return ("prim", E("c_f", UP, ("f",)), "rejoin_b", l)


@op("op_qdouble_semi")("rejoin_b")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "rejoin", l)


@op("op_qdouble_semi")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qdouble_semi")("done")
def _(s, l, r):
    return ("ret", None)


# synchronous doubling of q: f marks log2(q), one step up
@op("op_qdouble_sync")("entry")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "seek_f", l)


@op("op_qdouble_sync")("seek_f")
def _(s, l, r):
    return ("prim", W(UP, ("f",)), "shove", l)


@op("op_qdouble_sync")("shove")
def _(s, l, r):
    return ("prim", P("f", UP, 0), "shove_cf", l)


@op("op_qdouble_sync")("shove_cf")
def _(s, l, r):
    return ("prim", P("c_f", UP, 0), "rejoin_b", l)


@op("op_qdouble_sync")("rejoin_b")
def _(s, l, r):
    return ("prim", W(DOWN, ("b",)), "rejoin", l)


@op("op_qdouble_sync")("rejoin")
def _(s, l, r):
    return ("prim", W(UP, ("d",)), "done", l)


@op("op_qdouble_sync")("done")
def _(s, l, r):
    return ("ret", None)


class SessionDriver(Driver):
    """Single-op driver: session surgery plants an op frame over `finish`."""

    tables = T
    main = "finish"

    def initial(self):
        return ("a", (("finish", "entry", ()),), ("start",))


T.setdefault("finish", {})["entry"] = lambda s, l, r: ("halt", r)


def _is_done(token):
    return token[0] == "a" and len(token) == 3 and token[2][:1] == ("halt",)


# ---------------------------------------------------------------------------
# The symbolic twin: plain integer arithmetic, used for differential testing.
# ---------------------------------------------------------------------------


class SymbolicStack:
    """Integer-arithmetic ground truth for a stack variant.

    Tracks the value S, the base offset, and q; predicts exit positions and
    a coarse cost class per op.
    """

    def __init__(self, variant: str, q: int = 2, n: int = 2):
        self.v = VARIANTS[variant]
        if self.v.qary:
            if q < 2:
                raise ValueError("q must be >= 2")
            if self.v.model == "synchronous" and q & (q - 1):
                raise ValueError("synchronous q-ary stack needs q a power of two")
        self.q = q
        self.n = n
        self.s = 0
        self.backup = 0
        self.base = (0,) * n

    def cost_class(self, op: str) -> str:
        if op in ("is_empty", "increment", "decrement"):
            return "O(1)"
        if op == "move":
            return "O(S)"
        sync = self.v.model == "synchronous"
        if self.v.qary:
            return "O(S log q)" if sync else "O(S^2)"
        return "O(S)" if sync else "O(S^2)"

    def is_empty(self):
        return self.s == 0

    def push(self, v: int):
        assert v in (0, 1)
        self.s = 2 * self.s + v

    def pop(self):
        if self.s == 0:
            raise StackProtocolError("pop on empty stack")
        bit = self.s & 1
        self.s >>= 1
        return bit

    def push_q(self):
        self.s *= self.q

    def pop_q(self):
        if self.s % self.q:
            raise StackProtocolError("pop_q on non-divisible value")
        self.s //= self.q

    def is_divisible(self):
        return self.s % self.q == 0

    def increment(self):
        self.s += 1

    def decrement(self):
        if self.s == 0:
            raise StackProtocolError("decrement on empty stack")
        self.s -= 1

    def move(self, dim: int, sign: int):
        p = list(self.base)
        p[dim] += sign
        self.base = tuple(p)

    def expected_positions(self):
        """Role -> grid point for the canonical between-ops layout."""
        e1 = lambda k: tuple(c + (k if i == 0 else 0) for i, c in enumerate(self.base))
        e2 = lambda k: tuple(c + (k if i == 1 else 0) for i, c in enumerate(self.base))
        out = {"b": self.base, "a": e1(self.s), "d": e1(self.s)}
        if "c" in self.v.roster:
            out["c"] = self.base
        if self.v.backup:
            out["e"] = e2(self.backup)
        if self.v.qary:
            fq = self.q if self.v.model == "semi-synchronous" else self.q.bit_length() - 1
            out["f"] = e1(fq)
            out["c_f"] = e1(fq)
            if "c_d" in self.v.roster:
                out["c_d"] = self.base
        return out


def symbolic_oracle(ops, variant: str, q: int = 2, n: int = 2):
    """Run an op sequence on the symbolic stack.

    Returns (final S, expected exit positions, cost classes). An op with an
    unmet precondition reports the index of the first invalid op instead.
    """
    sym = SymbolicStack(variant, q=q, n=n)
    classes = []
    bits = []
    for idx, item in enumerate(ops):
        name, *args = item if isinstance(item, tuple) else (item,)
        try:
            classes.append(sym.cost_class(name))
            if name == "push":
                sym.push(args[0])
            elif name == "pop":
                bits.append(sym.pop())
            elif name == "push_q":
                sym.push_q()
            elif name == "pop_q":
                sym.pop_q()
            elif name == "is_divisible":
                bits.append(sym.is_divisible())
            elif name == "is_empty":
                bits.append(sym.is_empty())
            elif name == "increment":
                sym.increment()
            elif name == "move":
                sym.move(args[0], args[1])
            else:
                raise StackProtocolError(f"unknown op {name!r}")
        except StackProtocolError:
            return {"invalid_at": idx}
    return {
        "s": sym.s,
        "positions": sym.expected_positions(),
        "cost_classes": classes,
        "results": bits,
    }


# ---------------------------------------------------------------------------
# Agent-level session
# ---------------------------------------------------------------------------


@dataclass
class OpStats:
    name: str
    ticks: int
    moves: int


class StackSession:
    """Drives the agent-level stack through single ops, mirroring them on the
    symbolic twin, and checks the exit layout after every op."""

    def __init__(self, variant: str, q: int = 2, n: int = 2,
                 policy: ActivationPolicy | None = None, seed: int = 0,
                 engine: str | None = None, check: bool = True):
        self.v = VARIANTS[variant]
        self.sym = SymbolicStack(variant, q=q, n=n)
        self.q = q
        self.n = n
        self.check = check
        if policy is None:
            kind = "synchronous" if self.v.model == "synchronous" else "round-robin"
            policy = ActivationPolicy(kind)
        elif self.v.model == "synchronous" and policy.kind != "synchronous":
            raise ValueError("synchronous variants need the synchronous policy")
        controllers = [SessionDriver() if r == "a" else StackMember(r)
                       for r in self.v.roster]
        cfg = RunConfig(
            n=n,
            controllers=controllers,
            policy=policy,
            seed=seed,
            stop_fn=_is_done,
            max_ticks=None,
            collect_visited=False,
        )
        from .engine import make_world

        self.w = make_world(cfg, engine)
        # plant the entry layout (harness surgery, not protocol)
        pos = self.sym.expected_positions()
        for i, r in enumerate(self.v.roster):
            self.w.set_position(i, pos.get(r, self.sym.base))
        self.stats: list[OpStats] = []

    # -- plumbing -----------------------------------------------------------

    def _run(self, fn: str, locals_: tuple, opname: str):
        w = self.w
        w.set_state(0, ("a", (("finish", "entry", ()), (fn, "entry", tuple(locals_))),
                        ("start",)))
        t0, m0 = w.tick, w.moves_total
        w.resume()
        if w.report.termination != "program_halt":
            raise StackProtocolError(
                f"op {opname} did not complete: {w.report.termination}")
        self.stats.append(OpStats(opname, w.tick - t0, w.moves_total - m0))
        result = w.state_of(0)[2][1]
        if isinstance(result, tuple) and result[:1] == ("err",):
            raise StackProtocolError(result[1])
        if self.check:
            self.check_layout()
        return result

    def positions(self):
        """Role -> position by current role (roles migrate across agents)."""
        return {self.w.role_of_agent[i]: self.w.position_of(i)
                for i in range(len(self.v.roster))}

    def value(self) -> int:
        from .grid import manhattan_distance

        pos = self.positions()
        return manhattan_distance(pos["b"], pos["d"])

    def check_layout(self):
        want = self.sym.expected_positions()
        got = self.positions()
        for role, p in want.items():
            if got.get(role) != p:
                raise AssertionError(
                    f"layout drift on {role}: expected {p}, got {got.get(role)} "
                    f"(S={self.sym.s})")

    # -- ops ----------------------------------------------------------------

    def is_empty(self) -> bool:
        got = self._run("op_is_empty", (), "is_empty")
        assert got == self.sym.is_empty()
        return got

    def push(self, v: int):
        assert not self.v.qary
        self.sym.push(v)
        fn = "op_push_sync" if self.v.model == "synchronous" else "op_push_semi"
        self._run(fn, (v,), f"push({v})")

    def pop(self) -> int:
        assert not self.v.qary
        if self.sym.s == 0:
            raise StackProtocolError("pop on empty stack")
        want = self.sym.pop()
        fn = "op_pop_sync" if self.v.model == "synchronous" else "op_pop_semi"
        got = self._run(fn, (), "pop")
        assert got == want, f"pop bit mismatch: got {got}, expected {want}"
        return got

    def push_q(self):
        assert self.v.qary
        self.sym.push_q()
        if self.v.model == "synchronous":
            self._run("op_qpush_sync", (), "push_q")
        else:
            self._run("op_qpush_semi", (), "push_q")

    def pop_q(self):
        assert self.v.qary
        self.sym.pop_q()  # raises on non-divisible before touching agents
        fn = "op_qpop_sync" if self.v.model == "synchronous" else "op_qpop_semi"
        self._run(fn, (), "pop_q")

    def is_divisible(self) -> bool:
        assert self.v.qary
        want = self.sym.is_divisible()
        fn = "op_qdiv_sync" if self.v.model == "synchronous" else "op_qdiv_semi"
        got = self._run(fn, (), "is_divisible")
        assert got == want, f"is_divisible: got {got}, expected {want}"
        return got

    def increment(self):
        self.sym.increment()
        self._run("op_inc", (), "increment")

    def decrement(self):
        self.sym.decrement()
        self._run("op_dec", (), "decrement")

    def move(self, dim: int, sign: int):
        self.sym.move(dim, sign)
        roles = tuple(r for r in ("d", "c", "c_f", "f", "c_d")
                      if r in self.v.roster)
        self._run("op_move", (dim, sign, roles, self.v.backup), "move")

    def inc_backup(self):
        assert self.v.backup
        self.sym.backup += 1
        self._run("op_inc_backup", (), "inc_backup")

    def restore(self):
        assert self.v.backup
        if self.sym.backup < 1:
            raise StackProtocolError("restore with empty backup")
        if self.sym.s != 0:
            raise StackProtocolError("restore needs an empty working stack")
        self.sym.s = self.sym.backup
        fn = "op_restore_sync" if self.v.model == "synchronous" else "op_restore_semi"
        self._run(fn, (), "restore")

    def double_q(self):
        assert self.v.qary
        self.sym.q *= 2
        self.q *= 2
        fn = ("op_qdouble_sync" if self.v.model == "synchronous"
              else "op_qdouble_semi")
        self._run(fn, (), "double_q")
