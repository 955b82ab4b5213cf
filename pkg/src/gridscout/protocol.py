"""FSM building blocks for the paper's protocols.

One driver agent ("a") runs a program encoded entirely in its state token:
a small frame stack of (function, label, locals) plus the current primitive.
Everything the other agents do is reactive: they watch the driver's token
when collocated and obey push / escort / rename / sweep commands, so every
protocol is driven by local interactions only and is robust to any fair
activation schedule.

Primitives that need exact synchronous timing (the speed-1/3 stack walks)
never act on the activation that enters them: their token must be visible
one tick before anyone moves, which is what aligns the driver and the
distance agent on a common clock.

Driver tokens: ("a", frames, prim); reactive tokens: (role, mode, ...).
Programs are written as label -> handler tables returning directives:

    ("prim", primctx, next_label, locals)   run a primitive, then continue
    ("goto", label, locals)                 immediate transfer
    ("call", fn, arg_locals, ret_label, locals)
    ("ret", value)                          deliver value to the caller
    ("halt", value)                         absorbing end state

Handler signature: handler(locals, result) with result the finished
primitive's (or callee's) value.
"""

from __future__ import annotations

from .runtime import Controller

STACK_ROLES = ("b", "c", "d", "e", "f", "c_d", "c_f", "aux", "aux2")

MAX_CASCADE = 256


def roles_of(obs) -> frozenset:
    return frozenset(t[0] for t in obs)


def driver_prim(tok):
    """The current primitive of a collocated driver token, if any."""
    if tok[0] == "a" and len(tok) == 3:
        return tok[2]
    return None


# ---------------------------------------------------------------------------
# Primitive semantics (driver side)
# ---------------------------------------------------------------------------
# A prim handler maps (prim, obs, rand, arrival) to one of
#   ("wait",)                     stay put, keep the prim
#   ("act", action, prim')        perform action, keep/advance the prim
#   ("done", result, action)      prim finished; action may be None
#
# Handlers are registered by name so other modules (handrail) can add prims.

PRIMS = {}


def prim(name):
    def reg(fn):
        PRIMS[name] = fn
        return fn

    return reg


@prim("start")
def _p_start(p, obs, rand, arrival):
    return ("done", None, None)


@prim("noop")
def _p_noop(p, obs, rand, arrival):
    return ("done", None, None)


@prim("mark")
def _p_mark(p, obs, rand, arrival):
    # ("mark", tag): a visible one-activation marker state
    return ("done", None, None)


@prim("coin")
def _p_coin(p, obs, rand, arrival):
    # ("coin", bits)
    return ("done", rand, None)


@prim("jump")
def _p_jump(p, obs, rand, arrival):
    # ("jump", dim, sign): one unconditional step
    return ("done", None, ("move", p[1], p[2]))


@prim("sense")
def _p_sense(p, obs, rand, arrival):
    return ("done", roles_of(obs), None)


@prim("walk")
def _p_walk(p, obs, rand, arrival):
    # ("walk", dim, sign, stops, skip): step along (dim, sign) until a stop
    # role is collocated; skip=1 suppresses the check at the entry cell.
    _, dim, sign, stops, skip = p
    here = roles_of(obs)
    if not skip and (here & frozenset(stops)):
        return ("done", here, None)
    return ("act", ("move", dim, sign), ("walk", dim, sign, stops, 0))


@prim("push")
def _p_push(p, obs, rand, arrival):
    # ("push", target, dim, sign, follow): shove a collocated agent one step.
    _, tgt, dim, sign, follow = p
    if tgt in roles_of(obs):
        return ("wait",)
    if follow:
        return ("done", None, ("move", dim, sign))
    return ("done", None, None)


@prim("pushall")
def _p_pushall(p, obs, rand, arrival):
    # ("pushall", dim, sign): every collocated stack agent steps (dim, sign).
    if roles_of(obs) & frozenset(STACK_ROLES):
        return ("wait",)
    return ("done", None, None)


@prim("esc")
def _p_esc(p, obs, rand, arrival):
    # ("esc", target, dim, sign, stops, stage): walk with target in tow.
    _, tgt, dim, sign, stops, stage = p
    here = roles_of(obs)
    if stage == "call":
        for t in obs:
            if t[0] == tgt and t[1] == "follow":
                return _p_esc(("esc", tgt, dim, sign, stops, "lead"), obs, rand, arrival)
        return ("wait",)
    if stage == "lead":
        if here & frozenset(stops):
            if tgt in here:
                return ("act", None, ("esc", tgt, dim, sign, stops, "rel"))
            return ("wait",)  # let the target catch up first
        if tgt in here:
            return ("act", ("move", dim, sign), p)
        return ("wait",)
    # stage "rel": wait until the target saw the release and idled
    for t in obs:
        if t[0] == tgt and t[1] == "idle":
            return ("done", None, None)
    return ("wait",)


@prim("esc1")
def _p_esc1(p, obs, rand, arrival):
    # ("esc1", target, dim, sign, stage): escort the target exactly one step.
    _, tgt, dim, sign, stage = p
    here = roles_of(obs)
    if stage == "call":
        for t in obs:
            if t[0] == tgt and t[1] == "follow":
                if tgt in here:
                    return ("act", ("move", dim, sign), ("esc1", tgt, dim, sign, "wait"))
        return ("wait",)
    if stage == "wait":
        if tgt in here:
            return ("act", None, ("esc1", tgt, dim, sign, "rel"))
        return ("wait",)
    for t in obs:
        if t[0] == tgt and t[1] == "idle":
            return ("done", None, None)
    return ("wait",)


@prim("rename")
def _p_rename(p, obs, rand, arrival):
    # ("rename", target, newrole)
    _, tgt, new = p
    here = roles_of(obs)
    if tgt in here:
        return ("wait",)
    if new in here:
        return ("done", None, None)
    return ("wait",)


# -- synchronous stack primitives -------------------------------------------
#
# The distance agent walks at speed 1/3 (move, wait, wait) while the driver
# shuttles at full speed; with push starting both walks on the same tick the
# meeting lands exactly at 2S (push) or floor(S/2) (pop). The pop bit is the
# meeting tick mod 3: d last moved on ticks = 1 mod 3, so meeting detection
# on tick t with (t-1) = 1 mod 3 means S was odd.


@prim("spush")
def _p_spush(p, obs, rand, arrival):
    # ("spush", v, stage)
    _, v, stage = p
    here = roles_of(obs)
    if stage == "init":
        if "b" in here:  # S = 0: everyone already at the base
            return ("act", None, ("spush", v, "meet"))
        return ("act", ("move", 0, -1), ("spush", v, "go"))
    if stage == "go":
        if "b" in here:
            if "d" in here:
                return ("act", None, ("spush", v, "meet"))
            return ("act", ("move", 0, 1), ("spush", v, "up"))
        return ("act", ("move", 0, -1), p)
    if stage == "up":
        if "d" in here:
            return ("act", None, ("spush", v, "meet"))
        return ("act", ("move", 0, 1), p)
    # stage "meet": d has seen this token; apply the +v adjustment together
    if v:
        return ("done", None, ("move", 0, 1))
    return ("done", None, None)


@prim("spop")
def _p_spop(p, obs, rand, arrival):
    # ("spop", stage, cnt): cnt tracks the activation tick mod 3; the popped
    # bit is 1 iff the meeting coincidence happened on a tick = 1 mod 3.
    _, stage, cnt = p
    here = roles_of(obs)
    if stage == "init":
        return ("act", ("move", 0, -1), ("spop", "go", 1))
    nxt = (cnt + 1) % 3
    if stage == "go":
        if "b" in here:
            if "d" in here:
                return ("act", None, ("spop", "meet", 1 if cnt == 1 else 0))
            return ("act", ("move", 0, 1), ("spop", "up", nxt))
        return ("act", ("move", 0, -1), ("spop", "go", nxt))
    if stage == "up":
        if "d" in here:
            return ("act", None, ("spop", "meet", 1 if cnt == 1 else 0))
        return ("act", ("move", 0, 1), ("spop", "up", nxt))
    # stage "meet": token shown for one tick so d freezes, then report the bit
    return ("done", cnt, None)


@prim("scopy")
def _p_scopy(p, obs, rand, arrival):
    # ("scopy", stage): synchronous restore S := |be| via a speed-1/3 chase.
    _, stage = p
    here = roles_of(obs)
    if stage == "init":
        return ("act", ("move", 1, 1), ("scopy", "up2"))
    if stage == "up2":
        if "e" in here:
            return ("act", ("move", 1, -1), ("scopy", "down2"))
        return ("act", ("move", 1, 1), p)
    if stage == "down2":
        if "b" in here:
            return ("act", ("move", 0, 1), ("scopy", "chase"))
        return ("act", ("move", 1, -1), p)
    if stage == "chase":
        if "d" in here:
            return ("act", None, ("scopy", "stopd"))
        return ("act", ("move", 0, 1), p)
    # stage "stopd": wait until d idles
    for t in obs:
        if t[0] == "d" and t[1] == "idle":
            return ("done", None, None)
    return ("wait",)


# ---------------------------------------------------------------------------
# Driver controller: the program interpreter
# ---------------------------------------------------------------------------


class Driver(Controller):
    """Runs a program table. Subclasses provide `tables`, `main`, `locals0`."""

    role = "a"
    tables: dict = {}
    main = "main"
    coin_bits: dict = {}  # optional: prim name -> width override

    def __init__(self):
        pass

    def entry_locals(self):
        return ()

    def initial(self):
        frames = ((self.main, "entry", tuple(self.entry_locals())),)
        return ("a", frames, ("start",))

    def rng_bits(self, state):
        prim = state[2]
        if prim is not None and prim[0] == "coin":
            return prim[1]
        return 0

    def dispatch(self, fn, label, locals_, result):
        return self.tables[fn][label](self, locals_, result)

    def step(self, state, obs, rand, arrival):
        _, frames, primctx = state
        outcome = PRIMS[primctx[0]](primctx, obs, rand, arrival)
        if outcome[0] == "wait":
            return state, None
        if outcome[0] == "act":
            _, action, newprim = outcome
            return ("a", frames, newprim), action
        # prim finished: feed its value through the program until the next
        # primitive that must wait for the world (or that acted already).
        result = outcome[1]
        action = outcome[2]
        for _ in range(MAX_CASCADE):
            if not frames:
                return ("a", (), ("halted",)), action
            fn, label, locals_ = frames[-1]
            d = self.dispatch(fn, label, locals_, result)
            kind = d[0]
            if kind == "prim":
                _, primctx, nlabel, nlocals = d
                frames = frames[:-1] + ((fn, nlabel, nlocals),)
                if action is None and primctx[0] in _ENTRY_EAGER:
                    out2 = PRIMS[primctx[0]](primctx, obs, rand, arrival)
                    if out2[0] == "act":
                        return ("a", frames, out2[2]), out2[1]
                    if out2[0] == "done":
                        result, action = out2[1], out2[2]
                        continue
                return ("a", frames, primctx), action
            if kind == "goto":
                _, nlabel, nlocals = d
                frames = frames[:-1] + ((fn, nlabel, nlocals),)
                result = None
                continue
            if kind == "call":
                _, cfn, clocals, ret_label, nlocals = d
                frames = frames[:-1] + (
                    (fn, ret_label, nlocals),
                    (cfn, "entry", tuple(clocals)),
                )
                result = None
                continue
            if kind == "ret":
                frames = frames[:-1]
                result = d[1]
                continue
            if kind == "halt":
                return ("a", (), ("halt", d[1])), action
            raise RuntimeError(f"bad directive {d!r} from {fn}:{label}")
        raise RuntimeError("cascade limit exceeded (runaway program)")


# prims whose first activation may already inspect/act; handshake prims must
# publish their token for one tick first, markers must materialize as a state
# of their own to be countable, and coin prims must become the post-state so
# the engine draws a fresh word for them.
_ENTRY_EAGER = {"walk", "jump", "sense", "noop", "start"}


def table(cls_tables, fn):
    """Decorator: register a label handler into a program table."""

    def reg(label):
        def inner(h):
            cls_tables.setdefault(fn, {})[label] = h
            return h

        return inner

    return reg


# ---------------------------------------------------------------------------
# Reactive stack member
# ---------------------------------------------------------------------------


class StackMember(Controller):
    """b, c, d, e, f, c_d, c_f and aux agents: idle until commanded."""

    def __init__(self, role: str):
        self.role = role

    def initial(self):
        return (self.role, "idle")

    def step(self, state, obs, rand, arrival):
        role, mode = state[0], state[1]
        a_prim = None
        a_here = False
        for t in obs:
            p = driver_prim(t)
            if p is not None:
                a_prim, a_here = p, True
                break

        if mode == "idle":
            if a_prim is None:
                return state, None
            name = a_prim[0]
            if name == "push" and a_prim[1] == role:
                return state, ("move", a_prim[2], a_prim[3])
            if name == "pushall":
                return state, ("move", a_prim[1], a_prim[2])
            if name == "esc" and a_prim[1] == role and a_prim[5] == "call":
                return (role, "follow", a_prim[2], a_prim[3]), None
            if name == "esc1" and a_prim[1] == role and a_prim[4] == "call":
                return (role, "follow", a_prim[2], a_prim[3]), None
            if name == "rename" and a_prim[1] == role:
                return (a_prim[2], "idle"), None
            if role == "d" and name == "spush" and a_prim[2] in ("init", "go"):
                if "b" in roles_of(obs):
                    return (role, "awaitv"), None
                return (role, "walk13", 1, 0, "push"), ("move", 0, 1)
            if role == "d" and name == "spop" and a_prim[1] in ("init", "go"):
                return (role, "walk13", -1, 0, "pop"), ("move", 0, -1)
            if role == "d" and name == "scopy" and a_prim[1] in ("init", "up2"):
                return (role, "walk13", 1, 0, "copy"), ("move", 0, 1)
            return state, None

        if mode == "follow":
            dim, sign = state[2], state[3]
            if a_here:
                if a_prim[0] == "esc" and a_prim[1] == role:
                    if a_prim[5] == "rel":
                        return (role, "idle"), None
                    return state, None
                if a_prim[0] == "esc1" and a_prim[1] == role:
                    if a_prim[4] == "rel":
                        return (role, "idle"), None
                    return state, None
                return state, None  # leader busy releasing someone else
            return state, ("move", dim, sign)

        if mode == "awaitv":
            if a_here and a_prim[0] == "spush" and a_prim[2] == "meet":
                if a_prim[1]:
                    return (role, "idle"), ("move", 0, 1)
                return (role, "idle"), None
            return state, None

        if mode == "walk13":
            sign, cnt, fam = state[2], state[3], state[4]
            if a_here:
                if fam == "push" and a_prim[0] == "spush":
                    if a_prim[2] == "up":
                        return (role, "awaitv"), None
                    if a_prim[2] == "meet":
                        if a_prim[1]:
                            return (role, "idle"), ("move", 0, 1)
                        return (role, "idle"), None
                if fam == "pop" and a_prim[0] == "spop" and a_prim[1] in ("up", "meet"):
                    return (role, "idle"), None
                if fam == "copy" and a_prim[0] == "scopy" and a_prim[1] in ("chase", "stopd"):
                    return (role, "idle"), None
            nxt = (cnt + 1) % 3
            act = ("move", 0, sign) if nxt == 0 else None
            return (role, "walk13", sign, nxt, fam), act

        raise RuntimeError(f"unknown mode {mode!r}")
