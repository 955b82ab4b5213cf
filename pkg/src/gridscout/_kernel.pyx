# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled tick loop.

Semantics are identical to runtime.World: controller transitions are
memoized as integer tables keyed by (agent, state, observation, coin,
arrival port); cache misses call back into the Python step functions, so
the controllers themselves exist only once. Deterministic streams, policy
drivers and port labelings mirror the Python implementations bit for bit.

Packing limits (guarded, and far beyond what any pinned run reaches):
16 agents, 8 dimensions, |coordinate| <= 30000, 2^20 interned states,
2^19 interned observations.
"""

from cython.operator cimport dereference as deref
from libc.stdint cimport uint64_t, int64_t, int32_t
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

from .runtime import ContractViolation, RunReport


cdef inline uint64_t splitmix64(uint64_t x) nogil:
    x = x + <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = x
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t mix2(uint64_t a, uint64_t b) nogil:
    return splitmix64(splitmix64(a) ^ b)


cdef inline uint64_t stream_word(uint64_t seed, uint64_t count) nogil:
    return splitmix64(seed + <uint64_t>0x632BE59BD9B4E019 * (count + 1))


DEF MAXN = 8
DEF MAXK = 16
DEF MAXPORTS = 16


cdef class KernelWorld:
    cdef public object cfg
    cdef public object report
    cdef int k, n
    cdef public int tick
    cdef int64_t pos[MAXK][MAXN]
    cdef int64_t start_pos_[MAXK][MAXN]
    cdef int sid_of[MAXK]
    cdef uint64_t rng_seed[MAXK]
    cdef uint64_t rng_count[MAXK]
    cdef int arrival[MAXK]
    cdef int last_active[MAXK]
    cdef int last_effect[MAXK]
    cdef long long moves_agent[MAXK]
    cdef long long total_moves_
    cdef long long marker_count_
    cdef uint64_t checksum_
    cdef long long max_exc
    cdef long long s_max
    cdef int role_b_agent, role_d_agent
    cdef bint found
    cdef int found_tick, found_by
    cdef bint has_treasure
    cdef int64_t treasure[MAXN]
    cdef unordered_set[uint64_t] visited
    cdef unordered_map[uint64_t, uint64_t] memo
    cdef unordered_map[uint64_t, uint64_t] obs_intern
    cdef uint64_t obs_next
    cdef list tokens
    cdef dict sid_lookup
    cdef vector[int32_t] sid_role
    cdef vector[int32_t] sid_bits
    cdef vector[int32_t] sid_stop
    cdef vector[int32_t] sid_marker
    cdef list role_names
    cdef dict role_lookup
    cdef list census_sets
    cdef list clamps
    cdef int policy_kind
    cdef uint64_t policy_seed
    cdef int fairness_b
    cdef bint unoriented
    cdef uint64_t lab_seed
    cdef long long max_ticks, max_moves, max_excursion_budget
    cdef int cover_radius
    cdef long long cover_count, cover_target
    cdef long long stop_markers
    cdef bint done
    cdef bint collect_visited
    cdef dict lift_map        # mover agent -> aux agent
    cdef public dict lift_orient
    cdef public long long lift_mismatches
    cdef public list schedule

    def __init__(self, cfg):
        from .grid import sphere_size
        from .rng import mix2 as pymix2

        self.cfg = cfg
        self.k = len(cfg.controllers)
        self.n = cfg.n
        if self.k > MAXK:
            raise ValueError(f"compiled kernel supports at most {MAXK} agents")
        if self.n > MAXN:
            raise ValueError(f"compiled kernel supports at most {MAXN} dims")
        if self.k == 0:
            self.report = RunReport(n=cfg.n, agent_count=0, termination="no_agents")
            self.done = True
            return
        self.done = False
        self.tick = 0
        self.tokens = []
        self.sid_lookup = {}
        self.role_names = []
        self.role_lookup = {}
        self.census_sets = []
        self.clamps = []
        self.obs_next = 1
        self.total_moves_ = 0
        self.marker_count_ = 0
        self.checksum_ = 0
        self.max_exc = 0
        self.s_max = 0
        self.found = False
        self.found_tick = -1
        self.found_by = -1
        self.collect_visited = cfg.collect_visited
        self.lift_map = cfg.lift if cfg.lift else None
        self.lift_orient = {}
        self.lift_mismatches = 0
        self.schedule = [] if cfg.record_schedule else None
        starts = cfg.start_positions or [(0,) * self.n] * self.k
        cdef int i, j
        for i in range(self.k):
            for j in range(self.n):
                self.pos[i][j] = starts[i][j]
                self.start_pos_[i][j] = starts[i][j]
            self.sid_of[i] = self._intern(i, cfg.controllers[i].initial())
            self.rng_seed[i] = pymix2(cfg.seed, 0x5EED ^ i)
            self.rng_count[i] = 0
            self.arrival[i] = -1
            self.last_active[i] = 0
            self.last_effect[i] = 0
            self.moves_agent[i] = 0
        self._refresh_roles()
        pol = cfg.policy
        self.policy_kind = {"synchronous": 0, "round-robin": 1,
                            "seeded-random-subset": 2, "greedy-delay": 3}[pol.kind]
        self.policy_seed = pol.seed
        self.fairness_b = pol.fairness_bound
        self.unoriented = cfg.labeling is not None
        self.lab_seed = cfg.labeling.seed if self.unoriented else 0
        self.max_ticks = cfg.max_ticks if cfg.max_ticks is not None else -1
        self.max_moves = cfg.max_moves if cfg.max_moves is not None else -1
        self.max_excursion_budget = (cfg.max_excursion
                                     if cfg.max_excursion is not None else -1)
        self.has_treasure = cfg.treasure is not None
        if self.has_treasure:
            for j in range(self.n):
                self.treasure[j] = cfg.treasure[j]
        self.cover_radius = (cfg.stop_covered_radius
                             if cfg.stop_covered_radius is not None else -1)
        self.stop_markers = (cfg.stop_marker_count
                             if cfg.stop_marker_count is not None else -1)
        self.cover_count = 0
        self.cover_target = 0
        if self.cover_radius >= 0:
            self.cover_target = sphere_size(self.n, self.cover_radius)
        for i in range(self.k):
            self._visit(i, 0)
        self.report = None

    # -- interning ----------------------------------------------------------

    cdef int _intern(self, int agent, object token) except -1:
        sid = self.sid_lookup.get(token)
        if sid is not None:
            return <int>sid
        cdef int new_sid = len(self.tokens)
        if new_sid >= (1 << 20):
            raise OverflowError("state space exceeded kernel limits; "
                                "use the python engine")
        self.sid_lookup[token] = new_sid
        self.tokens.append(token)
        role = token[0]
        rid = self.role_lookup.get(role)
        if rid is None:
            rid = len(self.role_names)
            self.role_lookup[role] = rid
            self.role_names.append(role)
            self.census_sets.append(set())
        ctrl = self.cfg.controllers[agent]
        cdef int32_t stop_flag = 0
        cdef int32_t marker_flag = 0
        cdef int32_t bits_val = <int32_t>ctrl.rng_bits(token)
        if self.cfg.stop_fn is not None and self.cfg.stop_fn(token):
            stop_flag = 1
        if self.cfg.marker_fn is not None and self.cfg.marker_fn(token):
            marker_flag = 1
        self.sid_role.push_back(<int32_t><int>rid)
        self.sid_bits.push_back(bits_val)
        self.sid_stop.push_back(stop_flag)
        self.sid_marker.push_back(marker_flag)
        self.census_sets[<int>rid].add(token)
        return new_sid

    cdef void _refresh_roles(self):
        self.role_b_agent = -1
        self.role_d_agent = -1
        cdef int i
        for i in range(self.k):
            role = self.tokens[self.sid_of[i]][0]
            if role == "b":
                self.role_b_agent = i
            elif role == "d":
                self.role_d_agent = i

    cdef uint64_t _pack_cell(self, int agent) except *:
        cdef uint64_t key = 0
        cdef int j
        cdef int64_t c
        for j in range(self.n):
            c = self.pos[agent][j]
            if c > 30000 or c < -30000:
                raise OverflowError("coordinate out of kernel range; "
                                    "use the python engine")
            key = (key << 16) | <uint64_t>(c + 32768)
        return key

    cdef int _visit(self, int agent, int t) except -1:
        cdef long long exc = 0
        cdef int j
        for j in range(self.n):
            exc += (self.pos[agent][j] if self.pos[agent][j] >= 0
                    else -self.pos[agent][j])
        if exc > self.max_exc:
            self.max_exc = exc
        cdef uint64_t cell
        if self.collect_visited or self.cover_radius >= 0:
            cell = self._pack_cell(agent)
            if self.visited.find(cell) == self.visited.end():
                self.visited.insert(cell)
                if self.cover_radius >= 0 and exc == self.cover_radius:
                    self.cover_count += 1
        if self.has_treasure and not self.found:
            for j in range(self.n):
                if self.pos[agent][j] != self.treasure[j]:
                    break
            else:
                self.found = True
                self.found_tick = t
                self.found_by = agent
        return 0

    # -- port labeling (mirror of grid.PortLabeling) --------------------------

    cdef void _node_ports(self, int64_t* node, int* out):
        cdef int m = 2 * self.n
        cdef int i, j_
        cdef int tmp
        if self.lab_seed == 0:
            for i in range(m):
                out[i] = i
            return
        cdef uint64_t h = splitmix64(self.lab_seed)
        cdef int j
        for j in range(self.n):
            h = mix2(h, <uint64_t>node[j])
        for i in range(m):
            out[i] = i
        cdef uint64_t x = h
        for i in range(m - 1, 0, -1):
            x = splitmix64(x)
            j_ = <int>(x % <uint64_t>(i + 1))
            tmp = out[i]
            out[i] = out[j_]
            out[j_] = tmp

    # -- surgery and accessors -------------------------------------------------

    def set_state(self, int agent, token):
        self.sid_of[agent] = self._intern(agent, token)
        self._refresh_roles()

    def set_position(self, int agent, p):
        cdef int j
        for j in range(self.n):
            self.pos[agent][j] = p[j]
            self.start_pos_[agent][j] = p[j]
        self._visit(agent, self.tick)

    def state_of(self, int agent):
        return self.tokens[self.sid_of[agent]]

    def position_of(self, int agent):
        return tuple([self.pos[agent][j] for j in range(self.n)])

    @property
    def moves_total(self):
        return self.total_moves_

    @property
    def role_of_agent(self):
        return [self.tokens[self.sid_of[i]][0] for i in range(self.k)]

    def position_of_role(self, role):
        cdef int i
        for i in range(self.k):
            if self.tokens[self.sid_of[i]][0] == role:
                return self.position_of(i)
        return None

    @property
    def start_positions(self):
        return [tuple([self.start_pos_[i][j] for j in range(self.n)])
                for i in range(self.k)]

    def memo_size(self):
        return self.memo.size()

    def debug_tables(self):
        return {
            "tokens": len(self.tokens),
            "stop": [self.sid_stop[i] for i in range(self.sid_stop.size())],
            "bits": [self.sid_bits[i] for i in range(self.sid_bits.size())],
        }

    # -- policy -----------------------------------------------------------------

    cdef int _select(self, int t, int* active) except -1:
        cdef int cnt = 0
        cdef int i, j, best
        cdef uint64_t word
        cdef bint present
        if self.policy_kind == 0:
            for i in range(self.k):
                active[cnt] = i
                cnt += 1
        elif self.policy_kind == 1:
            active[0] = (t - 1) % self.k
            cnt = 1
        elif self.policy_kind == 2:
            word = mix2(self.policy_seed, <uint64_t>t)
            for i in range(self.k):
                if (word >> (i % 48)) & 1:
                    active[cnt] = i
                    cnt += 1
            if cnt == 0:
                active[0] = <int>((word >> 48) % <uint64_t>self.k)
                cnt = 1
        cdef int m = cnt
        for i in range(self.k):
            if t - self.last_active[i] >= self.fairness_b:
                present = False
                for j in range(m):
                    if active[j] == i:
                        present = True
                        break
                if not present:
                    if self.policy_kind != 3:
                        self.clamps.append((t, i))
                    active[m] = i
                    m += 1
        cnt = m
        if cnt == 0:
            best = 0
            for i in range(1, self.k):
                if self.last_effect[i] > self.last_effect[best]:
                    best = i
            active[0] = best
            cnt = 1
        cdef int a_, b_
        for a_ in range(cnt):
            for b_ in range(a_ + 1, cnt):
                if active[b_] < active[a_]:
                    i = active[a_]; active[a_] = active[b_]; active[b_] = i
        for a_ in range(cnt):
            self.last_active[active[a_]] = t
        return cnt

    # -- observation interning ---------------------------------------------------

    cdef uint64_t _gather_obs(self, int agent, int* obs_sids,
                              int* obs_cnt) except *:
        cdef int cnt = 0
        cdef int i, j, a_, b_, t_
        cdef bint same
        for i in range(self.k):
            if i == agent:
                continue
            same = True
            for j in range(self.n):
                if self.pos[i][j] != self.pos[agent][j]:
                    same = False
                    break
            if same:
                obs_sids[cnt] = self.sid_of[i]
                cnt += 1
        obs_cnt[0] = cnt
        for a_ in range(1, cnt):
            t_ = obs_sids[a_]
            b_ = a_ - 1
            while b_ >= 0 and obs_sids[b_] > t_:
                obs_sids[b_ + 1] = obs_sids[b_]
                b_ -= 1
            obs_sids[b_ + 1] = t_
        cdef uint64_t acc = 0
        cdef uint64_t key, nid
        for a_ in range(cnt):
            key = (acc << 21) ^ (<uint64_t>(obs_sids[a_] + 1))
            it = self.obs_intern.find(key)
            if it == self.obs_intern.end():
                nid = self.obs_next
                if nid >= (1 << 19):
                    raise OverflowError("observation space exceeded kernel "
                                        "limits; use the python engine")
                self.obs_next += 1
                self.obs_intern[key] = nid
                acc = nid
            else:
                acc = deref(it).second
        return acc

    # -- run loop -------------------------------------------------------------

    def run(self):
        return self._run()

    def resume(self):
        self.done = False
        return self._run()

    def _visited_tuples(self):
        out = set()
        cdef uint64_t cell
        cdef int j
        cdef list coords
        for cell in self.visited:
            coords = []
            for j in range(self.n):
                coords.append(<int64_t>((cell >> (16 * (self.n - 1 - j))) & 0xFFFF)
                              - 32768)
            out.add(tuple(coords))
        return out

    cdef object _finish(self, str cause):
        rep = RunReport(n=self.n, agent_count=self.k)
        rep.ticks = self.tick
        rep.termination = cause
        rep.total_moves = self.total_moves_
        rep.moves_per_agent = [self.moves_agent[i] for i in range(self.k)]
        rep.max_excursion = self.max_exc
        rep.s_max = self.s_max
        rep.treasure_found = self.found
        rep.found_tick = self.found_tick if self.found else None
        rep.found_by = self.found_by if self.found else None
        rep.marker_count = self.marker_count_
        rep.checksum = self.checksum_
        rep.clamp_events = list(self.clamps)
        rep.orientation_faults = self.lift_mismatches
        rep.final_positions = [self.position_of(i) for i in range(self.k)]
        rep.final_states = [self.tokens[self.sid_of[i]] for i in range(self.k)]
        census = {}
        for rid in range(len(self.role_names)):
            if self.census_sets[rid]:
                census[self.role_names[rid]] = set(self.census_sets[rid])
        rep.census = census
        if self.collect_visited:
            rep.visited = self._visited_tuples()
        rep.visited_size = self.visited.size()
        self.report = rep
        self.done = True
        return rep

    cdef uint64_t _miss(self, int agent, int sid, int* obs_sids, int obs_cnt,
                        int rand_val) except *:
        obs = tuple([self.tokens[obs_sids[z]] for z in range(obs_cnt)])
        new_token, action = self.cfg.controllers[agent].step(
            self.tokens[sid], obs, rand_val, self.arrival[agent])
        cdef int new_sid = self._intern(agent, new_token)
        cdef uint64_t val = <uint64_t>new_sid << 10
        if action is not None:
            if action[0] == "move":
                if action[1] >= self.n:
                    raise ContractViolation(
                        f"agent {agent} moved in dim {action[1]} >= n={self.n}")
                val |= 1 | (<uint64_t>action[1] << 2) | (64 if action[2] > 0 else 0)
            else:
                if not self.unoriented:
                    raise ContractViolation("port move without a labeling")
                val |= 2 | (<uint64_t>action[1] << 2)
        return val

    cdef int _apply_move(self, int i, int t, int dim, int sign) except -1:
        self.pos[i][dim] += sign
        self.total_moves_ += 1
        self.moves_agent[i] += 1
        self._visit(i, t)
        return 0

    cdef int _lifted_move(self, int i, int t, int dim, int sign) except -1:
        from .handrail import plan_handrail_step
        from .grid import PortLabeling

        lab = self.cfg.labeling
        u = self.position_of(i)
        orient = self.lift_orient.get(i)
        if orient is None:
            orient = lab.ports(u)
        plan = plan_handrail_step(lab, u, dim, sign, orient, self.n)
        cdef int pdim, psign
        for pdim, psign in plan.moves:
            self._apply_move(i, t, pdim, psign)
        aux = self.lift_map[i]
        self._apply_move(<int>aux, t, dim, sign)
        self.lift_orient[i] = plan.orient
        if plan.orient != tuple(lab.ports(self.position_of(i))):
            self.lift_mismatches += 1
        return 0

    cdef object _run(self):
        if self.done:
            return self.report
        cdef int active[MAXK]
        cdef int obs_sids[MAXK]
        cdef int obs_cnt = 0
        cdef int new_sids[MAXK]
        cdef int kinds[MAXK]
        cdef int dims[MAXK]
        cdef int signs[MAXK]
        cdef int ports[MAXPORTS]
        cdef int cnt, ai, i, j, sid, bits, rand_val, t
        cdef int new_sid, kind, dim, sign, port, di, rev, m
        cdef uint64_t key, val, oid, word, acc
        cdef bint changed
        cdef bint have_stop = self.cfg.stop_fn is not None
        cdef bint lifted = self.lift_map is not None
        cdef long long dist
        cdef object tok

        while True:
            if self.max_ticks >= 0 and self.tick >= self.max_ticks:
                return self._finish("tick_budget")
            t = self.tick + 1
            self.tick = t
            cnt = self._select(t, active)
            if self.schedule is not None:
                self.schedule.append([active[ai] for ai in range(cnt)])
            for ai in range(cnt):
                i = active[ai]
                sid = self.sid_of[i]
                oid = self._gather_obs(i, obs_sids, &obs_cnt)
                bits = self.sid_bits[sid]
                if bits > 0:
                    word = stream_word(self.rng_seed[i], self.rng_count[i])
                    self.rng_count[i] += 1
                    rand_val = <int>(word & ((<uint64_t>1 << bits) - 1))
                else:
                    rand_val = 0
                key = ((<uint64_t>sid)
                       | (oid << 20)
                       | (<uint64_t>rand_val << 39)
                       | (<uint64_t>(self.arrival[i] + 1) << 55)
                       | (<uint64_t>i << 60))
                it = self.memo.find(key)
                if it == self.memo.end():
                    val = self._miss(i, sid, obs_sids, obs_cnt, rand_val)
                    self.memo[key] = val
                else:
                    val = deref(it).second
                new_sids[ai] = <int>(val >> 10)
                kinds[ai] = <int>(val & 3)
                dims[ai] = <int>((val >> 2) & 15)
                signs[ai] = 1 if (val & 64) else -1
            for ai in range(cnt):
                i = active[ai]
                new_sid = new_sids[ai]
                kind = kinds[ai]
                changed = new_sid != self.sid_of[i]
                if changed:
                    self.sid_of[i] = new_sid
                    if self.sid_marker[new_sid]:
                        self.marker_count_ += 1
                    tok = self.tokens[new_sid]
                    if tok[0] == "b":
                        self.role_b_agent = i
                    elif tok[0] == "d":
                        self.role_d_agent = i
                    elif i == self.role_b_agent or i == self.role_d_agent:
                        self._refresh_roles()
                    self.last_effect[i] = t
                if kind != 0:
                    m = 2 * self.n
                    dim = dims[ai]
                    sign = signs[ai]
                    if kind == 2:
                        port = dim
                        self._node_ports(self.pos[i], ports)
                        di = -1
                        for j in range(m):
                            if ports[j] == port:
                                di = j
                                break
                        if di < 0:
                            raise ContractViolation(f"port {port} not at node")
                        if di < self.n:
                            dim = di
                            sign = 1
                        else:
                            dim = di - self.n
                            sign = -1
                        rev = (di + self.n) % m
                        self._apply_move(i, t, dim, sign)
                        self._node_ports(self.pos[i], ports)
                        self.arrival[i] = ports[rev]
                    elif lifted and (i in self.lift_map):
                        self._lifted_move(i, t, dim, sign)
                    else:
                        if self.unoriented:
                            di = dim if sign > 0 else dim + self.n
                            rev = (di + self.n) % m
                            self._apply_move(i, t, dim, sign)
                            self._node_ports(self.pos[i], ports)
                            self.arrival[i] = ports[rev]
                        else:
                            self._apply_move(i, t, dim, sign)
                    self.last_effect[i] = t
                self.checksum_ = mix2(self.checksum_,
                                      ((<uint64_t>t & 0xFFFFFFF) << 28)
                                      ^ (<uint64_t>i << 20) ^ <uint64_t>new_sid)
            if self.role_b_agent >= 0 and self.role_d_agent >= 0:
                dist = 0
                for j in range(self.n):
                    dist += abs(self.pos[self.role_b_agent][j]
                                - self.pos[self.role_d_agent][j])
                if dist > self.s_max:
                    self.s_max = dist
            if self.found:
                return self._finish("treasure_found")
            if self.cover_radius >= 0 and self.cover_count >= self.cover_target:
                return self._finish("covered")
            if have_stop and self.sid_stop[self.sid_of[0]]:
                return self._finish("program_halt")
            if self.stop_markers >= 0 and self.marker_count_ >= self.stop_markers:
                return self._finish("marker_budget")
            if self.max_moves >= 0 and self.total_moves_ >= self.max_moves:
                return self._finish("move_budget")
            if (self.max_excursion_budget >= 0
                    and self.max_exc > self.max_excursion_budget):
                return self._finish("excursion_budget")

