# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loops. Mirrors ``_pykernel`` draw-for-draw."""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport int8_t, int16_t, int32_t, int64_t
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

from .model import InvariantViolation

cnp.import_array()

cdef enum:
    RAT = 0
    DAT = 1
    PAT = 2
    IDLE_OUT = 0
    SUCCESS = 1
    COLLISION = 2
    LOST = 3
    P_NONE = 0
    P_RAP = 1
    P_DAP = 2
    P_PAP = 3


cdef inline double draw(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef bitgen_t* _bitgen(gen) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


cdef class _Trace:
    """Growable per-slot / per-message buffers filled by the loops."""
    cdef public object slot_kind, outcome, payload, station, n_tx
    cdef public object tx_slot, tx_station
    cdef public object msg_owner, msg_arrival, msg_rap, msg_completion, msg_dap_len, msg_periodic
    cdef public object frame_rat, frame_dat, frame_pat, frame_queue
    cdef public long arrivals, discarded
    cdef public long n_msg, n_txrec
    cdef int8_t[::1] k_v, o_v, p_v
    cdef int32_t[::1] st_v
    cdef int16_t[::1] ntx_v
    cdef int64_t[::1] txs_v
    cdef int32_t[::1] txst_v
    cdef int32_t[::1] mo_v
    cdef int64_t[::1] ma_v, mr_v, mc_v
    cdef int32_t[::1] md_v
    cdef int8_t[::1] mp_v
    cdef int32_t[::1] fr_v, fd_v, fp_v, fq_v

    def __init__(self, long T, long n_frames, long n_stations):
        self.slot_kind = np.zeros(T, np.int8)
        self.outcome = np.zeros(T, np.int8)
        self.payload = np.zeros(T, np.int8)
        self.station = np.full(T, -1, np.int32)
        self.n_tx = np.zeros(T, np.int16)
        self.k_v = self.slot_kind
        self.o_v = self.outcome
        self.p_v = self.payload
        self.st_v = self.station
        self.ntx_v = self.n_tx
        self.tx_slot = np.zeros(2 * T + 64, np.int64)
        self.tx_station = np.zeros(2 * T + 64, np.int32)
        self.txs_v = self.tx_slot
        self.txst_v = self.tx_station
        cap = T + n_stations + 1
        self.msg_owner = np.zeros(cap, np.int32)
        self.msg_arrival = np.zeros(cap, np.int64)
        self.msg_rap = np.full(cap, -1, np.int64)
        self.msg_completion = np.full(cap, -1, np.int64)
        self.msg_dap_len = np.zeros(cap, np.int32)
        self.msg_periodic = np.zeros(cap, np.int8)
        self.mo_v = self.msg_owner
        self.ma_v = self.msg_arrival
        self.mr_v = self.msg_rap
        self.mc_v = self.msg_completion
        self.md_v = self.msg_dap_len
        self.mp_v = self.msg_periodic
        self.frame_rat = np.zeros(n_frames, np.int32)
        self.frame_dat = np.zeros(n_frames, np.int32)
        self.frame_pat = np.zeros(n_frames, np.int32)
        self.frame_queue = np.zeros(n_frames, np.int32)
        self.fr_v = self.frame_rat
        self.fd_v = self.frame_dat
        self.fp_v = self.frame_pat
        self.fq_v = self.frame_queue
        self.arrivals = 0
        self.discarded = 0
        self.n_msg = 0
        self.n_txrec = 0

    cdef long new_message(self, int owner, long t, int dap_len, int periodic):
        cdef long m = self.n_msg
        self.mo_v[m] = owner
        self.ma_v[m] = t
        self.md_v[m] = dap_len
        self.mp_v[m] = periodic
        self.n_msg += 1
        return m

    cdef void _grow_tx(self):
        cap = 2 * self.tx_slot.shape[0]
        self.tx_slot = np.resize(self.tx_slot, cap)
        self.tx_station = np.resize(self.tx_station, cap)
        self.txs_v = self.tx_slot
        self.txst_v = self.tx_station

    cdef void record_tx(self, long t, int s):
        if self.n_txrec == self.txs_v.shape[0]:
            self._grow_tx()
        self.txs_v[self.n_txrec] = t
        self.txst_v[self.n_txrec] = s
        self.n_txrec += 1

    def finish(self):
        n = self.n_msg
        k = self.n_txrec
        for name in ("msg_owner", "msg_arrival", "msg_rap", "msg_completion",
                     "msg_dap_len", "msg_periodic"):
            setattr(self, name, getattr(self, name)[:n].copy())
        self.msg_periodic = self.msg_periodic.astype(bool)
        self.tx_slot = self.tx_slot[:k].copy()
        self.tx_station = self.tx_station[:k].copy()
        return self


cdef class _Streams:
    """Raw bit-generator pointers for every station's named streams."""
    cdef bitgen_t** arrival
    cdef bitgen_t** pick
    cdef bitgen_t** backoff
    cdef bitgen_t* error
    cdef object keepalive
    cdef int n

    def __cinit__(self, streams, err_rng):
        self.n = len(streams)
        self.arrival = <bitgen_t**> malloc(max(self.n, 1) * sizeof(bitgen_t*))
        self.pick = <bitgen_t**> malloc(max(self.n, 1) * sizeof(bitgen_t*))
        self.backoff = <bitgen_t**> malloc(max(self.n, 1) * sizeof(bitgen_t*))
        self.keepalive = (streams, err_rng)
        for i, st in enumerate(streams):
            self.arrival[i] = _bitgen(st.arrival)
            self.pick[i] = _bitgen(st.pick)
            self.backoff[i] = _bitgen(st.backoff)
        self.error = _bitgen(err_rng)

    def __dealloc__(self):
        free(self.arrival)
        free(self.pick)
        free(self.backoff)


def run_hybrid(scenario, streams, err_rng):
    cfg = scenario.frame
    cdef long L = cfg.frame_length
    cdef long T = scenario.sim_slots
    cdef long P = cfg.pat_len
    cdef long dat_nom = cfg.dat_nominal
    cdef int dap_len = cfg.data_length - 1
    cdef double p = scenario.arrival_prob_per_slot
    cdef double q = cfg.retransmission_prob
    cdef double pe = cfg.packet_error_prob
    sensors = scenario.sensors
    cdef int n = len(sensors)
    cdef long n_frames = (T + L - 1) // L

    cdef _Streams rs = _Streams(streams, err_rng)
    cdef _Trace tb = _Trace(T, n_frames, n)

    cdef int[::1] ra = np.array([k for k, sen in enumerate(sensors) if not sen.periodic] or [0], np.intc)
    cdef int n_ra = sum(1 for sen in sensors if not sen.periodic)
    periodic = [k for k, sen in enumerate(sensors) if sen.periodic]
    cdef int[::1] pat_owner = np.array([periodic[k] if k < len(periodic) else -1
                                        for k in range(P)] or [0], np.intc)

    cdef int8_t[::1] mode = np.zeros(n, np.int8)  # 0 idle, 1 backlogged, 2 draining
    cdef int8_t[::1] fresh = np.zeros(n, np.int8)
    cdef double[::1] pick = np.zeros(n, np.float64)
    cdef int64_t[::1] chosen = np.full(n, -1, np.int64)
    cdef int32_t[::1] dap_rem = np.zeros(n, np.int32)
    cdef int64_t[::1] msg_of = np.full(n, -1, np.int64)
    cdef int32_t[::1] q_st = np.zeros(n + 1, np.int32)
    cdef int32_t[::1] q_rem = np.zeros(n + 1, np.int32)
    cdef int[::1] dat_owner = np.zeros(L, np.intc)
    cdef int[::1] tx = np.zeros(n + 1, np.intc)
    cdef long q_head = 0, q_len = 0, demand = 0
    cdef long f, x, t, R, D, budget, take, j, k, m
    cdef int i, s, ntx, kind, owner, out, pay
    cdef double u

    for f in range(n_frames):
        # plan: [RAT | DAT | PAT], DAT grants consumed FIFO from the queue
        tb.fq_v[f] = q_len
        D = dat_nom if dat_nom < demand else demand
        R = L - D - P
        tb.fr_v[f] = R
        tb.fd_v[f] = D
        tb.fp_v[f] = P
        budget = D
        j = 0
        while budget > 0:
            s = q_st[q_head]
            take = q_rem[q_head] if q_rem[q_head] < budget else budget
            for k in range(take):
                dat_owner[j] = s
                j += 1
            budget -= take
            demand -= take
            q_rem[q_head] -= take
            if q_rem[q_head] == 0:
                q_head = (q_head + 1) % (n + 1)
                q_len -= 1

        for x in range(L):
            t = f * L + x
            if t >= T:
                break
            for k in range(n_ra):
                i = ra[k]
                if draw(rs.arrival[i]) < p:
                    tb.arrivals += 1
                    if mode[i] == 0:
                        mode[i] = 1
                        fresh[i] = 1
                        chosen[i] = -1
                        pick[i] = draw(rs.pick[i])
                        msg_of[i] = tb.new_message(i, t, dap_len, 0)
                    else:
                        tb.discarded += 1

            ntx = 0
            pay = P_NONE
            if x < R:
                kind = RAT
                for k in range(n_ra):
                    i = ra[k]
                    if mode[i] != 1:
                        continue
                    if fresh[i]:
                        if chosen[i] < 0:
                            j = <long>(pick[i] * (R - x))
                            if j > R - x - 1:
                                j = R - x - 1
                            chosen[i] = t + j
                        if chosen[i] == t:
                            tx[ntx] = i
                            ntx += 1
                    elif draw(rs.backoff[i]) < q:
                        tx[ntx] = i
                        ntx += 1
                if ntx:
                    pay = P_RAP
            elif x < R + D:
                kind = DAT
                owner = dat_owner[x - R]
                if mode[owner] != 2:
                    raise InvariantViolation(f"DAT slot granted to idle station {owner}", t)
                tx[0] = owner
                ntx = 1
                pay = P_DAP
                dap_rem[owner] -= 1
                if dap_rem[owner] == 0:
                    mode[owner] = 0
                    tb.mc_v[msg_of[owner]] = t + 1
            else:
                kind = PAT
                owner = pat_owner[x - R - D]
                if owner >= 0:
                    tx[0] = owner
                    ntx = 1
                    pay = P_PAP

            if ntx == 0:
                out = IDLE_OUT
            elif ntx > 1:
                out = COLLISION
                pay = P_NONE
            elif pe > 0.0 and draw(rs.error) < pe:
                out = LOST
            else:
                out = SUCCESS

            tb.k_v[t] = kind
            tb.o_v[t] = out
            tb.p_v[t] = pay
            tb.ntx_v[t] = ntx
            if out == SUCCESS or out == LOST:
                tb.st_v[t] = tx[0]
            for k in range(ntx):
                tb.record_tx(t, tx[k])

            if kind != RAT:
                continue
            if out == SUCCESS:
                i = tx[0]
                m = msg_of[i]
                tb.mr_v[m] = t
                if dap_len > 0:
                    mode[i] = 2
                    dap_rem[i] = dap_len
                    q_st[(q_head + q_len) % (n + 1)] = i
                    q_rem[(q_head + q_len) % (n + 1)] = dap_len
                    q_len += 1
                    demand += dap_len
                else:
                    mode[i] = 0
                    tb.mc_v[m] = t + 1
            else:
                for k in range(ntx):
                    i = tx[k]
                    fresh[i] = 0
                    chosen[i] = -1
    return tb.finish()


def run_aloha(scenario, streams, err_rng):
    cfg = scenario.frame
    cdef long L = cfg.frame_length
    cdef long T = scenario.sim_slots
    cdef int DL = cfg.data_length
    cdef double p = scenario.arrival_prob_per_slot
    cdef double q = cfg.retransmission_prob
    cdef double pe = cfg.packet_error_prob
    sensors = scenario.sensors
    cdef int n = len(sensors)
    cdef long n_frames = (T + L - 1) // L

    cdef _Streams rs = _Streams(streams, err_rng)
    cdef _Trace tb = _Trace(T, n_frames, n)

    cdef int8_t[::1] periodic = np.array([sen.periodic for sen in sensors] or [0], np.int8)
    cdef int8_t[::1] busy = np.zeros(n, np.int8)
    cdef int8_t[::1] fresh = np.zeros(n, np.int8)
    cdef double[::1] pick = np.zeros(n, np.float64)
    cdef int64_t[::1] chosen = np.full(n, -1, np.int64)
    cdef int32_t[::1] sent = np.zeros(n, np.int32)
    cdef int32_t[::1] need = np.zeros(n, np.int32)
    cdef int64_t[::1] msg_of = np.full(n, -1, np.int64)
    cdef int[::1] tx = np.zeros(n + 1, np.intc)
    cdef long t, x, j, m
    cdef int i, ntx, out, pay, arrived

    for i in range(n):
        need[i] = 1 if periodic[i] else DL

    for t in range(T):
        x = t % L
        if x == 0:
            tb.fr_v[t // L] = L if T - t > L else T - t
        for i in range(n):
            if periodic[i]:
                arrived = x == 0
            else:
                arrived = draw(rs.arrival[i]) < p
            if not arrived:
                continue
            tb.arrivals += 1
            if busy[i]:
                tb.discarded += 1
                continue
            busy[i] = 1
            fresh[i] = 1
            chosen[i] = -1
            sent[i] = 0
            pick[i] = draw(rs.pick[i])
            msg_of[i] = tb.new_message(i, t, need[i] - 1, periodic[i])

        ntx = 0
        for i in range(n):
            if not busy[i]:
                continue
            if fresh[i]:
                if chosen[i] < 0:
                    j = <long>(pick[i] * L)
                    if j > L - 1:
                        j = L - 1
                    chosen[i] = t + j
                if chosen[i] == t:
                    tx[ntx] = i
                    ntx += 1
            elif draw(rs.backoff[i]) < q:
                tx[ntx] = i
                ntx += 1

        pay = P_NONE
        if ntx == 0:
            out = IDLE_OUT
        elif ntx > 1:
            out = COLLISION
        else:
            i = tx[0]
            if periodic[i]:
                pay = P_PAP
            elif sent[i] == 0:
                pay = P_RAP
            else:
                pay = P_DAP
            out = SUCCESS
            if pe > 0.0 and draw(rs.error) < pe:
                out = LOST

        tb.k_v[t] = RAT
        tb.o_v[t] = out
        tb.p_v[t] = pay
        tb.ntx_v[t] = ntx
        if out == SUCCESS or out == LOST:
            tb.st_v[t] = tx[0]
        for j in range(ntx):
            tb.record_tx(t, tx[j])

        if out == SUCCESS:
            i = tx[0]
            m = msg_of[i]
            if sent[i] == 0:
                tb.mr_v[m] = t
            sent[i] += 1
            if sent[i] == need[i]:
                busy[i] = 0
                tb.mc_v[m] = t + 1
            else:
                fresh[i] = 1
                chosen[i] = -1
                pick[i] = draw(rs.pick[i])
        else:
            for j in range(ntx):
                i = tx[j]
                fresh[i] = 0
                chosen[i] = -1
    return tb.finish()


def run_tdma(scenario, streams, err_rng):
    cfg = scenario.frame
    cdef long L = cfg.frame_length
    cdef long T = scenario.sim_slots
    cdef int DL = cfg.data_length
    cdef double p = scenario.arrival_prob_per_slot
    cdef double pe = cfg.packet_error_prob
    sensors = scenario.sensors
    cdef int n = len(sensors)
    cdef long block = L // n
    cdef long n_frames = (T + L - 1) // L

    cdef _Streams rs = _Streams(streams, err_rng)
    cdef _Trace tb = _Trace(T, n_frames, n)

    cdef int8_t[::1] periodic = np.array([sen.periodic for sen in sensors] or [0], np.int8)
    cdef int8_t[::1] busy = np.zeros(n, np.int8)
    cdef int32_t[::1] sent = np.zeros(n, np.int32)
    cdef int32_t[::1] need = np.zeros(n, np.int32)
    cdef int64_t[::1] msg_of = np.full(n, -1, np.int64)
    cdef long t, x, m
    cdef int i, out, pay, arrived, owner

    for i in range(n):
        need[i] = 1 if periodic[i] else DL

    for t in range(T):
        x = t % L
        if x == 0:
            tb.fd_v[t // L] = L if T - t > L else T - t
        for i in range(n):
            if periodic[i]:
                arrived = x == 0
            else:
                arrived = draw(rs.arrival[i]) < p
            if not arrived:
                continue
            tb.arrivals += 1
            if busy[i]:
                tb.discarded += 1
                continue
            busy[i] = 1
            sent[i] = 0
            msg_of[i] = tb.new_message(i, t, need[i] - 1, periodic[i])

        tb.k_v[t] = DAT
        owner = x // block
        if owner >= n or not busy[owner]:
            continue
        i = owner
        if periodic[i]:
            pay = P_PAP
        elif sent[i] == 0:
            pay = P_RAP
        else:
            pay = P_DAP
        out = SUCCESS
        if pe > 0.0 and draw(rs.error) < pe:
            out = LOST
        tb.o_v[t] = out
        tb.p_v[t] = pay
        tb.ntx_v[t] = 1
        tb.st_v[t] = i
        tb.record_tx(t, i)
        m = msg_of[i]
        if sent[i] == 0:
            tb.mr_v[m] = t
        sent[i] += 1
        if sent[i] == need[i]:
            busy[i] = 0
            tb.mc_v[m] = t + 1
    return tb.finish()
