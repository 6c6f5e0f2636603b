# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled replication kernels.

Line-by-line ports of ``circpoll._pykernels`` / ``circpoll.engine``. Random
numbers come from numpy bit generators through their C interface, drawn in
the same order as the Python code, so both backends agree bit for bit.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport floor, fmod, log1p, INFINITY
from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memmove
from numpy.random cimport bitgen_t

cdef enum:
    SVC_DETERMINISTIC = 0
    SVC_EXPONENTIAL = 1
    SVC_UNIFORM = 2
    SVC_ERLANG_MIX = 3
    SVC_HYPEREXP2 = 4


cdef inline bitgen_t* _bitgen(object bg) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(bg.capsule, "BitGenerator")


cdef inline double _u(bitgen_t* rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _exp(bitgen_t* rng, double rate) noexcept nogil:
    return -log1p(-_u(rng)) / rate


cdef inline double _service(bitgen_t* rng, int code, const double* par) noexcept nogil:
    cdef int k, i
    cdef double total, rate
    if code == SVC_DETERMINISTIC:
        return par[0]
    if code == SVC_EXPONENTIAL:
        return -log1p(-_u(rng)) / par[0]
    if code == SVC_UNIFORM:
        return par[0] + (par[1] - par[0]) * _u(rng)
    if code == SVC_ERLANG_MIX:
        k = <int> par[0]
        if par[1] > 0.0 and _u(rng) < par[1]:
            k -= 1
        total = 0.0
        for i in range(k):
            total += -log1p(-_u(rng))
        return total / par[2]
    # SVC_HYPEREXP2
    rate = par[1] if _u(rng) < par[0] else par[2]
    return -log1p(-_u(rng)) / rate


cdef inline Py_ssize_t _bisect_left(const double* a, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _bisect_right(const double* a, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef struct Customers:
    Py_ssize_t n
    Py_ssize_t cap
    double* pos
    int64_t* bat
    double* arr
    double* dist


cdef int _cust_reserve(Customers* c, Py_ssize_t need) noexcept nogil:
    cdef Py_ssize_t cap
    cdef void* p
    if need <= c.cap:
        return 0
    cap = c.cap * 2 if c.cap > 0 else 256
    while cap < need:
        cap *= 2
    p = realloc(c.pos, cap * sizeof(double))
    if p == NULL:
        return -1
    c.pos = <double*> p
    p = realloc(c.bat, cap * sizeof(int64_t))
    if p == NULL:
        return -1
    c.bat = <int64_t*> p
    p = realloc(c.arr, cap * sizeof(double))
    if p == NULL:
        return -1
    c.arr = <double*> p
    p = realloc(c.dist, cap * sizeof(double))
    if p == NULL:
        return -1
    c.dist = <double*> p
    c.cap = cap
    return 0


cdef struct Batches:
    Py_ssize_t cap
    int64_t* left
    double* arrival


cdef int _batch_reserve(Batches* b, Py_ssize_t need) noexcept nogil:
    cdef Py_ssize_t cap
    cdef void* p
    if need <= b.cap:
        return 0
    cap = b.cap * 2 if b.cap > 0 else 1024
    while cap < need:
        cap *= 2
    p = realloc(b.left, cap * sizeof(int64_t))
    if p == NULL:
        return -1
    b.left = <int64_t*> p
    p = realloc(b.arrival, cap * sizeof(double))
    if p == NULL:
        return -1
    b.arrival = <double*> p
    b.cap = cap
    return 0


cdef inline Py_ssize_t _count_within(Customers* c, double s, double x) noexcept nogil:
    cdef Py_ssize_t lo
    cdef double hi
    if x >= 1.0:
        return c.n
    lo = _bisect_left(c.pos, c.n, s)
    hi = s + x
    if hi < 1.0:
        return _bisect_right(c.pos, c.n, hi) - lo
    return (c.n - lo) + _bisect_right(c.pos, c.n, hi - 1.0)


def continuous_rep(model, double horizon, double warmup, double pasta_rate, grid,
                   main_bg, insp_bg, Py_ssize_t record_n=0, bint check=False):
    """One replication of the continuous system; see ``_pykernels.continuous_rep``."""
    cdef double lam = model.lam
    cdef double alpha = model.alpha
    cdef double[::1] cdf = np.ascontiguousarray(model.batch_cdf, dtype=np.float64)
    cdef Py_ssize_t ncdf = cdf.shape[0]
    cdef int svc_code = model.svc_code
    cdef double[::1] svc_par = np.ascontiguousarray(model.svc_par + (0.0, 0.0, 0.0), dtype=np.float64)
    cdef double[::1] g_x = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t G = g_x.shape[0]

    cdef double[::1] prof_sum = np.zeros(G)
    cdef double[::1] wait_sum = np.zeros(G)
    cdef int64_t[::1] wait_cnt = np.zeros(G, dtype=np.int64)
    cdef double[::1] recorded = np.zeros(record_n)
    cdef Py_ssize_t n_rec = 0

    cdef bitgen_t* rng = _bitgen(main_bg)
    cdef bitgen_t* irng = _bitgen(insp_bg)

    cdef Customers c
    c.n = 0
    c.cap = 0
    c.pos = NULL
    c.bat = NULL
    c.arr = NULL
    c.dist = NULL
    cdef Batches b
    b.cap = 0
    b.left = NULL
    b.arrival = NULL

    cdef double clock = 0.0, s = 0.0
    cdef bint serving = False
    cdef double service_end = INFINITY
    cdef int64_t in_service = -1
    cdef int64_t next_bid = 0
    cdef double t_arr, t_ins = INFINITY, t_own, t_next, t_before, adv, d, pos, dist, u, w, a_d, t_a
    cdef Py_ssize_t idx, j, g, n_before, i
    cdef int64_t k, bid
    cdef int64_t cust_arrived = 0, cust_completed = 0, n_events = 0
    cdef double l_area = 0.0, soj_sum = 0.0, soj_sq = 0.0, sj, wait_all_sum = 0.0
    cdef int64_t soj_n = 0, n_insp = 0, wait_all_cnt = 0
    cdef int err = 0

    t_arr = _exp(rng, lam)
    if pasta_rate > 0.0:
        t_ins = _exp(irng, pasta_rate)

    try:
        with nogil:
            while True:
                # --- peek at the next event (mirrors engine.next_event_time / step)
                idx = -1
                d = 0.0
                if serving:
                    t_own = service_end
                elif c.n > 0:
                    idx = _bisect_left(c.pos, c.n, s)
                    if idx == c.n:
                        idx = 0
                    d = c.pos[idx] - s
                    if d < 0.0:
                        d += 1.0
                    t_own = clock + alpha * d
                else:
                    t_own = INFINITY
                t_next = t_arr
                if t_ins < t_next:
                    t_next = t_ins
                if t_own < t_next:
                    t_next = t_own
                n_before = c.n
                t_before = clock
                if t_next > horizon:
                    if horizon > warmup:
                        l_area += n_before * (horizon - (t_before if t_before > warmup else warmup))
                    break

                if t_arr <= t_ins and t_arr < t_own:
                    if not serving:
                        adv = (t_arr - clock) / alpha
                        if idx >= 0 and adv >= d:
                            s = c.pos[idx]
                        else:
                            s = s + adv
                            if s >= 1.0:
                                s -= 1.0
                                if s >= 1.0:
                                    s = fmod(s, 1.0)
                    clock = t_arr
                    u = _u(rng)
                    k = _bisect_right(&cdf[0], ncdf, u) + 1
                    bid = next_bid
                    next_bid += 1
                    if _batch_reserve(&b, next_bid) != 0 or _cust_reserve(&c, c.n + k) != 0:
                        err = 1
                        break
                    b.left[bid] = k
                    b.arrival[bid] = t_arr
                    for i in range(k):
                        pos = _u(rng)
                        dist = pos - s
                        if dist < 0.0:
                            dist += 1.0
                        j = _bisect_right(c.pos, c.n, pos)
                        if j < c.n:
                            memmove(&c.pos[j + 1], &c.pos[j], (c.n - j) * sizeof(double))
                            memmove(&c.bat[j + 1], &c.bat[j], (c.n - j) * sizeof(int64_t))
                            memmove(&c.arr[j + 1], &c.arr[j], (c.n - j) * sizeof(double))
                            memmove(&c.dist[j + 1], &c.dist[j], (c.n - j) * sizeof(double))
                        c.pos[j] = pos
                        c.bat[j] = bid
                        c.arr[j] = t_arr
                        c.dist[j] = dist
                        c.n += 1
                        if t_arr >= warmup and n_rec < record_n:
                            recorded[n_rec] = dist
                            n_rec += 1
                    cust_arrived += k
                    t_arr = t_arr + _exp(rng, lam)
                elif t_ins < t_own:
                    if not serving:
                        adv = (t_ins - clock) / alpha
                        if idx >= 0 and adv >= d:
                            s = c.pos[idx]
                        else:
                            s = s + adv
                            if s >= 1.0:
                                s -= 1.0
                                if s >= 1.0:
                                    s = fmod(s, 1.0)
                    clock = t_ins
                    t_ins = t_ins + _exp(irng, pasta_rate)
                    if clock >= warmup:
                        n_insp += 1
                        for g in range(G):
                            prof_sum[g] += _count_within(&c, s, g_x[g])
                elif serving:
                    clock = service_end
                    serving = False
                    service_end = INFINITY
                    bid = in_service
                    in_service = -1
                    cust_completed += 1
                    b.left[bid] -= 1
                    if b.left[bid] == 0:
                        if b.arrival[bid] >= warmup:
                            sj = clock - b.arrival[bid]
                            soj_sum += sj
                            soj_sq += sj * sj
                            soj_n += 1
                else:
                    clock = t_own
                    s = c.pos[idx]
                    bid = c.bat[idx]
                    t_a = c.arr[idx]
                    a_d = c.dist[idx]
                    if idx < c.n - 1:
                        memmove(&c.pos[idx], &c.pos[idx + 1], (c.n - idx - 1) * sizeof(double))
                        memmove(&c.bat[idx], &c.bat[idx + 1], (c.n - idx - 1) * sizeof(int64_t))
                        memmove(&c.arr[idx], &c.arr[idx + 1], (c.n - idx - 1) * sizeof(double))
                        memmove(&c.dist[idx], &c.dist[idx + 1], (c.n - idx - 1) * sizeof(double))
                    c.n -= 1
                    serving = True
                    service_end = t_own + _service(rng, svc_code, &svc_par[0])
                    in_service = bid
                    if t_a >= warmup:
                        w = t_own - t_a
                        wait_all_sum += w
                        wait_all_cnt += 1
                        for g in range(G):
                            if a_d <= g_x[g]:
                                wait_sum[g] += w
                                wait_cnt[g] += 1

                n_events += 1
                if clock > warmup:
                    l_area += n_before * (clock - (t_before if t_before > warmup else warmup))
        if err:
            raise MemoryError("continuous kernel: allocation failed")
        return {
            "l_area": l_area,
            "elapsed": max(horizon - warmup, 0.0),
            "prof_sum": np.asarray(prof_sum),
            "n_insp": n_insp,
            "wait_sum": np.asarray(wait_sum),
            "wait_cnt": np.asarray(wait_cnt),
            "wait_all_sum": wait_all_sum,
            "wait_all_cnt": wait_all_cnt,
            "soj_sum": soj_sum,
            "soj_sq": soj_sq,
            "soj_n": soj_n,
            "recorded": np.asarray(recorded)[:n_rec].copy(),
            "n_events": n_events,
            "customers_arrived": cust_arrived,
            "customers_completed": cust_completed,
            "batches_arrived": next_bid,
            "in_system_end": c.n + (1 if serving else 0),
        }
    finally:
        free(c.pos)
        free(c.bat)
        free(c.arr)
        free(c.dist)
        free(b.left)
        free(b.arrival)


cdef inline int64_t _hops_to(int64_t q, int64_t i0, int64_t n, int64_t h_min) noexcept nogil:
    cdef int64_t base = (q - i0) % n
    if base < 0:
        base += n
    if base >= h_min:
        return base
    return base + ((h_min - base + n - 1) // n) * n


def discrete_rep(model, Py_ssize_t n_queues, double switchover, double horizon, double warmup, main_bg):
    """One replication of the N-queue exhaustive polling system; see ``_pykernels.discrete_rep``."""
    cdef int64_t N = n_queues
    cdef double hop = switchover / N
    cdef double lam = model.lam
    cdef double[::1] cdf = np.ascontiguousarray(model.batch_cdf, dtype=np.float64)
    cdef Py_ssize_t ncdf = cdf.shape[0]
    cdef int svc_code = model.svc_code
    cdef double[::1] svc_par = np.ascontiguousarray(model.svc_par + (0.0, 0.0, 0.0), dtype=np.float64)
    cdef bitgen_t* rng = _bitgen(main_bg)

    cdef int64_t[::1] head = np.full(N, -1, dtype=np.int64)
    cdef int64_t[::1] tail = np.full(N, -1, dtype=np.int64)
    cdef int64_t[::1] qcount = np.zeros(N, dtype=np.int64)
    cdef int64_t[::1] arrived = np.zeros(N, dtype=np.int64)
    cdef int64_t[::1] served = np.zeros(N, dtype=np.int64)

    # node pool for the per-queue FIFO linked lists
    cdef Py_ssize_t pool_cap = 0, pool_used = 0
    cdef int64_t* nxt = NULL
    cdef int64_t* nbat = NULL
    cdef int64_t free_head = -1, node
    cdef void* p
    cdef Batches b
    b.cap = 0
    b.left = NULL
    b.arrival = NULL

    cdef int64_t n_wait = 0
    cdef double t = 0.0
    cdef bint serving = False
    cdef double service_end = INFINITY
    cdef int64_t cur = 0, cur_batch = -1, i0 = 0, h_target = -1, next_bid = 0
    cdef double t0 = 0.0
    cdef double l_area = 0.0, soj_sum = 0.0, soj_sq = 0.0, sj, t_arr, t_own, t_next, u
    cdef int64_t soj_n = 0, n_events = 0, k, bid, q, h, h_min, i
    cdef int err = 0

    t_arr = -log1p(-_u(rng)) / lam
    try:
        with nogil:
            while True:
                if serving:
                    t_own = service_end
                elif h_target >= 0:
                    t_own = t0 + h_target * hop
                else:
                    t_own = INFINITY
                t_next = t_arr if t_arr < t_own else t_own
                if t_next > horizon:
                    if horizon > warmup:
                        l_area += n_wait * (horizon - (t if t > warmup else warmup))
                    break
                if t_next > warmup:
                    l_area += n_wait * (t_next - (t if t > warmup else warmup))
                t = t_next
                n_events += 1

                if t_arr < t_own:
                    u = _u(rng)
                    k = _bisect_right(&cdf[0], ncdf, u) + 1
                    bid = next_bid
                    next_bid += 1
                    if _batch_reserve(&b, next_bid) != 0:
                        err = 1
                        break
                    b.left[bid] = k
                    b.arrival[bid] = t
                    h_min = 1
                    if not serving:
                        if hop > 0.0:
                            h_min = <int64_t> floor((t - t0) / hop) + 1
                            while h_min > 1 and t0 + (h_min - 1) * hop > t:
                                h_min -= 1
                            while t0 + h_min * hop <= t:
                                h_min += 1
                        else:
                            t0 = t
                            h_min = 1
                    for i in range(k):
                        q = <int64_t> (_u(rng) * N)
                        if q >= N:
                            q = N - 1
                        # enqueue a node at the tail of queue q
                        if free_head >= 0:
                            node = free_head
                            free_head = nxt[node]
                        else:
                            if pool_used == pool_cap:
                                pool_cap = pool_cap * 2 if pool_cap > 0 else 1024
                                p = realloc(nxt, pool_cap * sizeof(int64_t))
                                if p == NULL:
                                    err = 1
                                    break
                                nxt = <int64_t*> p
                                p = realloc(nbat, pool_cap * sizeof(int64_t))
                                if p == NULL:
                                    err = 1
                                    break
                                nbat = <int64_t*> p
                            node = pool_used
                            pool_used += 1
                        nxt[node] = -1
                        nbat[node] = bid
                        if tail[q] >= 0:
                            nxt[tail[q]] = node
                        else:
                            head[q] = node
                        tail[q] = node
                        qcount[q] += 1
                        arrived[q] += 1
                        n_wait += 1
                        if not serving:
                            h = _hops_to(q, i0, N, h_min)
                            if h_target < 0 or h < h_target:
                                h_target = h
                    if err:
                        break
                    t_arr = t + (-log1p(-_u(rng)) / lam)
                elif serving:
                    served[cur] += 1
                    b.left[cur_batch] -= 1
                    if b.left[cur_batch] == 0:
                        if b.arrival[cur_batch] >= warmup:
                            sj = t - b.arrival[cur_batch]
                            soj_sum += sj
                            soj_sq += sj * sj
                            soj_n += 1
                    if qcount[cur] > 0:
                        node = head[cur]
                        head[cur] = nxt[node]
                        if head[cur] < 0:
                            tail[cur] = -1
                        qcount[cur] -= 1
                        cur_batch = nbat[node]
                        nxt[node] = free_head
                        free_head = node
                        n_wait -= 1
                        service_end = t + _service(rng, svc_code, &svc_par[0])
                    else:
                        serving = False
                        service_end = INFINITY
                        cur_batch = -1
                        i0 = cur
                        t0 = t
                        h_target = -1
                        for h in range(1, N + 1):
                            if qcount[(i0 + h) % N] > 0:
                                h_target = h
                                break
                else:
                    cur = (i0 + h_target) % N
                    node = head[cur]
                    head[cur] = nxt[node]
                    if head[cur] < 0:
                        tail[cur] = -1
                    qcount[cur] -= 1
                    cur_batch = nbat[node]
                    nxt[node] = free_head
                    free_head = node
                    n_wait -= 1
                    serving = True
                    service_end = t + _service(rng, svc_code, &svc_par[0])
        if err:
            raise MemoryError("discrete kernel: allocation failed")
        return {
            "l_area": l_area,
            "elapsed": max(horizon - warmup, 0.0),
            "soj_sum": soj_sum,
            "soj_sq": soj_sq,
            "soj_n": soj_n,
            "n_events": n_events,
            "arrived": np.asarray(arrived),
            "served": np.asarray(served),
            "content": np.asarray(qcount),
            "in_service_queue": cur if serving else -1,
            "batches_arrived": next_bid,
        }
    finally:
        free(nxt)
        free(nbat)
        free(b.left)
        free(b.arrival)
