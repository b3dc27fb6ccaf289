"""Task-graph batch signing: per-message FORS/TREE/WOTS nodes with explicit edges.

Each message contributes three nodes; only the WOTS node has dependencies
(on its message's FORS and TREE nodes), so FORS and TREE work interleaves
freely across messages and graphs. Graphs are instantiated up front: every
output buffer comes out of a pool that freezes before execution, making the
zero-allocations-after-instantiation property structural rather than
incidental.

The scheduler draws ready nodes from a shared pool of workers; an optional
RNG randomizes the draw so scheduling stress tests observe genuinely
different interleavings. Output bytes never depend on the interleaving.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field

from .errors import ConfigError, GraphExecutionError, UsageError

STAGES = ("FORS", "TREE", "WOTS")


@dataclass(frozen=True)
class TaskNode:
    graph_id: int
    message_index: int  # global index into the submitted message list
    stage: str
    deps: tuple = ()

    @property
    def node_id(self) -> str:
        return f"g{self.graph_id}/m{self.message_index}/{self.stage}"


@dataclass(frozen=True)
class LogEvent:
    node_id: str
    graph_id: int
    message_index: int
    stage: str
    start_tick: int
    end_tick: int
    worker_id: int
    duration_s: float


@dataclass
class ExecutionLog:
    events: list = field(default_factory=list)

    def by_node(self) -> dict[str, LogEvent]:
        return {e.node_id: e for e in self.events}


class BufferPool:
    """Counts buffer allocations; freezes once graphs are instantiated."""

    def __init__(self):
        self.allocations = 0
        self.frozen = False

    def alloc(self, nbytes: int) -> bytearray:
        if self.frozen:
            raise ConfigError("buffer pool is frozen; allocation after instantiation")
        self.allocations += 1
        return bytearray(nbytes)

    def freeze(self) -> None:
        self.frozen = True


class SigTaskGraph:
    """One batch of up to m messages and their 3m nodes / 2m edges."""

    def __init__(self, graph_id: int, messages: list[tuple[int, bytes]]):
        self.graph_id = graph_id
        self.messages = list(messages)  # (global_index, message_bytes)
        self.nodes: list[TaskNode] = []
        self.edges: list[tuple[str, str]] = []
        self.plans: dict[int, object] = {}
        self.instantiated = False
        for global_idx, _ in self.messages:
            fors = TaskNode(graph_id, global_idx, "FORS")
            tree = TaskNode(graph_id, global_idx, "TREE")
            wots = TaskNode(graph_id, global_idx, "WOTS", deps=(fors.node_id, tree.node_id))
            self.nodes += [fors, tree, wots]
            self.edges += [(fors.node_id, wots.node_id), (tree.node_id, wots.node_id)]

    def instantiate(self, signer, pool: BufferPool) -> None:
        """Allocate every output buffer and precompute per-message indices."""
        for global_idx, msg in self.messages:
            buffer = pool.alloc(signer.sig_bytes)
            self.plans[global_idx] = signer.prepare(msg, buffer)
        self.instantiated = True

    def run_node(self, signer, node: TaskNode) -> None:
        plan = self.plans[node.message_index]
        if node.stage == "FORS":
            signer.run_fors(plan)
        elif node.stage == "TREE":
            signer.run_tree(plan)
        else:
            signer.run_wots(plan)


def build_graphs(messages: list[bytes], m: int, T: int) -> list[SigTaskGraph]:
    """Partition messages round-robin into T graphs of at most m each."""
    if m < 1 or T < 1:
        raise UsageError(f"batch shape m={m}, T={T} must both be >= 1")
    if m * T < len(messages):
        raise UsageError(
            f"batch shape m={m} x T={T} holds {m * T} messages; got {len(messages)}"
        )
    buckets: list[list[tuple[int, bytes]]] = [[] for _ in range(T)]
    for i, msg in enumerate(messages):
        buckets[i % T].append((i, msg))
    return [SigTaskGraph(g, bucket) for g, bucket in enumerate(buckets)]


def execute_graphs(
    graphs: list[SigTaskGraph],
    workers: int,
    signer,
    *,
    pool: BufferPool | None = None,
    rng=None,
) -> tuple[list[bytes], ExecutionLog]:
    """Run every graph on a shared worker pool; returns signatures in message order.

    Graphs interleave freely; the only ordering constraints are the WOTS
    dependency edges. A node failure aborts its graph (remaining nodes are
    skipped) and surfaces as GraphExecutionError naming the message index;
    other graphs still complete.
    """
    if workers < 1:
        raise UsageError(f"worker count must be >= 1, got {workers}")
    pool = pool or BufferPool()
    for graph in graphs:
        if not graph.instantiated:
            graph.instantiate(signer, pool)
    allocations_at_launch = pool.allocations
    pool.freeze()

    cond = threading.Condition()
    tick = itertools.count()
    log = ExecutionLog()
    deps_left: dict[str, int] = {}
    dependents: dict[str, list[TaskNode]] = {}
    by_graph: dict[int, SigTaskGraph] = {g.graph_id: g for g in graphs}
    ready: list[TaskNode] = []
    failures: list[tuple[int, int, Exception]] = []
    failed_graphs: set[int] = set()
    remaining = 0

    for graph in graphs:
        for node in graph.nodes:
            deps_left[node.node_id] = len(node.deps)
            for dep in node.deps:
                dependents.setdefault(dep, []).append(node)
            remaining += 1
            if not node.deps:
                ready.append(node)

    def loop(worker_id: int) -> None:
        nonlocal remaining
        while True:
            with cond:
                while not ready and remaining > 0:
                    cond.wait()
                if remaining <= 0:
                    cond.notify_all()
                    return
                idx = rng.randrange(len(ready)) if rng is not None else 0
                node = ready.pop(idx)
                start = next(tick)
                skipped = node.graph_id in failed_graphs
            error = None
            wall0 = time.perf_counter()
            if not skipped:
                try:
                    by_graph[node.graph_id].run_node(signer, node)
                except Exception as exc:  # noqa: BLE001 - node bodies are opaque
                    error = exc
            wall1 = time.perf_counter()
            with cond:
                end = next(tick)
                if error is not None:
                    failed_graphs.add(node.graph_id)
                    failures.append((node.graph_id, node.message_index, error))
                elif not skipped:
                    log.events.append(
                        LogEvent(
                            node.node_id, node.graph_id, node.message_index,
                            node.stage, start, end, worker_id, wall1 - wall0,
                        )
                    )
                remaining -= 1
                for dep_node in dependents.get(node.node_id, ()):
                    deps_left[dep_node.node_id] -= 1
                    if deps_left[dep_node.node_id] == 0:
                        ready.append(dep_node)
                cond.notify_all()

    threads = [
        threading.Thread(target=loop, args=(w,), name=f"graph-worker-{w}")
        for w in range(workers)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert pool.allocations == allocations_at_launch, "buffers allocated mid-flight"
    if failures:
        raise GraphExecutionError(failures)

    signatures: list[tuple[int, bytes]] = []
    for graph in graphs:
        for global_idx, _ in graph.messages:
            signatures.append((global_idx, bytes(graph.plans[global_idx].buffer)))
    signatures.sort(key=lambda pair: pair[0])
    return [sig for _, sig in signatures], log


def replay_check(log: ExecutionLog, graphs: list[SigTaskGraph]) -> bool:
    """True iff every node ran exactly once and every edge's order held."""
    events = log.by_node()
    expected = [node for graph in graphs for node in graph.nodes]
    if len(log.events) != len(expected) or len(events) != len(expected):
        return False
    for node in expected:
        if node.node_id not in events:
            return False
    for graph in graphs:
        for src, dst in graph.edges:
            if events[src].end_tick > events[dst].start_tick:
                return False
    return True


class GraphSigner:
    """Real signing stage bodies over one secret key.

    prepare() hashes the message and lays the randomizer into the output
    buffer; the FORS/TREE/WOTS bodies fill their disjoint byte ranges. Stage
    bodies fork the hash context, so concurrent workers never share a
    mutable counter; totals merge back under a lock.
    """

    def __init__(
        self,
        sk,
        params,
        *,
        fusion=None,
        relax=None,
        opt_rand: bytes | None = None,
        tree_workers: int = 1,
    ):
        from .hashes import HashContext
        from .params import derive
        from .sigcore import signature_regions

        self.params = params if not isinstance(params, str) else derive(params)
        self.sk = sk
        self.sig_bytes = self.params.sig_bytes
        self.fusion = fusion
        self.relax = relax
        self.opt_rand = opt_rand if opt_rand is not None else sk.pk_seed
        self.tree_workers = tree_workers
        self.regions = signature_regions(self.params)
        self._ctx = HashContext(self.params, sk.pk_seed, sk.sk_seed)
        self._lock = threading.Lock()
        self.compressions = 0

    def _fork(self):
        with self._lock:
            return self._ctx.fork()

    def _merge(self, ctx) -> None:
        with self._lock:
            self.compressions += ctx.compressions

    def prepare(self, msg: bytes, buffer: bytearray):
        from .sigcore import SigningState

        ctx = self._fork()
        randomizer = ctx.prf_msg(self.sk.sk_prf, self.opt_rand, msg)
        state = SigningState.from_message(ctx, randomizer, self.sk.public(), msg)
        lo, hi = self.regions["randomizer"]
        buffer[lo:hi] = randomizer
        self._merge(ctx)
        return _MessagePlan(msg=msg, buffer=buffer, state=state)

    def run_fors(self, plan: "_MessagePlan") -> None:
        from .address import ADDR_WOTS, Address
        from .vexec import default_layout, default_relax, fors_public_key, run_fused_fors

        ctx = self._fork()
        p = self.params
        layout = self.fusion if self.fusion is not None else default_layout(p)
        relax = self.relax if self.relax is not None else default_relax(p)
        wots_adrs = Address()
        wots_adrs.set_tree(plan.state.tree)
        wots_adrs.set_type(ADDR_WOTS)
        wots_adrs.set_keypair(plan.state.leaf_idx)
        fors = run_fused_fors(ctx, layout, relax, plan.state.indices, wots_adrs)
        lo, hi = self.regions["fors"]
        plan.buffer[lo:hi] = fors.signature_bytes()
        plan.fors_pk = fors_public_key(ctx, fors.roots, wots_adrs)
        self._merge(ctx)

    def run_tree(self, plan: "_MessagePlan") -> None:
        from .vexec import Executor, run_tree_layer

        ctx = self._fork()
        p = self.params
        schedule = plan.state.layer_schedule(p)
        executor = Executor(self.tree_workers)

        def one_layer(args):
            layer, tree, leaf_idx = args
            child = ctx.fork()
            res = run_tree_layer(child, layer, tree, leaf_idx)
            return res, child

        results = []
        for res, child in executor.map(one_layer, schedule):
            results.append(res)
            ctx.merge_counts(child)
        plan.roots = [r.root for r in results]
        for layer, res in enumerate(results):
            lo, hi = self.regions[f"auth[{layer}]"]
            plan.buffer[lo:hi] = res.auth_path
        self._merge(ctx)

    def run_wots(self, plan: "_MessagePlan") -> None:
        from .parallel import run_wots_block

        if plan.fors_pk is None or plan.roots is None:
            raise ConfigError("WOTS stage scheduled before its FORS/TREE inputs")
        ctx = self._fork()
        p = self.params
        schedule = plan.state.layer_schedule(p)
        sigs = run_wots_block(ctx, schedule, [plan.fors_pk] + plan.roots[:-1])
        for layer, wsig in enumerate(sigs):
            lo, hi = self.regions[f"wots[{layer}]"]
            plan.buffer[lo:hi] = wsig
        self._merge(ctx)


@dataclass
class _MessagePlan:
    msg: bytes
    buffer: bytearray
    state: object
    fors_pk: bytes | None = None
    roots: list | None = None
