from schmidtbench.pools.serial import SerialWorkerPool
from schmidtbench.pools.threads import ThreadWorkerPool
from schmidtbench.utils import resolve_workers


def make_pool(workers=None):
    workers = resolve_workers(workers)
    if workers == 1:
        return SerialWorkerPool()
    return ThreadWorkerPool(workers=workers)
