from concurrent.futures import ThreadPoolExecutor

from schmidtbench.pools.base import BaseWorkerPool


class ThreadWorkerPool(BaseWorkerPool):
    """A pool that spreads units over ``workers`` threads. At most
    ``workers`` units are in flight at any moment; the rest wait on the
    semaphore. The heavy numpy kernels release the GIL, so the threads
    overlap in practice."""

    def _make_executor(self):
        return ThreadPoolExecutor(
            max_workers=self.workers, thread_name_prefix="schmidtbench"
        )
