import asyncio
import weakref

from fsspec.asyn import get_loop, sync_wrapper

MAX_TIMEOUT = 60 * 60 * 3


class BaseWorkerPool:
    """BaseWorkerPool runs independent units of work (pulse blocks, scan
    points) and hands the results back in submission order. How the units
    are executed depends on the subclass."""

    def __init__(self, *, workers=1, timeout=MAX_TIMEOUT):
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")

        self.workers = workers

        # Maximum time a single unit may take before a TimeoutError is
        # raised. It can be None.
        self.timeout = timeout

        # The coroutines run on fsspec's dedicated IO loop, which lets the
        # blocking ``map`` be called from plain synchronous code.
        self.loop = get_loop()
        self.active_units = 0
        self._executor = self._make_executor()
        if self._executor is not None:
            weakref.finalize(self, self._executor.shutdown, wait=False)

    def _make_executor(self):
        return None

    async def _run(self, func, item, semaphore):
        async with semaphore:
            self.active_units += 1
            try:
                loop = asyncio.get_running_loop()
                future = loop.run_in_executor(self._executor, func, item)
                return await asyncio.wait_for(future, timeout=self.timeout)
            finally:
                self.active_units -= 1

    async def _map(self, func, items):
        semaphore = asyncio.Semaphore(self.workers)
        coros = [self._run(func, item, semaphore) for item in items]
        return await asyncio.gather(*coros)

    map = sync_wrapper(_map)

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
