from schmidtbench.pools.base import BaseWorkerPool


class SerialWorkerPool(BaseWorkerPool):
    """A pool that runs every unit inline, in submission order, on the
    calling thread. It never touches the event loop, so it is safe to use
    from inside another pool's worker."""

    def __init__(self, **kwargs):
        kwargs["workers"] = 1
        super().__init__(**kwargs)

    def map(self, func, items):
        results = []
        for item in items:
            self.active_units += 1
            try:
                results.append(func(item))
            finally:
                self.active_units -= 1
        return results
