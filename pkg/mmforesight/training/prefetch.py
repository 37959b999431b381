import logging
import queue
import threading
from typing import Callable, Iterable, Iterator, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_DONE = object()


class BatchPrefetcher:
    """
    Prepares batches on a daemon thread into a bounded queue. With no
    workers the batches are prepared inline, in order, on the caller's
    thread.
    """

    def __init__(
        self,
        batches: Iterable[T],
        prepare: Callable[[T], R],
        workers: int = 0,
        depth: int = 4,
    ) -> None:
        self._batches = batches
        self._prepare = prepare
        self._workers = workers
        self._queue: "queue.Queue" = queue.Queue(maxsize=max(depth, 1))
        self._error: List[BaseException] = []
        self.logger = logging.getLogger("mmforesight.py")

    def _produce(self) -> None:
        try:
            for batch in self._batches:
                self._queue.put(self._prepare(batch))
        except BaseException as error:
            self.logger.error(f"Batch preparation failed: {error}")
            self._error.append(error)
        finally:
            self._queue.put(_DONE)

    def __iter__(self) -> Iterator[R]:
        if self._workers == 0:
            for batch in self._batches:
                yield self._prepare(batch)
            return

        thread = threading.Thread(target=self._produce, daemon=True)
        thread.start()
        while True:
            item = self._queue.get()
            if item is _DONE:
                break
            yield item
        thread.join()
        if self._error:
            raise self._error[0]
