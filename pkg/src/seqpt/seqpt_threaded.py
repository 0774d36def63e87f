# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
A bounded pool of worker threads that maps a function over a sequence of
tasks and returns the results in submission order.

numpy releases the GIL inside its linear algebra kernels, so the estimator
and the simulator scale over threads without pickling channels or datasets.
"""

import logging
import multiprocessing
import os
import queue
import threading
from typing import Any, Callable, Iterable, List, Optional, Tuple, TypeVar

__all__ = ["threaded_map", "workers_from_env", "available_threads",
           "WORKERS_VARIABLE"]

_log = logging.getLogger(__name__)

WORKERS_VARIABLE = "SEQPT_WORKERS"

T = TypeVar("T")
R = TypeVar("R")


def available_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except:  # noqa: E722
        try:
            return multiprocessing.cpu_count()
        except:  # noqa: E722
            return 1


def workers_from_env(default: int = 0) -> int:
    """Worker count from ``SEQPT_WORKERS``: 0 runs serially, a negative
    value uses every available CPU."""
    value = os.environ.get(WORKERS_VARIABLE)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{WORKERS_VARIABLE} should be an integer, got "
                         f"{value!r}") from None


def threaded_map(function: Callable[[T], R], items: Iterable[T],
                 threads: int = 1, queue_size: int = 2) -> List[R]:
    """
    ``[function(item) for item in items]``, computed by ``threads`` workers.

    threads == 0 evaluates in the calling thread. A threads < 0 will attempt
    to use the number of threads in the system.

    The first exception raised by ``function`` is re-raised in the calling
    thread once all workers have stopped.
    """
    if threads == 0:
        return [function(item) for item in items]
    elif threads < 0:
        threads = available_threads()
    mapper = _ThreadedMapper(function, threads, queue_size)
    return mapper.map(items)


class _ThreadedMapper:
    """
    Each worker gets its own input and output queue. Tasks are handed out
    round robin using an index, and the collector thread reads the output
    queues in the same round robin. This way the results come back in order
    while every worker computes independently.
    """
    def __init__(self, function: Callable[[Any], Any], threads: int,
                 queue_size: int = 2):
        if threads < 1:
            raise ValueError(f"threads should be at least 1, got {threads}")
        self.function = function
        self.threads = threads
        self.lock = threading.Lock()
        self._calling_thread = threading.current_thread()
        self.exception: Optional[BaseException] = None
        self.running = False
        self.input_queues: List[queue.Queue[Tuple[int, Any]]] = [
            queue.Queue(queue_size) for _ in range(threads)]
        self.output_queues: List[queue.Queue[Tuple[int, Any]]] = [
            queue.Queue(queue_size) for _ in range(threads)]
        self.results: List[Any] = []
        self.workers = [threading.Thread(target=self._work, args=(i,))
                        for i in range(threads)]
        self.collector = threading.Thread(target=self._collect)
        self._collected = threading.Event()
        self.submitted = 0

    def start(self):
        self.running = True
        self.collector.start()
        for worker in self.workers:
            worker.start()

    def stop(self):
        """Stop, but do not care for remaining work"""
        self.running = False
        for worker in self.workers:
            worker.join()
        self.collector.join()

    def map(self, items: Iterable[Any]) -> List[Any]:
        self.start()
        try:
            for item in items:
                if not self._put(item):
                    break
            self._wait()
        finally:
            self.stop()
        if self.exception:
            raise self.exception
        _log.debug("mapped %d tasks over %d threads", self.submitted,
                   self.threads)
        return self.results

    def _wait(self):
        """Block until every submitted task is collected or a worker
        failed."""
        while True:
            with self.lock:
                if self.exception or len(self.results) == self.submitted:
                    return
            self._collected.wait(0.05)
            self._collected.clear()

    def _put(self, item) -> bool:
        in_queue = self.input_queues[self.submitted % self.threads]
        while True:
            with self.lock:
                if self.exception:
                    return False
            try:
                in_queue.put((self.submitted, item), timeout=0.05)
                break
            except queue.Full:
                pass
        self.submitted += 1
        return True

    def _work(self, index: int):
        in_queue = self.input_queues[index]
        out_queue = self.output_queues[index]
        while True:
            try:
                position, item = in_queue.get(timeout=0.05)
            except queue.Empty:
                if not (self.running and self._calling_thread.is_alive()):
                    return
                continue
            try:
                result = self.function(item)
            except Exception as e:
                in_queue.task_done()
                self._set_error_and_empty_queue(e, in_queue)
                return
            while True:
                try:
                    out_queue.put((position, result), timeout=0.05)
                    break
                except queue.Full:
                    if not (self.running and
                            self._calling_thread.is_alive()):
                        in_queue.task_done()
                        return
            in_queue.task_done()

    def _collect(self):
        index = 0
        while True:
            out_queue = self.output_queues[index % self.threads]
            try:
                position, result = out_queue.get(timeout=0.05)
            except queue.Empty:
                if not (self.running and self._calling_thread.is_alive()):
                    return
                continue
            with self.lock:
                self.results.append(result)
            self._collected.set()
            out_queue.task_done()
            index += 1

    def _set_error_and_empty_queue(self, error, q):
        with self.lock:
            self.exception = error
            # Abort everything and empty the queue
            self.running = False
            while True:
                try:
                    _ = q.get(timeout=0.05)
                    q.task_done()
                except queue.Empty:
                    return
