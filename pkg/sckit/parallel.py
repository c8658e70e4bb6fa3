# coding: utf8
from multiprocessing import Process, Queue, Event, cpu_count
import os
import queue
import sys
import traceback
from typing import Any, Callable, Iterable, List

from .errors import SckError, logger

__all__ = [
    "THREADS_ENV",
    "resolve_parallel_level",
    "run_ordered",
]


THREADS_ENV = "SCK_THREADS"


def resolve_parallel_level(parallel_level: int = 1) -> int:
    """parallel_level <= 0 means cpu_count() + parallel_level; SCK_THREADS caps the result."""
    if parallel_level <= 0:
        level = max(1, cpu_count() + parallel_level)
    else:
        level = parallel_level
    cap = os.environ.get(THREADS_ENV)
    if cap:
        level = max(1, min(level, int(cap)))
    return level


def run_ordered(func: Callable[[Any], Any], items: Iterable[Any], parallel_level: int = 1) -> List[Any]:
    """Apply func to every item; results always come back in input order.

    func must be a module-level callable when more than one process is used.
    """
    items = list(items)
    level = min(resolve_parallel_level(parallel_level), max(1, len(items)))
    if level == 1:
        return [func(item) for item in items]
    logger.debug("running %d jobs on %d processes", len(items), level)
    return _run_parallel(func, items, level)


def _run_parallel(func: Callable[[Any], Any], items: List[Any], parallel_level: int) -> List[Any]:
    in_queue = Queue(maxsize=parallel_level * 2)
    out_queue = Queue()
    abort = Event()

    p_workers = []
    for _ in range(parallel_level):
        p = Process(target=_multi_process_work, args=(func, in_queue, out_queue, abort), daemon=True)
        p.start()
        p_workers.append(p)

    p_load = Process(target=_multi_process_load, args=(in_queue, items, parallel_level, abort), daemon=True)
    p_load.start()

    try:
        return _main_process_collect(out_queue, len(items), parallel_level, abort)
    except KeyboardInterrupt:
        abort.set()
        raise
    finally:
        for p in [p_load] + p_workers:
            p.join(timeout=1)
            if p.is_alive():
                p.terminate()
                p.join()


def _multi_process_load(in_queue: Queue, items: List[Any], n_workers: int, abort: Event):
    try:
        for i, item in enumerate(items):
            if abort.is_set():
                break
            in_queue.put((i, item))
        else:
            for _ in range(n_workers):
                in_queue.put("terminate")
    except KeyboardInterrupt:
        pass
    except:
        traceback.print_exc()
        abort.set()


def _multi_process_work(func: Callable[[Any], Any], in_queue: Queue, out_queue: Queue, abort: Event):
    i = None
    try:
        while True:
            if abort.is_set():
                break
            try:
                msg = in_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            if msg == "terminate":
                out_queue.put(("terminating", i, None))
                break
            i, item = msg
            out_queue.put((None, i, func(item)))
    except KeyboardInterrupt:
        pass
    except Exception as err:
        out_queue.put(("Error: {}\n{}".format(err, traceback.format_exc()), i, None))
        abort.set()


def _main_process_collect(out_queue: Queue, n_items: int, parallel_level: int, abort: Event) -> List[Any]:
    results = dict()
    terminating = 0
    while terminating < parallel_level or len(results) < n_items:
        try:
            msg, index, result = out_queue.get(timeout=0.1)
        except queue.Empty:
            if abort.is_set() and out_queue.empty():
                raise SckError("worker pool aborted before all jobs finished")
            continue
        if msg is not None:
            if msg == "terminating":
                terminating += 1
                continue
            print(f"Job #{index} failed. Stopping all the processes.", file=sys.stderr)
            abort.set()
            raise SckError(msg)
        results[index] = result
    # output must be ordered same as input
    return [results[i] for i in range(n_items)]
