from __future__ import annotations

import contextlib
import cProfile
import logging
import time
from collections.abc import Generator

logger = logging.getLogger(__name__)


class Perf:
    def __init__(self) -> None:
        self._prof: cProfile.Profile | None = None
        self.records: list[tuple[str, float]] = []
        self._name: str | None = None
        self._time: float | None = None

    def start(self, name: str) -> None:
        assert self._name is None, self._name
        self._name = name
        self._time = time.monotonic()
        if self._prof:
            self._prof.enable()

    def end(self) -> float:
        assert self._name is not None
        assert self._time is not None
        if self._prof:
            self._prof.disable()
        elapsed = time.monotonic() - self._time
        self.records.append((self._name, elapsed))
        logger.debug('%s: %.3fs', self._name, elapsed)
        self._name = self._time = None
        return elapsed

    @contextlib.contextmanager
    def stage(self, name: str) -> Generator[None]:
        self.start(name)
        try:
            yield
        finally:
            self.end()

    def total(self, *names: str) -> float:
        """seconds spent in the named stages (all stages if none given)"""
        return sum(t for n, t in self.records if not names or n in names)

    def summary(self) -> dict[str, float]:
        ret: dict[str, float] = {}
        for name, duration in self.records:
            ret[name] = ret.get(name, 0.) + duration
        return ret

    def init_profiling(self) -> None:
        self._prof = cProfile.Profile()

    def save_profiles(self, filename: str) -> None:
        assert self._prof is not None
        self._prof.dump_stats(f'{filename}.pstats')
        with open(filename, 'w', encoding='UTF-8') as f:
            f.write('μs\tstage\n')
            for name, duration in self.records:
                f.write(f'{int(duration * 1000 * 1000)}\t{name}\n')


@contextlib.contextmanager
def perf_log(filename: str | None) -> Generator[Perf]:
    perf = Perf()
    if filename is None:
        yield perf
    else:
        perf.init_profiling()
        try:
            yield perf
        finally:
            perf.save_profiles(filename)
