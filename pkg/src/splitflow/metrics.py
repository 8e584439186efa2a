"""Mean square workload deviation between actual and expected per-path bytes."""

from __future__ import annotations

from splitflow.core import PathOutOfRange, RoutingWeightVector, SplitflowError


class EmptyAccumulator(SplitflowError):
    def __init__(self) -> None:
        super().__init__("no packets recorded")


class DeviationAccumulator:
    """Running expected/actual byte workloads and the squared-deviation sum.

    ``deviation[i]`` is tracked directly (actual minus expected) so that it
    stays small while the byte totals grow. The squared sum uses Neumaier
    compensation.
    """

    def __init__(self, weights: RoutingWeightVector) -> None:
        self.p = list(weights.weights)
        self.n = weights.n
        self.expected = [0.0] * self.n
        self.actual = [0.0] * self.n
        self.deviation = [0.0] * self.n
        self.m = 0
        self.max_abs_dev = 0.0
        self._sq = 0.0
        self._sq_comp = 0.0

    @property
    def sq_sum(self) -> float:
        return self._sq + self._sq_comp

    def record(self, size: float, chosen: int) -> float:
        """Account one routed packet; returns its squared-deviation contribution."""
        if not 1 <= chosen <= self.n:
            raise PathOutOfRange(chosen, self.n)
        j = chosen - 1
        p = self.p
        exp = self.expected
        dev = self.deviation
        self.actual[j] += size
        contrib = 0.0
        worst = self.max_abs_dev
        for i in range(self.n):
            share = p[i] * size
            exp[i] += share
            d = dev[i] - share
            if i == j:
                d += size
            dev[i] = d
            contrib += d * d
            if d > worst:
                worst = d
            elif -d > worst:
                worst = -d
        self.max_abs_dev = worst
        s = self._sq
        t = s + contrib
        if abs(s) >= abs(contrib):
            self._sq_comp += (s - t) + contrib
        else:
            self._sq_comp += (contrib - t) + s
        self._sq = t
        self.m += 1
        return contrib

    def msd(self) -> float:
        if self.m == 0:
            raise EmptyAccumulator()
        return self.sq_sum / (self.m * self.n)

