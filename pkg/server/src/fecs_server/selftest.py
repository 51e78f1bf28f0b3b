"""Start-up probes: the geometric contracts the decoding engine relies on.

The causal-prefix probe checks that hidden states of a prefix are unchanged
when tokens are appended (per component, within tolerance); the batch/serial
probe checks that the batched candidate evaluation equals one-at-a-time
evaluation; the mass probe checks the full softmax sums to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .service import ModelService

PREFIX_TOL = 1e-4
BATCH_TOL = 1e-4
MASS_TOL = 1e-6


@dataclass(frozen=True)
class ProbeResult:
    name: str
    passed: bool
    achieved: float
    tolerance: float

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{status}  {self.name}: achieved {self.achieved:.3e} (tolerance {self.tolerance:.0e})"


def _probe_ids(service: ModelService, rng: np.random.Generator, length: int) -> list[int]:
    return [int(t) for t in rng.integers(0, service.vocab_size, size=length)]


def causal_prefix_probe(service: ModelService, rng: np.random.Generator) -> ProbeResult:
    worst = 0.0
    for _ in range(4):
        prefix_len = int(rng.integers(4, 12))
        suffix_len = int(rng.integers(1, 6))
        prefix = _probe_ids(service, rng, prefix_len)
        suffix = _probe_ids(service, rng, suffix_len)
        short = service.hiddens(prefix)
        long = service.hiddens(prefix + suffix)
        worst = max(worst, float(np.abs(short - long[:prefix_len]).max()))
    return ProbeResult("causal-prefix-stability", worst <= PREFIX_TOL, worst, PREFIX_TOL)


def batch_serial_probe(service: ModelService, rng: np.random.Generator) -> ProbeResult:
    worst = 0.0
    for _ in range(2):
        prefix = _probe_ids(service, rng, int(rng.integers(4, 12)))
        candidates = list({int(t) for t in rng.integers(0, service.vocab_size, size=4)})
        batched = service.candidate_hiddens(prefix, candidates)
        for i, cand in enumerate(candidates):
            serial = service.hiddens(prefix + [cand])[-1]
            worst = max(worst, float(np.abs(batched[i] - serial).max()))
    return ProbeResult("batch-serial-equivalence", worst <= BATCH_TOL, worst, BATCH_TOL)


def softmax_mass_probe(service: ModelService, rng: np.random.Generator) -> ProbeResult:
    worst = 0.0
    for _ in range(4):
        ids = _probe_ids(service, rng, int(rng.integers(2, 10)))
        probs = service.next_probs(ids)
        worst = max(worst, abs(float(probs.sum()) - 1.0))
        if np.any(probs < 0):
            worst = max(worst, 1.0)
    return ProbeResult("full-softmax-mass", worst <= MASS_TOL, worst, MASS_TOL)


def run_selftest(service: ModelService, seed: int = 0) -> list[ProbeResult]:
    rng = np.random.default_rng(seed)
    return [
        causal_prefix_probe(service, rng),
        batch_serial_probe(service, rng),
        softmax_mass_probe(service, rng),
    ]


def first_failure(results: list[ProbeResult]) -> ProbeResult | None:
    for result in results:
        if not result.passed:
            return result
    return None
