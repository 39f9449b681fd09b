"""One-off calibration of the constant in localization.reversion_error_bound.

Usage:

  python -m halfspace_tl.app.scripts.calibrate_reversion_constant [--instances 100000] [--seed 0]

Behavior:
  - Draws random reversion instances (delta <= 0.1, beta <= 1, sigma >= 0.2)
  - Divides each true reverted-direction error by the bound evaluated with constant 1
  - Logs the worst ratio; the constant in use must exceed it with margin
"""
from __future__ import annotations

import argparse
import logging

from ..schemas.learning import ReversionBound
from ..services import localization, oracles
from ..services.core import derive_rng

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
logger = logging.getLogger("calibrate_reversion")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = derive_rng(args.seed, "calibrate_reversion")
    worst = 0.0
    worst_instance = None
    for i in range(args.instances):
        inst = oracles.reversion_instance(rng)
        unit_bound = localization.reversion_error_bound(
            ReversionBound(sigma=inst.sigma, beta=inst.beta, delta=inst.delta)
        ) / localization.REVERSION_CONSTANT
        if unit_bound > 0 and inst.error / unit_bound > worst:
            worst, worst_instance = inst.error / unit_bound, inst
        if (i + 1) % 20_000 == 0:
            logger.info("%d instances, worst ratio so far %.4f", i + 1, worst)
    logger.info("Calibration complete. worst ratio=%.4f constant in use=%g", worst, localization.REVERSION_CONSTANT)
    if worst_instance is not None:
        logger.info(
            "worst at sigma=%.3f beta=%.3f delta=%.4f error=%.4f",
            worst_instance.sigma,
            worst_instance.beta,
            worst_instance.delta,
            worst_instance.error,
        )
    if worst >= localization.REVERSION_CONSTANT:
        logger.warning("constant %g is too small for the sampled instances", localization.REVERSION_CONSTANT)


if __name__ == "__main__":
    main()
