#!/usr/bin/env python3
"""Weak-type characterization on the shipped power-weight fixture.

Prints the condition constant and the observed weak ratio per rung, then
both directions of the verdict.  Pass ``--out`` to keep the JSON artifact.
"""

import argparse

from bifrac import config
from bifrac.verify import thmg_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(config.PACKAGE_FIXTURES / "thmG.cfg"))
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = config.load(args.config)
    rep = thmg_report(cfg.exponents, cfg.triple(), L0=cfg.L0, ladder=cfg.ladder, family=cfg.family)
    for rung in rep.ladder:
        print(f"L={rung['scale']:<3} constant={rung['constant']:.6g} ratio={rung['ratio']:.6g}")
    for side in ("sufficiency", "necessity"):
        print(f"{side}: {'pass' if rep.sections[side]['passed'] else 'FAIL'}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rep.to_json())


if __name__ == "__main__":
    main()
