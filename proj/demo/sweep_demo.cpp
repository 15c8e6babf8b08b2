// Small ensemble sweep on a 2x8 strip: prints the CSV artifact to stdout and
// the p05 crossings to stderr.  Rerunning always produces identical bytes —
// the ensemble is fully keyed by (seed, r, B).

#include <cstdio>
#include <iostream>

#include "qperc/io.hpp"
#include "qperc/qperc.hpp"

int main() {
  qperc::EnsembleConfig cfg{qperc::LatticeSpec(2, 8)};
  cfg.R = 200;
  cfg.seed = 42;

  const qperc::SweepResult res = qperc::sweep(cfg);
  std::cout << qperc::sweep_csv(res);

  std::fprintf(stderr, "classical crossing: B05=%d p05=%.4f\n", res.rw.B05,
               res.rw.p05);
  std::fprintf(stderr, "quantum  crossing:  B05=%d p05=%.4f\n", res.qw.B05,
               res.qw.p05);
  return 0;
}
