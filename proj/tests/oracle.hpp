#ifndef AOI_TESTS_ORACLE_HPP_
#define AOI_TESTS_ORACLE_HPP_

#include <vector>

#include "aoi/network.hpp"

// Reference models that work directly on AoI values instead of generation
// times. They share no code with the library beyond the Topology struct.
namespace oracle {

struct TinyNet {
  int L = 1;
  int K = 1;
  std::vector<double> loss_sample;
  std::vector<double> loss_update;
  std::vector<int> period;  // 0 marks a generate-at-will device

  int M() const { return static_cast<int>(loss_sample.size()); }
};

// Single-relay topology matching the tiny network.
aoi::Topology to_topology(const TinyNet& net);

// Expected average TBS AoI over slots 2..T+1 when MAF-MAD schedules the
// network, enumerating every loss outcome with its probability.
double maf_mad_expected_tbs(const TinyNet& net, int horizon);

struct SequenceSearch {
  double best = 0.0;       // minimum average TBS AoI over all sequences
  long sequences = 0;      // number of action sequences evaluated
  std::vector<double> all;
};

// Lossless network: every open-loop action sequence is evaluated. With zero
// losses and generate-at-will traffic the system is deterministic, so the
// best sequence is the optimal policy's value.
SequenceSearch exhaustive_lossless(const TinyNet& net, int horizon);

}  // namespace oracle

#endif  // AOI_TESTS_ORACLE_HPP_
