#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"
#include "net.hpp"
#include "preprocessing.hpp"
#include "sharing.hpp"

namespace sftl {

struct IterationMetrics {
  std::uint32_t iter = 0;
  double init_ms = 0, compute_ms = 0, reveal_ms = 0;
  std::uint64_t bytes_sent = 0, bytes_received = 0, rounds = 0;
  std::uint64_t triples = 0, masks = 0, bit_packs = 0, trunc_pairs = 0;
};

// Test-only instrumentation. Opening the loss breaks the information-flow
// guarantees, so audited sessions run with hooks disabled.
struct DebugHooks {
  bool reveal_loss = false;
  std::vector<double> loss_trace;
};

struct TrainResult {
  LocalNet net;
  std::vector<IterationMetrics> metrics;
  std::uint32_t iterations = 0;
  bool converged = false;
};

struct SessionParams {
  EngineKind engine = EngineKind::SemiHonest;
  FixedCodec codec;
  Hyperparams hp;
  std::uint32_t d = 32;
  std::uint64_t seed = 1;
  CheatPlan cheat;
};

// Secure strict less-than-zero on shared fixed-point values, one bit share
// per input element. Full-range dealer mask is opened, then a ripple
// comparison of the public masked bits against the shared mask bits
// extracts the sign (ring) or the wrap bit feeding an LSB parity (field).
ShareVec secure_ltz(Engine& eng, const ShareVec& z);

// Opens the single bit (L_prev - L < eps); runs the batched check before
// the result is acted upon. Loss shares are at scale 2.
bool convergence_check(Engine& eng, const ShareVec& loss, const ShareVec& loss_prev, double eps);

// Parameter agreement before any share flows. Verifies engine kind,
// modulus, codec, hyperparameters, common dimensions, dataset digest and
// dealer session; returns the peer's private dimensions.
struct PeerDims {
  std::uint32_t rows = 0;
  std::uint32_t in_features = 0;
};
PeerDims handshake(Channel& ch, PartyRole role, const SessionParams& p, const JointDims& common,
                   std::uint32_t own_rows, std::uint32_t own_in,
                   const std::array<std::uint8_t, 32>& digest,
                   const std::array<std::uint8_t, 16>& dealer_session);

// Algorithm-1 driver for one party. Exactly one of src/tgt is non-null.
TrainResult run_training(Engine& eng, const SessionParams& p, const JointDims& dims,
                         const SourceData* src, const TargetData* tgt,
                         DebugHooks* dbg = nullptr);

// Federated inference. The source passes Lambda^S; the target passes the
// hidden representations of the samples to classify. Both parties learn
// the labels (the source computes them from the revealed signs and sends
// them over; that is the protocol's output).
std::vector<int> run_predict(Engine& eng, std::span<const double> lambda, const Mat* c_rows,
                             std::size_t n_samples, std::size_t d);

// Channel + handshake + engine assembly for one party.
TrainResult train_session(Channel& ch, PartyRole role, const SessionParams& p, PreprocStore store,
                          const SourceData* src, const TargetData* tgt, DebugHooks* dbg = nullptr);

std::vector<int> predict_session(Channel& ch, PartyRole role, const SessionParams& p,
                                 PreprocStore store, const LocalNet& net, const SourceData* src,
                                 const TargetData* tgt, const Mat* samples);

void write_metrics_csv(const std::string& path, std::span<const IterationMetrics> metrics);

}  // namespace sftl
