#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arith.hpp"

namespace sftl {

struct PreprocExhausted : std::runtime_error {
  explicit PreprocExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic element sampler. mt19937_64 raw outputs with explicit
// rejection, so files are bit-identical for a given seed regardless of
// the standard library's distribution internals.
class ElemRng {
 public:
  explicit ElemRng(std::uint64_t seed) : eng_(seed) {}
  explicit ElemRng(const std::array<std::uint8_t, 32>& seed);

  std::uint64_t raw() { return eng_(); }
  Elem uniform(const Algebra& alg) {
    if (!alg.is_field()) return eng_();
    Elem v;
    do { v = eng_(); } while (v >= kPrime);
    return v;
  }
  Elem below(Elem bound) {
    // rejection against the largest multiple of bound
    Elem limit = ~Elem(0) - (~Elem(0) % bound + 1) % bound;
    Elem v;
    do { v = eng_(); } while (v > limit);
    return v % bound;
  }
  double canonical() {  // uniform in [0,1)
    return double(eng_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 eng_;
};

// Shared-value stream: value shares plus (malicious only) MAC shares.
struct SharePool {
  std::vector<Elem> val;
  std::vector<Elem> mac;
};

inline constexpr int kBitsPerPack = 64;

// Per-kind material demand. Bits are counted in packs of 64 (one pack per
// secure comparison); trunc pairs and masks are per element.
struct MaterialCounts {
  std::uint64_t triples = 0;
  std::uint64_t masks[2] = {0, 0};  // owned by Source / Target
  std::uint64_t bit_packs = 0;
  std::uint64_t trunc_pairs = 0;

  MaterialCounts& operator+=(const MaterialCounts& o) {
    triples += o.triples;
    masks[0] += o.masks[0];
    masks[1] += o.masks[1];
    bit_packs += o.bit_packs;
    trunc_pairs += o.trunc_pairs;
    return *this;
  }
  MaterialCounts scaled(std::uint64_t n) const {
    return {triples * n, {masks[0] * n, masks[1] * n}, bit_packs * n, trunc_pairs * n};
  }
  bool operator==(const MaterialCounts&) const = default;
};

// One party's offline material, as loaded into an engine.
struct PreprocStore {
  EngineKind engine = EngineKind::SemiHonest;
  PartyRole party = PartyRole::Source;
  int frac_bits = 16;  // shift the dealer used for truncation pairs
  Elem mac_key_share = 0;
  std::array<std::uint8_t, 16> session_id{};

  SharePool triple_a, triple_b, triple_c;
  std::vector<Elem> mask_clear[2];  // only the own-party slot is populated
  SharePool mask_share[2];
  SharePool bits;                   // kBitsPerPack consecutive shares per pack
  SharePool trunc_r, trunc_rdiv;

  std::size_t triple_cursor = 0;
  std::size_t mask_cursor[2] = {0, 0};
  std::size_t bit_cursor = 0;   // in packs
  std::size_t trunc_cursor = 0;

  MaterialCounts provisioned() const;
  MaterialCounts consumed() const;
  void zeroize();
};

struct DealerConfig {
  EngineKind engine = EngineKind::SemiHonest;
  int frac_bits = 16;
  MaterialCounts counts;
  std::array<std::uint8_t, 32> seed{};
};

// Trusted-dealer emulation: produces both parties' material in memory.
std::pair<PreprocStore, PreprocStore> deal(const DealerConfig& config);

// Binary file form. Header: 12-byte magic + u32 version, u8 engine kind,
// u64 modulus (0 for 2^64), u16 party id, optional u64 MAC key share;
// then length-prefixed element arrays per material kind, all little-endian.
void write_preproc_file(const std::string& path, const PreprocStore& store);
PreprocStore load_preproc_file(const std::string& path);

// Generates and writes both party files ("<prefix>.s" / "<prefix>.t").
void deal_to_files(const DealerConfig& config, const std::string& prefix);

// Full-file audit: reconstructs every dealt secret and verifies triple
// relations, mask consistency, bit-ness, truncation pairs and MACs.
// Returns an explanation for the first violation, or nullopt if clean.
std::optional<std::string> audit_material(const PreprocStore& s0, const PreprocStore& s1);

// Offline cost model from the source protocols, used for reporting only.
struct OfflineCostModel {
  double malicious_bits_per_triple = 13710.0;  // 13.71 kbit
  double malicious_triples_per_sec = 8856.0;   // single thread
  int kappa = 128;
  int ell = 64;

  double semi_honest_bits_per_triple() const {
    return double(ell + 1) * double(kappa + ell) / 2.0;
  }
};

struct OfflineCost {
  double bits = 0;
  std::optional<double> seconds;  // modelled for the malicious dealer only
};

OfflineCost estimate_offline_cost(std::uint64_t triples, EngineKind engine,
                                  const OfflineCostModel& model = {});

// Shape of one training/prediction workload, used to size dealer output.
struct TrainShape {
  std::uint32_t n_source = 0;      // N_S
  std::uint32_t n_target = 0;      // N_T
  std::uint32_t n_overlap = 0;     // N_ST
  std::uint32_t n_labeled = 0;     // N_L
  std::uint32_t hidden = 32;       // d
  std::uint32_t in_source = 0;     // source feature count (before bias)
  std::uint32_t in_target = 0;
  std::uint32_t max_iter = 50;     // m; the loop body runs m+1 times
  std::uint32_t predict_samples = 0;
};

// Exact per-kind demand for a full run of the training loop (and optional
// prediction batch), obtained by walking the real circuit with a counting
// engine. Defined in count_model.cpp.
MaterialCounts count_required_material(const TrainShape& shape, EngineKind engine);

}  // namespace sftl
