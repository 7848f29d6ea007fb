#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arith.hpp"
#include "net.hpp"
#include "preprocessing.hpp"

namespace sftl {

// Honest party detected cheating (MAC check / commitment failure).
struct AbortError : std::runtime_error {
  explicit AbortError(const std::string& what) : std::runtime_error(what) {}
};
// Session parameters disagree between the two parties.
struct MismatchError : std::runtime_error {
  explicit MismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Classification of every value the protocol reveals to both parties.
// The information-flow audit asserts that nothing else is ever opened.
enum class OpenTag : std::uint8_t {
  BeaverOpen,      // epsilon/rho, uniformly masked by the triple
  TruncMasked,     // z + r under the dealer truncation mask (malicious)
  CompareMasked,   // comparison input under a full-range dealer mask
  ConvergenceBit,  // the per-iteration bit L_diff
  OutputMasked,    // gradient + recipient-owned dealer mask (malicious)
  DebugProbe,      // test-only reveals; never present in audited sessions
};

struct OpenEvent {
  OpenTag tag;
  std::uint64_t count;
};
struct OutputEvent {
  PartyRole recipient;
  std::uint64_t count;
  bool masked;  // true: revealed via a masked opening; false: directed share send
};

struct EngineAudit {
  std::vector<OpenEvent> opens;
  std::vector<OutputEvent> outputs;
};

// A vector of secret-shared elements. Malicious shares carry MAC shares.
struct ShareVec {
  std::vector<Elem> val;
  std::vector<Elem> mac;

  std::size_t size() const { return val.size(); }
  bool authenticated() const { return !mac.empty() || val.empty(); }
};

// Active-adversary injection used by the abort-completeness harness.
// `target` indexes the event (of the given kind) to corrupt.
struct CheatPlan {
  enum class Mode : std::uint8_t { None = 0, Share, Open, Output };
  Mode mode = Mode::None;
  std::uint64_t target = 0;
  Elem delta = 1;
};

struct OpCounters {
  std::uint64_t mults = 0;         // elementwise secure multiplications
  std::uint64_t mult_batches = 0;  // rounds spent on them
  std::uint64_t truncs = 0;
  std::uint64_t trunc_batches = 0;
  std::uint64_t opened = 0;        // elements opened to both parties
  std::uint64_t open_batches = 0;
  std::uint64_t inputs = 0;        // elements input-shared (either owner)
  std::uint64_t input_batches = 0;
  std::uint64_t outputs = 0;       // elements revealed to one party
  std::uint64_t output_batches = 0;
  std::uint64_t mac_checks = 0;
};

// One party's online secret-sharing engine. Owns the preprocessing cursor
// state; mutated only by the single protocol thread. Movable between
// threads, never shared concurrently.
class Engine {
 public:
  Engine(PartyRole role, FixedCodec codec, PreprocStore store, Channel* channel,
         std::uint64_t session_seed);
  virtual ~Engine() = default;

  virtual EngineKind kind() const = 0;
  PartyRole role() const { return role_; }
  const Algebra& alg() const { return alg_; }
  const FixedCodec& codec() const { return codec_; }
  Channel* channel() { return channel_; }
  PreprocStore& store() { return store_; }
  const OpCounters& ops() const { return ops_; }
  EngineAudit& audit() { return audit_; }
  void set_cheat(const CheatPlan& plan) { cheat_ = plan; }

  // -- local linear layer (zero communication)
  ShareVec share_of_public(std::span<const Elem> c) const;
  ShareVec share_of_public(Elem c) const { return share_of_public(std::span(&c, 1)); }
  ShareVec add(const ShareVec& a, const ShareVec& b) const;
  ShareVec sub(const ShareVec& a, const ShareVec& b) const;
  ShareVec neg(const ShareVec& a) const;
  ShareVec add_public(const ShareVec& a, std::span<const Elem> c) const;
  ShareVec add_public(const ShareVec& a, Elem c) const;
  ShareVec scalar_mul(const ShareVec& a, Elem c) const;

  // -- interactive operations --
  // Input sharing for both directions in a single round. Either side may be
  // empty; both parties must agree on the two lengths.
  virtual std::pair<ShareVec, ShareVec> input_exchange(std::span<const Elem> self_xs,
                                                       std::size_t peer_n) = 0;
  ShareVec input_self(std::span<const Elem> xs) { return input_exchange(xs, 0).first; }
  ShareVec input_peer(std::size_t n) { return input_exchange({}, n).second; }

  // Beaver multiplication, elementwise over equal-length vectors. One round.
  virtual ShareVec mul(const ShareVec& x, const ShareVec& y);
  // Shared fixed-point truncation by 2^frac_bits (one scale step).
  virtual ShareVec trunc(const ShareVec& z) = 0;
  // Partial open: both parties learn the values. MAC shares stay local.
  virtual std::vector<Elem> open(const ShareVec& x, OpenTag tag);
  // Reveal to one party only. Recipient gets the values.
  virtual std::optional<std::vector<Elem>> output_to(PartyRole who, const ShareVec& x) = 0;
  // Batched MAC check over everything opened since the last check.
  // No-op for the semi-honest engine and on an empty log.
  virtual void check() = 0;

  // 64 consecutive shared random bits plus their weighted recombination
  // (the mask value r), one secure comparison's worth.
  virtual ShareVec take_bit_pack();

  // Zeroizes share material; called on abort.
  void scrub() { store_.zeroize(); }

 protected:
  virtual int absorber() const = 0;  // party absorbing public constants
  virtual void on_opened(std::span<const Elem> values, const ShareVec& x) = 0;
  void record_open(OpenTag tag, std::size_t n);
  Elem cheat_adjust(CheatPlan::Mode mode, Elem v);

  struct TripleSet {
    ShareVec a, b, c;
  };
  TripleSet take_triples(std::size_t n);

  PartyRole role_;
  Algebra alg_;
  FixedCodec codec_;
  PreprocStore store_;
  Channel* channel_;
  OpCounters ops_;
  EngineAudit audit_;
  CheatPlan cheat_;
  std::uint64_t cheat_seen_[4] = {0, 0, 0, 0};
  bool in_output_ = false;
  ElemRng rng_;
};

class SemiHonestEngine final : public Engine {
 public:
  SemiHonestEngine(PartyRole role, FixedCodec codec, PreprocStore store, Channel* channel,
                   std::uint64_t session_seed);
  EngineKind kind() const override { return EngineKind::SemiHonest; }
  std::pair<ShareVec, ShareVec> input_exchange(std::span<const Elem> self_xs,
                                               std::size_t peer_n) override;
  ShareVec trunc(const ShareVec& z) override;
  std::optional<std::vector<Elem>> output_to(PartyRole who, const ShareVec& x) override;
  void check() override {}

 protected:
  int absorber() const override { return 1; }
  void on_opened(std::span<const Elem>, const ShareVec&) override {}
};

class MaliciousEngine final : public Engine {
 public:
  MaliciousEngine(PartyRole role, FixedCodec codec, PreprocStore store, Channel* channel,
                  std::uint64_t session_seed);
  EngineKind kind() const override { return EngineKind::Malicious; }
  std::pair<ShareVec, ShareVec> input_exchange(std::span<const Elem> self_xs,
                                               std::size_t peer_n) override;
  ShareVec trunc(const ShareVec& z) override;
  std::optional<std::vector<Elem>> output_to(PartyRole who, const ShareVec& x) override;
  void check() override;

  std::size_t open_log_size() const { return log_value_.size(); }

 protected:
  int absorber() const override { return 0; }
  void on_opened(std::span<const Elem> values, const ShareVec& x) override;

 private:
  [[noreturn]] void abort_session(const std::string& why);
  // consumes n masks owned by `owner`; fills `clear` if we are the owner
  ShareVec take_masks(int owner, std::size_t n, std::vector<Elem>* clear);

  Elem alpha_;  // MAC key share, never transmitted
  std::vector<Elem> log_value_;
  std::vector<Elem> log_mac_;
};

// Walks the circuit without a peer to tally preprocessing demand and
// operation counts. Opens return zeros.
class CountingEngine final : public Engine {
 public:
  CountingEngine(PartyRole role, FixedCodec codec, EngineKind counted_kind);
  EngineKind kind() const override { return counted_; }
  std::pair<ShareVec, ShareVec> input_exchange(std::span<const Elem> self_xs,
                                               std::size_t peer_n) override;
  ShareVec mul(const ShareVec& x, const ShareVec& y) override;
  ShareVec trunc(const ShareVec& z) override;
  std::vector<Elem> open(const ShareVec& x, OpenTag tag) override;
  std::optional<std::vector<Elem>> output_to(PartyRole who, const ShareVec& x) override;
  ShareVec take_bit_pack() override;
  void check() override { ++ops_.mac_checks; }

  MaterialCounts demand() const { return demand_; }

 protected:
  int absorber() const override { return 0; }
  void on_opened(std::span<const Elem>, const ShareVec&) override {}

 private:
  ShareVec zeros(std::size_t n) const;
  EngineKind counted_;
  MaterialCounts demand_;
};

// --- ShareVec shape helpers (local index plumbing) ---
ShareVec slice(const ShareVec& v, std::size_t offset, std::size_t n);
ShareVec concat(const ShareVec& a, const ShareVec& b);
// [v v v ...] whole-vector repetition
ShareVec repeat(const ShareVec& v, std::size_t times);
// [v0 v0 .. v1 v1 ..] per-element repetition
ShareVec repeat_each(const ShareVec& v, std::size_t times);
// sums consecutive groups of `group` elements
ShareVec group_sums(const Engine& e, const ShareVec& v, std::size_t group);
// view v as outer x inner and sum over the outer dimension
ShareVec outer_sums(const Engine& e, const ShareVec& v, std::size_t outer, std::size_t inner);

}  // namespace sftl
