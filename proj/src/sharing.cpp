#include "sharing.hpp"

#include <cstring>

#include "sha256.hpp"

namespace sftl {

namespace {

// Counter-mode SHA-256 expansion of the agreed coin-flip seed.
class HashPrg {
 public:
  explicit HashPrg(std::span<const std::uint8_t> seed)
      : seed_(seed.begin(), seed.end()) {}
  std::uint64_t next_u64() {
    if (have_ == 0) refill();
    std::uint64_t v = 0;
    std::memcpy(&v, block_.data() + (32 - have_), 8);
    have_ -= 8;
    return v;
  }
  Elem next_field() {
    Elem v;
    do { v = next_u64(); } while (v >= kPrime);
    return v;
  }

 private:
  void refill() {
    Sha256 h;
    h.update(seed_.data(), seed_.size());
    h.update(&counter_, sizeof(counter_));
    ++counter_;
    auto d = h.finish();
    std::memcpy(block_.data(), d.data(), 32);
    have_ = 32;
  }
  std::vector<std::uint8_t> seed_;
  std::uint64_t counter_ = 0;
  std::array<std::uint8_t, 32> block_{};
  std::size_t have_ = 0;
};

constexpr std::uint8_t kDomainCoin = 0x01;
constexpr std::uint8_t kDomainSigma = 0x02;

std::array<std::uint8_t, 32> commit_hash(std::uint8_t domain,
                                         std::span<const std::uint8_t> payload) {
  Sha256 h;
  h.update(&domain, 1);
  h.update(payload.data(), payload.size());
  return h.finish();
}

}  // namespace

Engine::Engine(PartyRole role, FixedCodec codec, PreprocStore store, Channel* channel,
               std::uint64_t session_seed)
    : role_(role),
      alg_(Algebra::for_engine(store.engine)),
      codec_(codec),
      store_(std::move(store)),
      channel_(channel),
      rng_(session_seed) {}

ShareVec Engine::share_of_public(std::span<const Elem> c) const {
  ShareVec out;
  out.val.resize(c.size());
  bool mine = party_index(role_) == absorber();
  for (std::size_t i = 0; i < c.size(); ++i) out.val[i] = mine ? alg_.reduce(c[i]) : 0;
  if (kind() == EngineKind::Malicious) {
    out.mac.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      out.mac[i] = alg_.mul(store_.mac_key_share, alg_.reduce(c[i]));
  }
  return out;
}

ShareVec Engine::add(const ShareVec& a, const ShareVec& b) const {
  if (a.size() != b.size() || a.mac.size() != b.mac.size())
    throw MismatchError("share shape mismatch in add");
  ShareVec out;
  out.val.resize(a.size());
  out.mac.resize(a.mac.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.val[i] = alg_.add(a.val[i], b.val[i]);
  for (std::size_t i = 0; i < a.mac.size(); ++i) out.mac[i] = alg_.add(a.mac[i], b.mac[i]);
  return out;
}

ShareVec Engine::sub(const ShareVec& a, const ShareVec& b) const {
  if (a.size() != b.size() || a.mac.size() != b.mac.size())
    throw MismatchError("share shape mismatch in sub");
  ShareVec out;
  out.val.resize(a.size());
  out.mac.resize(a.mac.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.val[i] = alg_.sub(a.val[i], b.val[i]);
  for (std::size_t i = 0; i < a.mac.size(); ++i) out.mac[i] = alg_.sub(a.mac[i], b.mac[i]);
  return out;
}

ShareVec Engine::neg(const ShareVec& a) const {
  ShareVec out;
  out.val.resize(a.size());
  out.mac.resize(a.mac.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.val[i] = alg_.neg(a.val[i]);
  for (std::size_t i = 0; i < a.mac.size(); ++i) out.mac[i] = alg_.neg(a.mac[i]);
  return out;
}

ShareVec Engine::add_public(const ShareVec& a, std::span<const Elem> c) const {
  if (a.size() != c.size()) throw MismatchError("share/constant length mismatch");
  ShareVec out = a;
  if (party_index(role_) == absorber())
    for (std::size_t i = 0; i < c.size(); ++i) out.val[i] = alg_.add(out.val[i], alg_.reduce(c[i]));
  if (!out.mac.empty())
    for (std::size_t i = 0; i < c.size(); ++i)
      out.mac[i] = alg_.add(out.mac[i], alg_.mul(store_.mac_key_share, alg_.reduce(c[i])));
  return out;
}

ShareVec Engine::add_public(const ShareVec& a, Elem c) const {
  std::vector<Elem> cs(a.size(), c);
  return add_public(a, cs);
}

ShareVec Engine::scalar_mul(const ShareVec& a, Elem c) const {
  ShareVec out;
  out.val.resize(a.size());
  out.mac.resize(a.mac.size());
  Elem cr = alg_.reduce(c);
  for (std::size_t i = 0; i < a.size(); ++i) out.val[i] = alg_.mul(a.val[i], cr);
  for (std::size_t i = 0; i < a.mac.size(); ++i) out.mac[i] = alg_.mul(a.mac[i], cr);
  return out;
}

void Engine::record_open(OpenTag tag, std::size_t n) {
  if (!audit_.opens.empty() && audit_.opens.back().tag == tag)
    audit_.opens.back().count += n;
  else
    audit_.opens.push_back({tag, n});
}

Elem Engine::cheat_adjust(CheatPlan::Mode mode, Elem v) {
  if (cheat_.mode != mode) return v;
  if (cheat_seen_[static_cast<int>(mode)]++ == cheat_.target)
    return alg_.add(v, cheat_.delta);
  return v;
}

Engine::TripleSet Engine::take_triples(std::size_t n) {
  auto& s = store_;
  if (s.triple_cursor + n > s.triple_a.val.size())
    throw PreprocExhausted("multiplication triples exhausted");
  auto cut = [&](const SharePool& p) {
    ShareVec v;
    v.val.assign(p.val.begin() + s.triple_cursor, p.val.begin() + s.triple_cursor + n);
    if (!p.mac.empty())
      v.mac.assign(p.mac.begin() + s.triple_cursor, p.mac.begin() + s.triple_cursor + n);
    return v;
  };
  TripleSet t{cut(s.triple_a), cut(s.triple_b), cut(s.triple_c)};
  s.triple_cursor += n;
  return t;
}

ShareVec Engine::take_bit_pack() {
  auto& s = store_;
  std::size_t base = s.bit_cursor * kBitsPerPack;
  if (base + kBitsPerPack > s.bits.val.size())
    throw PreprocExhausted("shared random bits exhausted");
  ShareVec v;
  v.val.assign(s.bits.val.begin() + base, s.bits.val.begin() + base + kBitsPerPack);
  if (!s.bits.mac.empty())
    v.mac.assign(s.bits.mac.begin() + base, s.bits.mac.begin() + base + kBitsPerPack);
  ++s.bit_cursor;
  return v;
}

std::vector<Elem> Engine::open(const ShareVec& x, OpenTag tag) {
  auto mode = in_output_ ? CheatPlan::Mode::Output : CheatPlan::Mode::Open;
  std::vector<Elem> mine(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mine[i] = cheat_adjust(mode, x.val[i]);
  auto theirs = channel_->exchange_elems(MsgType::Open, mine);
  if (theirs.size() != x.size()) throw TransportError("open size mismatch");
  std::vector<Elem> values(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) values[i] = alg_.add(x.val[i], theirs[i]);
  on_opened(values, x);
  record_open(tag, x.size());
  ops_.opened += x.size();
  ++ops_.open_batches;
  return values;
}

ShareVec Engine::mul(const ShareVec& x, const ShareVec& y) {
  if (x.size() != y.size()) throw MismatchError("operand length mismatch in mul");
  std::size_t n = x.size();
  auto t = take_triples(n);
  ShareVec eps = sub(x, t.a);
  ShareVec rho = sub(y, t.b);
  auto opened = open(concat(eps, rho), OpenTag::BeaverOpen);
  // the eps/rho exchange is one logical round, not two open batches
  --ops_.open_batches;
  ops_.opened -= 2 * n;

  ShareVec z = t.c;
  bool absorb = party_index(role_) == absorber();
  bool mal = kind() == EngineKind::Malicious;
  for (std::size_t i = 0; i < n; ++i) {
    Elem e = opened[i], r = opened[n + i];
    Elem v = z.val[i];
    v = alg_.add(v, alg_.mul(r, t.a.val[i]));
    v = alg_.add(v, alg_.mul(e, t.b.val[i]));
    Elem er = alg_.mul(e, r);
    if (absorb) v = alg_.add(v, er);
    v = cheat_adjust(CheatPlan::Mode::Share, v);
    z.val[i] = v;
    if (mal) {
      Elem m = z.mac[i];
      m = alg_.add(m, alg_.mul(r, t.a.mac[i]));
      m = alg_.add(m, alg_.mul(e, t.b.mac[i]));
      m = alg_.add(m, alg_.mul(store_.mac_key_share, er));
      z.mac[i] = m;
    }
  }
  ops_.mults += n;
  ++ops_.mult_batches;
  return z;
}

// --- semi-honest (ring) engine ---

SemiHonestEngine::SemiHonestEngine(PartyRole role, FixedCodec codec, PreprocStore store,
                                   Channel* channel, std::uint64_t session_seed)
    : Engine(role, codec, std::move(store), channel, session_seed) {
  if (store_.engine != EngineKind::SemiHonest)
    throw MismatchError("preprocessing material is not semi-honest");
}

std::pair<ShareVec, ShareVec> SemiHonestEngine::input_exchange(std::span<const Elem> self_xs,
                                                               std::size_t peer_n) {
  // Owner picks r, keeps x - r and hands r to the peer.
  std::size_t n = self_xs.size();
  std::vector<Elem> rs(n);
  ShareVec mine;
  mine.val.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rs[i] = rng_.uniform(alg_);
    mine.val[i] = alg_.sub(alg_.reduce(self_xs[i]), rs[i]);
  }
  auto peer_rs = channel_->exchange_elems(MsgType::MaskDelta, rs);
  if (peer_rs.size() != peer_n) throw MismatchError("peer input count mismatch");
  ShareVec theirs;
  theirs.val = std::move(peer_rs);
  ops_.inputs += n + peer_n;
  ++ops_.input_batches;
  return {std::move(mine), std::move(theirs)};
}

ShareVec SemiHonestEngine::trunc(const ShareVec& z) {
  // Local probabilistic truncation: each party shifts its own share.
  ShareVec out;
  out.val.resize(z.size());
  int f = codec_.frac_bits;
  if (party_index(role_) == 0) {
    for (std::size_t i = 0; i < z.size(); ++i) out.val[i] = z.val[i] >> f;
  } else {
    for (std::size_t i = 0; i < z.size(); ++i) out.val[i] = ~((~z.val[i] + 1) >> f) + 1;
  }
  ops_.truncs += z.size();
  ++ops_.trunc_batches;
  return out;
}

std::optional<std::vector<Elem>> SemiHonestEngine::output_to(PartyRole who, const ShareVec& x) {
  ops_.outputs += x.size();
  ++ops_.output_batches;
  audit_.outputs.push_back({who, x.size(), false});
  if (who == role_) {
    auto theirs = channel_->recv_elems(MsgType::Output);
    if (theirs.size() != x.size()) throw TransportError("output size mismatch");
    std::vector<Elem> values(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) values[i] = alg_.add(x.val[i], theirs[i]);
    return values;
  }
  std::vector<Elem> mine(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    mine[i] = cheat_adjust(CheatPlan::Mode::Output, x.val[i]);
  channel_->send_elems(MsgType::Output, mine);
  return std::nullopt;
}

// --- malicious (field, MAC-authenticated) engine ---

MaliciousEngine::MaliciousEngine(PartyRole role, FixedCodec codec, PreprocStore store,
                                 Channel* channel, std::uint64_t session_seed)
    : Engine(role, codec, std::move(store), channel, session_seed),
      alpha_(store_.mac_key_share) {
  if (store_.engine != EngineKind::Malicious)
    throw MismatchError("preprocessing material is not malicious");
}

ShareVec MaliciousEngine::take_masks(int owner, std::size_t n, std::vector<Elem>* clear) {
  auto& s = store_;
  auto& cur = s.mask_cursor[owner];
  if (cur + n > s.mask_share[owner].val.size())
    throw PreprocExhausted("input masks exhausted");
  ShareVec v;
  v.val.assign(s.mask_share[owner].val.begin() + cur, s.mask_share[owner].val.begin() + cur + n);
  v.mac.assign(s.mask_share[owner].mac.begin() + cur, s.mask_share[owner].mac.begin() + cur + n);
  if (clear) {
    if (s.mask_clear[owner].size() < cur + n)
      throw PreprocExhausted("mask owner copies missing");
    clear->assign(s.mask_clear[owner].begin() + cur, s.mask_clear[owner].begin() + cur + n);
  }
  cur += n;
  return v;
}

std::pair<ShareVec, ShareVec> MaliciousEngine::input_exchange(std::span<const Elem> self_xs,
                                                              std::size_t peer_n) {
  std::size_t n = self_xs.size();
  int me = party_index(role_);
  std::vector<Elem> r_clear;
  ShareVec my_masks = take_masks(me, n, &r_clear);
  std::vector<Elem> deltas(n);
  for (std::size_t i = 0; i < n; ++i)
    deltas[i] = alg_.sub(alg_.reduce(self_xs[i]), r_clear[i]);

  auto peer_deltas = channel_->exchange_elems(MsgType::MaskDelta, deltas);
  if (peer_deltas.size() != peer_n) throw MismatchError("peer input count mismatch");
  ShareVec peer_masks = take_masks(1 - me, peer_n, nullptr);

  ShareVec mine = add_public(my_masks, deltas);
  ShareVec theirs = add_public(peer_masks, peer_deltas);
  ops_.inputs += n + peer_n;
  ++ops_.input_batches;
  return {std::move(mine), std::move(theirs)};
}

void MaliciousEngine::on_opened(std::span<const Elem> values, const ShareVec& x) {
  if (!x.authenticated()) throw MismatchError("opening an unauthenticated share");
  log_value_.insert(log_value_.end(), values.begin(), values.end());
  log_mac_.insert(log_mac_.end(), x.mac.begin(), x.mac.end());
}

ShareVec MaliciousEngine::trunc(const ShareVec& z) {
  // Dealer pair (r, r >> f): open z + offset + r (wrap-free below 2^63),
  // divide the public value, subtract the pair's shifted share.
  std::size_t n = z.size();
  auto& s = store_;
  if (s.trunc_cursor + n > s.trunc_r.val.size())
    throw PreprocExhausted("truncation pairs exhausted");
  auto cut = [&](const SharePool& p) {
    ShareVec v;
    v.val.assign(p.val.begin() + s.trunc_cursor, p.val.begin() + s.trunc_cursor + n);
    v.mac.assign(p.mac.begin() + s.trunc_cursor, p.mac.begin() + s.trunc_cursor + n);
    return v;
  };
  ShareVec r = cut(s.trunc_r);
  ShareVec rdiv = cut(s.trunc_rdiv);
  s.trunc_cursor += n;

  int f = codec_.frac_bits;
  Elem offset = Elem(1) << (codec_.int_bits + 2 * f);
  ShareVec masked = add_public(add(z, r), offset);
  auto c = open(masked, OpenTag::TruncMasked);
  --ops_.open_batches;
  ops_.opened -= n;

  ShareVec out = neg(rdiv);
  std::vector<Elem> pub(n);
  for (std::size_t i = 0; i < n; ++i)
    pub[i] = alg_.sub(c[i] >> f, offset >> f);
  out = add_public(out, pub);
  ops_.truncs += n;
  ++ops_.trunc_batches;
  return out;
}

std::optional<std::vector<Elem>> MaliciousEngine::output_to(PartyRole who, const ShareVec& x) {
  // Private output: add a recipient-owned mask, open the sum (logged and
  // MAC-checked like any opening), recipient strips the mask locally.
  if (!log_value_.empty()) check();  // settle prior openings first
  std::size_t n = x.size();
  std::vector<Elem> r_clear;
  ShareVec mask = who == role_ ? take_masks(party_index(who), n, &r_clear)
                               : take_masks(party_index(who), n, nullptr);
  ShareVec y = add(x, mask);
  in_output_ = true;
  auto opened = open(y, OpenTag::OutputMasked);
  in_output_ = false;
  check();  // verify the masked opening itself before anyone acts on it
  ops_.outputs += n;
  ++ops_.output_batches;
  audit_.outputs.push_back({who, n, true});
  if (who != role_) return std::nullopt;
  std::vector<Elem> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = alg_.sub(opened[i], r_clear[i]);
  return values;
}

void MaliciousEngine::abort_session(const std::string& why) {
  scrub();
  log_value_.clear();
  log_mac_.clear();
  try {
    const char msg[] = "ABRT";
    channel_->send_to(MsgType::Control,
                      std::span(reinterpret_cast<const std::uint8_t*>(msg), 4));
  } catch (const TransportError&) {
    // peer already gone; nothing to signal
  }
  throw AbortError(why);
}

void MaliciousEngine::check() {
  if (log_value_.empty()) return;
  ++ops_.mac_checks;

  // Coin flip for the random combination vector: commit-then-reveal.
  std::array<std::uint8_t, 32> coin{};
  for (int i = 0; i < 4; ++i) {
    std::uint64_t w = rng_.raw();
    std::memcpy(coin.data() + 8 * i, &w, 8);
  }
  auto my_commit = commit_hash(kDomainCoin, coin);
  auto peer_commit = channel_->exchange(MsgType::Commit, my_commit);
  auto peer_coin = channel_->exchange(MsgType::Reveal, coin);
  if (peer_commit.size() != 32 || peer_coin.size() != 32)
    abort_session("malformed MAC-check message");
  auto expect = commit_hash(kDomainCoin, peer_coin);
  if (std::memcmp(expect.data(), peer_commit.data(), 32) != 0)
    abort_session("coin-flip commitment mismatch");

  std::array<std::uint8_t, 32> joint;
  for (int i = 0; i < 32; ++i) joint[i] = coin[i] ^ peer_coin[i];
  HashPrg prg(std::span<const std::uint8_t>(joint.data(), 16));  // first half seeds r

  // c = sum r_j x_j over the log; gamma(c)_i likewise over local MAC shares.
  Elem c = 0, gamma = 0;
  for (std::size_t j = 0; j < log_value_.size(); ++j) {
    Elem rj = prg.next_field();
    c = alg_.add(c, alg_.mul(rj, log_value_[j]));
    gamma = alg_.add(gamma, alg_.mul(rj, log_mac_[j]));
  }
  Elem sigma = alg_.sub(gamma, alg_.mul(alpha_, c));

  std::vector<std::uint8_t> blob(24);
  std::memcpy(blob.data(), &sigma, 8);
  for (int i = 0; i < 2; ++i) {
    std::uint64_t w = rng_.raw();
    std::memcpy(blob.data() + 8 + 8 * i, &w, 8);
  }
  auto sig_commit = commit_hash(kDomainSigma, blob);
  auto peer_sig_commit = channel_->exchange(MsgType::Commit, sig_commit);
  auto peer_blob = channel_->exchange(MsgType::Reveal, blob);
  if (peer_sig_commit.size() != 32 || peer_blob.size() != 24)
    abort_session("malformed MAC-check message");
  auto sig_expect = commit_hash(kDomainSigma, peer_blob);
  if (std::memcmp(sig_expect.data(), peer_sig_commit.data(), 32) != 0)
    abort_session("sigma commitment mismatch");
  Elem peer_sigma = 0;
  std::memcpy(&peer_sigma, peer_blob.data(), 8);
  if (alg_.add(sigma, alg_.reduce(peer_sigma)) != 0)
    abort_session("batched MAC check failed");

  log_value_.clear();
  log_mac_.clear();
}

// --- counting engine ---

CountingEngine::CountingEngine(PartyRole role, FixedCodec codec, EngineKind counted_kind)
    : Engine(role, codec,
             [&] {
               PreprocStore s;
               s.engine = counted_kind;
               s.party = role;
               return s;
             }(),
             nullptr, 0),
      counted_(counted_kind) {}

ShareVec CountingEngine::zeros(std::size_t n) const {
  ShareVec v;
  v.val.assign(n, 0);
  if (counted_ == EngineKind::Malicious) v.mac.assign(n, 0);
  return v;
}

std::pair<ShareVec, ShareVec> CountingEngine::input_exchange(std::span<const Elem> self_xs,
                                                             std::size_t peer_n) {
  if (counted_ == EngineKind::Malicious) {
    demand_.masks[party_index(role_)] += self_xs.size();
    demand_.masks[1 - party_index(role_)] += peer_n;
  }
  ops_.inputs += self_xs.size() + peer_n;
  ++ops_.input_batches;
  return {zeros(self_xs.size()), zeros(peer_n)};
}

ShareVec CountingEngine::mul(const ShareVec& x, const ShareVec& y) {
  if (x.size() != y.size()) throw MismatchError("operand length mismatch in mul");
  demand_.triples += x.size();
  ops_.mults += x.size();
  ++ops_.mult_batches;
  ops_.opened += 0;
  return zeros(x.size());
}

ShareVec CountingEngine::trunc(const ShareVec& z) {
  if (counted_ == EngineKind::Malicious) demand_.trunc_pairs += z.size();
  ops_.truncs += z.size();
  ++ops_.trunc_batches;
  return zeros(z.size());
}

std::vector<Elem> CountingEngine::open(const ShareVec& x, OpenTag tag) {
  record_open(tag, x.size());
  ops_.opened += x.size();
  ++ops_.open_batches;
  return std::vector<Elem>(x.size(), 0);
}

std::optional<std::vector<Elem>> CountingEngine::output_to(PartyRole who, const ShareVec& x) {
  if (counted_ == EngineKind::Malicious) {
    demand_.masks[party_index(who)] += x.size();
    ++ops_.mac_checks;
  }
  ops_.outputs += x.size();
  ++ops_.output_batches;
  audit_.outputs.push_back({who, x.size(), counted_ == EngineKind::Malicious});
  if (who == role_) return std::vector<Elem>(x.size(), 0);
  return std::nullopt;
}

ShareVec CountingEngine::take_bit_pack() {
  ++demand_.bit_packs;
  return zeros(kBitsPerPack);
}

// --- shape helpers ---

ShareVec slice(const ShareVec& v, std::size_t offset, std::size_t n) {
  ShareVec out;
  out.val.assign(v.val.begin() + offset, v.val.begin() + offset + n);
  if (!v.mac.empty()) out.mac.assign(v.mac.begin() + offset, v.mac.begin() + offset + n);
  return out;
}

ShareVec concat(const ShareVec& a, const ShareVec& b) {
  ShareVec out = a;
  out.val.insert(out.val.end(), b.val.begin(), b.val.end());
  out.mac.insert(out.mac.end(), b.mac.begin(), b.mac.end());
  return out;
}

ShareVec repeat(const ShareVec& v, std::size_t times) {
  ShareVec out;
  out.val.reserve(v.val.size() * times);
  out.mac.reserve(v.mac.size() * times);
  for (std::size_t t = 0; t < times; ++t) {
    out.val.insert(out.val.end(), v.val.begin(), v.val.end());
    out.mac.insert(out.mac.end(), v.mac.begin(), v.mac.end());
  }
  return out;
}

ShareVec repeat_each(const ShareVec& v, std::size_t times) {
  ShareVec out;
  out.val.reserve(v.val.size() * times);
  out.mac.reserve(v.mac.size() * times);
  for (std::size_t i = 0; i < v.val.size(); ++i)
    out.val.insert(out.val.end(), times, v.val[i]);
  for (std::size_t i = 0; i < v.mac.size(); ++i)
    out.mac.insert(out.mac.end(), times, v.mac[i]);
  return out;
}

ShareVec group_sums(const Engine& e, const ShareVec& v, std::size_t group) {
  if (group == 0 || v.size() % group != 0) throw MismatchError("bad group size");
  std::size_t n = v.size() / group;
  const Algebra& alg = e.alg();
  ShareVec out;
  out.val.assign(n, 0);
  if (!v.mac.empty()) out.mac.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < group; ++j) {
      out.val[i] = alg.add(out.val[i], v.val[i * group + j]);
      if (!v.mac.empty()) out.mac[i] = alg.add(out.mac[i], v.mac[i * group + j]);
    }
  }
  return out;
}

ShareVec outer_sums(const Engine& e, const ShareVec& v, std::size_t outer, std::size_t inner) {
  if (v.size() != outer * inner) throw MismatchError("bad outer_sums shape");
  const Algebra& alg = e.alg();
  ShareVec out;
  out.val.assign(inner, 0);
  if (!v.mac.empty()) out.mac.assign(inner, 0);
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t t = 0; t < inner; ++t) {
      out.val[t] = alg.add(out.val[t], v.val[i * inner + t]);
      if (!v.mac.empty()) out.mac[t] = alg.add(out.mac[t], v.mac[i * inner + t]);
    }
  }
  return out;
}

}  // namespace sftl
