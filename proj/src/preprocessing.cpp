#include "preprocessing.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "sha256.hpp"

namespace sftl {

ElemRng::ElemRng(const std::array<std::uint8_t, 32>& seed) {
  std::seed_seq seq(seed.begin(), seed.end());
  eng_.seed(seq);
}

MaterialCounts PreprocStore::provisioned() const {
  MaterialCounts c;
  c.triples = triple_a.val.size();
  c.masks[0] = mask_share[0].val.size();
  c.masks[1] = mask_share[1].val.size();
  c.bit_packs = bits.val.size() / kBitsPerPack;
  c.trunc_pairs = trunc_r.val.size();
  return c;
}

MaterialCounts PreprocStore::consumed() const {
  MaterialCounts c;
  c.triples = triple_cursor;
  c.masks[0] = mask_cursor[0];
  c.masks[1] = mask_cursor[1];
  c.bit_packs = bit_cursor;
  c.trunc_pairs = trunc_cursor;
  return c;
}

void PreprocStore::zeroize() {
  auto wipe = [](SharePool& p) {
    std::fill(p.val.begin(), p.val.end(), 0);
    std::fill(p.mac.begin(), p.mac.end(), 0);
  };
  wipe(triple_a); wipe(triple_b); wipe(triple_c);
  wipe(mask_share[0]); wipe(mask_share[1]);
  wipe(bits); wipe(trunc_r); wipe(trunc_rdiv);
  std::fill(mask_clear[0].begin(), mask_clear[0].end(), 0);
  std::fill(mask_clear[1].begin(), mask_clear[1].end(), 0);
  mac_key_share = 0;
}

namespace {

struct Dealer {
  Algebra alg;
  bool mal;
  Elem alpha = 0;  // full MAC key; exists only inside the dealer
  ElemRng rng;
  PreprocStore* out[2];

  Dealer(const DealerConfig& cfg, PreprocStore* s0, PreprocStore* s1)
      : alg(Algebra::for_engine(cfg.engine)),
        mal(cfg.engine == EngineKind::Malicious),
        rng(cfg.seed) {
    out[0] = s0;
    out[1] = s1;
  }

  void share_into(Elem secret, SharePool& p0, SharePool& p1) {
    Elem s0 = rng.uniform(alg);
    p0.val.push_back(s0);
    p1.val.push_back(alg.sub(secret, s0));
    if (mal) {
      Elem gamma = alg.mul(alpha, secret);
      Elem g0 = rng.uniform(alg);
      p0.mac.push_back(g0);
      p1.mac.push_back(alg.sub(gamma, g0));
    }
  }
};

constexpr char kMagic[12] = {'S', 'F', 'T', 'L', 'P', 'R', 'E', 'P', 'R', 'O', 'C', '\0'};
constexpr std::uint32_t kVersion = 1;

// Section ids for the per-kind element arrays.
enum SectionId : std::uint8_t {
  kSecSession = 0,
  kSecTripleAVal, kSecTripleAMac,
  kSecTripleBVal, kSecTripleBMac,
  kSecTripleCVal, kSecTripleCMac,
  kSecMaskClearS, kSecMaskSValShare, kSecMaskSMac,
  kSecMaskClearT, kSecMaskTValShare, kSecMaskTMac,
  kSecBitsVal, kSecBitsMac,
  kSecTruncRVal, kSecTruncRMac,
  kSecTruncDivVal, kSecTruncDivMac,
};

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(char(v));
  b.push_back(char(v >> 8));
}
void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char(v >> (8 * i)));
}
void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(char(v >> (8 * i)));
}
void put_section(std::string& b, std::uint8_t id, const std::vector<Elem>& elems) {
  if (elems.empty()) return;
  b.push_back(char(id));
  put_u64(b, elems.size());
  for (Elem e : elems) put_u64(b, e);
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  void need(std::size_t n) const {
    if (std::size_t(end - p) < n) throw std::runtime_error("preprocessing file truncated");
  }
  std::uint8_t u8() { need(1); return *p++; }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
    p += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    p += 8;
    return v;
  }
};

}  // namespace

std::pair<PreprocStore, PreprocStore> deal(const DealerConfig& config) {
  PreprocStore s0, s1;
  s0.engine = s1.engine = config.engine;
  s0.party = PartyRole::Source;
  s1.party = PartyRole::Target;
  s0.frac_bits = s1.frac_bits = config.frac_bits;

  auto sid = Sha256::digest(config.seed.data(), config.seed.size());
  std::memcpy(s0.session_id.data(), sid.data(), 16);
  s0.session_id[15] = 0;  // last byte carries frac_bits in the file form
  s1.session_id = s0.session_id;

  Dealer d(config, &s0, &s1);
  if (d.mal) {
    s0.mac_key_share = d.rng.uniform(d.alg);
    s1.mac_key_share = d.rng.uniform(d.alg);
    d.alpha = d.alg.add(s0.mac_key_share, s1.mac_key_share);
  }

  const auto& c = config.counts;
  for (std::uint64_t i = 0; i < c.triples; ++i) {
    Elem a = d.rng.uniform(d.alg);
    Elem b = d.rng.uniform(d.alg);
    Elem cc = d.alg.mul(a, b);
    d.share_into(a, s0.triple_a, s1.triple_a);
    d.share_into(b, s0.triple_b, s1.triple_b);
    d.share_into(cc, s0.triple_c, s1.triple_c);
  }
  for (int owner = 0; owner < 2; ++owner) {
    for (std::uint64_t i = 0; i < c.masks[owner]; ++i) {
      Elem r = d.rng.uniform(d.alg);
      (owner == 0 ? s0 : s1).mask_clear[owner].push_back(r);
      d.share_into(r, s0.mask_share[owner], s1.mask_share[owner]);
    }
  }
  for (std::uint64_t i = 0; i < c.bit_packs; ++i) {
    // Random value below the modulus, decomposed into 64 shared bits.
    Elem r = d.rng.uniform(d.alg);
    for (int j = 0; j < kBitsPerPack; ++j)
      d.share_into((r >> j) & 1, s0.bits, s1.bits);
  }
  for (std::uint64_t i = 0; i < c.trunc_pairs; ++i) {
    // r below 2^63 keeps the masked opening wrap-free in either domain.
    Elem r = d.rng.raw() >> 1;
    d.share_into(r, s0.trunc_r, s1.trunc_r);
    d.share_into(r >> config.frac_bits, s0.trunc_rdiv, s1.trunc_rdiv);
  }
  return {std::move(s0), std::move(s1)};
}

void write_preproc_file(const std::string& path, const PreprocStore& store) {
  std::string b;
  b.append(kMagic, sizeof(kMagic));
  put_u32(b, kVersion);
  b.push_back(char(store.engine));
  put_u64(b, Algebra::for_engine(store.engine).modulus_wire());
  put_u16(b, std::uint16_t(party_index(store.party)));
  if (store.engine == EngineKind::Malicious) put_u64(b, store.mac_key_share);

  std::vector<Elem> session(2);
  std::memcpy(session.data(), store.session_id.data(), 16);
  // frac_bits rides in the high byte of the second session word.
  session[1] = (session[1] & ~(Elem(0xff) << 56)) | (Elem(store.frac_bits) << 56);
  put_section(b, kSecSession, session);
  put_section(b, kSecTripleAVal, store.triple_a.val);
  put_section(b, kSecTripleAMac, store.triple_a.mac);
  put_section(b, kSecTripleBVal, store.triple_b.val);
  put_section(b, kSecTripleBMac, store.triple_b.mac);
  put_section(b, kSecTripleCVal, store.triple_c.val);
  put_section(b, kSecTripleCMac, store.triple_c.mac);
  put_section(b, kSecMaskClearS, store.mask_clear[0]);
  put_section(b, kSecMaskSValShare, store.mask_share[0].val);
  put_section(b, kSecMaskSMac, store.mask_share[0].mac);
  put_section(b, kSecMaskClearT, store.mask_clear[1]);
  put_section(b, kSecMaskTValShare, store.mask_share[1].val);
  put_section(b, kSecMaskTMac, store.mask_share[1].mac);
  put_section(b, kSecBitsVal, store.bits.val);
  put_section(b, kSecBitsMac, store.bits.mac);
  put_section(b, kSecTruncRVal, store.trunc_r.val);
  put_section(b, kSecTruncRMac, store.trunc_r.mac);
  put_section(b, kSecTruncDivVal, store.trunc_rdiv.val);
  put_section(b, kSecTruncDivMac, store.trunc_rdiv.mac);

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write(b.data(), std::streamsize(b.size()));
    if (!f) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed for " + path);
}

PreprocStore load_preproc_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const std::uint8_t*>(bytes.data()),
           reinterpret_cast<const std::uint8_t*>(bytes.data()) + bytes.size()};

  r.need(sizeof(kMagic));
  if (std::memcmp(r.p, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a preprocessing file: " + path);
  r.p += sizeof(kMagic);
  if (r.u32() != kVersion) throw std::runtime_error("unsupported preprocessing version");

  PreprocStore s;
  s.engine = static_cast<EngineKind>(r.u8());
  Elem modulus = r.u64();
  if (modulus != Algebra::for_engine(s.engine).modulus_wire())
    throw std::runtime_error("modulus mismatch in " + path);
  s.party = r.u16() == 0 ? PartyRole::Source : PartyRole::Target;
  if (s.engine == EngineKind::Malicious) s.mac_key_share = r.u64();

  while (r.p < r.end) {
    std::uint8_t id = r.u8();
    std::uint64_t n = r.u64();
    std::vector<Elem> elems(n);
    for (auto& e : elems) e = r.u64();
    switch (id) {
      case kSecSession:
        if (n != 2) throw std::runtime_error("bad session section");
        s.frac_bits = int(elems[1] >> 56);
        elems[1] &= ~(Elem(0xff) << 56);
        std::memcpy(s.session_id.data(), elems.data(), 16);
        break;
      case kSecTripleAVal: s.triple_a.val = std::move(elems); break;
      case kSecTripleAMac: s.triple_a.mac = std::move(elems); break;
      case kSecTripleBVal: s.triple_b.val = std::move(elems); break;
      case kSecTripleBMac: s.triple_b.mac = std::move(elems); break;
      case kSecTripleCVal: s.triple_c.val = std::move(elems); break;
      case kSecTripleCMac: s.triple_c.mac = std::move(elems); break;
      case kSecMaskClearS: s.mask_clear[0] = std::move(elems); break;
      case kSecMaskSValShare: s.mask_share[0].val = std::move(elems); break;
      case kSecMaskSMac: s.mask_share[0].mac = std::move(elems); break;
      case kSecMaskClearT: s.mask_clear[1] = std::move(elems); break;
      case kSecMaskTValShare: s.mask_share[1].val = std::move(elems); break;
      case kSecMaskTMac: s.mask_share[1].mac = std::move(elems); break;
      case kSecBitsVal: s.bits.val = std::move(elems); break;
      case kSecBitsMac: s.bits.mac = std::move(elems); break;
      case kSecTruncRVal: s.trunc_r.val = std::move(elems); break;
      case kSecTruncRMac: s.trunc_r.mac = std::move(elems); break;
      case kSecTruncDivVal: s.trunc_rdiv.val = std::move(elems); break;
      case kSecTruncDivMac: s.trunc_rdiv.mac = std::move(elems); break;
      default: throw std::runtime_error("unknown section in " + path);
    }
  }
  return s;
}

void deal_to_files(const DealerConfig& config, const std::string& prefix) {
  auto [s0, s1] = deal(config);
  write_preproc_file(prefix + ".s", s0);
  write_preproc_file(prefix + ".t", s1);
}

std::optional<std::string> audit_material(const PreprocStore& s0, const PreprocStore& s1) {
  if (s0.engine != s1.engine) return "engine kind mismatch";
  if (s0.session_id != s1.session_id) return "session id mismatch";
  Algebra alg = Algebra::for_engine(s0.engine);
  bool mal = s0.engine == EngineKind::Malicious;
  Elem alpha = mal ? alg.add(s0.mac_key_share, s1.mac_key_share) : 0;

  auto recon = [&](const SharePool& a, const SharePool& b, std::size_t i) {
    return alg.add(a.val[i], b.val[i]);
  };
  auto mac_ok = [&](const SharePool& a, const SharePool& b, std::size_t i, Elem secret) {
    if (!mal) return true;
    if (a.mac.size() != a.val.size() || b.mac.size() != b.val.size()) return false;
    return alg.add(a.mac[i], b.mac[i]) == alg.mul(alpha, secret);
  };

  std::size_t n = s0.triple_a.val.size();
  if (s1.triple_a.val.size() != n) return "triple count mismatch";
  for (std::size_t i = 0; i < n; ++i) {
    Elem a = recon(s0.triple_a, s1.triple_a, i);
    Elem b = recon(s0.triple_b, s1.triple_b, i);
    Elem c = recon(s0.triple_c, s1.triple_c, i);
    if (c != alg.mul(a, b)) return "triple " + std::to_string(i) + " violates c = ab";
    if (!mac_ok(s0.triple_a, s1.triple_a, i, a) || !mac_ok(s0.triple_b, s1.triple_b, i, b) ||
        !mac_ok(s0.triple_c, s1.triple_c, i, c))
      return "triple " + std::to_string(i) + " MAC invalid";
  }
  for (int owner = 0; owner < 2; ++owner) {
    const auto& own = owner == 0 ? s0 : s1;
    std::size_t m = s0.mask_share[owner].val.size();
    if (own.mask_clear[owner].size() != m) return "mask clear-copy missing";
    for (std::size_t i = 0; i < m; ++i) {
      Elem r = recon(s0.mask_share[owner], s1.mask_share[owner], i);
      if (r != own.mask_clear[owner][i]) return "mask does not match owner copy";
      if (!mac_ok(s0.mask_share[owner], s1.mask_share[owner], i, r)) return "mask MAC invalid";
    }
  }
  for (std::size_t i = 0; i < s0.bits.val.size(); ++i) {
    Elem b = recon(s0.bits, s1.bits, i);
    if (b != 0 && b != 1) return "shared bit not in {0,1}";
    if (!mac_ok(s0.bits, s1.bits, i, b)) return "bit MAC invalid";
  }
  for (std::size_t i = 0; i < s0.trunc_r.val.size(); ++i) {
    Elem rv = recon(s0.trunc_r, s1.trunc_r, i);
    Elem rd = recon(s0.trunc_rdiv, s1.trunc_rdiv, i);
    if (rv >> 63) return "trunc mask exceeds 2^63";
    if (rd != rv >> s0.frac_bits) return "trunc pair inconsistent";
    if (!mac_ok(s0.trunc_r, s1.trunc_r, i, rv) || !mac_ok(s0.trunc_rdiv, s1.trunc_rdiv, i, rd))
      return "trunc MAC invalid";
  }
  return std::nullopt;
}

OfflineCost estimate_offline_cost(std::uint64_t triples, EngineKind engine,
                                  const OfflineCostModel& model) {
  OfflineCost cost;
  if (engine == EngineKind::Malicious) {
    cost.bits = double(triples) * model.malicious_bits_per_triple;
    cost.seconds = double(triples) / model.malicious_triples_per_sec;
  } else {
    cost.bits = double(triples) * model.semi_honest_bits_per_triple();
  }
  return cost;
}

}  // namespace sftl
