#include "protocol.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sha256.hpp"

namespace sftl {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// XOR of shared bit u with public bit c: c ? 1-u : u.
ShareVec xor_public(Engine& eng, const ShareVec& u, const std::vector<bool>& c) {
  ShareVec one = eng.share_of_public(std::vector<Elem>(u.size(), 1));
  ShareVec flipped = eng.sub(one, u);
  ShareVec out = u;
  for (std::size_t l = 0; l < u.size(); ++l) {
    if (!c[l]) continue;
    out.val[l] = flipped.val[l];
    if (!out.mac.empty()) out.mac[l] = flipped.mac[l];
  }
  return out;
}

}  // namespace

ShareVec secure_ltz(Engine& eng, const ShareVec& z) {
  const Algebra& alg = eng.alg();
  bool field = alg.is_field();
  std::size_t n = z.size();
  if (n == 0) return {};

  // One pack of 64 shared mask bits per lane; regroup per bit position.
  std::vector<ShareVec> packs(n);
  for (std::size_t l = 0; l < n; ++l) packs[l] = eng.take_bit_pack();
  bool mal = !packs.empty() && !packs[0].mac.empty();
  std::vector<ShareVec> bit(kBitsPerPack);
  for (int i = 0; i < kBitsPerPack; ++i) {
    bit[i].val.resize(n);
    if (mal) bit[i].mac.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      bit[i].val[l] = packs[l].val[i];
      if (mal) bit[i].mac[l] = packs[l].mac[i];
    }
  }

  // r = sum 2^i b_i; below the modulus by construction.
  ShareVec r;
  r.val.assign(n, 0);
  if (mal) r.mac.assign(n, 0);
  for (int i = 0; i < kBitsPerPack; ++i)
    r = eng.add(r, eng.scalar_mul(bit[i], Elem(1) << i));

  // Open the fully masked value. Field lanes carry 2z so the sign shows in
  // the low bit after unmasking; ring lanes carry z and use the top bit.
  ShareVec y = field ? eng.scalar_mul(z, 2) : z;
  auto c = eng.open(eng.add(y, r), OpenTag::CompareMasked);

  // Ripple borrow of (c - r): position i sees beta_{i+1} = r_i AND beta_i
  // when c_i = 1, else r_i OR beta_i.
  int levels = field ? kBitsPerPack : kBitsPerPack - 1;
  ShareVec beta = eng.share_of_public(std::vector<Elem>(n, 0));
  std::vector<bool> cb(n);
  for (int i = 0; i < levels; ++i) {
    ShareVec m = eng.mul(bit[i], beta);
    ShareVec or_val = eng.sub(eng.add(bit[i], beta), m);
    for (std::size_t l = 0; l < n; ++l) {
      bool ci = (c[l] >> i) & 1;
      if (ci) {
        beta.val[l] = m.val[l];
        if (mal) beta.mac[l] = m.mac[l];
      } else {
        beta.val[l] = or_val.val[l];
        if (mal) beta.mac[l] = or_val.mac[l];
      }
    }
  }

  if (field) {
    // wrap bit w = [c < r]; sign = c_0 xor r_0 xor w
    ShareVec t = eng.mul(bit[0], beta);
    ShareVec u = eng.sub(eng.add(bit[0], beta), eng.scalar_mul(t, 2));
    for (std::size_t l = 0; l < n; ++l) cb[l] = c[l] & 1;
    return xor_public(eng, u, cb);
  }
  // ring: sign bit of z = c_63 xor r_63 xor borrow-into-63
  ShareVec t = eng.mul(bit[63], beta);
  ShareVec u = eng.sub(eng.add(bit[63], beta), eng.scalar_mul(t, 2));
  for (std::size_t l = 0; l < n; ++l) cb[l] = (c[l] >> 63) & 1;
  return xor_public(eng, u, cb);
}

bool convergence_check(Engine& eng, const ShareVec& loss, const ShareVec& loss_prev, double eps) {
  ShareVec z = eng.sub(loss_prev, loss);
  Elem eps_enc = eng.codec().encode(eps, eng.alg(), 2);
  z = eng.add_public(z, eng.alg().neg(eps_enc));
  ShareVec bit = secure_ltz(eng, z);
  auto v = eng.open(bit, OpenTag::ConvergenceBit);
  eng.check();
  return v.at(0) == 1;
}

namespace {

struct HelloWire {
  std::vector<std::uint8_t> bytes;
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, 8);
    u64(b);
  }
  void raw(const std::uint8_t* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
};

}  // namespace

PeerDims handshake(Channel& ch, PartyRole role, const SessionParams& p, const JointDims& common,
                   std::uint32_t own_rows, std::uint32_t own_in,
                   const std::array<std::uint8_t, 32>& digest,
                   const std::array<std::uint8_t, 16>& dealer_session) {
  HelloWire w;
  w.u32(0x4c544653);  // "SFTL"
  w.u8(1);            // protocol version
  w.u8(std::uint8_t(role));
  w.u8(std::uint8_t(p.engine));
  w.u64(Algebra::for_engine(p.engine).modulus_wire());
  w.u8(std::uint8_t(p.codec.frac_bits));
  w.u8(std::uint8_t(p.codec.int_bits));
  w.u8(std::uint8_t(p.codec.sigma));
  w.f64(p.hp.eta);
  w.f64(p.hp.gamma);
  w.f64(p.hp.lambda);
  w.f64(p.hp.kappa_align);
  w.f64(p.hp.eps);
  w.u32(p.hp.max_iter);
  w.u32(common.d);
  w.u32(common.n_overlap);
  w.u32(common.n_labeled);
  w.u32(own_rows);
  w.u32(own_in);
  w.raw(digest.data(), digest.size());
  w.raw(dealer_session.data(), dealer_session.size());

  auto peer = ch.exchange(MsgType::Handshake, w.bytes);
  if (peer.size() != w.bytes.size()) throw MismatchError("handshake: malformed hello");

  // Byte-compare everything except the role and the private dimensions.
  auto differs = [&](std::size_t off, std::size_t len) {
    return std::memcmp(peer.data() + off, w.bytes.data() + off, len) != 0;
  };
  if (differs(0, 5)) throw MismatchError("handshake: protocol version mismatch");
  if (peer[5] == std::uint8_t(role)) throw MismatchError("handshake: both parties claim one role");
  if (differs(6, 1 + 8)) throw MismatchError("handshake: engine or modulus mismatch");
  if (differs(15, 3)) throw MismatchError("handshake: fixed-point codec mismatch");
  if (differs(18, 5 * 8 + 4)) throw MismatchError("handshake: hyperparameter mismatch");
  if (differs(62, 12)) throw MismatchError("handshake: dimension mismatch");
  std::size_t dyn = 62 + 12 + 8;  // start of digest, after own_rows/own_in
  if (differs(dyn, 32)) throw MismatchError("handshake: dataset digest mismatch");
  if (differs(dyn + 32, 16)) throw MismatchError("handshake: preprocessing session mismatch");

  PeerDims pd;
  std::memcpy(&pd.rows, peer.data() + 74, 4);
  std::memcpy(&pd.in_features, peer.data() + 78, 4);
  return pd;
}

TrainResult run_training(Engine& eng, const SessionParams& p, const JointDims& dims,
                         const SourceData* src, const TargetData* tgt, DebugHooks* dbg) {
  if ((src == nullptr) == (tgt == nullptr))
    throw std::invalid_argument("exactly one party view required");
  const bool is_source = src != nullptr;
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  const Hyperparams& hp = p.hp;

  TrainResult result;
  std::uint32_t own_in = is_source ? dims.in_s : dims.in_t;
  result.net = LocalNet::make(own_in, dims.d, p.seed * 2 + party_index(eng.role()));

  ShareVec loss_prev;
  bool have_prev = false;

  for (std::uint32_t iter = 0; iter <= hp.max_iter; ++iter) {
    auto t0 = Clock::now();
    auto stats0 = eng.channel() ? eng.channel()->stats() : ChannelStats{};
    auto mat0 = eng.store().consumed();

    SourceIterBundle sb;
    TargetIterBundle tb;
    double own_l1 = 0;
    if (is_source) {
      sb = compute_source_iter(result.net, *src, hp);
      own_l1 = sb.l1s;
    } else {
      tb = compute_target_iter(result.net, *tgt, hp);
      own_l1 = tb.l1t;
    }
    JointShares js = share_iteration_inputs(eng, dims, is_source ? &sb : nullptr,
                                            is_source ? nullptr : &tb);

    // Local loss pieces enter the shared total: authenticated inputs under
    // the malicious engine, a local share adjustment under plain sharing.
    ShareVec l_locals;
    if (eng.kind() == EngineKind::Malicious) {
      Elem enc = codec.encode(own_l1, alg, 2);
      auto [mine, theirs] = eng.input_exchange(std::span(&enc, 1), 1);
      l_locals = eng.add(mine, theirs);
    } else {
      l_locals.val.assign(1, codec.encode(own_l1, alg, 2));
    }
    double init_ms = ms_since(t0);

    auto t1 = Clock::now();
    JointLoss jl = build_joint_loss(eng, js, dims, hp);
    ShareVec gT = build_joint_grad_target(eng, js, jl.s1, dims, hp);
    ShareVec gS = build_joint_grad_source(eng, js, jl.s1, dims, hp);
    ShareVec L = eng.add(jl.loss, l_locals);
    double compute_ms = ms_since(t1);

    auto t2 = Clock::now();
    auto gt_vals = eng.output_to(PartyRole::Target, gT);
    auto gs_vals = eng.output_to(PartyRole::Source, gS);

    if (dbg && dbg->reveal_loss) {
      auto v = eng.open(L, OpenTag::DebugProbe);
      eng.check();
      dbg->loss_trace.push_back(codec.decode(v[0], alg, 2));
    }

    // Alg. 1 order: per-layer updates happen before the convergence test.
    std::uint32_t cols = own_in + 1;
    Mat joint(dims.d, cols);
    const auto& vals = is_source ? gs_vals : gt_vals;
    if (!vals.has_value()) throw std::logic_error("missing own gradient reveal");
    joint.a = decode_span(codec, alg, *vals, 3);
    const Mat& local = is_source ? sb.local_grad : tb.local_grad;
    for (std::size_t i = 0; i < joint.a.size(); ++i) joint.a[i] += local.a[i];
    result.net.apply_gradient(joint, hp.eta);

    bool stop = false;
    if (have_prev) stop = convergence_check(eng, L, loss_prev, hp.eps);

    IterationMetrics m;
    m.iter = iter;
    m.init_ms = init_ms;
    m.compute_ms = compute_ms;
    m.reveal_ms = ms_since(t2);
    if (eng.channel()) {
      auto s = eng.channel()->stats();
      m.bytes_sent = s.bytes_sent - stats0.bytes_sent;
      m.bytes_received = s.bytes_received - stats0.bytes_received;
      m.rounds = s.rounds - stats0.rounds;
    }
    auto mat1 = eng.store().consumed();
    m.triples = mat1.triples - mat0.triples;
    m.masks = (mat1.masks[0] + mat1.masks[1]) - (mat0.masks[0] + mat0.masks[1]);
    m.bit_packs = mat1.bit_packs - mat0.bit_packs;
    m.trunc_pairs = mat1.trunc_pairs - mat0.trunc_pairs;
    result.metrics.push_back(m);
    ++result.iterations;

    if (stop) {
      result.converged = true;
      break;
    }
    loss_prev = L;
    have_prev = true;
  }
  return result;
}

std::vector<int> run_predict(Engine& eng, std::span<const double> lambda, const Mat* c_rows,
                             std::size_t n_samples, std::size_t d) {
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  bool is_source = eng.role() == PartyRole::Source;

  std::vector<Elem> mine;
  if (is_source) {
    mine = encode_span(codec, alg, lambda, 1);
  } else {
    mine = encode_span(codec, alg, c_rows->a, 1);
  }
  auto [self_sh, peer_sh] =
      eng.input_exchange(mine, is_source ? n_samples * d : d);
  const ShareVec& lam = is_source ? self_sh : peer_sh;
  const ShareVec& c = is_source ? peer_sh : self_sh;

  ShareVec psi = group_sums(eng, eng.mul(repeat(lam, n_samples), c), d);
  ShareVec neg_bits = secure_ltz(eng, psi);  // 1 iff psi < 0
  auto revealed = eng.output_to(PartyRole::Source, neg_bits);
  eng.check();

  std::vector<int> labels(n_samples);
  if (!eng.channel()) return labels;  // counting walk
  if (is_source) {
    std::vector<std::uint8_t> wire(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      labels[i] = (*revealed)[i] == 1 ? -1 : +1;  // psi = 0 maps to +1
      wire[i] = labels[i] == 1 ? 1 : 0xFF;
    }
    eng.channel()->send_to(MsgType::Control, wire);
  } else {
    auto wire = eng.channel()->recv_from(MsgType::Control);
    if (wire.size() != n_samples) throw TransportError("label batch size mismatch");
    for (std::size_t i = 0; i < n_samples; ++i) labels[i] = wire[i] == 1 ? 1 : -1;
  }
  return labels;
}

namespace {

std::unique_ptr<Engine> make_engine(PartyRole role, const SessionParams& p, PreprocStore store,
                                    Channel* ch) {
  if (store.engine != p.engine) throw MismatchError("preprocessing engine kind mismatch");
  if (store.frac_bits != p.codec.frac_bits)
    throw MismatchError("preprocessing frac_bits mismatch");
  if (store.party != role) throw MismatchError("preprocessing file belongs to the other party");
  std::uint64_t session_seed = p.seed * 4 + 2 + party_index(role);
  std::unique_ptr<Engine> eng;
  if (p.engine == EngineKind::SemiHonest)
    eng = std::make_unique<SemiHonestEngine>(role, p.codec, std::move(store), ch, session_seed);
  else
    eng = std::make_unique<MaliciousEngine>(role, p.codec, std::move(store), ch, session_seed);
  eng->set_cheat(p.cheat);
  return eng;
}

}  // namespace

TrainResult train_session(Channel& ch, PartyRole role, const SessionParams& p, PreprocStore store,
                          const SourceData* src, const TargetData* tgt, DebugHooks* dbg) {
  if (!p.codec.valid()) throw MismatchError("invalid fixed-point codec");
  JointDims dims;
  dims.d = p.d;
  std::uint32_t own_rows, own_in;
  std::array<std::uint8_t, 32> digest;
  if (role == PartyRole::Source) {
    dims.n_labeled = std::uint32_t(src->labeled_y.size());
    dims.n_overlap = std::uint32_t(src->overlap_rows.size());
    own_rows = std::uint32_t(src->x.rows);
    own_in = std::uint32_t(src->x.cols);
    digest = src->digest;
  } else {
    dims.n_labeled = std::uint32_t(tgt->labeled_rows.size());
    dims.n_overlap = std::uint32_t(tgt->overlap_rows.size());
    own_rows = std::uint32_t(tgt->x.rows);
    own_in = std::uint32_t(tgt->x.cols);
    digest = tgt->digest;
  }
  PeerDims pd = handshake(ch, role, p, dims, own_rows, own_in, digest, store.session_id);
  if (role == PartyRole::Source) {
    dims.in_s = own_in;
    dims.in_t = pd.in_features;
  } else {
    dims.in_t = own_in;
    dims.in_s = pd.in_features;
  }
  auto eng = make_engine(role, p, std::move(store), &ch);
  return run_training(*eng, p, dims, src, tgt, dbg);
}

std::vector<int> predict_session(Channel& ch, PartyRole role, const SessionParams& p,
                                 PreprocStore store, const LocalNet& net, const SourceData* src,
                                 const TargetData* tgt, const Mat* samples) {
  (void)tgt;
  JointDims dims;
  dims.d = p.d;
  dims.n_overlap = 0;
  dims.n_labeled = 0;
  std::uint32_t own_rows, own_in;
  std::array<std::uint8_t, 32> digest{};
  std::vector<double> lambda;
  Mat c_rows;
  if (role == PartyRole::Source) {
    // Lambda from the trained weights over the source's own dataset.
    SourceIterBundle sb = compute_source_iter(net, *src, p.hp);
    lambda = sb.lambda;
    own_rows = std::uint32_t(src->x.rows);
    own_in = std::uint32_t(src->x.cols);
  } else {
    c_rows = net.forward_all(*samples);
    own_rows = std::uint32_t(samples->rows);
    own_in = std::uint32_t(samples->cols);
  }
  // The target's row count doubles as the prediction batch size.
  PeerDims pd = handshake(ch, role, p, dims, own_rows, own_in, digest, store.session_id);
  auto eng = make_engine(role, p, std::move(store), &ch);
  std::size_t n = role == PartyRole::Source ? pd.rows : samples->rows;
  return run_predict(*eng, lambda, role == PartyRole::Target ? &c_rows : nullptr, n, p.d);
}

void write_metrics_csv(const std::string& path, std::span<const IterationMetrics> metrics) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "iter,init_ms,compute_ms,reveal_ms,bytes_sent,bytes_received,rounds,"
       "triples,masks,bit_packs,trunc_pairs\n";
  for (const auto& m : metrics) {
    f << m.iter << ',' << m.init_ms << ',' << m.compute_ms << ',' << m.reveal_ms << ','
      << m.bytes_sent << ',' << m.bytes_received << ',' << m.rounds << ',' << m.triples << ','
      << m.masks << ',' << m.bit_packs << ',' << m.trunc_pairs << '\n';
  }
}

}  // namespace sftl
