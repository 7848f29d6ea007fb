#include "model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sftl {

namespace {
constexpr double kLog2 = 0.6931471805599453;

void check_label(double y) {
  if (y != 1.0 && y != -1.0) throw std::invalid_argument("label must be -1 or +1");
}
}  // namespace

LocalNet LocalNet::make(std::uint32_t in_features, std::uint32_t hidden, std::uint64_t seed) {
  LocalNet net;
  net.in_features = in_features;
  net.hidden = hidden;
  net.w = Mat(hidden, in_features + 1);
  ElemRng rng(seed);
  double bound = 1.0 / std::sqrt(double(in_features + 1));
  for (auto& v : net.w.a) v = (2.0 * rng.canonical() - 1.0) * bound;
  return net;
}

std::vector<double> LocalNet::forward(std::span<const double> x,
                                      std::vector<double>* preact) const {
  if (x.size() != in_features) throw std::invalid_argument("input width mismatch");
  std::vector<double> u(hidden);
  if (preact) preact->resize(hidden);
  for (std::uint32_t j = 0; j < hidden; ++j) {
    double z = w.at(j, in_features);  // bias
    for (std::uint32_t a = 0; a < in_features; ++a) z += w.at(j, a) * x[a];
    if (preact) (*preact)[j] = z;
    u[j] = std::tanh(z);
  }
  return u;
}

Mat LocalNet::forward_all(const Mat& xs) const {
  Mat u(xs.rows, hidden);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    auto ui = forward(xs.row(i));
    std::memcpy(&u.at(i, 0), ui.data(), hidden * sizeof(double));
  }
  return u;
}

void LocalNet::apply_gradient(const Mat& grad, double eta) {
  if (grad.rows != w.rows || grad.cols != w.cols)
    throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] -= eta * grad.a[i];
}

void save_weights(const std::string& path, const LocalNet& net, const FixedCodec& codec) {
  Algebra ring = Algebra::ring();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  auto put64 = [&](std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char(v >> (8 * i));
    f.write(b, 8);
  };
  put64(0x5357'4654'4c31ULL);  // "SWFTL1"
  put64(net.in_features);
  put64(net.hidden);
  put64(std::uint64_t(codec.frac_bits));
  put64(net.w.a.size());
  for (double v : net.w.a) put64(codec.encode(v, ring));
  if (!f) throw std::runtime_error("short write to " + path);
}

LocalNet load_weights(const std::string& path, const FixedCodec& codec) {
  Algebra ring = Algebra::ring();
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto get64 = [&]() {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw std::runtime_error("truncated weights file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  };
  if (get64() != 0x5357'4654'4c31ULL) throw std::runtime_error("not a weights file");
  LocalNet net;
  net.in_features = std::uint32_t(get64());
  net.hidden = std::uint32_t(get64());
  if (int(get64()) != codec.frac_bits) throw std::runtime_error("weights frac_bits mismatch");
  std::uint64_t n = get64();
  net.w = Mat(net.hidden, net.in_features + 1);
  if (n != net.w.a.size()) throw std::runtime_error("weights size mismatch");
  for (auto& v : net.w.a) v = codec.decode(get64(), ring);
  return net;
}

double taylor_l1(double y, double psi) {
  check_label(y);
  return kLog2 - 0.5 * y * psi + 0.125 * (y * y) * psi * psi;
}

double taylor_dl1(double y, double psi) {
  check_label(y);
  return -0.5 * y + 0.25 * (y * y) * psi;
}

double translator_psi(std::span<const double> lambda, std::span<const double> u) {
  if (lambda.size() != u.size()) throw std::invalid_argument("dimension mismatch in psi");
  double s = 0;
  for (std::size_t j = 0; j < u.size(); ++j) s += lambda[j] * u[j];
  return s;
}

SourceIterBundle compute_source_iter(const LocalNet& net, const SourceData& data,
                                     const Hyperparams& hp) {
  std::size_t n = data.x.rows;
  std::uint32_t d = net.hidden, in = net.in_features;
  SourceIterBundle b;
  b.lambda.assign(d, 0.0);
  b.a_mat = Mat(d, in + 1);
  b.u_ov = Mat(data.overlap_rows.size(), d);
  b.d_ov.assign(data.overlap_rows.size() * d * (in + 1), 0.0);
  b.local_grad = Mat(d, in + 1);

  Mat u_all(n, d);
  Mat sig_all(n, d);  // tanh' = 1 - u^2
  std::vector<double> pre;
  for (std::size_t i = 0; i < n; ++i) {
    auto u = net.forward(data.x.row(i), &pre);
    for (std::uint32_t j = 0; j < d; ++j) {
      u_all.at(i, j) = u[j];
      sig_all.at(i, j) = 1.0 - u[j] * u[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    check_label(data.y[i]);
    for (std::uint32_t j = 0; j < d; ++j) b.lambda[j] += data.y[i] * u_all.at(i, j);
  }
  if (n) for (auto& v : b.lambda) v /= double(n);
  // A[j,a] = dLambda[j]/dW[j,a] = (1/N_S) sum_i y_i sigma'_i[j] xt_i[a]
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      double c = data.y[i] * sig_all.at(i, j) / double(n);
      for (std::uint32_t a = 0; a < in; ++a) b.a_mat.at(j, a) += c * data.x.at(i, a);
      b.a_mat.at(j, in) += c;
    }
  }
  b.t1.resize(data.labeled_y.size());
  b.t2.resize(data.labeled_y.size());
  for (std::size_t i = 0; i < data.labeled_y.size(); ++i) {
    check_label(data.labeled_y[i]);
    b.t1[i] = data.labeled_y[i];
    b.t2[i] = data.labeled_y[i] * data.labeled_y[i];
  }

  double align_sq = 0;
  for (std::size_t k = 0; k < data.overlap_rows.size(); ++k) {
    std::size_t row = data.overlap_rows[k];
    for (std::uint32_t j = 0; j < d; ++j) {
      double u = u_all.at(row, j), sp = sig_all.at(row, j);
      b.u_ov.at(k, j) = u;
      align_sq += u * u;
      double* dk = &b.d_ov[(k * d + j) * (in + 1)];
      for (std::uint32_t a = 0; a < in; ++a) dk[a] = sp * data.x.at(row, a);
      dk[in] = sp;
      // d(l2^S)/dW accumulation: 2 u sigma' xt
      double c = 2.0 * u * sp;
      for (std::uint32_t a = 0; a < in; ++a)
        b.local_grad.at(j, a) += hp.gamma * c * data.x.at(row, a);
      b.local_grad.at(j, in) += hp.gamma * c;
    }
  }
  double wnorm = 0;
  for (double v : net.w.a) wnorm += v * v;
  b.l1s = double(data.labeled_y.size()) * kLog2 + hp.gamma * align_sq + 0.5 * hp.lambda * wnorm;
  for (std::size_t i = 0; i < b.local_grad.a.size(); ++i)
    b.local_grad.a[i] += hp.lambda * net.w.a[i];
  return b;
}

TargetIterBundle compute_target_iter(const LocalNet& net, const TargetData& data,
                                     const Hyperparams& hp) {
  std::uint32_t d = net.hidden, in = net.in_features;
  TargetIterBundle b;
  b.c_lab = Mat(data.labeled_rows.size(), d);
  b.u_ov = Mat(data.overlap_rows.size(), d);
  b.d_lab.assign(data.labeled_rows.size() * d * (in + 1), 0.0);
  b.d_ov.assign(data.overlap_rows.size() * d * (in + 1), 0.0);
  b.local_grad = Mat(d, in + 1);

  auto fill_d = [&](std::vector<double>& dst, std::size_t slot, std::size_t row,
                    std::span<const double> u) {
    for (std::uint32_t j = 0; j < d; ++j) {
      double sp = 1.0 - u[j] * u[j];
      double* dk = &dst[(slot * d + j) * (in + 1)];
      for (std::uint32_t a = 0; a < in; ++a) dk[a] = sp * data.x.at(row, a);
      dk[in] = sp;
    }
  };

  for (std::size_t i = 0; i < data.labeled_rows.size(); ++i) {
    std::size_t row = data.labeled_rows[i];
    auto u = net.forward(data.x.row(row));
    for (std::uint32_t j = 0; j < d; ++j) b.c_lab.at(i, j) = u[j];
    fill_d(b.d_lab, i, row, u);
  }

  double align_sq = 0;
  for (std::size_t k = 0; k < data.overlap_rows.size(); ++k) {
    std::size_t row = data.overlap_rows[k];
    auto u = net.forward(data.x.row(row));
    for (std::uint32_t j = 0; j < d; ++j) {
      b.u_ov.at(k, j) = u[j];
      align_sq += u[j] * u[j];
      double c = 2.0 * u[j] * (1.0 - u[j] * u[j]);
      for (std::uint32_t a = 0; a < in; ++a)
        b.local_grad.at(j, a) += hp.gamma * c * data.x.at(row, a);
      b.local_grad.at(j, in) += hp.gamma * c;
    }
    fill_d(b.d_ov, k, row, u);
  }
  double wnorm = 0;
  for (double v : net.w.a) wnorm += v * v;
  b.l1t = hp.gamma * align_sq + 0.5 * hp.lambda * wnorm;
  for (std::size_t i = 0; i < b.local_grad.a.size(); ++i)
    b.local_grad.a[i] += hp.lambda * net.w.a[i];
  return b;
}

std::vector<Elem> encode_span(const FixedCodec& codec, const Algebra& alg,
                              std::span<const double> xs, int scale) {
  std::vector<Elem> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = codec.encode(xs[i], alg, scale);
  return out;
}

std::vector<double> decode_span(const FixedCodec& codec, const Algebra& alg,
                                std::span<const Elem> es, int scale) {
  std::vector<double> out(es.size());
  for (std::size_t i = 0; i < es.size(); ++i) out[i] = codec.decode(es[i], alg, scale);
  return out;
}

JointShares share_iteration_inputs(Engine& eng, const JointDims& dims,
                                   const SourceIterBundle* src, const TargetIterBundle* tgt) {
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  std::size_t nl = dims.n_labeled, nov = dims.n_overlap, d = dims.d;
  std::size_t s_len[6] = {d, d * (dims.in_s + 1), nl, nl, nov * d, nov * d * (dims.in_s + 1)};
  std::size_t t_len[4] = {nl * d, nov * d, nl * d * (dims.in_t + 1), nov * d * (dims.in_t + 1)};
  std::size_t s_total = 0, t_total = 0;
  for (auto v : s_len) s_total += v;
  for (auto v : t_len) t_total += v;

  std::vector<Elem> mine;
  if (src) {
    mine.reserve(s_total);
    auto app = [&](std::span<const double> xs, int scale) {
      auto e = encode_span(codec, alg, xs, scale);
      mine.insert(mine.end(), e.begin(), e.end());
    };
    app(src->lambda, 1);
    app(src->a_mat.a, 1);
    app(src->t1, 0);
    app(src->t2, 0);
    app(src->u_ov.a, 1);
    app(src->d_ov, 1);
  } else {
    mine.reserve(t_total);
    auto app = [&](std::span<const double> xs, int scale) {
      auto e = encode_span(codec, alg, xs, scale);
      mine.insert(mine.end(), e.begin(), e.end());
    };
    app(tgt->c_lab.a, 1);
    app(tgt->u_ov.a, 1);
    app(tgt->d_lab, 1);
    app(tgt->d_ov, 1);
  }

  auto [self_sh, peer_sh] = eng.input_exchange(mine, src ? t_total : s_total);
  const ShareVec& s_all = src ? self_sh : peer_sh;
  const ShareVec& t_all = src ? peer_sh : self_sh;

  JointShares js;
  std::size_t off = 0;
  auto cut = [&](const ShareVec& from, std::size_t n) {
    ShareVec v = slice(from, off, n);
    off += n;
    return v;
  };
  js.lambda = cut(s_all, s_len[0]);
  js.a_mat = cut(s_all, s_len[1]);
  js.t1 = cut(s_all, s_len[2]);
  js.t2 = cut(s_all, s_len[3]);
  js.uS_ov = cut(s_all, s_len[4]);
  js.dS_ov = cut(s_all, s_len[5]);
  off = 0;
  js.c_lab = cut(t_all, t_len[0]);
  js.uT_ov = cut(t_all, t_len[1]);
  js.dT_lab = cut(t_all, t_len[2]);
  js.dT_ov = cut(t_all, t_len[3]);
  return js;
}

JointLoss build_joint_loss(Engine& eng, const JointShares& js, const JointDims& dims,
                           const Hyperparams& hp) {
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  std::size_t nl = dims.n_labeled, nov = dims.n_overlap, d = dims.d;

  JointLoss out;
  ShareVec psi2;  // per-label translator values at scale 2
  if (nl) {
    ShareVec prod = eng.mul(repeat(js.lambda, nl), js.c_lab);
    psi2 = group_sums(eng, prod, d);
    out.psi1 = eng.trunc(psi2);
  }
  ShareVec align2;  // per-overlap-sample u^S . u^T at scale 2
  if (nov) {
    ShareVec prod = eng.mul(js.uS_ov, js.uT_ov);
    align2 = group_sums(eng, prod, d);
  }

  // quadratic and linear label terms; dl/dpsi coefficient alongside
  ShareVec sum_parts;  // [sum T2 psi^2, sum T1 psi, sum align] as present
  ShareVec lq2, lt2;
  if (nl) {
    ShareVec lq = eng.mul(out.psi1, out.psi1);       // scale 2
    ShareVec u2 = eng.mul(js.t2, out.psi1);          // scale 1
    lt2 = eng.mul(js.t1, psi2);                      // scale 2
    lq2 = eng.mul(js.t2, lq);                        // scale 2
    ShareVec s2 = eng.add(eng.scalar_mul(u2, codec.encode(0.25, alg)),
                          eng.scalar_mul(js.t1, codec.encode(-0.5, alg, 2)));
    out.s1 = eng.trunc(s2);
  }
  auto total = [&](const ShareVec& v) {
    return v.size() ? group_sums(eng, v, v.size()) : eng.share_of_public(Elem(0));
  };
  ShareVec sums;  // concatenated scale-2 sums, truncated together
  if (nl) sums = concat(total(lq2), total(lt2));
  if (nov) sums = concat(sums, total(align2));
  if (!sums.size()) {
    out.loss = eng.share_of_public(Elem(0));
    return out;
  }
  ShareVec sums1 = eng.trunc(sums);  // scale 1

  ShareVec loss = eng.share_of_public(Elem(0));
  std::size_t idx = 0;
  if (nl) {
    loss = eng.add(loss, eng.scalar_mul(slice(sums1, idx++, 1), codec.encode(0.125, alg)));
    loss = eng.add(loss, eng.scalar_mul(slice(sums1, idx++, 1), codec.encode(-0.5, alg)));
  }
  if (nov) {
    loss = eng.add(loss, eng.scalar_mul(slice(sums1, idx++, 1),
                                        codec.encode(hp.gamma * hp.kappa_align, alg)));
  }
  out.loss = loss;  // scale 2
  return out;
}

ShareVec build_joint_grad_target(Engine& eng, const JointShares& js, const ShareVec& s1,
                                 const JointDims& dims, const Hyperparams& hp) {
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  std::size_t nl = dims.n_labeled, nov = dims.n_overlap, d = dims.d;
  std::size_t cols = dims.in_t + 1;

  ShareVec grad;  // d*(in_t+1) at scale 3
  if (nl) {
    // sum_i (1/4 T2 psi_i - 1/2 T1_i) Lambda[j] D_i[j,a]
    ShareVec p = eng.mul(repeat_each(s1, d), repeat(js.lambda, nl));  // scale 2
    ShareVec prod = eng.mul(repeat_each(p, cols), js.dT_lab);         // scale 3
    grad = outer_sums(eng, prod, nl, d * cols);
  }
  if (nov) {
    // gamma kappa sum_k u^S_k[j] D^T_k[j,a]
    ShareVec prod = eng.mul(repeat_each(js.uS_ov, cols), js.dT_ov);  // scale 2
    ShareVec acc = outer_sums(eng, prod, nov, d * cols);
    acc = eng.scalar_mul(acc, codec.encode(hp.gamma * hp.kappa_align, alg));  // scale 3
    grad = grad.size() ? eng.add(grad, acc) : std::move(acc);
  }
  if (!grad.size()) {
    std::vector<Elem> zeros(d * cols, 0);
    grad = eng.share_of_public(zeros);
  }
  return grad;
}

ShareVec build_joint_grad_source(Engine& eng, const JointShares& js, const ShareVec& s1,
                                 const JointDims& dims, const Hyperparams& hp) {
  const auto& codec = eng.codec();
  const auto& alg = eng.alg();
  std::size_t nl = dims.n_labeled, nov = dims.n_overlap, d = dims.d;
  std::size_t cols = dims.in_s + 1;

  ShareVec grad;
  if (nl) {
    // (sum_i s_i u^T_i[j]) * A[j,a]
    ShareVec q = eng.mul(repeat_each(s1, d), js.c_lab);  // N_L*d at scale 2
    ShareVec bigq = outer_sums(eng, q, nl, d);
    grad = eng.mul(repeat_each(bigq, cols), js.a_mat);  // scale 3
  }
  if (nov) {
    ShareVec prod = eng.mul(repeat_each(js.uT_ov, cols), js.dS_ov);  // scale 2
    ShareVec acc = outer_sums(eng, prod, nov, d * cols);
    acc = eng.scalar_mul(acc, codec.encode(hp.gamma * hp.kappa_align, alg));
    grad = grad.size() ? eng.add(grad, acc) : std::move(acc);
  }
  if (!grad.size()) {
    std::vector<Elem> zeros(d * cols, 0);
    grad = eng.share_of_public(zeros);
  }
  return grad;
}

}  // namespace sftl
