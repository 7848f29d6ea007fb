#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "arith.hpp"
#include "sharing.hpp"

namespace sftl {

struct Hyperparams {
  double eta = 0.05;          // learning rate
  double gamma = 0.05;        // alignment weight
  double lambda = 0.005;      // regularization weight
  double kappa_align = -1.0;  // alignment constant
  std::uint32_t max_iter = 50;
  double eps = 1e-3;          // convergence tolerance
};

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }
};

// Single hidden layer, tanh activation, bias folded in as a last column.
struct LocalNet {
  std::uint32_t in_features = 0;
  std::uint32_t hidden = 0;
  Mat w;  // hidden x (in_features+1)

  static LocalNet make(std::uint32_t in_features, std::uint32_t hidden, std::uint64_t seed);
  std::uint32_t layers() const { return 1; }

  // u = tanh(W [x;1]); optionally returns the pre-activations.
  std::vector<double> forward(std::span<const double> x, std::vector<double>* preact = nullptr) const;
  Mat forward_all(const Mat& xs) const;

  void apply_gradient(const Mat& grad, double eta);
};

void save_weights(const std::string& path, const LocalNet& net, const FixedCodec& codec);
LocalNet load_weights(const std::string& path, const FixedCodec& codec);

// Taylor form of the logistic loss log(1 + exp(-y psi)) around psi = 0,
// with T1(y) = y, T2(y) = y^2 stored as summary statistics:
//   l1 ~ log 2 - 1/2 T1 psi + 1/8 T2 psi^2
double taylor_l1(double y, double psi);
double taylor_dl1(double y, double psi);  // -1/2 T1 + 1/4 T2 psi

double translator_psi(std::span<const double> lambda, std::span<const double> u);

// --- per-party training data views ---

struct SourceData {
  Mat x;                                   // N_S x in_S
  std::vector<double> y;                   // N_S labels in {-1,+1}
  std::vector<std::uint32_t> overlap_rows; // rows of x in D_ST order
  std::vector<double> labeled_y;           // labels for D_L, length N_L
  std::array<std::uint8_t, 32> digest{};
};

struct TargetData {
  Mat x;                                   // N_T x in_T
  std::vector<std::uint32_t> overlap_rows; // aligned with the source's D_ST order
  std::vector<std::uint32_t> labeled_rows; // rows of x in D_L order
  std::array<std::uint8_t, 32> digest{};
};

// --- per-iteration local bundles (floats, computed without interaction) ---

struct SourceIterBundle {
  std::vector<double> lambda;  // d      Lambda^S = (1/N_S) sum y_i u_i^S
  Mat a_mat;                   // d x (in_S+1)   dLambda/dW entries
  std::vector<double> t1, t2;  // N_L
  Mat u_ov;                    // N_ST x d
  std::vector<double> d_ov;    // N_ST * d * (in_S+1), [k][j][a]
  double l1s = 0;              // local loss piece L1^S
  Mat local_grad;              // d x (in_S+1): gamma * sum 2 u sigma' x + lambda W
};

struct TargetIterBundle {
  Mat c_lab;                   // N_L x d, rows C(u_i^T)
  Mat u_ov;                    // N_ST x d
  std::vector<double> d_lab;   // N_L * d * (in_T+1), [i][j][a]
  std::vector<double> d_ov;    // N_ST * d * (in_T+1)
  double l1t = 0;              // local loss piece L1^T
  Mat local_grad;              // d x (in_T+1)
};

SourceIterBundle compute_source_iter(const LocalNet& net, const SourceData& data,
                                     const Hyperparams& hp);
TargetIterBundle compute_target_iter(const LocalNet& net, const TargetData& data,
                                     const Hyperparams& hp);

// --- secure joint terms ---

struct JointDims {
  std::uint32_t n_labeled = 0;
  std::uint32_t n_overlap = 0;
  std::uint32_t d = 0;
  std::uint32_t in_s = 0;
  std::uint32_t in_t = 0;
};

struct JointShares {
  ShareVec lambda, a_mat, t1, t2, uS_ov, dS_ov;   // provided by S
  ShareVec c_lab, uT_ov, dT_lab, dT_ov;            // provided by T
};

// One input-sharing round for everything both sides contribute this
// iteration. Exactly one of src/tgt is non-null, per the caller's role.
JointShares share_iteration_inputs(Engine& eng, const JointDims& dims,
                                   const SourceIterBundle* src, const TargetIterBundle* tgt);

struct JointLoss {
  ShareVec loss;   // scalar share of L1^ST at scale 2
  ShareVec psi1;   // per-label psi truncated to scale 1
  ShareVec s1;     // per-label dl/dpsi coefficient at scale 1
};

JointLoss build_joint_loss(Engine& eng, const JointShares& js, const JointDims& dims,
                           const Hyperparams& hp);

// Gradient contributions, row-major d x (in+1), at scale 3.
ShareVec build_joint_grad_target(Engine& eng, const JointShares& js, const ShareVec& s1,
                                 const JointDims& dims, const Hyperparams& hp);
ShareVec build_joint_grad_source(Engine& eng, const JointShares& js, const ShareVec& s1,
                                 const JointDims& dims, const Hyperparams& hp);

// Element helpers shared with the protocol layer.
std::vector<Elem> encode_span(const FixedCodec& codec, const Algebra& alg,
                              std::span<const double> xs, int scale);
std::vector<double> decode_span(const FixedCodec& codec, const Algebra& alg,
                                std::span<const Elem> es, int scale);

}  // namespace sftl
