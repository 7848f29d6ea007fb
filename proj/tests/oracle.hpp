#pragma once

// Cleartext float oracle: a direct, standalone transcription of the loss
// and gradient formulas, evaluated with full knowledge of both parties'
// data. Used only by tests; intentionally independent of the secure path
// and of the production bundle factorizations.

#include <cstdint>
#include <functional>
#include <vector>

#include "model.hpp"

namespace sftl::oracle {

using sftl::Mat;

// Full cleartext view of a two-party instance.
struct Instance {
  Mat x_s;                    // N_S x in_S
  std::vector<double> y_s;    // N_S
  Mat x_t;                    // N_T x in_T
  std::vector<std::uint32_t> ov_s, ov_t;  // aligned overlap rows
  std::vector<std::uint32_t> lab_t;       // target rows of D_L
  std::vector<double> lab_y;              // labels of D_L
  sftl::Hyperparams hp;
  std::uint32_t d = 4;
};

Instance random_instance(std::uint64_t seed, std::uint32_t n_s, std::uint32_t n_t,
                         std::uint32_t n_ov, std::uint32_t n_lab, std::uint32_t in_s,
                         std::uint32_t in_t, std::uint32_t d);

// Weight matrices include the bias column, as in the production nets.
Mat forward(const Mat& w, const Mat& x);  // row-wise tanh(W [x;1])

double total_loss(const Instance& inst, const Mat& w_s, const Mat& w_t);
Mat grad_source(const Instance& inst, const Mat& w_s, const Mat& w_t);
Mat grad_target(const Instance& inst, const Mat& w_s, const Mat& w_t);

// Central finite differences of total_loss in every coordinate of the
// chosen weight matrix (source = true picks w_s).
Mat fd_grad(const Instance& inst, const Mat& w_s, const Mat& w_t, bool source,
            double h = 1e-5);

// Plain-text gradient-descent co-simulation of the training loop.
struct PlainTrain {
  Mat w_s, w_t;
  std::vector<double> losses;  // loss after each iteration's update
};
PlainTrain train(const Instance& inst, std::uint64_t weight_seed, std::uint32_t iterations,
                 double eta);

// Initial weights identical to the production initialization.
Mat initial_weights(std::uint32_t in_features, std::uint32_t d, std::uint64_t seed);

// Converts an oracle instance into the per-party production views.
void to_party_views(const Instance& inst, sftl::SourceData* src, sftl::TargetData* tgt);

std::vector<int> predict_labels(const Instance& inst, const Mat& w_s, const Mat& w_t,
                                const Mat& samples);

}  // namespace sftl::oracle
