#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rtpinn/mlp.hpp"

namespace rtpinn {

// Batched forward pass of an MLP over many input points, carrying value,
// first and diagonal second input partials as separate column streams, plus
// the matching reverse pass to parameter gradients.
//
// Stream layout: 0 = value, 1..K = d/du_k, K+1..2K = d²/du_k² (order 2).
// Every per-layer matrix stores its streams side by side, n columns each.
class BatchJet {
 public:
  // inputs: input_dim x n, one point per column.
  BatchJet(const MlpSpec& spec, std::span<const double> params, const Eigen::MatrixXd& inputs,
           std::span<const int> active, int order);

  Eigen::Index points() const { return n_; }
  int coords() const { return k_; }
  int order() const { return order_; }
  int streams() const { return streams_; }
  const MlpSpec& spec() const { return spec_; }

  // output_dim x n blocks.
  Eigen::Ref<const Eigen::MatrixXd> value() const { return stream(0); }
  Eigen::Ref<const Eigen::MatrixXd> d1(int k) const { return stream(1 + k); }
  Eigen::Ref<const Eigen::MatrixXd> d2(int k) const { return stream(1 + k_ + k); }

  // adjoint: output_dim x (n * streams) in the same stream layout as the
  // outputs. Accumulates dL/dθ into grad.
  void backward(const Eigen::MatrixXd& adjoint, std::span<double> grad) const;

 private:
  Eigen::Ref<const Eigen::MatrixXd> stream(int s) const;

  // Points are processed in column chunks so that the per-layer work stays
  // in cache; each chunk keeps its own activations for the reverse pass.
  struct Chunk {
    Eigen::Index begin = 0;
    Eigen::Index size = 0;
    std::vector<Eigen::MatrixXd> pre;   // pre[l]: pre-activation of layer l
    std::vector<Eigen::MatrixXd> post;  // post[0] = input streams
  };

  MlpSpec spec_;
  std::vector<double> params_;
  Eigen::Index n_ = 0;
  int k_ = 0;
  int order_ = 0;
  int streams_ = 1;
  std::vector<Chunk> chunks_;
  Eigen::MatrixXd out_;  // output_dim x (n * streams)
};

}  // namespace rtpinn
