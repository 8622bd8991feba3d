#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtpinn/autodiff.hpp"
#include "rtpinn/jet.hpp"
#include "rtpinn/mlp.hpp"
#include "rtpinn/mlp_batch.hpp"

namespace rtpinn {

// Values and input partials of one scalar function at a batch of points,
// as tape variables (constants when the function is not trainable).
struct JetBlock {
  std::vector<ad::Var> value;
  std::array<std::vector<ad::Var>, kMaxJetCoords> d1;
  std::array<std::vector<ad::Var>, kMaxJetCoords> d2;

  std::size_t size() const { return value.size(); }
  static JetBlock constants(const Eigen::VectorXd& value, std::span<const Eigen::VectorXd> d1 = {},
                            std::span<const Eigen::VectorXd> d2 = {});
};

// Reverse tape for one loss evaluation. Network evaluations are recorded as
// leaves; after the scalar sweep their adjoints are pushed through the
// batched network backward pass into the flat parameter gradient.
class LossTape {
 public:
  ad::Tape& tape() { return tape_; }

  // One JetBlock per output channel.
  std::vector<JetBlock> attach(std::shared_ptr<const BatchJet> batch, std::size_t param_offset);

  // d(root)/dθ for the concatenated parameter vector of size n.
  std::vector<double> gradient(const ad::Var& root, std::size_t n) const;

 private:
  struct Record {
    std::shared_ptr<const BatchJet> batch;
    std::size_t offset = 0;
    int first_leaf = 0;
  };
  ad::Tape tape_;
  std::vector<Record> records_;
};

// Something that can be evaluated with input partials inside a loss.
class Approximant {
 public:
  virtual ~Approximant() = default;
  virtual int input_dim() const = 0;
  // points: input_dim x n. active: input coordinates to differentiate.
  virtual JetBlock evaluate(LossTape& tape, const Eigen::MatrixXd& points, std::span<const int> active,
                            int order) const = 0;
  Eigen::VectorXd values(const Eigen::MatrixXd& points) const;
};

// A slice of the trainable parameter vector interpreted as an MLP.
class NetworkApproximant final : public Approximant {
 public:
  NetworkApproximant(MlpSpec spec, std::span<const double> theta, std::size_t offset, bool trainable = true);
  int input_dim() const override { return spec_.input_dim(); }
  JetBlock evaluate(LossTape& tape, const Eigen::MatrixXd& points, std::span<const int> active,
                    int order) const override;
  const MlpSpec& spec() const { return spec_; }
  std::span<const double> params() const { return params_; }

 private:
  MlpSpec spec_;
  std::span<const double> params_;
  std::size_t offset_;
  bool trainable_;
};

// Closed-form function given as a jet map (exact solutions, candidates).
class FunctionApproximant final : public Approximant {
 public:
  using Fn = std::function<Jet2<double>(std::span<const Jet2<double>> inputs)>;
  FunctionApproximant(int input_dim, Fn fn);
  int input_dim() const override { return input_dim_; }
  JetBlock evaluate(LossTape& tape, const Eigen::MatrixXd& points, std::span<const int> active,
                    int order) const override;

 private:
  int input_dim_;
  Fn fn_;
};

std::shared_ptr<Approximant> constant_function(int input_dim, double c);

// Several networks sharing one flat parameter vector.
class ParamLayout {
 public:
  int add(const MlpSpec& spec);
  std::size_t total() const { return total_; }
  std::size_t offset(int id) const { return offsets_.at(id); }
  const MlpSpec& spec(int id) const { return specs_.at(id); }
  int count() const { return static_cast<int>(specs_.size()); }
  // Network k is initialized from seed + k.
  ParamVector init(std::uint64_t seed) const;
  std::span<const double> slice(int id, std::span<const double> theta) const;
  std::shared_ptr<NetworkApproximant> network(int id, std::span<const double> theta) const;

 private:
  std::vector<MlpSpec> specs_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

}  // namespace rtpinn
