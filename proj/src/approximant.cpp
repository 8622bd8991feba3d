#include "rtpinn/approximant.hpp"

#include <stdexcept>

namespace rtpinn {

JetBlock JetBlock::constants(const Eigen::VectorXd& value, std::span<const Eigen::VectorXd> d1,
                             std::span<const Eigen::VectorXd> d2) {
  JetBlock b;
  b.value.assign(value.data(), value.data() + value.size());
  for (std::size_t k = 0; k < d1.size(); ++k) b.d1[k].assign(d1[k].data(), d1[k].data() + d1[k].size());
  for (std::size_t k = 0; k < d2.size(); ++k) b.d2[k].assign(d2[k].data(), d2[k].data() + d2[k].size());
  return b;
}

std::vector<JetBlock> LossTape::attach(std::shared_ptr<const BatchJet> batch, std::size_t param_offset) {
  const int outs = batch->spec().output_dim();
  const int streams = batch->streams();
  const Eigen::Index n = batch->points();
  Record rec{batch, param_offset, static_cast<int>(tape_.size())};
  std::vector<JetBlock> blocks(outs);
  for (int c = 0; c < outs; ++c) {
    for (int s = 0; s < streams; ++s) {
      std::vector<ad::Var>* dst = nullptr;
      if (s == 0) dst = &blocks[c].value;
      else if (s <= batch->coords()) dst = &blocks[c].d1[s - 1];
      else dst = &blocks[c].d2[s - 1 - batch->coords()];
      dst->reserve(n);
      for (Eigen::Index p = 0; p < n; ++p) {
        const double v = s == 0 ? batch->value()(c, p)
                                : (s <= batch->coords() ? batch->d1(s - 1)(c, p)
                                                        : batch->d2(s - 1 - batch->coords())(c, p));
        dst->emplace_back(&tape_, tape_.leaf(), v);
      }
    }
  }
  records_.push_back(std::move(rec));
  return blocks;
}

std::vector<double> LossTape::gradient(const ad::Var& root, std::size_t n) const {
  std::vector<double> grad(n, 0.0);
  if (root.is_constant()) return grad;
  if (root.tape() != &tape_) throw std::logic_error("LossTape: root recorded on a foreign tape");
  const auto adj = tape_.adjoints(root.index());
  for (const auto& rec : records_) {
    const BatchJet& b = *rec.batch;
    const int outs = b.spec().output_dim();
    const Eigen::Index cols = b.points() * b.streams();
    Eigen::MatrixXd a(outs, cols);
    int leaf = rec.first_leaf;
    for (int c = 0; c < outs; ++c)
      for (Eigen::Index j = 0; j < cols; ++j) a(c, j) = adj[leaf++];
    const std::size_t np = b.spec().num_params();
    if (rec.offset + np > n) throw std::logic_error("LossTape: parameter slice exceeds gradient size");
    b.backward(a, std::span<double>(grad).subspan(rec.offset, np));
  }
  return grad;
}

Eigen::VectorXd Approximant::values(const Eigen::MatrixXd& points) const {
  LossTape scratch;
  const JetBlock b = evaluate(scratch, points, {}, 0);
  Eigen::VectorXd out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = b.value[i].value();
  return out;
}

NetworkApproximant::NetworkApproximant(MlpSpec spec, std::span<const double> theta, std::size_t offset,
                                       bool trainable)
    : spec_(std::move(spec)), offset_(offset), trainable_(trainable) {
  spec_.validate();
  if (offset + spec_.num_params() > theta.size())
    throw std::invalid_argument("NetworkApproximant: parameter slice out of range");
  params_ = theta.subspan(offset, spec_.num_params());
  if (spec_.output_dim() != 1) throw std::invalid_argument("NetworkApproximant: scalar networks only");
}

JetBlock NetworkApproximant::evaluate(LossTape& tape, const Eigen::MatrixXd& points, std::span<const int> active,
                                      int order) const {
  auto batch = std::make_shared<BatchJet>(spec_, params_, points, active, order);
  if (trainable_) return tape.attach(batch, offset_)[0];
  std::vector<Eigen::VectorXd> d1, d2;
  for (int k = 0; k < batch->coords(); ++k) {
    d1.emplace_back(batch->d1(k).row(0).transpose());
    if (order == 2) d2.emplace_back(batch->d2(k).row(0).transpose());
  }
  return JetBlock::constants(batch->value().row(0).transpose(), d1, d2);
}

FunctionApproximant::FunctionApproximant(int input_dim, Fn fn) : input_dim_(input_dim), fn_(std::move(fn)) {}

JetBlock FunctionApproximant::evaluate(LossTape&, const Eigen::MatrixXd& points, std::span<const int> active,
                                       int order) const {
  if (points.rows() != input_dim_) throw std::invalid_argument("FunctionApproximant: input dimension mismatch");
  const int k = order == 0 ? 0 : static_cast<int>(active.size());
  JetBlock b;
  b.value.reserve(points.cols());
  std::vector<Jet2<double>> in(input_dim_);
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    for (int i = 0; i < input_dim_; ++i) {
      in[i] = Jet2<double>::constant(points(i, p), k);
      for (int c = 0; c < k; ++c)
        if (active[c] == i) in[i].d1[c] = 1.0;
    }
    const Jet2<double> out = fn_(in);
    b.value.emplace_back(out.value);
    for (int c = 0; c < k; ++c) {
      b.d1[c].emplace_back(out.d1[c]);
      if (order == 2) b.d2[c].emplace_back(out.d2[c]);
    }
  }
  return b;
}

std::shared_ptr<Approximant> constant_function(int input_dim, double c) {
  return std::make_shared<FunctionApproximant>(input_dim, [c](std::span<const Jet2<double>> in) {
    return Jet2<double>::constant(c, in.empty() ? 0 : in[0].n);
  });
}

int ParamLayout::add(const MlpSpec& spec) {
  spec.validate();
  specs_.push_back(spec);
  offsets_.push_back(total_);
  total_ += spec.num_params();
  return static_cast<int>(specs_.size()) - 1;
}

ParamVector ParamLayout::init(std::uint64_t seed) const {
  ParamVector theta(total_, 0.0);
  for (int k = 0; k < count(); ++k) {
    const ParamVector p = init_params(specs_[k], seed + static_cast<std::uint64_t>(k));
    std::copy(p.begin(), p.end(), theta.begin() + static_cast<std::ptrdiff_t>(offsets_[k]));
  }
  return theta;
}

std::span<const double> ParamLayout::slice(int id, std::span<const double> theta) const {
  return theta.subspan(offset(id), spec(id).num_params());
}

std::shared_ptr<NetworkApproximant> ParamLayout::network(int id, std::span<const double> theta) const {
  return std::make_shared<NetworkApproximant>(spec(id), theta, offset(id));
}

}  // namespace rtpinn
