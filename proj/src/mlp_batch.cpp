#include "rtpinn/mlp_batch.hpp"

#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rtpinn {
namespace {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;

// Vectorizable tanh through exp (Eigen's double exp is SIMD, its tanh is not).
ArrayXXd tanh_array(const ArrayXXd& a) {
  const ArrayXXd e = (-2.0 * a.abs()).exp();
  return a.sign() * (1.0 - e) / (1.0 + e);
}

ArrayXXd sigmoid_array(const ArrayXXd& a) { return 1.0 / (1.0 + (-a).exp()); }

struct Derivs {
  ArrayXXd s1, s2, s3;
};

enum class Act { kTanh, kIdentity, kSoftplus, kScaledSigmoid };

Act layer_act(const MlpSpec& spec, bool last) {
  if (!last) return Act::kTanh;
  switch (spec.output) {
    case OutputActivation::kIdentity: return Act::kIdentity;
    case OutputActivation::kSoftplus: return Act::kSoftplus;
    case OutputActivation::kScaledSigmoid: return Act::kScaledSigmoid;
  }
  return Act::kIdentity;
}

ArrayXXd activate(Act act, const ArrayXXd& a, double c) {
  switch (act) {
    case Act::kTanh: return tanh_array(a);
    case Act::kIdentity: return a;
    case Act::kSoftplus: return a.max(0.0) + (-a.abs()).exp().log1p();
    case Act::kScaledSigmoid: return c * sigmoid_array(a);
  }
  return a;
}

// s1..s3 = first three derivatives of the activation at a (h = activation(a)).
Derivs derivs(Act act, const ArrayXXd& a, const ArrayXXd& h, double c, bool need_s3) {
  Derivs d;
  switch (act) {
    case Act::kTanh:
      d.s1 = 1.0 - h.square();
      d.s2 = -2.0 * h * d.s1;
      if (need_s3) d.s3 = -2.0 * d.s1.square() + 4.0 * h.square() * d.s1;
      break;
    case Act::kIdentity:
      d.s1 = ArrayXXd::Ones(a.rows(), a.cols());
      d.s2 = ArrayXXd::Zero(a.rows(), a.cols());
      if (need_s3) d.s3 = d.s2;
      break;
    case Act::kSoftplus: {
      const ArrayXXd p = sigmoid_array(a);
      d.s1 = p;
      d.s2 = p * (1.0 - p);
      if (need_s3) d.s3 = d.s2 * (1.0 - 2.0 * p);
      break;
    }
    case Act::kScaledSigmoid: {
      const ArrayXXd p = h / c;
      const ArrayXXd q = p * (1.0 - p);
      d.s1 = c * q;
      d.s2 = c * q * (1.0 - 2.0 * p);
      if (need_s3) d.s3 = c * q * (1.0 - 6.0 * p + 6.0 * p.square());
      break;
    }
  }
  return d;
}

}  // namespace

namespace {

constexpr Eigen::Index kChunk = 256;

// The per-chunk temporaries sit near glibc's default mmap threshold, so every
// allocation would otherwise fault in fresh pages. Keep them on the heap.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace

BatchJet::BatchJet(const MlpSpec& spec, std::span<const double> params, const MatrixXd& inputs,
                   std::span<const int> active, int order)
    : spec_(spec), params_(params.begin(), params.end()), n_(inputs.cols()), order_(order) {
  tune_allocator();
  spec_.validate();
  if (params.size() != spec_.num_params()) throw std::invalid_argument("BatchJet: parameter count mismatch");
  if (inputs.rows() != spec_.input_dim()) throw std::invalid_argument("BatchJet: input dimension mismatch");
  if (order < 0 || order > 2) throw std::invalid_argument("BatchJet: order must be 0, 1 or 2");
  if (active.size() > static_cast<std::size_t>(kMaxJetCoords))
    throw std::invalid_argument("BatchJet: too many active coordinates");
  k_ = order == 0 ? 0 : static_cast<int>(active.size());
  streams_ = 1 + order_ * k_;
  for (int k = 0; k < k_; ++k)
    if (active[k] < 0 || active[k] >= spec_.input_dim())
      throw std::invalid_argument("BatchJet: active coordinate out of range");

  const auto layout = layer_layout(spec_);
  out_.resize(spec_.output_dim(), n_ * streams_);
  for (Eigen::Index c0 = 0; c0 < n_; c0 += kChunk) {
    Chunk ch;
    ch.begin = c0;
    ch.size = std::min(kChunk, n_ - c0);
    const Eigen::Index n = ch.size;

    MatrixXd in = MatrixXd::Zero(inputs.rows(), n * streams_);
    in.leftCols(n) = inputs.middleCols(c0, n);
    for (int k = 0; k < k_; ++k) in.block(active[k], (1 + k) * n, 1, n).setOnes();
    ch.post.push_back(std::move(in));

    for (std::size_t l = 0; l < layout.size(); ++l) {
      const auto& ls = layout[l];
      const Eigen::Map<const MatrixXd> w(params_.data() + ls.weight_offset, ls.out, ls.in);
      const Eigen::Map<const Eigen::VectorXd> b(params_.data() + ls.bias_offset, ls.out);
      MatrixXd a(ls.out, n * streams_);
      a.noalias() = w * ch.post.back();
      a.leftCols(n).colwise() += b;

      const Act act = layer_act(spec_, l + 1 == layout.size());
      const ArrayXXd a0 = a.leftCols(n).array();
      const ArrayXXd h0 = activate(act, a0, spec_.c_a);
      MatrixXd h(ls.out, n * streams_);
      h.leftCols(n) = h0.matrix();
      if (k_ > 0) {
        const Derivs d = derivs(act, a0, h0, spec_.c_a, false);
        for (int k = 0; k < k_; ++k) {
          const auto a1 = a.middleCols((1 + k) * n, n).array();
          h.middleCols((1 + k) * n, n) = (d.s1 * a1).matrix();
          if (order_ == 2) {
            const auto a2 = a.middleCols((1 + k_ + k) * n, n).array();
            h.middleCols((1 + k_ + k) * n, n) = (d.s2 * a1.square() + d.s1 * a2).matrix();
          }
        }
      }
      ch.pre.push_back(std::move(a));
      ch.post.push_back(std::move(h));
    }
    for (int s = 0; s < streams_; ++s)
      out_.middleCols(s * n_ + c0, n) = ch.post.back().middleCols(s * n, n);
    chunks_.push_back(std::move(ch));
  }
}

Eigen::Ref<const MatrixXd> BatchJet::stream(int s) const {
  if (s < 0 || s >= streams_) throw std::out_of_range("BatchJet: stream not computed");
  return out_.middleCols(s * n_, n_);
}

void BatchJet::backward(const MatrixXd& adjoint, std::span<double> grad) const {
  if (adjoint.rows() != spec_.output_dim() || adjoint.cols() != n_ * streams_)
    throw std::invalid_argument("BatchJet::backward: adjoint shape mismatch");
  if (grad.size() != params_.size()) throw std::invalid_argument("BatchJet::backward: gradient size mismatch");

  const auto layout = layer_layout(spec_);
  for (const Chunk& ch : chunks_) {
    const Eigen::Index n = ch.size;
    MatrixXd hbar(spec_.output_dim(), n * streams_);
    for (int s = 0; s < streams_; ++s) hbar.middleCols(s * n, n) = adjoint.middleCols(s * n_ + ch.begin, n);

    for (std::size_t li = layout.size(); li-- > 0;) {
      const auto& ls = layout[li];
      const MatrixXd& a = ch.pre[li];
      const Act act = layer_act(spec_, li + 1 == layout.size());
      const ArrayXXd a0 = a.leftCols(n).array();
      const ArrayXXd h0 = ch.post[li + 1].leftCols(n).array();
      const Derivs d = derivs(act, a0, h0, spec_.c_a, order_ == 2);

      MatrixXd abar(ls.out, n * streams_);
      ArrayXXd abar0 = d.s1 * hbar.leftCols(n).array();
      for (int k = 0; k < k_; ++k) {
        const auto a1 = a.middleCols((1 + k) * n, n).array();
        const auto hb1 = hbar.middleCols((1 + k) * n, n).array();
        abar0 += d.s2 * a1 * hb1;
        if (order_ == 2) {
          const auto a2 = a.middleCols((1 + k_ + k) * n, n).array();
          const auto hb2 = hbar.middleCols((1 + k_ + k) * n, n).array();
          abar0 += (d.s3 * a1.square() + d.s2 * a2) * hb2;
          abar.middleCols((1 + k) * n, n) = (d.s1 * hb1 + 2.0 * d.s2 * a1 * hb2).matrix();
          abar.middleCols((1 + k_ + k) * n, n) = (d.s1 * hb2).matrix();
        } else {
          abar.middleCols((1 + k) * n, n) = (d.s1 * hb1).matrix();
        }
      }
      abar.leftCols(n) = abar0.matrix();

      Eigen::Map<MatrixXd> gw(grad.data() + ls.weight_offset, ls.out, ls.in);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + ls.bias_offset, ls.out);
      gw.noalias() += abar * ch.post[li].transpose();
      gb += abar.leftCols(n).rowwise().sum();
      if (li > 0) {
        const Eigen::Map<const MatrixXd> w(params_.data() + ls.weight_offset, ls.out, ls.in);
        hbar.resize(ls.in, n * streams_);
        hbar.noalias() = w.transpose() * abar;
      }
    }
  }
}

}  // namespace rtpinn
