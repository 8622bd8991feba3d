#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtpinn/jet.hpp"

namespace rtpinn {

enum class OutputActivation { kIdentity, kSoftplus, kScaledSigmoid };

std::string to_string(OutputActivation a);
OutputActivation parse_output_activation(const std::string& name);

// Fully connected network: tanh hidden layers, configurable output activation.
struct MlpSpec {
  std::vector<int> widths;  // input dim, hidden widths..., output dim
  OutputActivation output = OutputActivation::kIdentity;
  double c_a = 1.0;  // scale of the scaled-sigmoid output

  void validate() const;
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  std::size_t num_params() const;
};

// n_l hidden layers of n_r neurons.
MlpSpec make_mlp_spec(int input_dim, int hidden_layers, int width, int output_dim,
                      OutputActivation output, double c_a = 1.0);

// Flat parameter storage. Per layer: W (out x in, column-major) then b (out).
using ParamVector = std::vector<double>;

struct LayerSlice {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  int in = 0;
  int out = 0;
};
std::vector<LayerSlice> layer_layout(const MlpSpec& spec);

// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

template <class T>
T apply_output(const MlpSpec& spec, const T& a) {
  switch (spec.output) {
    case OutputActivation::kIdentity: return a;
    case OutputActivation::kSoftplus: return softplus(a);
    case OutputActivation::kScaledSigmoid: return spec.c_a * sigmoid(a);
  }
  return a;
}

template <class T>
Jet2<T> apply_output(const MlpSpec& spec, const Jet2<T>& a) {
  switch (spec.output) {
    case OutputActivation::kIdentity: return a;
    case OutputActivation::kSoftplus: return softplus(a);
    case OutputActivation::kScaledSigmoid: return scaled_sigmoid(a, spec.c_a);
  }
  return a;
}

// Dense forward pass over any scalar type (double or ad::Var).
template <class T, class P>
std::vector<T> forward(std::span<const P> params, const MlpSpec& spec, std::span<const T> input) {
  using std::tanh;
  if (static_cast<int>(input.size()) != spec.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (params.size() != spec.num_params()) throw std::invalid_argument("forward: parameter count mismatch");
  std::vector<T> h(input.begin(), input.end());
  const auto layout = layer_layout(spec);
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& ls = layout[l];
    std::vector<T> a(ls.out);
    for (int o = 0; o < ls.out; ++o) {
      T s = T(params[ls.bias_offset + o]);
      for (int i = 0; i < ls.in; ++i) s = s + T(params[ls.weight_offset + i * ls.out + o]) * h[i];
      a[o] = s;
    }
    const bool last = l + 1 == layout.size();
    for (auto& v : a) v = last ? apply_output(spec, v) : T(tanh(v));
    h = std::move(a);
  }
  return h;
}

// Forward pass carrying jets in the designated input coordinates.
// order 0: values only; 1: first partials; 2: first and diagonal second.
template <class T, class P>
std::vector<Jet2<T>> forward_jet(std::span<const P> params, const MlpSpec& spec, std::span<const T> input,
                                 std::span<const int> active, int order) {
  if (static_cast<int>(input.size()) != spec.input_dim())
    throw std::invalid_argument("forward_jet: input dimension mismatch");
  if (params.size() != spec.num_params()) throw std::invalid_argument("forward_jet: parameter count mismatch");
  if (order < 0 || order > 2) throw std::invalid_argument("forward_jet: order must be 0, 1 or 2");
  if (active.size() > static_cast<std::size_t>(kMaxJetCoords))
    throw std::invalid_argument("forward_jet: too many active coordinates");
  const int n = order == 0 ? 0 : static_cast<int>(active.size());
  std::vector<Jet2<T>> h(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    h[i] = Jet2<T>::constant(input[i], n);
    for (int k = 0; k < n; ++k)
      if (active[k] == static_cast<int>(i)) h[i].d1[k] = T(1.0);
  }
  const auto layout = layer_layout(spec);
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& ls = layout[l];
    std::vector<Jet2<T>> a(ls.out);
    for (int o = 0; o < ls.out; ++o) {
      Jet2<T> s = Jet2<T>::constant(T(params[ls.bias_offset + o]), n);
      for (int i = 0; i < ls.in; ++i) {
        const T w = T(params[ls.weight_offset + i * ls.out + o]);
        s.value = s.value + w * h[i].value;
        for (int k = 0; k < n; ++k) {
          s.d1[k] = s.d1[k] + w * h[i].d1[k];
          if (order == 2) s.d2[k] = s.d2[k] + w * h[i].d2[k];
        }
      }
      a[o] = s;
    }
    const bool last = l + 1 == layout.size();
    for (auto& v : a) v = last ? apply_output(spec, v) : tanh(v);
    h = std::move(a);
  }
  return h;
}

struct Checkpoint {
  MlpSpec spec;
  ParamVector params;
  std::uint64_t seed = 0;
};

// Text format, 17 significant digits per value (exact round trip).
void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rtpinn
