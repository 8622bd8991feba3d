#include "rtpinn/mlp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace rtpinn {

std::string to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::kIdentity: return "identity";
    case OutputActivation::kSoftplus: return "softplus";
    case OutputActivation::kScaledSigmoid: return "scaled-sigmoid";
  }
  return "identity";
}

OutputActivation parse_output_activation(const std::string& name) {
  if (name == "identity") return OutputActivation::kIdentity;
  if (name == "softplus") return OutputActivation::kSoftplus;
  if (name == "scaled-sigmoid") return OutputActivation::kScaledSigmoid;
  throw std::invalid_argument("unknown output activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output widths");
  if (input_dim() < 1 || input_dim() > 3) throw std::invalid_argument("MlpSpec: input dim must be 1, 2 or 3");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("MlpSpec: widths must be positive");
  if (output == OutputActivation::kScaledSigmoid && !(c_a > 0.0))
    throw std::invalid_argument("MlpSpec: scaled-sigmoid requires C_a > 0");
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += static_cast<std::size_t>(widths[l] + 1) * widths[l + 1];
  return n;
}

MlpSpec make_mlp_spec(int input_dim, int hidden_layers, int width, int output_dim, OutputActivation output,
                      double c_a) {
  MlpSpec spec;
  spec.widths.push_back(input_dim);
  for (int l = 0; l < hidden_layers; ++l) spec.widths.push_back(width);
  spec.widths.push_back(output_dim);
  spec.output = output;
  spec.c_a = c_a;
  spec.validate();
  return spec;
}

std::vector<LayerSlice> layer_layout(const MlpSpec& spec) {
  std::vector<LayerSlice> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    LayerSlice s;
    s.in = spec.widths[l];
    s.out = spec.widths[l + 1];
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(s.in) * s.out;
    s.bias_offset = offset;
    offset += s.out;
    out.push_back(s);
  }
  return out;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p(spec.num_params(), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& ls : layer_layout(spec)) {
    const double bound = std::sqrt(6.0 / (ls.in + ls.out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int k = 0; k < ls.in * ls.out; ++k) p[ls.weight_offset + k] = dist(rng);
  }
  return p;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << "rtpinn-mlp 1\n";
  os << "widths";
  for (int w : ckpt.spec.widths) os << ' ' << w;
  os << "\nhidden tanh\n";
  os << "output " << to_string(ckpt.spec.output) << ' ' << std::setprecision(17) << ckpt.spec.c_a << '\n';
  os << "seed " << ckpt.seed << '\n';
  os << "count " << ckpt.params.size() << '\n';
  for (double v : ckpt.params) os << std::setprecision(17) << v << '\n';
}

Checkpoint read_checkpoint(std::istream& is) {
  auto expect = [&](const std::string& key) {
    std::string got;
    if (!(is >> got) || got != key) throw std::runtime_error("checkpoint: expected '" + key + "'");
  };
  Checkpoint c;
  expect("rtpinn-mlp");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  expect("widths");
  std::string line;
  std::getline(is, line);
  std::istringstream ws(line);
  for (int w; ws >> w;) c.spec.widths.push_back(w);
  expect("hidden");
  std::string hidden;
  is >> hidden;
  if (hidden != "tanh") throw std::runtime_error("checkpoint: unsupported hidden activation");
  expect("output");
  std::string act;
  is >> act >> c.spec.c_a;
  c.spec.output = parse_output_activation(act);
  expect("seed");
  is >> c.seed;
  expect("count");
  std::size_t count = 0;
  is >> count;
  c.spec.validate();
  if (count != c.spec.num_params()) throw std::runtime_error("checkpoint: parameter count mismatch");
  c.params.resize(count);
  for (auto& v : c.params)
    if (!(is >> v)) throw std::runtime_error("checkpoint: truncated parameter list");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace rtpinn
