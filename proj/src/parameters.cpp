#include "phmadv/parameters.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

namespace phmadv {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::vector<ad::Var> bind_parameters(ad::Tape& tape, const ParameterList& params, bool trainable) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const Parameter& p : params) {
    vars.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
  }
  return vars;
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

std::uint64_t parameter_hash(const ParameterList& params) {
  std::uint64_t h = kFnvOffset;
  for (const Parameter& p : params) {
    fnv_mix(h, p.name.data(), p.name.size());
    for (std::size_t d : p.value.shape()) {
      const std::uint64_t d64 = d;
      fnv_mix(h, &d64, sizeof d64);
    }
    fnv_mix(h, p.value.data().data(), p.value.size() * sizeof(double));
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

}  // namespace phmadv
