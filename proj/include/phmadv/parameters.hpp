#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "phmadv/tape.hpp"
#include "phmadv/tensor.hpp"

namespace phmadv {

struct Parameter {
  std::string name;
  Tensor value;
};

using ParameterList = std::vector<Parameter>;

/// Records every parameter on the tape, as leaves when trainable and as
/// constants otherwise. Order matches the list.
std::vector<ad::Var> bind_parameters(ad::Tape& tape, const ParameterList& params, bool trainable);

/// Uniform values in [-bound, bound].
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);

/// 64-bit FNV-1a over names, shapes, and the raw bytes of every value.
std::uint64_t parameter_hash(const ParameterList& params);

std::string hash_hex(std::uint64_t hash);

}  // namespace phmadv
