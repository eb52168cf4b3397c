#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gat {

// Deterministic RNG used everywhere a seed appears in a public interface.
using Rng = std::mt19937_64;

// Violated operation contract (shape mismatch, bad argument, ...).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unparseable token in an input file.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally broken dataset (id out of range, length mismatch, ...).
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other divergence during training.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure inside a verification oracle itself.
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistic that is mathematically undefined for the given input.
struct UndefinedStatisticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Derives a fresh stream seed from a base seed and a stream index so that
// parallel tasks stay independent yet reproducible.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 step over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace gat
