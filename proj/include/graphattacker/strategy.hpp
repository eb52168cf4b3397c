#pragma once

#include <string>

#include "graphattacker/common.hpp"

namespace gat {

// What the generator is allowed to modify.
enum class AttackStrategy { structure, attribute, hybrid };

// Which part of the subgraph the modifications may touch, relative to the
// target instance.
enum class AttackScale { direct, indirect, unlimited };

inline const char* strategy_name(AttackStrategy s) {
  switch (s) {
    case AttackStrategy::structure: return "structure";
    case AttackStrategy::attribute: return "attribute";
    case AttackStrategy::hybrid: return "hybrid";
  }
  return "?";
}

inline AttackStrategy strategy_from_name(const std::string& s) {
  if (s == "structure") return AttackStrategy::structure;
  if (s == "attribute") return AttackStrategy::attribute;
  if (s == "hybrid") return AttackStrategy::hybrid;
  throw ContractError("unknown strategy: " + s);
}

inline const char* scale_name(AttackScale s) {
  switch (s) {
    case AttackScale::direct: return "direct";
    case AttackScale::indirect: return "indirect";
    case AttackScale::unlimited: return "unlimited";
  }
  return "?";
}

inline AttackScale scale_from_name(const std::string& s) {
  if (s == "direct") return AttackScale::direct;
  if (s == "indirect") return AttackScale::indirect;
  if (s == "unlimited") return AttackScale::unlimited;
  throw ContractError("unknown scale: " + s);
}

}  // namespace gat
