#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "catfill/error.hpp"

namespace catfill::model {

/// Which context sides feed the transition-pattern fusion.
enum class Direction { Bi, ForwardOnly, BackwardOnly };

/// How the per-user preference matrix is initialized.
enum class PreferenceInit { Counting, Random };

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Bi:
      return "bi";
    case Direction::ForwardOnly:
      return "forward_only";
    case Direction::BackwardOnly:
      return "backward_only";
  }
  return "?";
}

inline std::string_view to_string(PreferenceInit p) {
  return p == PreferenceInit::Counting ? "counting" : "random";
}

inline Direction parse_direction(std::string_view s) {
  if (s == "bi") return Direction::Bi;
  if (s == "forward_only" || s == "forward") return Direction::ForwardOnly;
  if (s == "backward_only" || s == "backward") return Direction::BackwardOnly;
  throw ContractError("unknown direction mode '" + std::string(s) + "'");
}

inline PreferenceInit parse_preference_init(std::string_view s) {
  if (s == "counting") return PreferenceInit::Counting;
  if (s == "random") return PreferenceInit::Random;
  throw ContractError("unknown preference init '" + std::string(s) + "'");
}

struct Hyperparams {
  int categories = 1;            // M
  int users = 1;                 // N
  std::size_t embed_dim = 128;   // d
  std::size_t hidden_dim = 512;  // h
  std::size_t window = 18;       // w
  Direction direction = Direction::Bi;
  PreferenceInit preference_init = PreferenceInit::Counting;

  bool uses_forward() const { return direction != Direction::BackwardOnly; }
  bool uses_backward() const { return direction != Direction::ForwardOnly; }

  void validate() const {
    if (categories < 1 || users < 1 || embed_dim < 1 || hidden_dim < 1 || window < 1)
      throw ContractError("hyperparams: M, N, d, h, w must all be at least 1");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

}  // namespace catfill::model
