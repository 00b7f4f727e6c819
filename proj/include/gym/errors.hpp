#pragma once

#include <stdexcept>
#include <string>

namespace gym {

// Graph construction or mutation produced a directed cycle.
struct cycle_error : std::runtime_error {
  explicit cycle_error(const std::string& what) : std::runtime_error(what) {}
};

// A request exceeded a hard capacity limit (e.g. exact joint over too many nodes).
struct capacity_error : std::runtime_error {
  explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// Conditional probability query whose conditioning event has zero probability.
struct undefined_conditional_error : std::runtime_error {
  explicit undefined_conditional_error(const std::string& what) : std::runtime_error(what) {}
};

// Instance generation could not satisfy its constraints within the retry budget.
struct generation_error : std::runtime_error {
  explicit generation_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or out-of-range configuration / input file.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Input data (corpus, responses, vocabulary) failed to parse or validate.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gym
